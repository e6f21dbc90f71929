"""Monte Carlo samplers for Bayesian computation and the experiments that exercise them."""
