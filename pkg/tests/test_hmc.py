import dataclasses

import numpy as np
import pytest

from mcforge import diagnostics, hmc, mcmc_kernels, targets
from mcforge.errors import ErrorCapability, ErrorDomain, ErrorParameter, ErrorShape
from mcforge.hmc import MassSpec, PhaseState


def flat(dim=2):
    return targets.TargetDensity(
        dim=dim,
        log_fn=lambda x: np.zeros(x.shape[:-1]),
        grad_fn=lambda x: np.zeros_like(x),
        name="flat",
    )


def test_hamiltonian_values():
    target = targets.std_normal()
    assert hmc.hamiltonian(PhaseState([1.0], [1.0]), target) == pytest.approx(1.0)
    assert hmc.hamiltonian(PhaseState([1.5], [0.0]), target) == pytest.approx(1.125)
    assert hmc.hamiltonian(PhaseState([0.3], [0.8]), target) == hmc.hamiltonian(
        PhaseState([0.3], [-0.8]), target
    )


def test_doubling_mass_halves_kinetic_energy():
    s = PhaseState([0.0], [2.0])
    unit = hmc.hamiltonian(s, targets.std_normal())
    heavy = hmc.hamiltonian(s, targets.std_normal(), MassSpec([2.0]))
    assert heavy == pytest.approx(unit / 2)


def test_hamiltonian_off_support():
    with pytest.raises(ErrorDomain):
        hmc.hamiltonian(PhaseState([-1.0], [0.0]), targets.half_normal())


@pytest.mark.parametrize("diag", [[0.0], [-1.0, 1.0], []])
def test_mass_must_be_positive(diag):
    with pytest.raises(ErrorParameter):
        MassSpec(diag)


def test_mass_dimension_is_checked():
    with pytest.raises(ErrorShape):
        hmc.hamiltonian(PhaseState([0.0, 0.0], [0.0, 0.0]), targets.std_normal(2), MassSpec([1.0]))


def test_leapfrog_on_flat_target_is_straight_line():
    end = hmc.leapfrog(PhaseState([1.0, 2.0], [0.5, -1.0]), 0.1, 10, flat())
    assert end.position == pytest.approx([1.5, 1.0])
    assert end.momentum == pytest.approx([0.5, -1.0])


def test_single_leapfrog_step():
    end = hmc.leapfrog(PhaseState([1.0], [0.0]), 0.1, 1, targets.std_normal())
    assert end.position == pytest.approx([0.995])
    assert end.momentum == pytest.approx([-0.09975])


# target, start position, step size, steps
REVERSIBILITY_CASES = [
    (targets.std_normal(3), [0.3, -1.0, 2.0], 0.1, 20),
    (targets.normal(1.0, 2.0), [0.0], 0.1, 20),
    (targets.student_t(5.0, 3.0), [2.0], 0.1, 20),
    (targets.beta_unnorm(2.3, 3.4), [0.4], 0.01, 10),
    (targets.half_normal(), [1.5], 0.01, 10),
    (targets.exponential(2.0), [1.0], 0.01, 10),
    (targets.trunc_normal_target(), [0.5], 0.01, 10),
    (targets.log_bump(), [5.0], 0.01, 10),
    (targets.correlated_normal(0.9), [0.5, -0.2], 0.05, 20),
    (targets.artificial18(), np.full(18, 0.5), 0.001, 20),
]


@pytest.mark.parametrize(
    "target,x0,eps,steps", REVERSIBILITY_CASES, ids=[c[0].name for c in REVERSIBILITY_CASES]
)
def test_leapfrog_is_reversible(target, x0, eps, steps, stream):
    for _ in range(5):
        v0 = stream.standard_normal(target.dim) * 0.5
        start = PhaseState(x0, v0)
        forward = hmc.leapfrog(start, eps, steps, target)
        assert not forward.divergent
        back = hmc.leapfrog(forward.flipped(), eps, steps, target)
        assert np.allclose(back.position, start.position, rtol=0, atol=1e-10)
        assert np.allclose(-back.momentum, start.momentum, rtol=0, atol=1e-10)


def test_energy_error_scales_with_square_of_step():
    target = targets.std_normal()
    start = PhaseState([1.0], [0.0])
    h0 = hmc.hamiltonian(start, target)
    sizes = np.array([0.2, 0.1, 0.05, 0.025])
    errors = []
    for eps in sizes:
        end = hmc.leapfrog(start, eps, int(round(1.0 / eps)), target)
        errors.append(abs(hmc.hamiltonian(end, target) - h0))
    slope = np.polyfit(np.log(sizes), np.log(errors), 1)[0]
    assert 1.8 <= slope <= 2.2


def _one_step_map(target, eps):
    def phi(z):
        d = target.dim
        end = hmc.leapfrog(PhaseState(z[:d], z[d:]), eps, 1, target)
        return np.concatenate([end.position, end.momentum])

    return phi


@pytest.mark.parametrize(
    "target,z",
    [
        (targets.std_normal(), [0.3, 0.7]),
        (targets.student_t(5.0), [1.0, -0.4]),
        (targets.correlated_normal(0.9), [0.2, -0.1, 0.5, 0.3]),
        (targets.std_normal(3), [0.1, 0.2, 0.3, -1.0, 0.0, 1.0]),
    ],
)
def test_leapfrog_preserves_volume(target, z):
    phi = _one_step_map(target, 0.2)
    z = np.asarray(z, dtype=np.float64)
    h = 1e-5
    jacobian = np.empty((z.size, z.size))
    for i in range(z.size):
        dz = np.zeros(z.size)
        dz[i] = h
        jacobian[:, i] = (phi(z + dz) - phi(z - dz)) / (2 * h)
    assert np.linalg.det(jacobian) == pytest.approx(1.0, abs=1e-6)


def test_leapfrog_needs_gradient():
    target = dataclasses.replace(targets.std_normal(), grad_fn=None)
    with pytest.raises(ErrorCapability):
        hmc.leapfrog(PhaseState([0.0], [1.0]), 0.1, 1, target)
    with pytest.raises(ErrorCapability):
        hmc.HamiltonianKernel(target, 0.1, 10)


@pytest.mark.parametrize("eps,steps", [(0.0, 10), (-0.1, 10), (0.1, 0)])
def test_leapfrog_settings(eps, steps):
    with pytest.raises(ErrorParameter):
        hmc.leapfrog(PhaseState([0.0], [1.0]), eps, steps, targets.std_normal())


def test_leaving_the_support_is_divergent():
    end = hmc.leapfrog(PhaseState([0.5], [-1.0]), 0.5, 10, targets.half_normal())
    assert end.divergent


def test_small_steps_are_almost_always_accepted(stream):
    kernel = hmc.HamiltonianKernel(targets.std_normal(), 0.001, 1)
    trace = mcmc_kernels.run_chain(kernel, [0.0], 200, stream)
    assert trace.acceptance_rate > 0.99


def test_hmc_normal_moments(stream):
    kernel = hmc.HamiltonianKernel(targets.std_normal(), 0.1, 10)
    x = mcmc_kernels.run_chain(kernel, [0.0], 10000, stream).coordinate()[1:]
    ess = diagnostics.ess_chain(x)
    assert abs(np.mean(x)) < 4 * np.sqrt(1.0 / ess)
    assert abs(np.var(x) - 1.0) < 4 * np.sqrt(2.0 / ess)


def test_hmc_on_artificial_target(stream):
    kernel = hmc.HamiltonianKernel(targets.artificial18(), 0.01, 20)
    trace = mcmc_kernels.run_chain(kernel, np.full(18, 0.5), 1000, stream)
    assert not np.any(trace.divergent)
    assert 0.2 < trace.acceptance_rate <= 1.0


def test_divergent_step_is_rejected(stream):
    x = np.full(18, 0.5)
    result = hmc.hmc_step(x, 1.0, 10, targets.artificial18(), None, stream)
    assert result.divergent
    assert not result.accepted
    assert np.array_equal(result.position, x)


def test_one_uniform_per_step_even_when_divergent(make_stream):
    target = targets.half_normal()
    diverging = make_stream(1)
    hmc.hmc_step([0.01], 5.0, 50, target, None, diverging)
    reference = make_stream(1)
    reference.standard_normal((1,))
    reference.uniform()
    assert diverging.uniform() == reference.uniform()
