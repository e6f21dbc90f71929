"""Hamiltonian Monte Carlo with a diagonal mass matrix.

The integrator is the symmetric leapfrog: half momentum step, full position
step, half momentum step. A trajectory that leaves the support, or whose
energy error exceeds DIVERGENCE_THRESHOLD, is divergent and is rejected.
"""
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np
import structlog

from .errors import ErrorCapability, ErrorDomain, ErrorParameter, ErrorShape
from .mcmc_kernels import ChainState, Kernel, Transition, acceptance_probability
from .rng import Stream
from .targets import TargetDensity

logger: structlog.BoundLogger = structlog.getLogger()

DIVERGENCE_THRESHOLD = 1000.0


@dataclass(frozen=True)
class MassSpec:
    diag: np.ndarray

    def __post_init__(self):
        diag = np.asarray(self.diag, dtype=np.float64).reshape(-1)
        if diag.size == 0 or np.any(~(diag > 0)):
            raise ErrorParameter("mass entries must be positive, got {}".format(self.diag))
        object.__setattr__(self, "diag", diag)

    @classmethod
    def identity(cls, dim: int) -> "MassSpec":
        return cls(np.ones(dim))

    def check(self, dim: int) -> "MassSpec":
        if self.diag.size != dim:
            raise ErrorShape("mass has {} entries for dimension {}".format(self.diag.size, dim))
        return self


def _mass_for(target: TargetDensity, mass: Optional[MassSpec]) -> MassSpec:
    if mass is None:
        return MassSpec.identity(target.dim)
    return mass.check(target.dim)


@dataclass(frozen=True)
class PhaseState:
    position: np.ndarray
    momentum: np.ndarray
    divergent: bool = field(default=False, compare=False)

    def __post_init__(self):
        position = np.asarray(self.position, dtype=np.float64).reshape(-1)
        momentum = np.asarray(self.momentum, dtype=np.float64).reshape(-1)
        if position.shape != momentum.shape:
            raise ErrorShape(
                "position {} and momentum {} differ in shape".format(
                    position.shape, momentum.shape
                )
            )
        object.__setattr__(self, "position", position)
        object.__setattr__(self, "momentum", momentum)

    def flipped(self) -> "PhaseState":
        return PhaseState(self.position, -self.momentum, self.divergent)


def kinetic_energy(v: np.ndarray, mass: MassSpec) -> float:
    return float(0.5 * np.sum(v * v / mass.diag))


def hamiltonian(
    s: PhaseState, target: TargetDensity, mass: Optional[MassSpec] = None
) -> float:
    """H(x, v) = -log p~(x) + v' M^-1 v / 2"""
    mass = _mass_for(target, mass)
    log_p = target.log_unnorm(s.position)
    if not np.isfinite(log_p):
        raise ErrorDomain("hamiltonian evaluated off the support at {}".format(s.position))
    return -log_p + kinetic_energy(s.momentum, mass)


def leapfrog(
    s: PhaseState, eps: float, L: int, target: TargetDensity, mass: Optional[MassSpec] = None
) -> PhaseState:
    """L symmetric leapfrog steps of size eps; stops early with divergent=True off the support"""
    if not eps > 0:
        raise ErrorParameter("step size must be positive, got {}".format(eps))
    if int(L) < 1:
        raise ErrorParameter("number of leapfrog steps must be at least 1, got {}".format(L))
    if not target.has_gradient:
        raise ErrorCapability("leapfrog needs the gradient of {}".format(target.name))
    mass = _mass_for(target, mass)
    inverse_mass = 1.0 / mass.diag

    x = np.array(s.position, dtype=np.float64)
    v = np.array(s.momentum, dtype=np.float64)
    grad = target.grad_log_unnorm(x)
    for _ in range(int(L)):
        v = v + 0.5 * eps * grad
        x = x + eps * inverse_mass * v
        if not np.isfinite(target.log_unnorm(x)):
            return PhaseState(x, v, divergent=True)
        grad = target.grad_log_unnorm(x)
        v = v + 0.5 * eps * grad
    return PhaseState(x, v)


class HmcStep(NamedTuple):
    position: np.ndarray
    accepted: bool
    divergent: bool
    energy_error: float


def hmc_step(
    x,
    eps: float,
    L: int,
    target: TargetDensity,
    mass: Optional[MassSpec],
    stream: Stream,
) -> HmcStep:
    """Refresh v ~ N(0, M), integrate, then accept with probability min{1, exp(-dH)}.

    One uniform is drawn per step whether or not the trajectory diverged.
    """
    mass = _mass_for(target, mass)
    position = target.as_point(x)
    momentum = np.sqrt(mass.diag) * np.asarray(stream.standard_normal(position.shape))
    start = PhaseState(position, momentum)
    h_start = hamiltonian(start, target, mass)

    end = leapfrog(start, eps, L, target, mass)
    energy_error = np.inf
    if not end.divergent:
        energy_error = hamiltonian(end.flipped(), target, mass) - h_start
    divergent = bool(end.divergent or not abs(energy_error) <= DIVERGENCE_THRESHOLD)

    u = stream.uniform()
    if not divergent and u < acceptance_probability(-energy_error):
        return HmcStep(end.position, True, False, float(energy_error))
    return HmcStep(position, False, divergent, float(energy_error))


class HamiltonianKernel(Kernel):
    def __init__(
        self, target: TargetDensity, eps: float, steps: int, mass: Optional[MassSpec] = None
    ):
        if not target.has_gradient:
            raise ErrorCapability("HMC needs the gradient of {}".format(target.name))
        if not eps > 0 or int(steps) < 1:
            raise ErrorParameter("invalid HMC settings eps={} steps={}".format(eps, steps))
        self.target = target
        self.eps = float(eps)
        self.steps = int(steps)
        self.mass = _mass_for(target, mass)
        self.label = "hmc(eps={:g},L={})".format(self.eps, self.steps)

    def step(self, state: ChainState, stream: Stream) -> Transition:
        result = hmc_step(state.position, self.eps, self.steps, self.target, self.mass, stream)
        if not result.accepted:
            return Transition(state, False, result.divergent)
        return Transition(ChainState.at(self.target, result.position), True, False)
