"""Target densities known up to a normalising constant, and the catalog of examples.

A target only ever needs the product prior x likelihood: the marginal
likelihood is never represented. Outside the support the log-density is -inf
and that is the only encoding of the support.
"""
import dataclasses
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import structlog
from scipy import optimize

from .errors import ErrorCapability, ErrorDomain, ErrorLookup, ErrorParameter, ErrorShape

logger: structlog.BoundLogger = structlog.getLogger()

ArrayFn = Callable[[np.ndarray], np.ndarray]
Interval = Tuple[float, float]
LevelSetFn = Callable[[float], List[Interval]]

ARTIFICIAL18_DEFAULT_OBSERVATION = 0.5


def _quiet():
    return np.errstate(divide="ignore", invalid="ignore", over="ignore")


@dataclass(frozen=True)
class TargetDensity:
    """An unnormalised log-density p~ with optional gradient.

    log_fn and grad_fn take arrays whose last axis has length dim and are
    vectorised over any leading axes, unless vectorized is False. level_set,
    when present, maps a log-level to the intervals where log p~ >= level
    (one-dimensional targets only) and lets the slice sampler skip bracketing.
    """

    dim: int
    log_fn: ArrayFn
    grad_fn: Optional[ArrayFn] = None
    support_label: str = "R^d"
    name: str = "custom"
    level_set: Optional[LevelSetFn] = None
    vectorized: bool = True

    def __post_init__(self):
        if int(self.dim) < 1:
            raise ErrorParameter("target dimension must be positive, got {}".format(self.dim))

    @property
    def has_gradient(self) -> bool:
        return self.grad_fn is not None

    def as_point(self, x) -> np.ndarray:
        point = np.asarray(x, dtype=np.float64)
        if point.ndim == 0 and self.dim == 1:
            point = point.reshape(1)
        if point.shape != (self.dim,):
            raise ErrorShape(
                "{} expects a point of shape ({},), got {}".format(self.name, self.dim, point.shape)
            )
        return point

    def log_unnorm(self, x) -> float:
        """log p~(x); -inf off the support"""
        value = float(self.log_fn(self.as_point(x)))
        if np.isnan(value):
            return -np.inf
        return value

    def log_unnorm_batch(self, xs) -> np.ndarray:
        """log p~ evaluated on the rows of an (n, dim) array"""
        points = np.asarray(xs, dtype=np.float64)
        if self.dim == 1 and points.ndim == 1:
            points = points[:, None]
        if points.ndim != 2 or points.shape[1] != self.dim:
            raise ErrorShape(
                "{} expects points of shape (n, {}), got {}".format(
                    self.name, self.dim, points.shape
                )
            )
        if self.vectorized:
            values = np.asarray(self.log_fn(points), dtype=np.float64)
        else:
            values = np.array([float(self.log_fn(p)) for p in points], dtype=np.float64)
        return np.where(np.isnan(values), -np.inf, values)

    def in_support(self, x) -> bool:
        return bool(np.isfinite(self.log_unnorm(x)))

    def grad_log_unnorm(self, x) -> np.ndarray:
        """score function at an interior point"""
        if self.grad_fn is None:
            raise ErrorCapability("target {} has no gradient".format(self.name))
        point = self.as_point(x)
        if not np.isfinite(self.log_unnorm(point)):
            raise ErrorDomain("gradient requested off the support of {} at {}".format(self.name, x))
        return np.asarray(self.grad_fn(point), dtype=np.float64).reshape(self.dim)

    def shifted(self, c: float) -> "TargetDensity":
        """the same target with a constant added to its log-density"""
        log_fn = self.log_fn
        level_set = self.level_set
        shifted_level_set = None
        if level_set is not None:

            def shifted_level_set(level: float) -> List[Interval]:
                return level_set(level - c)

        return dataclasses.replace(
            self,
            log_fn=lambda x: log_fn(x) + c,
            level_set=shifted_level_set,
            name="{}{:+g}".format(self.name, c),
        )


@dataclass(frozen=True)
class PosteriorSpec:
    """prior and likelihood on a common parameter space; data is held fixed"""

    log_prior: Callable
    log_likelihood: Callable
    data: np.ndarray
    dim: int = 1
    grad_log_prior: Optional[Callable] = None
    grad_log_likelihood: Optional[Callable] = None
    vectorized: bool = True
    name: str = "posterior"


def make_posterior(spec: PosteriorSpec) -> TargetDensity:
    """the unnormalised posterior log pi(theta) + log f(x_obs | theta)"""
    data = np.asarray(spec.data, dtype=np.float64)

    def log_fn(theta):
        log_prior = np.asarray(spec.log_prior(theta), dtype=np.float64)
        with _quiet():
            log_likelihood = np.asarray(spec.log_likelihood(theta, data), dtype=np.float64)
            total = log_prior + log_likelihood
        return np.where(np.isneginf(log_prior), -np.inf, total)

    grad_fn = None
    if spec.grad_log_prior is not None and spec.grad_log_likelihood is not None:

        def grad_fn(theta):
            return np.asarray(spec.grad_log_prior(theta)) + np.asarray(
                spec.grad_log_likelihood(theta, data)
            )

    logger.bind(name=spec.name, dim=spec.dim, n_data=data.size).debug("Composed posterior target")
    return TargetDensity(
        dim=spec.dim,
        log_fn=log_fn,
        grad_fn=grad_fn,
        support_label="prior support",
        name=spec.name,
        vectorized=spec.vectorized,
    )


def _restrict(value: np.ndarray, inside: np.ndarray) -> np.ndarray:
    return np.where(inside, value, -np.inf)


def _interval(lo: float, hi: float) -> List[Interval]:
    return [(float(lo), float(hi))]


def _half_width(level: float) -> float:
    """solve -u**2/2 >= level for |u|"""
    return float(np.sqrt(max(-2.0 * level, 0.0)))


def beta_unnorm(a: float, b: float) -> TargetDensity:
    """p~(x) = x**a (1 - x)**b on (0, 1), i.e. Be(a + 1, b + 1) up to a constant"""
    a, b = float(a), float(b)
    if not (a > -1 and b > -1):
        raise ErrorParameter("beta_unnorm exponents must exceed -1, got ({}, {})".format(a, b))

    def log_fn(x):
        t = x[..., 0]
        with _quiet():
            value = a * np.log(t) + b * np.log1p(-t)
        return _restrict(value, (t > 0) & (t < 1))

    def grad_fn(x):
        t = x[..., 0]
        return (a / t - b / (1.0 - t))[..., None]

    level_set = None
    if a >= 0 and b >= 0:
        tiny = float(np.nextafter(0.0, 1.0))
        almost_one = float(np.nextafter(1.0, 0.0))
        # a zero exponent puts the mode on the boundary, where log(0) is undefined
        mode = float(np.clip(a / (a + b) if a + b > 0 else 0.5, tiny, almost_one))

        def excess(t: float, level: float) -> float:
            return a * np.log(t) + b * np.log1p(-t) - level

        def level_set(level: float) -> List[Interval]:
            if a == 0 and b == 0:
                return _interval(0.0, 1.0)
            lo, hi = 0.0, 1.0
            if a > 0 and excess(tiny, level) < 0:
                lo = optimize.brentq(excess, tiny, mode, args=(level,))
            if b > 0 and excess(almost_one, level) < 0:
                hi = optimize.brentq(excess, mode, almost_one, args=(level,))
            return _interval(lo, hi)

    return TargetDensity(
        dim=1,
        log_fn=log_fn,
        grad_fn=grad_fn,
        support_label="(0, 1)",
        name="beta_unnorm({:g},{:g})".format(a, b),
        level_set=level_set,
    )


def std_normal(dim: int = 1) -> TargetDensity:
    """exp(-|x|**2 / 2)"""
    dim = int(dim)

    def log_fn(x):
        return -0.5 * np.sum(x * x, axis=-1)

    def grad_fn(x):
        return -x

    level_set = None
    if dim == 1:

        def level_set(level: float) -> List[Interval]:
            w = _half_width(level)
            return _interval(-w, w)

    return TargetDensity(
        dim=dim,
        log_fn=log_fn,
        grad_fn=grad_fn,
        name="std_normal" if dim == 1 else "std_normal[{}]".format(dim),
        level_set=level_set,
    )


def normal(mean: float, sd: float) -> TargetDensity:
    mean, sd = float(mean), float(sd)
    if not sd > 0:
        raise ErrorParameter("normal sd must be positive, got {}".format(sd))

    def log_fn(x):
        z = (x[..., 0] - mean) / sd
        return -0.5 * z * z

    def grad_fn(x):
        return -(x - mean) / (sd * sd)

    def level_set(level: float) -> List[Interval]:
        w = sd * _half_width(level)
        return _interval(mean - w, mean + w)

    return TargetDensity(
        dim=1,
        log_fn=log_fn,
        grad_fn=grad_fn,
        name="normal({:g},{:g})".format(mean, sd),
        level_set=level_set,
    )


def exponential(rate: float) -> TargetDensity:
    """rate parameterisation: p~(x) = exp(-rate x) on x >= 0"""
    rate = float(rate)
    if not rate > 0:
        raise ErrorParameter("exponential rate must be positive, got {}".format(rate))

    def log_fn(x):
        t = x[..., 0]
        return _restrict(-rate * t, t >= 0)

    def grad_fn(x):
        return np.full_like(x, -rate)

    def level_set(level: float) -> List[Interval]:
        return _interval(0.0, max(-level, 0.0) / rate)

    return TargetDensity(
        dim=1,
        log_fn=log_fn,
        grad_fn=grad_fn,
        support_label="[0, inf)",
        name="exponential({:g})".format(rate),
        level_set=level_set,
    )


def student_t(nu: float, shift: float = 0.0) -> TargetDensity:
    nu, shift = float(nu), float(shift)
    if not nu > 0:
        raise ErrorParameter("student_t degrees of freedom must be positive, got {}".format(nu))

    def log_fn(x):
        u = x[..., 0] - shift
        return -0.5 * (nu + 1.0) * np.log1p(u * u / nu)

    def grad_fn(x):
        u = x - shift
        return -(nu + 1.0) * u / (nu + u * u)

    def level_set(level: float) -> List[Interval]:
        w = float(np.sqrt(nu * np.expm1(max(-2.0 * level / (nu + 1.0), 0.0))))
        return _interval(shift - w, shift + w)

    return TargetDensity(
        dim=1,
        log_fn=log_fn,
        grad_fn=grad_fn,
        name="student_t({:g},{:g})".format(nu, shift),
        level_set=level_set,
    )


def half_normal() -> TargetDensity:
    def log_fn(x):
        t = x[..., 0]
        return _restrict(-0.5 * t * t, t >= 0)

    def grad_fn(x):
        return -x

    def level_set(level: float) -> List[Interval]:
        return _interval(0.0, _half_width(level))

    return TargetDensity(
        dim=1,
        log_fn=log_fn,
        grad_fn=grad_fn,
        support_label="[0, inf)",
        name="half_normal",
        level_set=level_set,
    )


def trunc_normal_target(
    lo: float = 0.0, hi: float = 1.0, mean: float = 4.0, sd: float = 1.0
) -> TargetDensity:
    """normal density restricted to (lo, hi); the defaults put N(4, 1) on (0, 1)"""
    lo, hi, mean, sd = float(lo), float(hi), float(mean), float(sd)
    if not (lo < hi and sd > 0):
        raise ErrorParameter("invalid truncated normal ({}, {}, {}, {})".format(lo, hi, mean, sd))

    def log_fn(x):
        t = x[..., 0]
        z = (t - mean) / sd
        return _restrict(-0.5 * z * z, (t > lo) & (t < hi))

    def grad_fn(x):
        return -(x - mean) / (sd * sd)

    def level_set(level: float) -> List[Interval]:
        w = sd * _half_width(level)
        return _interval(max(lo, mean - w), min(hi, mean + w))

    return TargetDensity(
        dim=1,
        log_fn=log_fn,
        grad_fn=grad_fn,
        support_label="({:g}, {:g})".format(lo, hi),
        name="trunc_normal_target",
        level_set=level_set,
    )


def log_bump() -> TargetDensity:
    """pi(mu) ~ exp{-(log mu - 1)**2} exp{-(log mu - 3)**4 / 4} on mu > 0"""

    def log_fn(x):
        t = x[..., 0]
        with _quiet():
            lm = np.log(t)
            value = -((lm - 1.0) ** 2) - (lm - 3.0) ** 4 / 4.0
        return _restrict(value, t > 0)

    def grad_fn(x):
        lm = np.log(x)
        return (-2.0 * (lm - 1.0) - (lm - 3.0) ** 3) / x

    return TargetDensity(
        dim=1, log_fn=log_fn, grad_fn=grad_fn, support_label="(0, inf)", name="log_bump"
    )


def artificial18(x_obs: Optional[Sequence[float]] = None) -> TargetDensity:
    """exp{-|t - x|**2 - |t + x|**4 - |t - 2x|**6}; x defaults to 0.5 in all 18 coordinates"""
    if x_obs is None:
        x_obs = np.full(18, ARTIFICIAL18_DEFAULT_OBSERVATION)
    x_obs = np.asarray(x_obs, dtype=np.float64).reshape(-1)

    def log_fn(theta):
        n1 = np.sum((theta - x_obs) ** 2, axis=-1)
        n2 = np.sum((theta + x_obs) ** 2, axis=-1)
        n3 = np.sum((theta - 2.0 * x_obs) ** 2, axis=-1)
        return -n1 - n2**2 - n3**3

    def grad_fn(theta):
        d1 = theta - x_obs
        d2 = theta + x_obs
        d3 = theta - 2.0 * x_obs
        n2 = np.sum(d2 * d2, axis=-1, keepdims=True)
        n3 = np.sum(d3 * d3, axis=-1, keepdims=True)
        return -2.0 * d1 - 4.0 * n2 * d2 - 6.0 * n3 * n3 * d3

    return TargetDensity(
        dim=x_obs.size,
        log_fn=log_fn,
        grad_fn=grad_fn,
        name="artificial18" if x_obs.size == 18 else "artificial[{}]".format(x_obs.size),
    )


def correlated_normal(rho: float) -> TargetDensity:
    """bivariate standard normal with correlation rho"""
    rho = float(rho)
    if not -1 < rho < 1:
        raise ErrorParameter("correlation must lie in (-1, 1), got {}".format(rho))
    det = 1.0 - rho * rho

    def log_fn(x):
        x1, x2 = x[..., 0], x[..., 1]
        return -(x1 * x1 - 2.0 * rho * x1 * x2 + x2 * x2) / (2.0 * det)

    def grad_fn(x):
        x1, x2 = x[..., 0], x[..., 1]
        return np.stack([-(x1 - rho * x2) / det, -(x2 - rho * x1) / det], axis=-1)

    return TargetDensity(
        dim=2, log_fn=log_fn, grad_fn=grad_fn, name="correlated_normal({:g})".format(rho)
    )


def _artificial18_from_params(*params: float) -> TargetDensity:
    if len(params) == 0:
        return artificial18()
    if len(params) == 1:
        return artificial18(np.full(18, float(params[0])))
    return artificial18(params)


# name -> (constructor, one line description)
CATALOG: Dict[str, Tuple[Callable[..., TargetDensity], str]] = {
    "beta_unnorm": (beta_unnorm, "x^a (1-x)^b on (0,1); params a,b"),
    "std_normal": (std_normal, "standard normal; optional param dim"),
    "normal": (normal, "normal; params mean,sd"),
    "exponential": (exponential, "exponential by rate; param rate"),
    "student_t": (student_t, "Student t; params nu,shift"),
    "half_normal": (half_normal, "standard normal folded on [0,inf)"),
    "trunc_normal_target": (trunc_normal_target, "N(4,1) on (0,1); params lo,hi,mean,sd"),
    "log_bump": (log_bump, "exp{-(log m-1)^2 - (log m-3)^4/4} on m>0"),
    "artificial18": (_artificial18_from_params, "18-dim artificial target; params x (fill or 18)"),
    "correlated_normal": (correlated_normal, "bivariate normal; param rho"),
}


def catalog_names() -> List[str]:
    return list(CATALOG.keys())


def builtin(name: str, params: Sequence[float] = ()) -> TargetDensity:
    """construct a catalog target by name"""
    if name not in CATALOG:
        raise ErrorLookup(
            "unknown target {!r}; known targets: {}".format(name, ", ".join(catalog_names()))
        )
    constructor, _ = CATALOG[name]
    try:
        target = constructor(*params)
    except TypeError as e:
        raise ErrorParameter("bad parameters {} for target {}: {}".format(list(params), name, e))
    logger.bind(target=target.name, dim=target.dim).debug("Built catalog target")
    return target
