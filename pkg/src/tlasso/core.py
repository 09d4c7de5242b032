"""Shared regression types, the penalized objective, and error classes."""

from dataclasses import dataclass
import numpy as np

__all__ = [
    "DataError", "InvalidConfigError", "NumericalFailureError",
    "Dataset", "Coefficients", "FitConfig", "FitResult",
    "LOSS_KINDS", "residuals", "penalized_objective",
]

LOSS_KINDS = ("student", "squared", "huber")


class DataError(ValueError):
    """Input data violates a contract (shape, finiteness, parse failure)."""


class InvalidConfigError(ValueError):
    """A configuration value is outside its legal range."""


class NumericalFailureError(RuntimeError):
    """The solver produced a non-finite objective value.

    Attributes
    ----------
    iteration : int
        Outer iteration at which the failure was detected.
    """

    def __init__(self, message, iteration=-1):
        super().__init__(message)
        self.iteration = iteration


def _as_float_array(a, ndim, name):
    # always copy: the container must not alias caller-owned memory
    out = np.array(a, dtype=np.float64, order="C", copy=True)
    if out.ndim != ndim:
        raise DataError("%s must be %d-dimensional, got %d" % (name, ndim, out.ndim))
    if not np.isfinite(out).all():
        raise DataError("%s contains non-finite entries" % name)
    return out


@dataclass(frozen=True)
class Dataset:
    """A regression instance: design matrix x (n rows, p features), response y.

    Immutable once constructed; arrays are validated and stored as
    contiguous float64, so instances are safe to share across threads.
    """

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = _as_float_array(self.x, 2, "x")
        y = _as_float_array(self.y, 1, "y")
        if x.shape[0] != y.shape[0]:
            raise DataError("x has %d rows but y has %d entries"
                            % (x.shape[0], y.shape[0]))
        if x.shape[0] < 1 or x.shape[1] < 1:
            raise DataError("need at least one observation and one feature")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n(self):
        return self.x.shape[0]

    @property
    def p(self):
        return self.x.shape[1]


@dataclass(frozen=True)
class Coefficients:
    """A coefficient vector plus an optional fitted intercept (default 0)."""

    beta: np.ndarray
    intercept: float = 0.0

    def __post_init__(self):
        beta = _as_float_array(self.beta, 1, "beta")
        if not np.isfinite(self.intercept):
            raise DataError("intercept must be finite")
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "intercept", float(self.intercept))

    @property
    def support(self):
        """Indices of nonzero coefficients (the intercept is not counted)."""
        return np.flatnonzero(self.beta)


@dataclass(frozen=True)
class FitConfig:
    """Everything governing one fit.

    Arguments
    ---------
    nu : positive degrees-of-freedom parameter of the student loss.
    scale_c : positive multiplier on the student loss term.
    lam : nonnegative l1 penalty level.
    outer_max : cap on outer reweighting iterations.
    inner_sweeps : coordinate-descent sweeps per reweighting step.
    tol : sup-norm convergence threshold on the coefficient change.
    loss_kind : 'student', 'squared', or 'huber'.
    huber_delta : transition point of the huber loss (only used for huber).
    standardize : scale columns of x to unit variance before fitting
        (and center them when an intercept is fitted); coefficients are
        reported on the original scale.
    intercept : fit an unpenalized intercept.
    unnormalized_update : compatibility switch. The default update treats
        the penalty against the 1/(2n)-normalized loss. With this flag the
        coordinate update applies the threshold to the raw weighted
        correlation, which is algebraically the same fit at penalty lam/n;
        the objective trace and optimality checks account for that.
    """

    nu: float = 3.0
    scale_c: float = 1.0
    lam: float = 0.0
    outer_max: int = 500
    inner_sweeps: int = 1
    tol: float = 1e-7
    loss_kind: str = "student"
    huber_delta: float = 1.345
    standardize: bool = False
    intercept: bool = False
    unnormalized_update: bool = False

    def __post_init__(self):
        if not self.nu > 0:
            raise InvalidConfigError("nu must be positive")
        if not self.scale_c > 0:
            raise InvalidConfigError("scale_c must be positive")
        if not (np.isfinite(self.lam) and self.lam >= 0):
            raise InvalidConfigError("lam must be finite and nonnegative")
        if int(self.outer_max) < 1:
            raise InvalidConfigError("outer_max must be a positive integer")
        if int(self.inner_sweeps) < 1:
            raise InvalidConfigError("inner_sweeps must be a positive integer")
        if not self.tol > 0:
            raise InvalidConfigError("tol must be positive")
        if self.loss_kind not in LOSS_KINDS:
            raise InvalidConfigError("loss_kind must be one of %s" % (LOSS_KINDS,))
        if not self.huber_delta > 0:
            raise InvalidConfigError("huber_delta must be positive")


@dataclass(frozen=True)
class FitResult:
    """Output of one solver run.

    weights holds the final per-observation reweighting factor: for the
    student loss (nu+1)/(nu+r^2), always in (0, (nu+1)/nu]; 1 for squared;
    min(1, delta/|r|) for huber. objective_trace records the penalized
    objective once per outer iteration (entry 0 is the starting point) and
    is non-increasing for the student loss. kkt_violation is the largest
    stationarity gap of the penalized objective at the returned solution;
    lam_effective is the penalty the trace and the gap refer to (equal to
    the configured lam except under unnormalized_update, where it is lam/n).
    """

    beta: Coefficients
    weights: np.ndarray
    objective_trace: np.ndarray
    iterations: int
    converged: bool
    lam_effective: float
    kkt_violation: float


def residuals(data, coef):
    """Raw residuals y - x @ beta - intercept.

    Arguments
    ---------
    data : Dataset
    coef : Coefficients

    Returns
    -------
    length-n numpy vector.
    """
    if coef.beta.shape[0] != data.p:
        raise DataError("coefficient length %d does not match p=%d"
                        % (coef.beta.shape[0], data.p))
    return data.y - data.x @ coef.beta - coef.intercept


def _unpenalized_loss(r, config, n):
    """Loss part of the objective; see penalized_objective for the forms."""
    if config.loss_kind == "student":
        acc = np.sum(np.log1p(r * r / config.nu))
        return config.scale_c * (config.nu + 1.0) * acc / (2.0 * n)
    if config.loss_kind == "squared":
        return np.sum(r * r) / (2.0 * n)
    a = np.abs(r)
    d = config.huber_delta
    rho = np.where(a <= d, 0.5 * a * a, d * a - 0.5 * d * d)
    return np.sum(rho) / n


def penalized_objective(data, coef, config):
    """Penalized objective value at coef.

    For the student loss this is
        scale_c * (nu+1)/(2n) * sum_i log(1 + r_i^2/nu) + lam * ||beta||_1,
    for squared loss (1/2n) * sum r_i^2 + lam * ||beta||_1, and for huber
    (1/n) * sum rho_delta(r_i) + lam * ||beta||_1. The intercept is never
    penalized.
    """
    r = residuals(data, coef)
    loss = _unpenalized_loss(r, config, data.n)
    return float(loss + config.lam * np.sum(np.abs(coef.beta)))
