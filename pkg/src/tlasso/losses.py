"""Student-type loss, its reweighting and score functions, full gradient,
and the reweighting factors of the baseline losses.

The three per-residual quantities all share the denominator nu + r^2:

    loss      l(r)   = c * (nu+1) * log(1 + r^2/nu)
    weight    w(r)   = (nu+1) / (nu + r^2)
    score     psi(r) = r / (nu + r^2)

w(r) is the conditional mean of the latent precision in the normal
scale-mixture view of the t density and drives the weighted-lasso inner
problem; psi(r) = w(r) * r / (nu+1) is the ingredient of every gradient.
psi is bounded: |psi(r)| <= 1/(2*sqrt(nu)), with equality at r = sqrt(nu),
which is what makes the loss robust to arbitrarily large residuals.
"""

from dataclasses import dataclass

import numpy as np

from .core import InvalidConfigError, residuals

__all__ = [
    "LossEval", "student_loss_point", "estep_weight", "score", "score_bound",
    "loss_eval", "gradient", "baseline_weight",
]


def _check_nu(nu):
    if not nu > 0:
        raise InvalidConfigError("nu must be positive")


def _scalar_or_array(out):
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class LossEval:
    """Loss value, reweighting factor, and score at one residual."""

    value: float
    weight: float
    score: float


def student_loss_point(r, nu, c=1.0):
    """c * (nu+1) * log(1 + r^2/nu), elementwise on arrays.

    Even in r, zero at r = 0, strictly increasing in |r|, logarithmic in
    the tails.
    """
    _check_nu(nu)
    if not c > 0:
        raise InvalidConfigError("c must be positive")
    r = np.asarray(r, dtype=np.float64)
    return _scalar_or_array(c * (nu + 1.0) * np.log1p(r * r / nu))


def estep_weight(r, nu):
    """(nu+1) / (nu + r^2): the reweighting factor at residual r.

    Strictly decreasing in |r| with maximum (nu+1)/nu at r = 0 and limit 0
    as |r| grows; satisfies estep_weight(r) * (nu + r^2) = nu + 1 exactly.
    """
    _check_nu(nu)
    r = np.asarray(r, dtype=np.float64)
    return _scalar_or_array((nu + 1.0) / (nu + r * r))


def score(r, nu):
    """r / (nu + r^2): the negative derivative direction of the loss.

    Bounded by 1/(2*sqrt(nu)) in absolute value, attained at r = sqrt(nu).
    """
    _check_nu(nu)
    r = np.asarray(r, dtype=np.float64)
    return _scalar_or_array(r / (nu + r * r))


def score_bound(nu):
    """The sharp bound 1/(2*sqrt(nu)) on |score(r, nu)|."""
    _check_nu(nu)
    return 0.5 / np.sqrt(nu)


def loss_eval(r, nu, c=1.0):
    """Evaluate loss value, weight, and score at a single residual."""
    return LossEval(value=student_loss_point(r, nu, c),
                    weight=estep_weight(r, nu),
                    score=score(r, nu))


def gradient(data, coef, config):
    """Gradient of the unpenalized loss term at coef.

    For the student loss the j-th entry is
        -scale_c * (nu+1)/n * sum_i score(r_i) * x_ij.
    Squared and huber losses use their own influence functions (r and
    clip(r, -delta, delta)) over the same -(1/n) * x^T psi(r) form.

    Returns a length-p vector; the intercept coordinate is not included.
    """
    r = residuals(data, coef)
    n = data.n
    if config.loss_kind == "student":
        psi = r / (config.nu + r * r)
        return -(config.scale_c * (config.nu + 1.0) / n) * (data.x.T @ psi)
    if config.loss_kind == "squared":
        return -(data.x.T @ r) / n
    psi = np.clip(r, -config.huber_delta, config.huber_delta)
    return -(data.x.T @ psi) / n


def baseline_weight(r, kind, delta=1.345):
    """Reweighting factor of the baseline losses.

    squared -> 1 for every residual; huber -> min(1, delta/|r|), which is 1
    in the quadratic zone. The student weight lives in estep_weight.
    """
    if kind == "squared":
        r = np.asarray(r, dtype=np.float64)
        return _scalar_or_array(np.ones_like(r))
    if kind == "huber":
        if not delta > 0:
            raise InvalidConfigError("delta must be positive")
        r = np.asarray(r, dtype=np.float64)
        a = np.abs(r)
        w = np.ones_like(a)
        mask = a > delta
        if np.any(mask):
            w = np.where(mask, delta / np.where(mask, a, 1.0), w)
        return _scalar_or_array(w)
    raise InvalidConfigError("baseline_weight expects 'squared' or 'huber', got %r"
                             % (kind,))
