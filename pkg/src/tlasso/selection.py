"""Penalty grids, warm-started regularization paths, and information-criterion
selection.

Two flavors of BIC/AIC are computed for every path. The rss basis is the
classical n*log(RSS/n) + penalty*df on raw squared residuals. The loss
basis replaces the Gaussian term with the fitted robust loss itself,
sum_i l(r_i) + penalty*df, which equals BIC/AIC up to an additive constant
when the loss is twice a negative log-density (the student loss at
scale_c=1 is). The loss basis is the selection default: on paths with more
features than observations the rss term can be driven to -inf by
interpolating fits, which makes the rss criteria select the densest model
regardless of df, while the loss basis stays informative.
"""

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

from . import _kernels
from .core import (DataError, InvalidConfigError, NumericalFailureError,
                   _unpenalized_loss, residuals)
from .solver import _KIND_CODE, _standardization, em_fit

__all__ = [
    "PathError", "PathResult", "lambda_max", "lambda_grid",
    "bic_score", "aic_score", "bic_loss_score", "aic_loss_score",
    "select_index", "fit_path",
]

CRITERIA = ("bic", "aic")
IC_BASES = ("loss", "rss")


class PathError(RuntimeError):
    """Every penalty level on a path failed."""


@dataclass(frozen=True)
class PathResult:
    """A regularization path with per-level scores and the selected fit.

    lambdas holds the evaluated (possibly early-stopped) prefix of the
    grid, strictly decreasing. fits has one FitResult per level, or None
    where the solver failed (failed marks those levels; they are excluded
    from selection). bic/aic are the rss-basis scores, bic_loss/aic_loss
    the loss-basis ones. df_overflow flags any level with more nonzeros
    than min(n, p).
    """

    lambdas: np.ndarray
    fits: list
    rss: np.ndarray
    df: np.ndarray
    bic: np.ndarray
    aic: np.ndarray
    bic_loss: np.ndarray
    aic_loss: np.ndarray
    selected_index: int
    criterion: str
    ic_basis: str
    failed: np.ndarray
    df_overflow: bool
    rss_null: float

    @property
    def selected(self):
        return self.fits[self.selected_index]

    @property
    def selected_lambda(self):
        return float(self.lambdas[self.selected_index])

    def scores(self, criterion=None, ic_basis=None):
        """Score vector for a criterion/basis pair (defaults: the configured ones)."""
        criterion = self.criterion if criterion is None else criterion
        ic_basis = self.ic_basis if ic_basis is None else ic_basis
        table = {("bic", "rss"): self.bic, ("aic", "rss"): self.aic,
                 ("bic", "loss"): self.bic_loss, ("aic", "loss"): self.aic_loss}
        try:
            return table[(criterion, ic_basis)]
        except KeyError:
            raise InvalidConfigError("criterion must be in %s and ic_basis in %s"
                                     % (CRITERIA, IC_BASES)) from None


def _null_model_intercept(data, config):
    """Intercept of the coefficient-free fit (weighted location estimate)."""
    xt0 = np.ascontiguousarray(np.empty((0, data.n)))
    kind = _KIND_CODE[config.loss_kind]
    _, b0, _, _, _, _, _, fail_iter, _ = _kernels._em_fit(
        xt0, data.y, config.nu, config.scale_c, 0.0, kind, config.huber_delta,
        int(config.outer_max), 1, config.tol, np.zeros(0), False, True, 0.0)
    if fail_iter >= 0:
        raise NumericalFailureError("null-model fit failed", iteration=int(fail_iter))
    return float(b0)


def _null_residuals(data, config):
    if config.intercept:
        return data.y - _null_model_intercept(data, config)
    return data.y.copy()


def lambda_max(data, config):
    """Smallest penalty at which the zero vector is a fixed point.

    max_j |sum_i w0_i x_ij r0_i| / n, where r0 is the residual of the
    null model (y itself without an intercept) and w0 the reweighting at
    that point. Computed with the same summation order as the coordinate
    updates so a fit at this value returns an exactly zero vector.
    """
    scale, center = _standardization(data, config)
    x_work = (data.x - center) / scale if config.standardize else data.x
    xt = np.ascontiguousarray(x_work.T)
    r0 = _null_residuals(data, config)
    kind = _KIND_CODE[config.loss_kind]
    w0 = _kernels._weights(r0, config.nu, config.scale_c, kind,
                           config.huber_delta)
    lmax = float(_kernels._lambda_max(xt, r0, w0))
    if not lmax > 0.0:
        raise DataError("penalty ceiling is zero: the design is identically "
                        "zero or orthogonal to the response")
    return lmax


def lambda_grid(data, config, k=100, ratio=None):
    """Log-spaced descending penalty grid from lambda_max down to ratio*lambda_max.

    ratio defaults to 0.01 when n < p and 1e-4 otherwise. The endpoints are
    pinned exactly (no exp/log round-trip error), so a fit at grid[0]
    yields the zero vector.
    """
    if int(k) != k or k < 2:
        raise InvalidConfigError("k must be an integer >= 2")
    if ratio is None:
        ratio = 0.01 if data.n < data.p else 1e-4
    if not 0.0 < ratio < 1.0:
        raise InvalidConfigError("ratio must be in (0, 1)")
    lmax = lambda_max(data, config)
    grid = np.exp(np.linspace(math.log(lmax), math.log(ratio * lmax), int(k)))
    grid[0] = lmax
    grid[-1] = ratio * lmax
    return grid


def _check_ic_args(rss, n):
    if not n >= 1:
        raise InvalidConfigError("n must be >= 1")
    if rss < 0 or not np.isfinite(rss):
        raise InvalidConfigError("rss must be finite and nonnegative")


def bic_score(rss, df, n):
    """n * log(rss/n) + log(n) * df; -inf sentinel for a perfect fit (rss=0)."""
    _check_ic_args(rss, n)
    if rss == 0.0:
        return -math.inf
    return n * math.log(rss / n) + math.log(n) * df


def aic_score(rss, df, n):
    """n * log(rss/n) + 2 * df; -inf sentinel for a perfect fit (rss=0)."""
    _check_ic_args(rss, n)
    if rss == 0.0:
        return -math.inf
    return n * math.log(rss / n) + 2.0 * df


def bic_loss_score(loss_sum, df, n):
    """loss_sum + log(n) * df, with loss_sum = sum of the fitted loss values.

    Equals BIC up to an additive constant when loss_sum is twice a
    negative log-likelihood.
    """
    if not n >= 1:
        raise InvalidConfigError("n must be >= 1")
    return loss_sum + math.log(n) * df


def aic_loss_score(loss_sum, df):
    """loss_sum + 2 * df; the AIC analogue of bic_loss_score."""
    return loss_sum + 2.0 * df


def select_index(scores, failed=None):
    """argmin over non-failed levels; ties go to the first (larger penalty).

    A pure function of the score vector, so selection depends on the path
    only through the scores.
    """
    scores = np.asarray(scores, dtype=np.float64)
    if failed is not None:
        scores = np.where(np.asarray(failed, dtype=bool), np.inf, scores)
    if not np.any(scores < np.inf):
        raise PathError("no successful fit to select from")
    return int(np.argmin(scores))


def fit_path(data, config, grid=None, criterion="bic", ic_basis="loss",
             early_stop=True, dfmax=None, rss_stop_frac=0.001):
    """Fit a warm-started path over a descending penalty grid and select.

    Arguments
    ---------
    data : Dataset
    config : FitConfig (its lam field is ignored; the grid provides it).
    grid : descending positive penalties; default lambda_grid(data, config).
    criterion : 'bic' or 'aic'.
    ic_basis : 'loss' (default) or 'rss'; see the module docstring.
    early_stop : stop extending the path once the fit explains nearly all
        of the null residual sum of squares (rss <= rss_stop_frac * rss_null)
        or reaches dfmax nonzeros, the usual path-solver economy.
    dfmax : nonzero cap, default min(n, p).

    Returns
    -------
    PathResult. Levels where the solver fails numerically are marked and
    excluded from selection (warm start carries over the last success);
    if every level fails, PathError is raised.
    """
    if criterion not in CRITERIA:
        raise InvalidConfigError("criterion must be one of %s" % (CRITERIA,))
    if ic_basis not in IC_BASES:
        raise InvalidConfigError("ic_basis must be one of %s" % (IC_BASES,))
    if grid is None:
        grid = lambda_grid(data, config)
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim != 1 or grid.size < 1:
        raise InvalidConfigError("grid must be a nonempty 1-d vector")
    if np.any(grid <= 0) or not np.isfinite(grid).all():
        raise InvalidConfigError("grid entries must be positive and finite")
    if grid.size > 1 and not np.all(np.diff(grid) < 0):
        raise InvalidConfigError("grid must be strictly decreasing")
    n = data.n
    if dfmax is None:
        dfmax = min(data.n, data.p)
    r_null = _null_residuals(data, config)
    rss_null = float(r_null @ r_null)

    m_max = grid.size
    fits = []
    rss = np.full(m_max, np.nan)
    loss_sum = np.full(m_max, np.nan)
    df = np.zeros(m_max, dtype=np.int64)
    failed = np.zeros(m_max, dtype=bool)
    warm = None
    m = 0
    overflow = False
    for i, lam in enumerate(grid):
        cfg_i = replace(config, lam=float(lam))
        try:
            fit = em_fit(data, cfg_i, init=warm)
        except NumericalFailureError:
            failed[i] = True
            fits.append(None)
            m = i + 1
            continue
        warm = fit.beta
        fits.append(fit)
        r = residuals(data, fit.beta)
        rss[i] = float(r @ r)
        loss_sum[i] = 2.0 * n * _unpenalized_loss(r, cfg_i, n)
        df[i] = int(np.count_nonzero(fit.beta.beta))
        m = i + 1
        if early_stop and (rss[i] <= rss_stop_frac * rss_null or df[i] >= dfmax):
            overflow = bool(df[i] >= dfmax)
            break

    grid = grid[:m]
    fits = fits[:m]
    rss = rss[:m]
    loss_sum = loss_sum[:m]
    df = df[:m]
    failed = failed[:m]
    if failed.all():
        raise PathError("all %d penalty levels failed" % m)
    if failed.any():
        warnings.warn("%d of %d penalty levels failed and were excluded"
                      % (int(failed.sum()), m), RuntimeWarning)

    bic = np.array([np.nan if failed[i] else bic_score(rss[i], int(df[i]), n)
                    for i in range(m)])
    aic = np.array([np.nan if failed[i] else aic_score(rss[i], int(df[i]), n)
                    for i in range(m)])
    bic_l = np.array([np.nan if failed[i]
                      else bic_loss_score(loss_sum[i], int(df[i]), n)
                      for i in range(m)])
    aic_l = np.array([np.nan if failed[i]
                      else aic_loss_score(loss_sum[i], int(df[i]))
                      for i in range(m)])
    score_table = {("bic", "rss"): bic, ("aic", "rss"): aic,
                   ("bic", "loss"): bic_l, ("aic", "loss"): aic_l}
    sel = select_index(score_table[(criterion, ic_basis)], failed)
    return PathResult(lambdas=grid, fits=fits, rss=rss, df=df, bic=bic,
                      aic=aic, bic_loss=bic_l, aic_loss=aic_l,
                      selected_index=sel, criterion=criterion,
                      ic_basis=ic_basis, failed=failed,
                      df_overflow=overflow, rss_null=rss_null)
