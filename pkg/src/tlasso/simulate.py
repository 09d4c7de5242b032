"""Monte-Carlo benchmark harness: data generators, error metrics, and a
deterministic replication runner with CSV/JSON table emitters.

Reproducibility contract: replication r of a scenario draws everything
from one stream seeded with seed XOR r, in this fixed order: training
design, training noise, test design, test noise. All draws go through the
primitives in rng (see that module for the bit-stream contract), so a
(spec, seed) pair fixes the output tables byte for byte.
"""

import json
import subprocess
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from ._version import __version__
from .core import Coefficients, Dataset, DataError, FitConfig, \
    InvalidConfigError, NumericalFailureError
from .rng import BITSTREAM_CONTRACT, cauchy, make_rng, normals, student_t, \
    uniforms, _as_rng
from .selection import PathError, fit_path, lambda_grid

__all__ = [
    "NOISE_KINDS", "METRICS", "ScenarioError", "ScenarioSpec", "MetricsRecord",
    "ScenarioResult", "gen_design", "gen_beta0", "gen_noise", "evaluate",
    "run_scenario", "scenario_to_csv", "scenario_to_json",
    "parse_scenario_file", "method_label",
]

NOISE_KINDS = ("gauss", "gauss_outlier", "gauss_wide", "student_t", "cauchy")
METRICS = ("l2sq", "l1", "linpred", "pred")

WIDE_SIGMA = 3.0  # gauss_wide standard deviation
T_DF = 3          # student_t degrees of freedom


class ScenarioError(RuntimeError):
    """More than the tolerated fraction of replications failed."""


@dataclass(frozen=True)
class ScenarioSpec:
    """One simulation cell: sizes, design correlation, noise scenario, seeding.

    outlier_rate/lo/hi parameterize the gauss_outlier scenario: that
    fraction of responses receives an added shift of sign * U(lo, hi).
    """

    n: int
    p: int
    s: int
    rho_x: float = 0.0
    noise: str = "gauss"
    n_test: int = 50
    reps: int = 50
    seed: int = 0
    outlier_rate: float = 0.3
    outlier_lo: float = 5.0
    outlier_hi: float = 10.0

    def __post_init__(self):
        if self.n < 1 or self.p < 1 or self.n_test < 1:
            raise InvalidConfigError("n, p, n_test must be >= 1")
        if not 0 <= self.s <= self.p:
            raise InvalidConfigError("s must satisfy 0 <= s <= p")
        if not 0.0 <= self.rho_x < 1.0:
            raise InvalidConfigError("rho_x must be in [0, 1)")
        if self.noise not in NOISE_KINDS:
            raise InvalidConfigError("noise must be one of %s" % (NOISE_KINDS,))
        if self.reps < 1:
            raise InvalidConfigError("reps must be >= 1")
        if not 0.0 <= self.outlier_rate <= 1.0:
            raise InvalidConfigError("outlier_rate must be in [0, 1]")
        if not 0 < self.outlier_lo <= self.outlier_hi:
            raise InvalidConfigError("need 0 < outlier_lo <= outlier_hi")


@dataclass(frozen=True)
class MetricsRecord:
    """The four error metrics of one fitted replication."""

    l2sq: float    # ||bhat - b0||_2^2
    l1: float      # ||bhat - b0||_1
    linpred: float # (1/n_train) ||X_train (bhat - b0)||_2^2
    pred: float    # test mean squared prediction error


def gen_design(n, p, rho_x, rng):
    """n x p design with i.i.d. N(0, Sigma) rows, Sigma_jk = rho_x^|j-k|.

    Built by the lag-1 recursion x_1 = z_1, x_j = rho*x_{j-1} +
    sqrt(1-rho^2)*z_j applied across columns, which realizes that
    covariance exactly. rng may be a Generator or a seed.
    """
    if not 0.0 <= rho_x < 1.0:
        raise InvalidConfigError("rho_x must be in [0, 1)")
    rng = _as_rng(rng)
    z = normals(rng, (n, p))
    if rho_x == 0.0:
        return z
    x = np.empty((n, p))
    x[:, 0] = z[:, 0]
    f = np.sqrt(1.0 - rho_x * rho_x)
    for j in range(1, p):
        x[:, j] = rho_x * x[:, j - 1] + f * z[:, j]
    return x


def gen_beta0(p, s):
    """Ground-truth coefficients: ceil(s/2) entries of +1, then -1 up to s.

    The nonzero support occupies the first s coordinates; the rest are 0.
    """
    if s > p:
        raise InvalidConfigError("s must not exceed p")
    if s < 0:
        raise InvalidConfigError("s must be nonnegative")
    b = np.zeros(p)
    h = (s + 1) // 2
    b[:h] = 1.0
    b[h:s] = -1.0
    return Coefficients(beta=b)


def gen_noise(n, kind, rng, outlier_rate=0.3, outlier_lo=5.0, outlier_hi=10.0):
    """Noise vector for one scenario; rng may be a Generator or a seed.

    gauss: N(0,1). gauss_wide: N(0, 9). student_t: t_3. cauchy: standard
    Cauchy. gauss_outlier: N(0,1), then round(rate*n) positions chosen by
    ranking one uniform per observation receive an added sign * U(lo, hi)
    shift (sign fair, from one more uniform each).
    """
    rng = _as_rng(rng)
    if kind == "gauss":
        return normals(rng, n)
    if kind == "gauss_wide":
        return WIDE_SIGMA * normals(rng, n)
    if kind == "student_t":
        return student_t(rng, T_DF, n)
    if kind == "cauchy":
        return cauchy(rng, n)
    if kind == "gauss_outlier":
        e = normals(rng, n)
        k = int(round(outlier_rate * n))
        idx = np.argsort(uniforms(rng, n))[:k]
        sign = np.where(uniforms(rng, k) < 0.5, 1.0, -1.0)
        mag = outlier_lo + (outlier_hi - outlier_lo) * uniforms(rng, k)
        e[idx] += sign * mag
        return e
    raise InvalidConfigError("noise must be one of %s" % (NOISE_KINDS,))


def _beta_of(b):
    return b.beta if isinstance(b, Coefficients) else np.asarray(b, dtype=np.float64)


def evaluate(beta_hat, beta0, d_train, d_test):
    """The four error metrics for one fitted coefficient vector.

    linpred uses the training design; pred is the mean squared prediction
    error on the test set (its y includes test noise, so pred never drops
    to zero under noisy scenarios). beta_hat and beta0 may be Coefficients
    or plain vectors; a fitted intercept enters only the pred metric.
    """
    bh = _beta_of(beta_hat)
    b0 = _beta_of(beta0)
    icpt = beta_hat.intercept if isinstance(beta_hat, Coefficients) else 0.0
    if bh.shape != b0.shape or bh.shape[0] != d_train.p:
        raise DataError("coefficient lengths must agree with the design")
    d = bh - b0
    yhat = d_test.x @ bh + icpt
    return MetricsRecord(
        l2sq=float(d @ d),
        l1=float(np.abs(d).sum()),
        linpred=float(np.sum((d_train.x @ d) ** 2) / d_train.n),
        pred=float(np.mean((d_test.y - yhat) ** 2)),
    )


def method_label(config):
    """Short display name of a method config (loss kind plus its knob)."""
    if config.loss_kind == "student":
        return "student(nu=%g)" % config.nu
    if config.loss_kind == "huber":
        return "huber(delta=%g)" % config.huber_delta
    return "squared"


@dataclass(frozen=True)
class ScenarioResult:
    """Aggregated output of run_scenario.

    metrics maps method label -> metric -> length-reps vector with nan at
    failed replications; aggregates exclude those. kkt_max is the largest
    stationarity gap reported by any converged fit anywhere in the run
    (the optimality certificate for the whole table).
    """

    spec: ScenarioSpec
    method_labels: list
    method_configs: list
    criterion: str
    ic_basis: str
    grid_k: int
    grid_ratio: object
    metrics: dict
    failures: dict
    selected_df: dict
    selected_lambda: dict
    kkt_max: float
    nonconverged_fits: int
    total_fits: int

    def values(self, label, metric):
        """Per-replication metric vector (nan where the replication failed)."""
        return self.metrics[label][metric]

    def reps_used(self, label):
        return int(np.sum(~np.isnan(self.metrics[label]["l2sq"])))

    def mean(self, label, metric):
        v = self.values(label, metric)
        v = v[~np.isnan(v)]
        return float(np.mean(v)) if v.size else float("nan")

    def sd(self, label, metric):
        v = self.values(label, metric)
        v = v[~np.isnan(v)]
        return float(np.std(v, ddof=1)) if v.size >= 2 else float("nan")


def _dedupe(labels):
    seen = {}
    out = []
    for lab in labels:
        seen[lab] = seen.get(lab, 0) + 1
        out.append(lab if seen[lab] == 1 else "%s#%d" % (lab, seen[lab]))
    return out


def _one_replication(spec, beta0, methods, criterion, ic_basis, k, ratio,
                     early_stop, rep):
    rng = make_rng(spec.seed ^ rep)
    x = gen_design(spec.n, spec.p, spec.rho_x, rng)
    e = gen_noise(spec.n, spec.noise, rng, spec.outlier_rate,
                  spec.outlier_lo, spec.outlier_hi)
    y = x @ beta0.beta + e
    x_test = gen_design(spec.n_test, spec.p, spec.rho_x, rng)
    e_test = gen_noise(spec.n_test, spec.noise, rng, spec.outlier_rate,
                       spec.outlier_lo, spec.outlier_hi)
    y_test = x_test @ beta0.beta + e_test
    train = Dataset(x=x, y=y)
    test = Dataset(x=x_test, y=y_test)
    out = []
    for cfg in methods:
        try:
            grid = lambda_grid(train, cfg, k=k, ratio=ratio)
            path = fit_path(train, cfg, grid=grid, criterion=criterion,
                            ic_basis=ic_basis, early_stop=early_stop)
        except (NumericalFailureError, PathError):
            out.append(None)
            continue
        sel = path.selected
        rec = evaluate(sel.beta, beta0, train, test)
        kkts = [f.kkt_violation for f in path.fits
                if f is not None and f.converged]
        stats = {
            "df": int(path.df[path.selected_index]),
            "lambda": float(path.lambdas[path.selected_index]),
            "kkt_max": max(kkts) if kkts else 0.0,
            "nonconverged": sum(1 for f in path.fits
                                if f is not None and not f.converged),
            "fits": sum(1 for f in path.fits if f is not None),
        }
        out.append((rec, stats))
    return out


def run_scenario(spec, methods, criterion="bic", ic_basis="loss", k=100,
                 ratio=None, early_stop=True, threads=1, failure_budget=0.2):
    """Run every method over spec.reps replications and aggregate.

    Arguments
    ---------
    spec : ScenarioSpec
    methods : list of FitConfig; every method sees the same data in every
        replication. Each method is tuned on its own warm-started penalty
        path and the criterion/ic_basis selection rule.
    threads : worker threads across replications. Results are identical
        for any thread count (replications are independent and aggregation
        is done in replication order).
    failure_budget : a method whose failed-replication fraction exceeds
        this raises ScenarioError.

    Returns
    -------
    ScenarioResult.
    """
    if not methods:
        raise InvalidConfigError("need at least one method config")
    beta0 = gen_beta0(spec.p, spec.s)
    labels = _dedupe([method_label(c) for c in methods])
    results = [None] * spec.reps

    def job(rep):
        return _one_replication(spec, beta0, methods, criterion, ic_basis,
                                k, ratio, early_stop, rep)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=int(threads)) as pool:
            for rep, res in enumerate(pool.map(job, range(spec.reps))):
                results[rep] = res
    else:
        for rep in range(spec.reps):
            results[rep] = job(rep)

    metrics = {lab: {m: np.full(spec.reps, np.nan) for m in METRICS}
               for lab in labels}
    failures = {lab: 0 for lab in labels}
    sel_df = {lab: np.full(spec.reps, -1, dtype=np.int64) for lab in labels}
    sel_lam = {lab: np.full(spec.reps, np.nan) for lab in labels}
    kkt_max = 0.0
    nonconv = 0
    total_fits = 0
    for rep in range(spec.reps):
        for lab, cell in zip(labels, results[rep]):
            if cell is None:
                failures[lab] += 1
                continue
            rec, stats = cell
            for m in METRICS:
                metrics[lab][m][rep] = getattr(rec, m)
            sel_df[lab][rep] = stats["df"]
            sel_lam[lab][rep] = stats["lambda"]
            kkt_max = max(kkt_max, stats["kkt_max"])
            nonconv += stats["nonconverged"]
            total_fits += stats["fits"]
    for lab in labels:
        if failures[lab] > failure_budget * spec.reps:
            raise ScenarioError(
                "method %s failed %d of %d replications (budget %.0f%%)"
                % (lab, failures[lab], spec.reps, 100 * failure_budget))
    return ScenarioResult(
        spec=spec, method_labels=labels, method_configs=list(methods),
        criterion=criterion, ic_basis=ic_basis, grid_k=k, grid_ratio=ratio,
        metrics=metrics, failures=failures, selected_df=sel_df,
        selected_lambda=sel_lam, kkt_max=kkt_max,
        nonconverged_fits=nonconv, total_fits=total_fits)


def _f17(x):
    return "%.17g" % x


def _git_hash():
    try:
        out = subprocess.run(["git", "rev-parse", "HEAD"], capture_output=True,
                             text=True, timeout=10)
        if out.returncode == 0:
            return out.stdout.strip()
    except OSError:
        pass
    return "unknown"


def scenario_to_csv(result, path):
    """Summary table, methods as rows: metric cells hold 'mean (sd)'.

    sd reads 'undefined' when fewer than two replications succeeded.
    Numbers carry 17 significant digits for round-trip fidelity.
    """
    lines = ["method," + ",".join(METRICS)]
    for lab in result.method_labels:
        cells = []
        for m in METRICS:
            mean = result.mean(lab, m)
            sd = result.sd(lab, m)
            sd_s = "undefined" if np.isnan(sd) else _f17(sd)
            cells.append('"%s (%s)"' % (_f17(mean), sd_s))
        lines.append(",".join([lab] + cells))
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def _vec_json(v):
    return [None if np.isnan(x) else float(x) for x in np.asarray(v, dtype=float)]


def scenario_to_json(result, path):
    """Full-fidelity dump: metadata block, aggregates, per-replication values."""
    doc = {
        "tool": "tlasso",
        "version": __version__,
        "git_hash": _git_hash(),
        "rng_contract": BITSTREAM_CONTRACT,
        "scenario": asdict(result.spec),
        "methods": [asdict(c) for c in result.method_configs],
        "method_labels": result.method_labels,
        "criterion": result.criterion,
        "ic_basis": result.ic_basis,
        "grid": {"k": result.grid_k, "ratio": result.grid_ratio},
        "failures": result.failures,
        "kkt_max": result.kkt_max,
        "nonconverged_fits": result.nonconverged_fits,
        "total_fits": result.total_fits,
        "aggregates": {
            lab: {m: {"mean": result.mean(lab, m),
                      "sd": (None if np.isnan(result.sd(lab, m))
                             else result.sd(lab, m)),
                      "reps_used": result.reps_used(lab)}
                  for m in METRICS}
            for lab in result.method_labels
        },
        "replications": {
            lab: {
                **{m: _vec_json(result.values(lab, m)) for m in METRICS},
                "selected_df": [int(d) for d in result.selected_df[lab]],
                "selected_lambda": _vec_json(result.selected_lambda[lab]),
            }
            for lab in result.method_labels
        },
    }

    def default(o):
        if isinstance(o, (np.floating, np.integer)):
            return o.item()
        raise TypeError(repr(o))

    with open(path, "w", encoding="utf-8", newline="") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True, default=default,
                  allow_nan=False)
        fh.write("\n")


_SCENARIO_KEYS = {
    "n": int, "p": int, "s": int, "rho_x": float, "noise": str,
    "n_test": int, "reps": int, "seed": int, "outlier_rate": float,
    "outlier_lo": float, "outlier_hi": float,
}
_RUN_KEYS = {
    "methods": str, "nu": float, "scale_c": float, "huber_delta": float,
    "tol": float, "outer_max": int, "inner_sweeps": int,
    "criterion": str, "ic_basis": str, "k": int, "ratio": float,
    "threads": int,
}
_REQUIRED_KEYS = ("n", "p", "s", "noise", "seed")


def parse_scenario_file(path):
    """Parse a flat key=value scenario file.

    Lines are 'key = value'; '#' starts a comment; blank lines are
    ignored. Scenario keys: n, p, s, rho_x, noise, n_test, reps, seed,
    outlier_rate/lo/hi (n, p, s, noise, seed are required). Run keys:
    methods (comma list of student/squared/huber), nu, scale_c,
    huber_delta, tol, outer_max, inner_sweeps, criterion, ic_basis, k,
    ratio, threads. Unknown keys are errors.

    Returns a dict with 'spec' (ScenarioSpec), 'methods' (FitConfig list),
    'criterion', 'ic_basis', 'k', 'ratio', 'threads'.
    """
    raw = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            if "=" not in text:
                raise DataError("%s:%d: expected 'key = value'" % (path, lineno))
            key, value = (part.strip() for part in text.split("=", 1))
            if key in raw:
                raise DataError("%s:%d: duplicate key %r" % (path, lineno, key))
            conv = _SCENARIO_KEYS.get(key) or _RUN_KEYS.get(key)
            if conv is None:
                raise DataError("%s:%d: unknown key %r" % (path, lineno, key))
            try:
                raw[key] = conv(value)
            except ValueError:
                raise DataError("%s:%d: cannot parse %r as %s"
                                % (path, lineno, value, conv.__name__)) from None
    missing = [k for k in _REQUIRED_KEYS if k not in raw]
    if missing:
        raise DataError("%s: missing required keys: %s"
                        % (path, ", ".join(missing)))

    spec = ScenarioSpec(**{k: raw[k] for k in _SCENARIO_KEYS if k in raw})
    fit_keys = {k: raw[k] for k in
                ("nu", "scale_c", "huber_delta", "tol", "outer_max",
                 "inner_sweeps") if k in raw}
    methods = []
    for tok in raw.get("methods", "student").split(","):
        kind = tok.strip()
        if kind not in ("student", "squared", "huber"):
            raise DataError("%s: unknown method %r" % (path, kind))
        methods.append(FitConfig(loss_kind=kind, **fit_keys))
    return {
        "spec": spec,
        "methods": methods,
        "criterion": raw.get("criterion", "bic"),
        "ic_basis": raw.get("ic_basis", "loss"),
        "k": raw.get("k", 100),
        "ratio": raw.get("ratio"),
        "threads": raw.get("threads", 1),
    }
