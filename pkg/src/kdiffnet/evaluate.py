"""Edge-recovery scoring, hyperparameter grids, sweeps, the sample-size
convergence experiment, and a small timing harness.
"""

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .knowledge import expand_node_groups, validate_weight_matrix
from .linalg import proxy_backward_mapping, sample_covariance, select_v
from .simulate import true_support
from .solvers import (
    SolverConfig,
    solve_diffee,
    solve_kdiffnet_e,
    solve_kdiffnet_eg,
    solve_kdiffnet_g,
)

#: Group-term weights swept for the dual-knowledge estimator.
DEFAULT_EPS_GRID = (0.0001, 0.01, 1.0, 100.0)

METHODS = ("diffee", "kdiffnet-e", "kdiffnet-g", "kdiffnet-eg")


@dataclass
class EdgeScore:
    """Confusion counts and derived precision/recall/F1 for edge recovery."""

    tp: int
    fp: int
    fn: int
    tn: int
    precision: float
    recall: float
    f1: float


def _score_counts(tp, fp, fn, tn):
    precision = tp / (tp + fp) if tp + fp > 0 else 0.0
    recall = tp / (tp + fn) if tp + fn > 0 else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return EdgeScore(tp=tp, fp=fp, fn=fn, tn=tn, precision=precision, recall=recall, f1=f1)


def score_edges(estimated, truth, threshold=1e-6, exclude_diagonal=True):
    """Score a binarized estimate against a true edge set.

    Parameters
    ----------
    estimated : DifferentialNetwork or ndarray
        Estimate; entries with ``|value| > threshold`` count as edges.
    truth : set of (i, j) pairs
        True differential edges (either orientation accepted).
    threshold : float, optional
        Binarization level.
    exclude_diagonal : bool, optional
        When True (default), scoring runs over unordered off-diagonal pairs,
        so each symmetric pair counts once. When False, all p*p ordered
        entries count.

    Returns
    -------
    EdgeScore
    """
    delta = getattr(estimated, "delta", estimated)
    delta = np.asarray(delta, dtype=float)
    p = delta.shape[0]
    predicted = np.abs(delta) > threshold
    truth_mask = np.zeros((p, p), dtype=bool)
    for (i, j) in truth:
        truth_mask[i, j] = True
        truth_mask[j, i] = True
    if exclude_diagonal:
        iu = np.triu_indices(p, k=1)
        pred = predicted[iu] | predicted.T[iu]
        true = truth_mask[iu]
    else:
        pred = predicted.ravel()
        true = truth_mask.ravel()
    tp = int(np.sum(pred & true))
    fp = int(np.sum(pred & ~true))
    fn = int(np.sum(~pred & true))
    tn = int(np.sum(~pred & ~true))
    return _score_counts(tp, fp, fn, tn)


def lambda_grid(p, n_c, n_d, base=0.01, steps=100):
    """Ascending regularization grid scaled by ``sqrt(log p / min(n_c, n_d))``.

    Values are ``base * sqrt(log p / min(n_c, n_d)) * i`` for i = 1..steps.
    ``base`` 0.01 suits the edge and dual-knowledge estimators; 0.1 the
    group-only one.
    """
    if p < 1 or n_c < 1 or n_d < 1:
        raise ValueError("p, n_c, n_d must be positive")
    if steps < 1:
        raise ValueError("steps must be at least 1")
    if base <= 0:
        raise ValueError("base must be positive")
    unit = base * math.sqrt(math.log(p) / min(n_c, n_d))
    return unit * np.arange(1, steps + 1)


@dataclass
class SweepPoint:
    """One fitted grid point of a sweep."""

    lambda_n: float
    eps: float
    tpr: float
    fpr: float
    f1: float
    seconds: float
    converged: bool = True
    error: str = None


@dataclass
class SweepResult:
    """All grid points of a sweep plus the ROC summary and the best point."""

    points: list = field(default_factory=list)
    auc: float = 0.0
    best_lambda: float = None
    best_eps: float = None
    best_f1: float = 0.0
    v_used: float = None


def roc_auc(fprs, tprs):
    """Trapezoidal area under the (fpr, tpr) points.

    The endpoints (0, 0) and (1, 1) are always appended; points are sorted
    by fpr and the tpr staircase is made non-decreasing before integrating.
    """
    fpr = np.concatenate([[0.0], np.asarray(fprs, dtype=float), [1.0]])
    tpr = np.concatenate([[0.0], np.asarray(tprs, dtype=float), [1.0]])
    order = np.argsort(fpr, kind="stable")
    fpr, tpr = fpr[order], tpr[order]
    tpr = np.maximum.accumulate(tpr)
    return float(np.trapezoid(tpr, fpr))


def _fit_method(method, backward, w, eg, lam, eps, solver_kwargs):
    if method == "diffee":
        return solve_diffee(backward, lam)
    if method == "kdiffnet-e":
        return solve_kdiffnet_e(backward, w, lam)
    if method == "kdiffnet-g":
        return solve_kdiffnet_g(backward, eg, lam)
    if method == "kdiffnet-eg":
        cfg = SolverConfig(lambda_n=lam, eps=eps, **solver_kwargs)
        return solve_kdiffnet_eg(backward, w, eg, cfg)
    raise ValueError(f"unknown method {method!r}; choose from {METHODS}")


def prepare_backward(dataset, v="auto", cond_limit=1e12):
    """Covariances and backward map for a dataset, resolving ``v`` if asked.

    Fit sweeps precompute this once and share it across all grid points, so
    per-point timings cover only the estimator itself.
    """
    sigma_c = sample_covariance(dataset.x_c)
    sigma_d = sample_covariance(dataset.x_d)
    if v == "auto":
        v = select_v(sigma_c, sigma_d, cond_limit=cond_limit)
    return proxy_backward_mapping(sigma_c, sigma_d, v, cond_limit=cond_limit)


def sweep(
    dataset,
    method,
    lambdas=None,
    eps_grid=DEFAULT_EPS_GRID,
    v="auto",
    threshold=1e-6,
    score_hook=None,
    backward=None,
    workers=1,
    **solver_kwargs,
):
    """Fit an estimator across a regularization grid and score every point.

    Parameters
    ----------
    dataset : SimulatedDataset
        Must carry the knowledge the method needs (weights for the edge
        variants, groups for the group variants).
    method : {"diffee", "kdiffnet-e", "kdiffnet-g", "kdiffnet-eg"}
    lambdas : sequence of float, optional
        Regularization grid; defaults to :func:`lambda_grid` with the
        method's customary base.
    eps_grid : sequence of float, optional
        Group-weight grid, used by "kdiffnet-eg" only.
    v : float or "auto"
        Thresholding level policy for the backward map.
    threshold : float, optional
        Binarization level for scoring.
    score_hook : callable, optional
        ``hook(network) -> float`` replacing truth-based F1 as the selection
        criterion (for data without ground truth). TPR/FPR/F1 columns are
        still computed against the bundled truth when present.
    backward : BackwardMap, optional
        Reuse a precomputed backward map instead of deriving one.
    workers : int, optional
        Grid points are independent; values above 1 evaluate them in a
        thread pool. Aggregation is order-independent.
    **solver_kwargs
        Extra :class:`SolverConfig` fields for the iterative estimator
        (gamma, rho, max_iter, tol).

    Returns
    -------
    SweepResult
        Points sorted by (lambda_n, eps). The AUC is the best over eps of
        the per-eps ROC areas. A grid point whose fit raises is recorded
        with its error message and skipped in the summaries.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; choose from {METHODS}")
    if backward is None:
        backward = prepare_backward(dataset, v=v)
    w = dataset.w_e
    eg = expand_node_groups(dataset.node_groups) if dataset.node_groups is not None else None
    if method in ("kdiffnet-e", "kdiffnet-eg") and w is None:
        raise ValueError(f"method {method} requires edge-weight knowledge in the dataset")
    if method in ("kdiffnet-g", "kdiffnet-eg") and eg is None:
        raise ValueError(f"method {method} requires node-group knowledge in the dataset")
    if w is not None:
        w = validate_weight_matrix(w)
    if lambdas is None:
        base = 0.1 if method == "kdiffnet-g" else 0.01
        lambdas = lambda_grid(dataset.p, dataset.x_c.shape[0], dataset.x_d.shape[0], base=base)
    eps_values = tuple(eps_grid) if method == "kdiffnet-eg" else (None,)

    truth = true_support(dataset) if dataset.true_delta is not None else None
    n_pairs = dataset.p * (dataset.p - 1) // 2
    n_pos = len({(min(i, j), max(i, j)) for (i, j) in truth}) if truth else 0

    def eval_point(lam, eps):
        t0 = time.perf_counter()
        try:
            net = _fit_method(method, backward, w, eg, lam, eps, solver_kwargs)
        except Exception as exc:  # noqa: BLE001 - per-point resilience
            point = SweepPoint(lam, eps, float("nan"), float("nan"), float("nan"),
                               time.perf_counter() - t0, converged=False, error=str(exc))
            return point, None
        seconds = time.perf_counter() - t0
        if truth is not None:
            sc = score_edges(net, truth, threshold=threshold)
            tpr = sc.tp / n_pos if n_pos else 0.0
            neg = n_pairs - n_pos
            fpr = sc.fp / neg if neg else 0.0
            f1 = sc.f1
        else:
            tpr = fpr = f1 = float("nan")
        point = SweepPoint(lam, eps, tpr, fpr, f1, seconds, converged=net.converged)
        key = score_hook(net) if score_hook is not None else f1
        return point, key

    jobs = [(float(lam), eps) for lam in lambdas for eps in eps_values]
    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            evaluated = list(pool.map(lambda job: eval_point(*job), jobs))
    else:
        evaluated = [eval_point(*job) for job in jobs]

    result = SweepResult(v_used=backward.v_used)
    best_key = -math.inf
    per_eps = {e: ([], []) for e in eps_values}
    for point, key in evaluated:
        result.points.append(point)
        if point.error is not None:
            continue
        if truth is not None:
            per_eps[point.eps][0].append(point.fpr)
            per_eps[point.eps][1].append(point.tpr)
        if key is not None and not math.isnan(key) and key > best_key:
            best_key = key
            result.best_lambda = point.lambda_n
            result.best_eps = point.eps
            result.best_f1 = point.f1
    result.points.sort(key=lambda pt: (pt.lambda_n, pt.eps if pt.eps is not None else 0.0))
    aucs = [roc_auc(f, t) for f, t in per_eps.values() if f]
    result.auc = max(aucs) if aucs else float("nan")
    return result


@dataclass
class RatePoint:
    n: int
    mean_error: float
    std_error: float


@dataclass
class RateResult:
    """Mean estimation error per sample size and the log-log slope."""

    points: list
    slope: float


def rate_experiment(p, n_list, trials, seed, lambda_scale=0.25, v_scale=0.3,
                    setting="E", sparsity=0.02, loading=1.5):
    """Estimation error versus sample size at theory-scaled regularization.

    For each n, generates ``trials`` datasets (both conditions with n
    samples), fits the closed-form edge estimator at
    ``lambda_n = lambda_scale * sqrt(log p / n)`` with thresholding level
    ``v = v_scale * sqrt(log p / n)``, and records the Frobenius error
    against the true differential network. Scaling v with the theory rate
    (rather than picking the smallest invertible level) keeps the backward
    map bounded in the p > n regime; the fixed diagonal ``loading`` keeps
    the covariances diagonally dominant as the invertibility guarantee
    assumes. The slope of a least-squares line through
    (log n, log mean error) estimates the decay rate; the theoretical
    value is -1/2.
    """
    from .linalg import InvertibilityError
    from .simulate import SimulationSpec, gen_dataset

    if trials < 1:
        raise ValueError("trials must be at least 1")
    n_list = [int(n) for n in n_list]
    if any(b < a for a, b in zip(n_list, n_list[1:])):
        raise ValueError("n_list must be ascending")
    points = []
    for n in n_list:
        errors = []
        for t in range(trials):
            spec = SimulationSpec(
                p=p, n_c=n, n_d=n, setting=setting, sparsity=sparsity,
                background_prob=0.0, delta_c=loading, delta_d=loading,
                seed=seed + 100_003 * t + 17 * n,
            )
            ds = gen_dataset(spec)
            rate = math.sqrt(math.log(p) / n)
            v = v_scale * rate
            backward = None
            for _ in range(20):
                try:
                    backward = prepare_backward(ds, v=v)
                    break
                except InvertibilityError:
                    v *= 1.5
            if backward is None:
                raise InvertibilityError(f"no workable thresholding level at n={n}")
            net = solve_kdiffnet_e(backward, ds.w_e, lambda_scale * rate)
            errors.append(float(np.linalg.norm(net.delta - ds.true_delta)))
        errors = np.asarray(errors)
        points.append(RatePoint(n=n, mean_error=float(errors.mean()),
                                std_error=float(errors.std(ddof=1) if trials > 1 else 0.0)))
    logs_n = np.log([pt.n for pt in points])
    logs_e = np.log([pt.mean_error for pt in points])
    slope = float(np.polyfit(logs_n, logs_e, 1)[0])
    return RateResult(points=points, slope=slope)


def time_harness(fit, repeats=3):
    """Wall-clock mean and sample standard deviation of ``fit()``.

    Callers are expected to precompute the backward map outside the closure
    so timings isolate the estimator itself. Runs are serialized.
    """
    if repeats < 1:
        raise ValueError("repeats must be at least 1")
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fit()
        times.append(time.perf_counter() - t0)
    times = np.asarray(times)
    std = float(times.std(ddof=1)) if repeats > 1 else 0.0
    return float(times.mean()), std
