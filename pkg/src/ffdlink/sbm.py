"""Planted-partition blockmodel and numerical checks of the community-label theorem.

The closed-form part evaluates the two within-community probabilities for a
random linked / unlinked benchmark pair and the sufficient condition under
which adding a community predictor to a non-community predictor raises the
expected (summed per-class) accuracy. The Monte Carlo part simulates both
predictors on benchmark pairs drawn from the generative process.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from ._rng import substream
from .graph import DirectedGraph


@dataclass(frozen=True)
class SbmSpec:
    K: int
    community_size: int = 1
    p: float = 0.5
    q: float = 0.05

    def __post_init__(self):
        if self.K < 2:
            raise ValueError("K must be at least 2")
        if self.community_size < 1:
            raise ValueError("community_size must be positive")
        if not (0.0 <= self.p <= 1.0 and 0.0 <= self.q <= 1.0):
            raise ValueError("p and q must lie in [0, 1]")

    @property
    def num_nodes(self) -> int:
        return self.K * self.community_size


@dataclass(frozen=True)
class PredictorModel:
    """Accuracy profile of the two predictors and their fusion weights.

    ``e_unlinked``/``e_linked`` are the per-class accuracies of the
    non-community predictor; ``eps0``/``eps1`` are the community predictor's
    error rates on unlinked / linked pairs. Weights are expected to sum to one;
    pass ``normalized=False`` to sweep raw weights.
    """

    e_unlinked: float = 0.5
    e_linked: float = 0.5
    eps0: float = 0.0
    eps1: float = 0.0
    w_nc: float = 0.5
    w_c: float = 0.5
    normalized: bool = True

    def __post_init__(self):
        for name in ("e_unlinked", "e_linked", "eps0", "eps1"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if self.w_nc < 0 or self.w_c < 0:
            raise ValueError("weights must be non-negative")
        if self.normalized and abs(self.w_nc + self.w_c - 1.0) > 1e-12:
            raise ValueError("weights must sum to 1 (use normalized=False for raw weights)")


@dataclass
class TheoremReport:
    theta_l: float
    theta_u: float
    g_value: float
    condition_holds: bool
    mc_acc_hybrid: float = float("nan")
    mc_acc_noncommunity: float = float("nan")
    mc_trials: int = 0
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        """Plain dict with non-finite numbers replaced by ``None`` (strict JSON)."""
        def clean(v):
            if isinstance(v, float) and not math.isfinite(v):
                return None
            if isinstance(v, dict):
                return {k: clean(x) for k, x in v.items()}
            return v
        return clean(asdict(self))


def generate_sbm(spec: SbmSpec, seed: int) -> tuple[DirectedGraph, np.ndarray]:
    """Sample a directed blockmodel graph.

    Each ordered pair ``(u, v)``, ``u != v``, is an edge independently with
    probability ``p`` inside a community and ``q`` across. Nodes
    ``c*size .. (c+1)*size-1`` form community ``c``.
    """
    n = spec.num_nodes
    communities = np.repeat(np.arange(spec.K), spec.community_size)
    rng = substream(seed, "sbm")
    rows = []
    # row blocks keep peak memory at O(block * n)
    block = max(1, 2_000_000 // max(n, 1))
    for start in range(0, n, block):
        stop = min(n, start + block)
        same = communities[start:stop, None] == communities[None, :]
        prob = np.where(same, spec.p, spec.q)
        hit = rng.random((stop - start, n)) < prob
        hit[np.arange(stop - start), np.arange(start, stop)] = False
        u, v = np.nonzero(hit)
        rows.append(np.stack([u + start, v], axis=1))
    edges = np.concatenate(rows) if rows else np.zeros((0, 2), dtype=np.int64)
    return DirectedGraph(n, edges), communities


def theta_linked(spec: SbmSpec) -> float:
    """Probability that a random linked pair lies inside one community."""
    den = spec.p + (spec.K - 1) * spec.q
    if den <= 0:
        raise ValueError("p + (K-1) q must be positive")
    return spec.p / den


def theta_unlinked(spec: SbmSpec) -> float:
    """Probability that a random unlinked pair lies inside one community."""
    den = spec.K - (spec.p + (spec.K - 1) * spec.q)
    if den <= 0:
        raise ValueError("K - [p + (K-1) q] must be positive")
    return (1.0 - spec.p) / den


def g_value(p: float, q: float, K: int, eps0: float = 0.0, eps1: float = 0.0) -> float:
    """Left side of the theorem's condition (zero error rates by default)."""
    s = SbmSpec(K=K, p=p, q=q)
    return (p - q) * (theta_linked(s) + theta_unlinked(s)) + 1.0 - eps0 - eps1


def g_condition(spec: SbmSpec, model: PredictorModel) -> TheoremReport:
    """Evaluate the sufficient condition in closed form."""
    if model.w_c <= 0:
        raise ValueError("w_c must be positive for the condition to be defined")
    tl, tu = theta_linked(spec), theta_unlinked(spec)
    g = (spec.p - spec.q) * (tl + tu) + 1.0 - model.eps0 - model.eps1
    rhs = (1.0 - model.w_nc) / model.w_c * (model.e_unlinked + model.e_linked)
    return TheoremReport(
        theta_l=tl,
        theta_u=tu,
        g_value=g,
        condition_holds=bool(g >= rhs),
        details={"rhs": rhs},
    )


def g_monotonicity_check(K: int, grid_resolution: int, step: float = 1e-6,
                         grid: np.ndarray | None = None) -> dict:
    """Finite-difference sign check of g over a (p, q) grid.

    The default grid is ``i / (grid_resolution + 1)`` for
    ``i = 1 .. grid_resolution`` on both axes. A point violates when
    ``dg/dp < -tol`` or ``dg/dq > tol`` with ``tol = 1e-9 |g| + 1e-12``.
    """
    if grid is None:
        grid = np.arange(1, grid_resolution + 1) / (grid_resolution + 1)
    violations = []
    rows = []
    for p in grid:
        for q in grid:
            g = g_value(p, q, K)
            dp = (g_value(p + step, q, K) - g_value(p - step, q, K)) / (2 * step)
            dq = (g_value(p, q + step, K) - g_value(p, q - step, K)) / (2 * step)
            tol = 1e-9 * abs(g) + 1e-12
            rows.append((float(p), float(q), K, g))
            if dp < -tol or dq > tol:
                violations.append({"p": float(p), "q": float(q), "dg_dp": dp, "dg_dq": dq})
    return {"K": K, "points": len(rows), "violations": violations, "surface": rows}


# --------------------------------------------------------------------------
# Monte Carlo


def sample_benchmark_pairs(spec: SbmSpec, n_linked: int, n_unlinked: int,
                           rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Draw benchmark pairs from the generative process by rejection.

    A candidate pair has both endpoints' communities drawn uniformly (so it is
    intra-community with probability 1/K) and is linked with probability p or
    q. Candidates are kept until each class is filled. Returns
    ``(same_community, linked)`` boolean arrays, linked pairs first.
    """
    if n_linked and spec.p == 0 and spec.q == 0:
        raise ValueError("no linked pairs can be drawn when p = q = 0")
    if n_unlinked and spec.p == 1 and spec.q == 1:
        raise ValueError("no unlinked pairs can be drawn when p = q = 1")
    out_same = []
    for want_linked, count in ((True, n_linked), (False, n_unlinked)):
        got = []
        have = 0
        while have < count:
            batch = max(1024, 2 * (count - have) * spec.K)
            same = rng.integers(0, spec.K, batch) == rng.integers(0, spec.K, batch)
            linked = rng.random(batch) < np.where(same, spec.p, spec.q)
            keep = same[linked == want_linked]
            got.append(keep[: count - have])
            have += len(got[-1])
        out_same.append(np.concatenate(got) if got else np.zeros(0, bool))
    same = np.concatenate(out_same)
    linked = np.zeros(len(same), dtype=bool)
    linked[:n_linked] = True
    return same, linked


def community_accuracy(spec: SbmSpec, model: PredictorModel, rule: str = "threshold") -> tuple[float, float]:
    """Exact per-class accuracy ``(unlinked, linked)`` of the simulated community predictor.

    ``rule="threshold"`` predicts a link exactly for intra-community pairs;
    ``rule="generative"`` predicts a link with probability p (intra) or q
    (inter). Each prediction is then flipped with probability eps0 on
    unlinked and eps1 on linked pairs.
    """
    tl, tu = theta_linked(spec), theta_unlinked(spec)
    if rule == "threshold":
        a_l, a_u = tl, 1.0 - tu
    elif rule == "generative":
        a_l = tl * spec.p + (1 - tl) * spec.q
        a_u = tu * (1 - spec.p) + (1 - tu) * (1 - spec.q)
    else:
        raise ValueError(f"unknown rule {rule!r}")

    def flip(a, eps):
        return a * (1 - eps) + (1 - a) * eps

    return flip(a_u, model.eps0), flip(a_l, model.eps1)


def expected_hybrid_accuracy(model: PredictorModel, a_unlinked: float, a_linked: float) -> tuple[float, float]:
    """Per-class accuracy of ``sign(w_nc f_nc + w_c f_c)`` with ±1 outputs.

    Zero scores (only possible when the weights are equal and the predictors
    disagree) are resolved by a fair coin.
    """

    def one(e_nc, a_c):
        both = e_nc * a_c
        only_nc = e_nc * (1 - a_c)
        only_c = (1 - e_nc) * a_c
        if model.w_nc > model.w_c:
            return both + only_nc
        if model.w_c > model.w_nc:
            return both + only_c
        return both + 0.5 * (only_nc + only_c)

    return one(model.e_unlinked, a_unlinked), one(model.e_linked, a_linked)


def monte_carlo_theorem(spec: SbmSpec, model: PredictorModel, trials: int, seed: int,
                        rule: str = "threshold") -> TheoremReport:
    """Simulate the non-community and hybrid predictors on benchmark pairs.

    Half the trials are linked pairs and half unlinked. Accuracies reported
    are per-class means (``acc = (acc_U + acc_L) / 2``); their sums are in
    ``details``. When the closed-form condition holds with a margin of at
    least 0.05, ``details["claim_consistent"]`` records whether the hybrid
    accuracy is at least the non-community accuracy minus three standard
    errors.
    """
    if trials < 1000:
        raise ValueError("trials must be at least 1000")
    n_linked = trials // 2
    n_unlinked = trials - n_linked
    same, linked = sample_benchmark_pairs(spec, n_linked, n_unlinked, substream(seed, "pairs"))

    rng = substream(seed, "predictors")
    truth = np.where(linked, 1, -1)
    # non-community oracle: correct with the per-class accuracy
    p_nc = np.where(linked, model.e_linked, model.e_unlinked)
    f_nc = np.where(rng.random(trials) < p_nc, truth, -truth)
    # community predictor
    if rule == "threshold":
        f_c = np.where(same, 1, -1)
    elif rule == "generative":
        f_c = np.where(rng.random(trials) < np.where(same, spec.p, spec.q), 1, -1)
    else:
        raise ValueError(f"unknown rule {rule!r}")
    eps = np.where(linked, model.eps1, model.eps0)
    f_c = np.where(rng.random(trials) < eps, -f_c, f_c)

    score = model.w_nc * f_nc + model.w_c * f_c
    coin = np.where(rng.random(trials) < 0.5, 1, -1)
    f_h = np.where(score > 0, 1, np.where(score < 0, -1, coin))

    def per_class(f):
        ok = f == truth
        return float(ok[~linked].mean()), float(ok[linked].mean())

    nc_u, nc_l = per_class(f_nc)
    c_u, c_l = per_class(f_c)
    h_u, h_l = per_class(f_h)
    acc_nc = 0.5 * (nc_u + nc_l)
    acc_h = 0.5 * (h_u + h_l)

    tl, tu = theta_linked(spec), theta_unlinked(spec)
    g = (spec.p - spec.q) * (tl + tu) + 1.0 - model.eps0 - model.eps1
    if model.w_c > 0:
        rhs = (1.0 - model.w_nc) / model.w_c * (model.e_unlinked + model.e_linked)
        holds = bool(g >= rhs)
    else:
        rhs, holds = math.inf, False

    a_u, a_l = community_accuracy(spec, model, rule)
    ex_u, ex_l = expected_hybrid_accuracy(model, a_u, a_l)
    # standard error of a difference of two per-class-mean accuracies
    se = math.sqrt(sum(a * (1 - a) / n for a, n in ((h_u, n_unlinked), (h_l, n_linked),
                                                     (nc_u, n_unlinked), (nc_l, n_linked)))) / 2
    details = {
        "rule": rule,
        "hybrid_unlinked": h_u,
        "hybrid_linked": h_l,
        "hybrid_sum": h_u + h_l,
        "noncommunity_unlinked": nc_u,
        "noncommunity_linked": nc_l,
        "noncommunity_sum": nc_u + nc_l,
        "community_unlinked": c_u,
        "community_linked": c_l,
        "expected_hybrid": 0.5 * (ex_u + ex_l),
        "expected_noncommunity": 0.5 * (model.e_unlinked + model.e_linked),
        "expected_community": 0.5 * (a_u + a_l),
        "stderr_difference": se,
        "rhs": rhs,
    }
    if holds and g - rhs >= 0.05:
        details["claim_consistent"] = bool(acc_h >= acc_nc - 3 * se)
    return TheoremReport(
        theta_l=tl,
        theta_u=tu,
        g_value=g,
        condition_holds=holds,
        mc_acc_hybrid=acc_h,
        mc_acc_noncommunity=acc_nc,
        mc_trials=trials,
        details=details,
    )
