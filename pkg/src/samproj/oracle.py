"""Exhaustive reference solutions for tiny instances.

These are deliberately naive: they enumerate instead of optimizing, and
exist to cross-check :mod:`samproj.design`, :mod:`samproj.subsample` and
:mod:`samproj.project` where enumeration is affordable.
"""
from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass
from typing import Any

import numpy as np

from .design import DesignMeasure
from .space import EvalMatrix, SingularGramError, gram_from_weights
from .subsample import SampleMultiset, SubsampleReport, discretization_constant


class OracleBudgetError(RuntimeError):
    """The enumeration would exceed its search budget."""


@dataclass
class OracleResult:
    value: float
    argopt: Any
    search_size: int


def design_search_size(M: int, max_support: int, units: int) -> int:
    return sum(math.comb(M, s) * math.comb(units - 1, s - 1)
               for s in range(1, min(max_support, M) + 1))


def brute_design(eval: EvalMatrix, weight_step: float = 0.01, max_support: int = None,
                 budget: int = 50_000_000) -> OracleResult:
    """Largest ``det G`` over designs on ``<= max_support`` points with weights in ``weight_step`` units."""
    n, M = eval.n, eval.size
    if M > 8 or n > 3:
        raise ValueError("brute_design needs at most 8 candidates and n <= 3")
    if weight_step < 1e-3:
        raise ValueError("weight_step must be at least 1e-3")
    units = int(round(1.0 / weight_step))
    max_support = min(max_support or n + 1, M)
    total = design_search_size(M, max_support, units)
    if total > budget:
        raise OracleBudgetError(f"{total} designs exceed the budget of {budget}")

    F = eval.values
    H = np.einsum("ik,jk->kij", F, F.conj())
    best_det, best = -np.inf, None
    visited = 0
    for s in range(1, max_support + 1):
        combos = list(itertools.combinations(range(1, units), s - 1))
        cuts = np.array(combos, dtype=int).reshape(len(combos), s - 1)
        edges = np.hstack([np.zeros((len(cuts), 1), int), cuts, np.full((len(cuts), 1), units)])
        W = np.diff(edges, axis=1) / units
        for subset in itertools.combinations(range(M), s):
            G = np.einsum("bs,sij->bij", W, H[list(subset)])
            dets = np.real(np.linalg.det(G))
            visited += len(W)
            j = int(np.argmax(dets))
            if dets[j] > best_det + 1e-15:
                best_det = float(dets[j])
                best = DesignMeasure(subset, W[j])
    return OracleResult(best_det, best, visited)


def _sub_multisets(counts: list[int], target: int):
    """All count vectors ``k <= counts`` summing to ``target``, lexicographic order."""
    def rec(i, remaining):
        if i == len(counts):
            if remaining == 0:
                yield ()
            return
        rest = sum(counts[i + 1:])
        for k in range(min(counts[i], remaining), -1, -1):
            if remaining - k > rest:
                break
            for tail in rec(i + 1, remaining - k):
                yield (k,) + tail
    return rec(0, target)


def count_sub_multisets(counts: list[int], target: int) -> int:
    ways = [1] + [0] * target
    for c in counts:
        new = [0] * (target + 1)
        for t in range(target + 1):
            new[t] = sum(ways[t - k] for k in range(0, min(c, t) + 1))
        ways = new
    return ways[target]


def brute_subsample(eval: EvalMatrix, pool: SampleMultiset, target: int,
                    budget: int = 1_000_000) -> OracleResult:
    """Sub-multiset of ``pool`` of size ``target`` with the smallest discretization constant.

    Positions of ``pool`` holding the same candidate are interchangeable, so
    only distinct sub-multisets are enumerated.
    """
    counter = Counter(pool.indices)
    values = sorted(counter)
    counts = [counter[v] for v in values]
    total = count_sub_multisets(counts, target)
    if total > budget:
        raise OracleBudgetError(f"{total} sub-multisets exceed the budget of {budget}")
    best_val, best = math.inf, None
    visited = 0
    for ks in _sub_multisets(counts, target):
        visited += 1
        idx = tuple(v for v, k in zip(values, ks) for _ in range(k))
        try:
            val = discretization_constant(eval, SampleMultiset(idx))
        except SingularGramError:
            continue
        if val < best_val - 1e-12:
            best_val, best = val, SampleMultiset(idx, eval.candidates)
    return OracleResult(best_val, best, visited)


def brute_chebyshev(eval: EvalMatrix, x_set: SampleMultiset, samples, coeff_grid_step: float = 1e-3,
                    budget: int = 200_000_000) -> OracleResult:
    """Grid search over coefficients for the discrete Chebyshev fit (``n <= 2``, real)."""
    n = eval.n
    if n > 2:
        raise ValueError("brute_chebyshev supports n <= 2")
    if not eval.is_real:
        raise ValueError("brute_chebyshev supports real spaces only")
    y = np.asarray(samples, dtype=float)
    E = eval.values[:, list(x_set.indices)]
    smin = np.linalg.svd(E, compute_uv=False)[-1]
    if smin <= 0:
        raise ValueError("fit set does not determine V_n")
    # any optimal g has max_X |g| <= 2 max|y|, which bounds the coefficients
    bound = 2.0 * np.abs(y).max() * math.sqrt(len(y)) / smin
    half = int(math.ceil(bound / coeff_grid_step))
    grid = np.arange(-half, half + 1) * coeff_grid_step
    total = len(grid) ** n
    if total > budget:
        raise OracleBudgetError(f"{total} grid nodes exceed the budget of {budget}")

    if n == 1:
        err = np.abs(grid[:, None] * E[0][None, :] - y[None, :]).max(axis=1)
        j = int(np.argmin(err))
        return OracleResult(float(err[j]), np.array([grid[j]]), total)

    best_val, best = math.inf, None
    base = grid[:, None] * E[1][None, :] - y[None, :]
    chunk = max(1, 5_000_000 // (len(grid) * len(y)))
    for start in range(0, len(grid), chunk):
        c0 = grid[start:start + chunk]
        err = np.abs(c0[:, None, None] * E[0][None, None, :] + base[None, :, :]).max(axis=2)
        i, j = np.unravel_index(int(np.argmin(err)), err.shape)
        if err[i, j] < best_val:
            best_val, best = float(err[i, j]), np.array([c0[i], grid[j]])
    return OracleResult(best_val, best, total)


def oracle_check(eval: EvalMatrix, design: DesignMeasure, sub_report: SubsampleReport,
                 target: int, epsilon: float) -> dict:
    """Compare pipeline outputs with the oracles on an instance small enough to enumerate."""
    from .design import optimize_design
    from .project import least_maximum_fit

    n, M = eval.n, eval.size
    if M > 8 or n > 3:
        return {"feasible": False, "reason": "needs at most 8 candidates and n <= 3"}
    out: dict = {"feasible": True}
    fine = optimize_design(eval, epsilon=min(epsilon, 1e-6))
    det_opt = float(np.real(np.linalg.det(gram_from_weights(
        eval.values, _dense(fine.design, M)))))
    bd = brute_design(eval, 0.01, n + 1)
    out.update(design_det=det_opt, brute_det=bd.value, brute_nodes=bd.search_size,
               design_match=bool(abs(det_opt - bd.value) <= 1e-3 * bd.value))

    pool = SampleMultiset(tuple(sub_report.pool))
    bs = brute_subsample(eval, pool, target)
    out.update(subsample_constant=sub_report.discretization_constant,
               brute_subsample_constant=bs.value,
               subsample_ratio=sub_report.discretization_constant / bs.value)

    if n <= 2 and eval.is_real:
        x_set = SampleMultiset(tuple(range(M)))
        y = np.abs(np.linspace(-1, 1, M))
        lm = least_maximum_fit(eval, x_set, y)
        bc = brute_chebyshev(eval, x_set, y, 1e-3)
        out.update(lm_error=lm.error, brute_lm_error=bc.value,
                   chebyshev_match=bool(abs(lm.error - bc.value) <= 1e-3 * (n + 1)))
    return out


def _dense(design, M):
    w = np.zeros(M)
    w[list(design.support)] = design.weights
    return w
