"""D-optimal designs on a candidate grid.

The design maximizing ``det G_rho[F]`` over probability measures ``rho`` is
characterized by the equivalence condition ``F(x)* G^{-1} F(x) <= n`` for
every candidate ``x``.  :func:`optimize_design` finds a design satisfying
the relaxed condition ``<= n + epsilon``, :func:`kw_certificate` checks it,
and :func:`caratheodory_reduce` shrinks the support without changing the
Gram matrix.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.linalg

from .space import (
    EvalMatrix,
    RANK_RTOL,
    SingularGramError,
    gram_from_weights,
    measure_weights,
    select_invertible_points,
)

log = logging.getLogger(__name__)

PRUNE_THRESHOLD = 1e-12
STALL_THRESHOLD = 1e-9
ARGMAX_RTOL = 1e-9
SINGULAR_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class DesignMeasure:
    """Atomic probability measure on candidate indices."""

    support: tuple
    weights: np.ndarray

    def __post_init__(self):
        support = tuple(int(i) for i in self.support)
        w = np.array(self.weights, dtype=float)
        if len(support) == 0 or w.shape != (len(support),):
            raise ValueError("design needs one weight per support index")
        if len(set(support)) != len(support):
            raise ValueError("design support indices must be distinct")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("design weights must be nonnegative and sum to 1")
        w.setflags(write=False)
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "weights", w)

    def atoms(self):
        return self.support, self.weights

    def __len__(self):
        return len(self.support)

    def __eq__(self, other):
        if not isinstance(other, DesignMeasure):
            return NotImplemented
        return self.support == other.support and np.array_equal(self.weights, other.weights)

    __hash__ = None

    @classmethod
    def uniform(cls, indices: Sequence[int]) -> "DesignMeasure":
        idx = sorted(int(i) for i in indices)
        return cls(tuple(idx), np.full(len(idx), 1.0 / len(idx)))

    @classmethod
    def from_dense(cls, w: np.ndarray, threshold: float = 0.0) -> "DesignMeasure":
        w = np.where(w > threshold, w, 0.0)
        idx = np.flatnonzero(w)
        return cls(tuple(idx), w[idx] / w[idx].sum())

    def to_json(self, candidates=None) -> dict:
        from .space import point_labels
        out = {"support": list(self.support), "weights": [float(v) for v in self.weights]}
        if candidates is not None:
            out["points"] = point_labels(candidates, self.support)
        return out

    @classmethod
    def from_json(cls, data: dict) -> "DesignMeasure":
        return cls(tuple(data["support"]), np.asarray(data["weights"], dtype=float))


@dataclass(frozen=True)
class DesignCertificate:
    """Outcome of checking ``max_x F(x)* G^{-1} F(x) <= n + epsilon``."""

    sup_value: float
    epsilon: float
    satisfied: bool
    argmax_index: int
    mean_value: float
    n: int

    def to_json(self) -> dict:
        return {
            "sup_value": self.sup_value,
            "epsilon": self.epsilon,
            "satisfied": self.satisfied,
            "argmax_index": self.argmax_index,
            "mean_value": self.mean_value,
            "n": self.n,
        }


@dataclass
class DesignResult:
    """Result of :func:`optimize_design`.

    ``certified`` is False when the iteration budget ran out first; the
    design is then the best iterate found, not an optimum.
    """

    design: DesignMeasure
    certificate: DesignCertificate
    certified: bool
    iterations: int
    logdet_history: list = field(default_factory=list)
    step_kinds: list = field(default_factory=list)


def christoffel_values(values: np.ndarray, G: np.ndarray) -> np.ndarray:
    """``F(x)* G^{-1} F(x)`` at every column of ``values``.

    Raises SingularGramError if ``G`` is not numerically positive definite.
    """
    ev = np.linalg.eigvalsh(G)
    if ev[0] <= SINGULAR_RTOL * max(ev.sum(), np.finfo(float).tiny):
        raise SingularGramError(
            f"Gram matrix is singular (smallest eigenvalue {ev[0]:.3e}, trace {ev.sum():.3e})")
    L = scipy.linalg.cholesky(G, lower=True)
    Y = scipy.linalg.solve_triangular(L, values, lower=True)
    return np.sum(np.abs(Y) ** 2, axis=0)


def _argmax_low(d: np.ndarray) -> int:
    dmax = d.max()
    return int(np.flatnonzero(d >= dmax - ARGMAX_RTOL * abs(dmax))[0])


def kw_certificate(eval: EvalMatrix, design: DesignMeasure, epsilon: float) -> DesignCertificate:
    """Evaluate the equivalence-theorem condition over all candidates."""
    w = measure_weights(design, eval.size)
    G = gram_from_weights(eval.values, w)
    d = christoffel_values(eval.values, G)
    k = _argmax_low(d)
    sup = float(d[k])
    return DesignCertificate(
        sup_value=sup,
        epsilon=float(epsilon),
        satisfied=bool(sup <= eval.n + epsilon),
        argmax_index=k,
        mean_value=float(np.dot(w, d)),
        n=eval.n,
    )


def _logdet(G):
    sign, ld = np.linalg.slogdet(G)
    return float(ld) if sign.real > 0 else -np.inf


def optimize_design(
    eval: EvalMatrix,
    epsilon: Optional[float] = None,
    max_iters: int = 20000,
    seed_design: Optional[DesignMeasure] = None,
) -> DesignResult:
    """Approximate D-optimal design with certificate ``sup <= n + epsilon``.

    Iterates the multiplicative update ``w_k <- w_k d_k / n`` on the current
    support.  A Fedorov-Wynn vertex step (exact line search toward the
    maximizer of ``d``) is taken whenever that maximizer carries no weight,
    since the multiplicative update cannot reach it, or when a
    multiplicative sweep improves ``log det`` by less than ``1e-9``.

    Args:
        eval: basis values on the candidate grid.
        epsilon: certificate slack, defaults to ``0.01 * n``.
        max_iters: iteration budget.
        seed_design: starting design with positive definite Gram; defaults
            to uniform weights on :func:`select_invertible_points`.
    """
    n, M = eval.n, eval.size
    eps = 0.01 * n if epsilon is None else float(epsilon)
    if eps <= 0:
        raise ValueError("epsilon must be positive")
    F = eval.values
    if seed_design is None:
        seed_design = DesignMeasure.uniform(select_invertible_points(eval))
    w = measure_weights(seed_design, M)

    history, kinds = [], []
    last_kind = None
    certified = False
    it = 0
    best_w, best_ld = w.copy(), -np.inf
    for it in range(max_iters + 1):
        G = gram_from_weights(F, w)
        d = christoffel_values(F, G)
        ld = _logdet(G)
        history.append(ld)
        if ld > best_ld:
            best_w, best_ld = w.copy(), ld
        k = _argmax_low(d)
        if d[k] <= n + eps:
            certified = True
            best_w = w
            break
        if it == max_iters:
            break
        stalled = (last_kind == "mult" and len(history) > 1
                   and history[-1] - history[-2] < STALL_THRESHOLD)
        if w[k] == 0.0 or stalled:
            alpha = (d[k] - n) / (n * (d[k] - 1.0))
            w = (1.0 - alpha) * w
            w[k] += alpha
            last_kind = "vertex"
        else:
            w = w * d / n
            w /= w.sum()
            last_kind = "mult"
        kinds.append(last_kind)

    design = DesignMeasure.from_dense(best_w, PRUNE_THRESHOLD)
    cert = kw_certificate(eval, design, eps)
    if not cert.satisfied:
        certified = False
        log.warning("design not certified after %d iterations: sup %.6g > %g",
                    it, cert.sup_value, n + eps)
    return DesignResult(design, cert, certified and cert.satisfied, it, history, kinds)


def _orthonormal_rows(values):
    Q, _ = np.linalg.qr(values.T)
    return Q.T * np.sqrt(values.shape[1])


def product_moments(values: np.ndarray) -> np.ndarray:
    """Real coordinates of ``H(x) = F(x) F(x)*`` as columns.

    Rows are ``Re(f_i conj f_j)`` for ``i <= j`` and, for complex bases,
    ``Im(f_i conj f_j)`` for ``i < j``.
    """
    n = values.shape[0]
    iu, ju = np.triu_indices(n)
    prods = values[iu] * values[ju].conj()
    if not np.iscomplexobj(values):
        return prods
    strict = iu != ju
    return np.vstack([prods.real, prods.imag[strict]])


def _numerical_rank(A):
    if A.size == 0:
        return 0
    s = np.linalg.svd(A, compute_uv=False)
    return int(np.sum(s > RANK_RTOL * s[0])) if s[0] > 0 else 0


def dim_product_space(eval: EvalMatrix) -> int:
    """Dimension of ``span{f_i conj(f_j)}`` restricted to the candidate grid."""
    return _numerical_rank(product_moments(_orthonormal_rows(eval.values)))


def caratheodory_reduce(eval: EvalMatrix, design: DesignMeasure) -> DesignMeasure:
    """Same Gram matrix, at most ``r + 1`` support points.

    ``r`` is the rank of the moment vectors ``vec H(x)`` over the design's
    support.  Each elimination finds a null vector of the moment block
    (including the all-ones row that preserves total mass) and moves along
    it until a weight reaches zero.
    """
    support = np.array(design.support)
    w = design.weights.copy()
    B = _orthonormal_rows(eval.values)
    A = np.vstack([product_moments(B[:, support]), np.ones(len(support))])
    target = A @ w
    rank = _numerical_rank(A)
    if len(support) <= rank:
        return design

    alive = list(range(len(support)))
    while len(alive) > rank:
        block = alive[: rank + 1]
        _, _, vh = np.linalg.svd(A[:, block])
        v = vh[-1]
        if not np.any(v > 0):
            v = -v
        pos = v > 1e-14 * np.abs(v).max()
        ratios = np.full(len(block), np.inf)
        ratios[pos] = w[block][pos] / v[pos]
        j = int(np.argmin(ratios))
        w[block] = np.maximum(w[block] - ratios[j] * v, 0.0)
        w[block[j]] = 0.0
        alive = [a for a in alive if w[a] > 0.0]

    # one least-squares polish on the final support against the original moments
    sub = A[:, alive]
    polished, *_ = np.linalg.lstsq(sub, target, rcond=None)
    if np.all(polished >= 0) and (np.linalg.norm(sub @ polished - target)
                                  <= np.linalg.norm(sub @ w[alive] - target)):
        w[alive] = polished
    wa = w[alive] / w[alive].sum()
    order = np.argsort(support[alive])
    return DesignMeasure(tuple(support[alive][order]), wa[order])
