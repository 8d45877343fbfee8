"""Small sampling multisets that discretize the norm of ``V_n``.

Two-phase construction: draw ``O(n log n)`` i.i.d. points from a design,
then greedily keep ``target`` of them so that the frame of a
design-orthonormal basis stays well conditioned.  The result is verified
against an explicit ceiling and redrawn with a fresh seed on failure.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import asdict, dataclass, field, replace
from typing import Optional

import numpy as np

from .design import DesignMeasure, christoffel_values
from .space import CandidateSet, EvalMatrix, SingularGramError, gram

SUP_CEILING = 58.0
L2_CEILING = 57.0
BARRIER_GAP = 1.0


@dataclass(frozen=True, eq=False)
class SampleMultiset:
    """Multiset of candidate indices; induces the measure ``(1/|X|) sum delta_x``."""

    indices: tuple
    candidates: Optional[CandidateSet] = None

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        if not idx:
            raise ValueError("sample multiset must be nonempty")
        if min(idx) < 0:
            raise IndexError("negative candidate index")
        if self.candidates is not None and max(idx) >= len(self.candidates):
            raise IndexError("sample index outside the candidate range")
        object.__setattr__(self, "indices", idx)

    def __len__(self):
        return len(self.indices)

    def __eq__(self, other):
        if not isinstance(other, SampleMultiset):
            return NotImplemented
        return self.indices == other.indices

    __hash__ = None

    def atoms(self):
        counts = Counter(self.indices)
        support = sorted(counts)
        return support, np.array([counts[i] for i in support], dtype=float) / len(self.indices)

    def to_json(self) -> dict:
        from .space import point_labels
        out = {"indices": list(self.indices)}
        if self.candidates is not None:
            out["points"] = point_labels(self.candidates, self.indices)
        return out

    @classmethod
    def from_json(cls, data: dict, candidates=None) -> "SampleMultiset":
        return cls(tuple(data["indices"]), candidates)


@dataclass
class SubsampleReport:
    target_size: int
    achieved_size: int
    lower_frame_bound: float
    discretization_constant: float
    retries_used: int
    seed: int
    norm: str = "sup"
    ceiling: float = math.inf
    accepted: bool = False
    pool: list = field(default_factory=list)

    def to_json(self) -> dict:
        out = asdict(self)
        for key in ("lower_frame_bound", "discretization_constant", "ceiling"):
            v = out[key]
            out[key] = None if not math.isfinite(v) else float(v)
        return out


class SubsampleError(RuntimeError):
    """All retries failed; ``report`` describes the best attempt."""

    def __init__(self, message, report: SubsampleReport):
        super().__init__(message)
        self.report = report


def draw_iid(design: DesignMeasure, count: int, seed: int) -> SampleMultiset:
    """``count`` independent draws from ``design`` with a seeded generator."""
    if count < 1:
        raise ValueError("count must be at least 1")
    rng = np.random.default_rng(seed)
    support = np.asarray(design.support)
    picks = rng.choice(len(support), size=count, p=design.weights)
    return SampleMultiset(tuple(int(i) for i in support[picks]))


def discretization_constant(eval: EvalMatrix, x_set: SampleMultiset) -> float:
    """``sup_{f in V_n} ||f||_inf / ||f||_X`` over the candidate grid."""
    G = gram(eval, x_set)
    try:
        d = christoffel_values(eval.values, G)
    except SingularGramError as exc:
        raise SingularGramError(f"multiset does not norm V_n: {exc}") from None
    return float(np.sqrt(d.max()))


def union_multisets(a: SampleMultiset, b: SampleMultiset) -> SampleMultiset:
    if a.candidates is not None and b.candidates is not None and a.candidates != b.candidates:
        raise ValueError("cannot unite multisets over different candidate sets")
    return SampleMultiset(a.indices + b.indices, a.candidates or b.candidates)


def oversampling_size(n: int) -> int:
    return math.ceil(10 * n * math.log(max(n, 2)))


def attempt_seed(seed: int, attempt: int) -> int:
    if attempt == 0:
        return int(seed)
    return int(np.random.SeedSequence([int(seed), attempt]).generate_state(1)[0])


def _inv_sqrt_psd(G):
    ev, U = np.linalg.eigh(G)
    return (U / np.sqrt(ev)) @ U.conj().T


def greedy_select(vectors: np.ndarray, target: int) -> list[int]:
    """Pick ``target`` columns of ``vectors`` keeping the frame well conditioned.

    Each step adds the column minimizing the lower barrier potential
    ``tr((S + b b* - l I)^{-1})`` with the barrier ``l`` one unit below the
    current smallest eigenvalue of ``S``.  Ties go to the lowest position.
    """
    n, m = vectors.shape
    if target > m:
        raise ValueError(f"cannot select {target} of {m} pooled points")
    S = np.zeros((n, n), dtype=vectors.dtype)
    free = np.ones(m, dtype=bool)
    chosen = []
    for _ in range(target):
        lam = np.linalg.eigvalsh(S)[0]
        Ainv = np.linalg.inv(S - (lam - BARRIER_GAP) * np.eye(n))
        Y = Ainv @ vectors
        q1 = np.real(np.sum(vectors.conj() * Y, axis=0))
        q2 = np.real(np.sum(Y.conj() * Y, axis=0))
        gain = np.where(free, q2 / (1.0 + q1), -np.inf)
        best = gain.max()
        j = int(np.flatnonzero(gain >= best - 1e-12 * abs(best))[0])
        chosen.append(j)
        free[j] = False
        b = vectors[:, j:j + 1]
        S = S + b @ b.conj().T
    return chosen


def frame_lower_bound(eval: EvalMatrix, design: DesignMeasure, x_set: SampleMultiset) -> float:
    """Smallest eigenvalue of ``(1/|X|) sum B(x) B(x)*`` for a design-orthonormal ``B``."""
    T = _inv_sqrt_psd(gram(eval, design))
    GX = T @ gram(eval, x_set) @ T.conj().T
    return float(np.linalg.eigvalsh((GX + GX.conj().T) / 2)[0])


def subsample_to(
    eval: EvalMatrix,
    design: DesignMeasure,
    target: int,
    seed: int,
    max_retries: int = 8,
    norm: str = "sup",
    ceiling: Optional[float] = None,
) -> tuple[SampleMultiset, SubsampleReport]:
    """Select a ``target``-point multiset from i.i.d. draws of ``design``.

    With ``norm="sup"`` acceptance requires
    ``discretization_constant <= 58 sqrt(n)``; with ``norm="l2"`` it requires
    ``||f||_{L2(design)} <= 57 ||f||_X`` on ``V_n``, i.e. a lower frame bound
    of at least ``1/57**2``.  ``ceiling`` overrides the default bound.

    Raises:
        SubsampleError: no attempt out of ``max_retries + 1`` met the bound.
    """
    n = eval.n
    if target < n + 1:
        raise ValueError(f"target {target} must be at least n + 1 = {n + 1}")
    if norm not in ("sup", "l2"):
        raise ValueError(f"unknown norm {norm!r}")
    if ceiling is None:
        ceiling = SUP_CEILING * math.sqrt(n) if norm == "sup" else L2_CEILING
    T = _inv_sqrt_psd(gram(eval, design))
    pool_size = max(oversampling_size(n), target)

    best = None
    for attempt in range(max_retries + 1):
        s = attempt_seed(seed, attempt)
        pool = draw_iid(design, pool_size, s)
        vectors = T @ eval.values[:, list(pool.indices)]
        picked = greedy_select(vectors, target)
        x_set = SampleMultiset(tuple(sorted(pool.indices[j] for j in picked)), eval.candidates)
        chosen = vectors[:, picked]
        lower = float(np.linalg.eigvalsh(chosen @ chosen.conj().T / target)[0])
        try:
            if norm == "sup":
                const = discretization_constant(eval, x_set)
            else:
                const = 1.0 / math.sqrt(lower) if lower > 0 else math.inf
        except SingularGramError:
            const = math.inf
        report = SubsampleReport(
            target_size=target,
            achieved_size=len(x_set),
            lower_frame_bound=lower,
            discretization_constant=const,
            retries_used=attempt,
            seed=s,
            norm=norm,
            ceiling=float(ceiling),
            accepted=bool(lower > 0 and const <= ceiling),
            pool=list(pool.indices),
        )
        if report.accepted:
            return x_set, report
        if best is None or const < best.discretization_constant:
            best = report
    best = replace(best, retries_used=max_retries)
    raise SubsampleError(
        f"no {target}-point subsample met the {norm} ceiling {ceiling:.4g} "
        f"after {max_retries + 1} attempts (best {best.discretization_constant:.4g})", best)


def l2_discretization_constant(eval: EvalMatrix, measure, x_set: SampleMultiset) -> float:
    """``sup_{f in V_n} ||f||_{L2(measure)} / ||f||_X``."""
    Gm = gram(eval, measure)
    GX = gram(eval, x_set)
    ev = np.linalg.eigvalsh(GX)
    if ev[0] <= 1e-12 * ev.sum():
        raise SingularGramError("multiset does not norm V_n")
    T = _inv_sqrt_psd(GX)
    K = T @ Gm @ T.conj().T
    return float(np.sqrt(max(np.linalg.eigvalsh((K + K.conj().T) / 2)[-1], 0.0)))

