"""Candidate domains, basis evaluation and Gram matrices.

Everything downstream works on a finite candidate grid.  A function space
``V_n`` is represented by its evaluation matrix ``F`` of shape ``(n, M)``
with ``F[i, k] = f_i(x_k)``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Any, Optional, Sequence

import numpy as np
import scipy.linalg

RANK_RTOL = 1e-10
WEIGHT_SUM_TOL = 1e-12

FAMILIES = ("algebraic", "trigonometric", "custom-table")


class RankDeficientError(ValueError):
    """The basis functions are not linearly independent on the candidate grid."""


class SingularGramError(ValueError):
    """A Gram matrix that must be positive definite is (numerically) singular."""


@dataclass(frozen=True, eq=False)
class CandidateSet:
    """Finite list of domain points with a ground probability weight per point.

    ``points`` has shape ``(M, d)``; ``labels`` is only set for opaque points
    (e.g. loaded from a custom table header).
    """

    points: np.ndarray
    ground_weights: np.ndarray
    labels: Optional[tuple] = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] == 0:
            raise ValueError("candidate set must contain at least one point")
        if not np.all(np.isfinite(pts)):
            raise ValueError("candidate points must have finite coordinates")
        w = np.asarray(self.ground_weights, dtype=float)
        if w.shape != (pts.shape[0],):
            raise ValueError("need exactly one ground weight per point")
        if np.any(w < 0) or abs(w.sum() - 1.0) > WEIGHT_SUM_TOL:
            raise ValueError("ground weights must be nonnegative and sum to 1")
        if len(np.unique(pts, axis=0)) != pts.shape[0]:
            raise ValueError("candidate points must be distinct")
        pts.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "ground_weights", w)

    def __len__(self):
        return self.points.shape[0]

    def __eq__(self, other):
        if not isinstance(other, CandidateSet):
            return NotImplemented
        return (self.points.shape == other.points.shape
                and np.array_equal(self.points, other.points)
                and np.array_equal(self.ground_weights, other.ground_weights))

    __hash__ = None

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def coordinates(self) -> list:
        """Points as JSON-friendly lists (scalars for 1-d domains)."""
        if self.dim == 1:
            return [float(p) for p in self.points[:, 0]]
        return [[float(c) for c in p] for p in self.points]


def _normalize_ground(ground_measure, size):
    if ground_measure is None:
        return np.full(size, 1.0 / size)
    w = np.asarray(ground_measure, dtype=float)
    if w.shape != (size,):
        raise ValueError(f"ground measure has {w.size} weights for {size} points")
    if np.any(w < 0) or not np.all(np.isfinite(w)) or w.sum() <= 0:
        raise ValueError("ground measure weights must be finite and nonnegative")
    return w / w.sum()


def build_candidate_set(domain_spec: dict, ground_measure=None) -> CandidateSet:
    """Build a finite candidate grid.

    ``domain_spec`` is one of::

        {"kind": "interval", "bounds": [a, b], "size": N}
        {"kind": "torus", "size": N}             # angles 2*pi*k/N
        {"kind": "points", "points": [...]}      # explicit list

    Without ``ground_measure`` the ground weights are uniform.
    """
    kind = domain_spec.get("kind")
    if kind == "interval":
        a, b = (float(v) for v in domain_spec["bounds"])
        size = int(domain_spec["size"])
        if not (math.isfinite(a) and math.isfinite(b)):
            raise ValueError("interval bounds must be finite")
        if size < 1:
            raise ValueError("grid size must be at least 1")
        if size == 1:
            pts = np.array([(a + b) / 2.0])
        else:
            if not a < b:
                raise ValueError("interval bounds must satisfy a < b")
            pts = np.linspace(a, b, size)
    elif kind == "torus":
        size = int(domain_spec["size"])
        if size < 1:
            raise ValueError("grid size must be at least 1")
        pts = 2.0 * np.pi * np.arange(size) / size
    elif kind == "points":
        raw = domain_spec.get("points")
        if raw is None or len(raw) == 0:
            raise ValueError("explicit point list is empty")
        pts = np.asarray(raw, dtype=float)
    else:
        raise ValueError(f"unknown domain kind {kind!r}")
    return CandidateSet(pts, _normalize_ground(ground_measure, len(pts)))


@dataclass(frozen=True, eq=False)
class BasisSpec:
    """Description of a basis ``F = (f_1, ..., f_n)``.

    Parameters per family:

    * ``algebraic``: ``{"kind": "monomial" | "chebyshev" | "legendre"}``,
      polynomials of degree ``< n`` in the first coordinate.
    * ``trigonometric``: ``{"form": "real" | "complex"}``; real form is
      ``1, cos t, sin t, cos 2t, ...``, complex form is
      ``1, e^{it}, e^{-it}, e^{2it}, ...``; an explicit ``"frequencies"``
      list (complex form) overrides the default ordering.
    * ``custom-table``: ``{"table": n x M array}``.
    """

    family: str
    n: int
    parameters: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown basis family {self.family!r}")
        if int(self.n) != self.n or self.n < 1:
            raise ValueError("basis dimension n must be a positive integer")
        if self.family == "custom-table":
            table = np.asarray(self.parameters.get("table"))
            if table.ndim != 2 or table.shape[0] != self.n:
                raise ValueError("custom table must have exactly n rows")
        if self.family == "trigonometric":
            freqs = self.parameters.get("frequencies")
            if freqs is not None and len(freqs) != self.n:
                raise ValueError("need exactly n trigonometric frequencies")

    def __eq__(self, other):
        if not isinstance(other, BasisSpec):
            return NotImplemented
        if (self.family, self.n) != (other.family, other.n):
            return False
        a, b = self.parameters, other.parameters
        if a.keys() != b.keys():
            return False
        return all(np.array_equal(np.asarray(a[k]), np.asarray(b[k])) for k in a)

    __hash__ = None

    def to_json(self) -> dict:
        params = dict(self.parameters)
        if "table" in params:
            table = np.asarray(params["table"])
            if np.iscomplexobj(table):
                params["table"] = {"real": table.real.tolist(), "imag": table.imag.tolist()}
            else:
                params["table"] = table.tolist()
        return {"family": self.family, "n": self.n, "parameters": params}

    @classmethod
    def from_json(cls, data: dict) -> "BasisSpec":
        params = dict(data.get("parameters") or {})
        table = params.get("table")
        if isinstance(table, dict):
            params["table"] = np.asarray(table["real"]) + 1j * np.asarray(table["imag"])
        elif table is not None:
            params["table"] = np.asarray(table, dtype=float)
        return cls(data["family"], int(data["n"]), params)


def load_table_csv(path) -> tuple[np.ndarray, list]:
    """Read a custom basis table: header row of point labels, one row per function."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2:
        raise ValueError(f"{path}: need a header row and at least one basis row")
    labels = [s.strip() for s in rows[0]]
    values = np.array([[complex(v.strip().replace("i", "j")) for v in r] for r in rows[1:]])
    if values.shape[1] != len(labels):
        raise ValueError(f"{path}: row length does not match header")
    if np.all(values.imag == 0):
        values = values.real
    return values, labels


def trig_frequencies(n: int) -> list[int]:
    """Default complex frequency order 0, 1, -1, 2, -2, ..."""
    freqs = [0]
    k = 1
    while len(freqs) < n:
        freqs.append(k)
        if len(freqs) < n:
            freqs.append(-k)
        k += 1
    return freqs


def _eval_algebraic(n, kind, x):
    if kind == "monomial":
        return np.vander(x, n, increasing=True).T
    if kind == "chebyshev":
        return np.polynomial.chebyshev.chebvander(x, n - 1).T
    if kind == "legendre":
        return np.polynomial.legendre.legvander(x, n - 1).T
    raise ValueError(f"unknown polynomial kind {kind!r}")


def _eval_trig(n, params, t):
    form = params.get("form", "real")
    if form == "complex" or "frequencies" in params:
        freqs = params.get("frequencies") or trig_frequencies(n)
        return np.exp(1j * np.outer(np.asarray(freqs, dtype=float), t))
    if form != "real":
        raise ValueError(f"unknown trigonometric form {form!r}")
    rows = [np.ones_like(t)]
    k = 1
    while len(rows) < n:
        rows.append(np.cos(k * t))
        if len(rows) < n:
            rows.append(np.sin(k * t))
        k += 1
    return np.array(rows)


@dataclass(frozen=True, eq=False)
class EvalMatrix:
    """Basis values on the candidate grid, ``values[i, k] = f_i(x_k)``."""

    values: np.ndarray
    basis: BasisSpec
    candidates: CandidateSet

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def size(self) -> int:
        return self.values.shape[1]

    @property
    def is_real(self) -> bool:
        return not np.iscomplexobj(self.values)

    def transformed(self, T: np.ndarray) -> "EvalMatrix":
        """The same space in the basis ``T F``."""
        vals = np.asarray(T) @ self.values
        _check_rank(vals)
        vals.setflags(write=False)
        return EvalMatrix(vals, self.basis, self.candidates)


def _check_rank(values):
    n = values.shape[0]
    if values.shape[1] < n:
        raise RankDeficientError(
            f"basis of dimension {n} cannot be independent on {values.shape[1]} points")
    s = np.linalg.svd(values, compute_uv=False)
    rank = int(np.sum(s > RANK_RTOL * s[0])) if s[0] > 0 else 0
    if rank < n:
        raise RankDeficientError(
            f"basis has numerical rank {rank} < {n} on this grid; refine the grid")


def evaluate_basis(basis: BasisSpec, candidates: CandidateSet) -> EvalMatrix:
    """Evaluate ``basis`` on every candidate point and check rank ``n``."""
    n = basis.n
    if basis.family == "custom-table":
        vals = np.array(basis.parameters["table"])
        if vals.shape != (n, len(candidates)):
            raise ValueError(
                f"custom table has shape {vals.shape}, expected {(n, len(candidates))}")
    elif basis.family == "algebraic":
        vals = _eval_algebraic(n, basis.parameters.get("kind", "monomial"),
                               candidates.points[:, 0])
    else:
        vals = _eval_trig(n, basis.parameters, candidates.points[:, 0])
    if np.iscomplexobj(vals) and np.all(vals.imag == 0):
        vals = vals.real
    vals = np.ascontiguousarray(vals, dtype=complex if np.iscomplexobj(vals) else float)
    _check_rank(vals)
    vals.setflags(write=False)
    return EvalMatrix(vals, basis, candidates)


def measure_weights(measure, size: int) -> np.ndarray:
    """Dense weight vector over the ``size`` candidates for a design or multiset."""
    w = np.zeros(size)
    support, weights = measure.atoms()
    if len(support) and (min(support) < 0 or max(support) >= size):
        raise IndexError("measure index outside the candidate range")
    np.add.at(w, np.asarray(support, dtype=int), weights)
    return w


def gram_from_weights(values: np.ndarray, w: np.ndarray) -> np.ndarray:
    """``G[i, j] = sum_k w_k f_i(x_k) conj(f_j(x_k))``."""
    G = (values * w) @ values.conj().T
    return (G + G.conj().T) / 2


def gram(eval: EvalMatrix, measure) -> np.ndarray:
    """Gram matrix of the basis in ``L2(measure)``.

    ``measure`` is a ``DesignMeasure`` or a ``SampleMultiset``; the latter
    carries weight ``multiplicity / |X|`` per point.
    """
    return gram_from_weights(eval.values, measure_weights(measure, eval.size))


def select_invertible_points(eval: EvalMatrix) -> list[int]:
    """``n`` candidate indices whose evaluation matrix is invertible.

    Greedy volume maximization via column-pivoted QR.  The rows are
    orthonormalized first so the chosen indices do not depend on the basis
    of ``V_n`` (pivoted QR is invariant under left unitary factors).
    """
    Q, _ = np.linalg.qr(eval.values.T)
    _, _, piv = scipy.linalg.qr(Q.conj().T, mode="economic", pivoting=True)
    return sorted(int(i) for i in piv[: eval.n])


def point_label(candidates: CandidateSet, index: int) -> Any:
    if candidates.labels is not None:
        return candidates.labels[index]
    p = candidates.points[index]
    return float(p[0]) if candidates.dim == 1 else [float(c) for c in p]


def point_labels(candidates: CandidateSet, indices: Sequence[int]) -> list:
    return [point_label(candidates, int(i)) for i in indices]
