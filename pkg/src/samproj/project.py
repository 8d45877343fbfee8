"""Sampling projections and discrete Chebyshev fits.

A least-squares operator maps sample values ``(f(x_1), ..., f(x_s))`` to
basis coefficients; its ``phi_table`` holds the functions ``phi_j`` with
``Af = sum_j f(x_j) phi_j`` evaluated on the candidate grid.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Union

import numpy as np
import scipy.linalg
from scipy.optimize import linprog

from .design import DesignMeasure
from .space import EvalMatrix, SingularGramError, point_labels
from .subsample import SampleMultiset

COND_WARN = 1e8
COND_ERROR = 1e12
LP_TOL = 1e-9
ACTIVE_TOL = 1e-9


class IllConditionedWarning(RuntimeWarning):
    pass


class ChebyshevFitError(ValueError):
    """Least-maximum fit is undefined (rank) or the LP solver failed."""


@dataclass(frozen=True, eq=False)
class ProjectionOperator:
    kind: str
    sample_indices: tuple
    sample_weights: np.ndarray
    coeff_map: np.ndarray
    phi_table: np.ndarray
    eval: EvalMatrix

    @property
    def n_samples(self) -> int:
        return len(self.sample_indices)

    def to_json(self) -> dict:
        C = self.coeff_map
        coeff = ({"real": C.real.tolist(), "imag": C.imag.tolist()}
                 if np.iscomplexobj(C) else C.tolist())
        return {
            "kind": self.kind,
            "sample_indices": list(self.sample_indices),
            "sample_points": point_labels(self.eval.candidates, self.sample_indices),
            "sample_weights": [float(v) for v in self.sample_weights],
            "coeff_map": coeff,
        }

    @classmethod
    def from_json(cls, data: dict, eval: EvalMatrix) -> "ProjectionOperator":
        C = data["coeff_map"]
        C = (np.asarray(C["real"]) + 1j * np.asarray(C["imag"])) if isinstance(C, dict) \
            else np.asarray(C, dtype=float)
        return cls(data["kind"], tuple(data["sample_indices"]),
                   np.asarray(data["sample_weights"], dtype=float), C, C.T @ eval.values, eval)


@dataclass(frozen=True)
class ChebyshevFit:
    coefficients: np.ndarray
    error: float
    active_indices: tuple


def build_least_squares(
    eval: EvalMatrix, measure: Union[SampleMultiset, DesignMeasure]
) -> ProjectionOperator:
    """Weighted least-squares projection onto ``V_n``.

    For a multiset every sample (with repetition) gets weight ``1/|X|``;
    for a design the weights are the design weights.  The normal equations
    are solved through a QR factorization of the weighted sample matrix,
    whose ``R`` factor is the Cholesky factor of the Gram matrix.
    """
    if isinstance(measure, SampleMultiset):
        idx = measure.indices
        lam = np.full(len(idx), 1.0 / len(idx))
        kind = "unweighted-least-squares"
    else:
        idx = measure.support
        lam = np.asarray(measure.weights, dtype=float)
        kind = "weighted-least-squares"
    E = eval.values[:, list(idx)]
    sq = np.sqrt(lam)
    Q, R = np.linalg.qr(E.T * sq[:, None])
    diag = np.abs(np.diag(R))
    if diag.min() <= 1e-14 * max(diag.max(), 1e-300):
        raise SingularGramError(
            f"{kind} measure on {len(idx)} samples does not norm V_n (singular Gram)")
    s = np.linalg.svd(R, compute_uv=False)
    cond = (s[0] / s[-1]) ** 2
    if cond > COND_ERROR:
        raise SingularGramError(f"Gram condition number {cond:.3e} exceeds {COND_ERROR:g}")
    if cond > COND_WARN:
        warnings.warn(f"Gram condition number {cond:.3e}", IllConditionedWarning, stacklevel=2)
    coeff = scipy.linalg.solve_triangular(R, Q.conj().T * sq[None, :])
    coeff.setflags(write=False)
    phi = coeff.T @ eval.values
    phi.setflags(write=False)
    return ProjectionOperator(kind, tuple(idx), lam, coeff, phi, eval)


def apply_projection(op: ProjectionOperator, samples) -> tuple[np.ndarray, np.ndarray]:
    """Coefficients and candidate-grid values of the projection of ``samples``."""
    y = np.asarray(samples)
    if y.shape != (op.n_samples,):
        raise ValueError(f"expected {op.n_samples} sample values, got shape {y.shape}")
    c = op.coeff_map @ y
    return c, c @ op.eval.values


def lebesgue_function(op: ProjectionOperator) -> np.ndarray:
    return np.sum(np.abs(op.phi_table), axis=0)


def operator_norm(op: ProjectionOperator) -> float:
    """Sup-norm operator norm: max over the grid of ``sum_j |phi_j(x)|``."""
    return float(lebesgue_function(op).max())


def _real_mode(eval: EvalMatrix, samples):
    if not eval.is_real:
        raise ChebyshevFitError("least-maximum fitting supports real-valued spaces only")
    y = np.asarray(samples)
    if np.iscomplexobj(y):
        if np.any(y.imag != 0):
            raise ChebyshevFitError("least-maximum fitting needs real sample values")
        y = y.real
    return y.astype(float)


def chebyshev_lp(E: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Minimize ``max_j |sum_i c_i E[i, j] - y_j|`` over real ``c`` by LP."""
    n, s = E.shape
    ones = np.ones((s, 1))
    A_ub = np.block([[E.T, -ones], [-E.T, -ones]])
    b_ub = np.concatenate([y, -y])
    cost = np.zeros(n + 1)
    cost[-1] = 1.0
    bounds = [(None, None)] * n + [(0, None)]
    res = linprog(cost, A_ub=A_ub, b_ub=b_ub, bounds=bounds, method="highs",
                  options={"primal_feasibility_tolerance": LP_TOL,
                           "dual_feasibility_tolerance": LP_TOL})
    if res.status != 0:
        raise ChebyshevFitError(f"LP solver failed: {res.message}")
    return res.x[:n]


def least_maximum_fit(eval: EvalMatrix, x_set: SampleMultiset, samples) -> ChebyshevFit:
    """Discrete Chebyshev fit of ``samples`` on ``x_set`` (real spaces)."""
    y = _real_mode(eval, samples)
    idx = list(x_set.indices)
    if y.shape != (len(idx),):
        raise ValueError(f"expected {len(idx)} sample values, got shape {y.shape}")
    E = eval.values[:, idx]
    sv = np.linalg.svd(E, compute_uv=False)
    if len(sv) < eval.n or sv[-1] <= 1e-10 * sv[0]:
        raise ChebyshevFitError("a nonzero element of V_n vanishes on the fit set")
    c = chebyshev_lp(E, y)
    resid = np.abs(c @ E - y)
    err = float(resid.max())
    active = tuple(sorted({idx[j] for j in np.flatnonzero(resid >= err - ACTIVE_TOL)}))
    return ChebyshevFit(c, err, active)


def best_uniform_error(eval: EvalMatrix, f_values) -> float:
    """``inf_{g in V_n} max_grid |f - g|`` via the LP on the whole grid."""
    full = SampleMultiset(tuple(range(eval.size)))
    return least_maximum_fit(eval, full, f_values).error
