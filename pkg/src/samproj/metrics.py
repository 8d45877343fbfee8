"""Constants that the sampling constructions are supposed to keep small.

:func:`verify_space` runs the whole pipeline for one space and returns a
:class:`VerificationReport` comparing every measured constant with its
ceiling.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import linprog

from .config import PipelineConfig
from .design import (
    DesignMeasure,
    caratheodory_reduce,
    christoffel_values,
    dim_product_space,
    kw_certificate,
    optimize_design,
)
from .project import (
    ChebyshevFitError,
    LP_TOL,
    apply_projection,
    best_uniform_error,
    build_least_squares,
    least_maximum_fit,
    operator_norm,
)
from .space import (
    CandidateSet,
    EvalMatrix,
    SingularGramError,
    build_candidate_set,
    evaluate_basis,
    gram,
)
from .subsample import (
    SampleMultiset,
    discretization_constant,
    subsample_to,
    union_multisets,
)

log = logging.getLogger(__name__)

SLACK = 1e-8
ZERO_ERROR = 1e-12

# ceiling name -> inequality it comes from
CEILING_SOURCES = {
    "design_certificate": "max_x F(x)* G^-1 F(x) <= n + eps at a near D-optimal design",
    "nikolskii": "||f||_inf <= sqrt(n + eps) ||f||_L2(design) on V_n",
    "disc_sup": "||f||_inf <= 58 sqrt(n) ||f||_X for the 2n-point set X",
    "disc_sup_unnormalized": "||f||_inf <= 42 (sum_X |f(x)|^2)^(1/2) for |X| = 2n",
    "projection_norm": "||A(X)|| <= 60 (min(b,2)-1)^(-3/2) sqrt(n) for the unweighted projection",
    "weighted_projection_norm": "||A(design)|| <= (1 + eps) sqrt(n) for the weighted projection",
    "interpolating_projection": "||A(design)|| <= n + 1 (interpolating projection comparison)",
    "norm_chain": "||A(X)|| <= disc_sup (projection norm is dominated by the discretization constant)",
    "disc_lp": "||f||_Lp <= 83 n^(1/2-1/p) ||f||_Z on the 4n-point union Z",
    "lebesgue": "||f - A(X)f||_inf <= (1 + disc_sup) inf_g ||f - g||_inf",
    "lp_error_ratio": "||f - A(Z)f||_Lp <= 84 n^((1/2-1/p)_+) inf_g ||f - g||_inf",
    "least_maximum_error": "||f - Mf||_inf <= (2 c1 + 1) inf_g ||f - g||_inf",
    "least_maximum_norm": "||Mf||_inf <= (2 + 2 c1) ||f||_inf",
}


def nikolskii_constant(eval: EvalMatrix, measure) -> float:
    """``sup_x sqrt(F(x)* G^-1 F(x))`` for the Gram matrix of ``measure``."""
    return float(np.sqrt(christoffel_values(eval.values, gram(eval, measure)).max()))


def lp_norm(values: np.ndarray, weights: np.ndarray, p: float) -> float:
    a = np.abs(values)
    if math.isinf(p):
        return float(a[weights > 0].max())
    return float(np.dot(weights, a ** p) ** (1.0 / p))


@dataclass(frozen=True)
class LpEstimate:
    value: float
    p: float
    exact: bool
    starts: int

    def to_json(self) -> dict:
        return {"value": self.value, "exact": self.exact, "starts": self.starts}


def _x_orthonormal(eval, x_set):
    G = gram(eval, x_set)
    ev = np.linalg.eigvalsh(G)
    if ev[0] <= 1e-12 * ev.sum():
        raise SingularGramError("multiset does not norm V_n")
    L = np.linalg.cholesky(G)
    return np.linalg.solve(L, eval.values)


def estimate_lp_constant(
    eval: EvalMatrix,
    ground: CandidateSet,
    x_set: SampleMultiset,
    p: float,
    starts: int = 32,
    seed: int = 0,
    max_steps: int = 500,
) -> LpEstimate:
    """``sup_{f in V_n} ||f||_Lp(ground) / ||f||_X``.

    Exact for ``p = 2`` (largest eigenvalue) and ``p = inf``.  For other
    ``p`` the ratio is maximized over the unit sphere of an X-orthonormal
    coefficient space by projected gradient ascent (full steps, i.e. the
    normalized-gradient iteration, which is monotone for convex objectives)
    from ``starts`` random points plus the sup-norm maximizer; the result
    is then a lower estimate.
    """
    if math.isinf(p):
        return LpEstimate(discretization_constant(eval, x_set), p, True, 0)
    B = _x_orthonormal(eval, x_set)
    mu = np.asarray(ground.ground_weights)
    if p == 2:
        K = (B * mu) @ B.conj().T
        lam = np.linalg.eigvalsh((K + K.conj().T) / 2)[-1]
        return LpEstimate(float(np.sqrt(max(lam, 0.0))), p, True, 0)

    n = B.shape[0]
    complex_mode = np.iscomplexobj(B)
    rng = np.random.default_rng(seed)
    inits = []
    kstar = int(np.argmax(np.sum(np.abs(B) ** 2, axis=0)))
    inits.append(B[:, kstar].conj())
    for _ in range(starts):
        a = rng.standard_normal(n)
        if complex_mode:
            a = a + 1j * rng.standard_normal(n)
        inits.append(a)

    def objective(a):
        return float(np.dot(mu, np.abs(a @ B) ** p))

    best = 0.0
    for a in inits:
        a = a / np.linalg.norm(a)
        J = objective(a)
        for _ in range(max_steps):
            f = a @ B
            grad = (mu * np.abs(f) ** (p - 2) * f) @ B.conj().T
            norm = np.linalg.norm(grad)
            if norm == 0:
                break
            a_new = grad / norm
            J_new = objective(a_new)
            if J_new <= J * (1 + 1e-13):
                J = max(J, J_new)
                break
            a, J = a_new, J_new
        best = max(best, J)
    return LpEstimate(best ** (1.0 / p), p, False, starts + 1)


def lp_discretization_constant(eval, ground, x_set, p, starts: int = 32, seed: int = 0) -> float:
    return estimate_lp_constant(eval, ground, x_set, p, starts, seed).value


def interpolation_bound(c2: float, cinf: float, p: float) -> float:
    """Upper bound ``c2^(2/p) cinf^(1-2/p)`` on the Lp constant, ``2 <= p <= inf``."""
    if math.isinf(p):
        return cinf
    return c2 ** (2.0 / p) * cinf ** (1.0 - 2.0 / p)


def discrete_sup_constant(eval: EvalMatrix, x_set: SampleMultiset) -> float:
    """``sup_{g in V_n} ||g||_inf / max_X |g|`` (real spaces), one LP per grid point."""
    if not eval.is_real:
        raise ChebyshevFitError("discrete sup constant is implemented for real spaces only")
    idx = sorted(set(x_set.indices))
    E = eval.values[:, idx]
    A_ub = np.vstack([E.T, -E.T])
    b_ub = np.ones(2 * len(idx))
    inside = set(idx)
    best = 1.0
    for k in range(eval.size):
        if k in inside:
            continue
        res = linprog(-eval.values[:, k], A_ub=A_ub, b_ub=b_ub,
                      bounds=[(None, None)] * eval.n, method="highs",
                      options={"primal_feasibility_tolerance": LP_TOL,
                               "dual_feasibility_tolerance": LP_TOL})
        if res.status != 0:
            raise ChebyshevFitError(f"discrete sup LP failed at point {k}: {res.message}")
        best = max(best, -res.fun)
    return float(best)


def lp_error_ratio(eval, ground: CandidateSet, x_set: SampleMultiset, p: float, f_values,
                   best_error: Optional[float] = None) -> float:
    """``||f - A(X)f||_Lp(ground) / inf_g ||f - g||_inf`` with the 0/0 := 0 convention."""
    f = np.asarray(f_values)
    op = build_least_squares(eval, x_set)
    _, approx = apply_projection(op, f[list(x_set.indices)])
    num = lp_norm(f - approx, np.asarray(ground.ground_weights), p)
    den = best_uniform_error(eval, f) if best_error is None else best_error
    scale = max(1.0, float(np.abs(f).max()))
    if den <= ZERO_ERROR * scale:
        if num <= ZERO_ERROR * scale:
            return 0.0
        raise ValueError(
            f"best approximation error is zero but the projection residual is {num:.3e}")
    return num / den


# -- test functions --------------------------------------------------------

def _unit_coordinate(candidates: CandidateSet, domain: dict) -> np.ndarray:
    t = candidates.points[:, 0]
    kind = domain.get("kind")
    if kind == "interval":
        a, b = (float(v) for v in domain["bounds"])
        return (2 * t - a - b) / (b - a) if b > a else np.zeros_like(t)
    if kind == "torus":
        return t / np.pi - 1.0
    lo, hi = t.min(), t.max()
    return (2 * t - lo - hi) / (hi - lo) if hi > lo else np.zeros_like(t)


def named_function_values(name, eval: EvalMatrix, domain: dict, seed: int = 0) -> np.ndarray:
    """Values on the candidate grid of a named test function.

    Analytic names act on the first coordinate rescaled to ``[-1, 1]``;
    ``in_space`` is a fixed random element of ``V_n``, ``noise`` fixed
    random values; ``{"name", "csv"}`` loads one value per candidate.
    """
    if isinstance(name, dict):
        vals = np.loadtxt(name["csv"], delimiter=",", ndmin=1)
        if vals.shape != (eval.size,):
            raise ValueError(f"{name['csv']}: expected {eval.size} values")
        return vals
    u = _unit_coordinate(eval.candidates, domain)
    rng = np.random.default_rng([seed, sum(map(ord, name))])
    table = {
        "abs": lambda: np.abs(u),
        "abs_shift": lambda: np.abs(u - 0.3),
        "step": lambda: (u >= 0.1).astype(float),
        "sign": lambda: np.sign(u),
        "runge": lambda: 1.0 / (1.0 + 25.0 * u ** 2),
        "sqrt_abs": lambda: np.sqrt(np.abs(u)),
        "exp": lambda: np.exp(u),
        "sawtooth": lambda: 3 * u - np.floor(3 * u),
        "highfreq": lambda: np.cos(9.5 * np.pi * u),
        "noise": lambda: rng.uniform(-1, 1, eval.size),
        "indicator": lambda: (np.arange(eval.size) == eval.size // 3).astype(float),
        "in_space": lambda: _in_space(eval, rng),
    }
    if name not in table:
        raise ValueError(f"unknown test function {name!r}")
    return table[name]()


def _in_space(eval, rng):
    c = rng.standard_normal(eval.n)
    if not eval.is_real:
        c = c + 1j * rng.standard_normal(eval.n)
    g = c @ eval.values
    return g / np.abs(g).max()


def _fname(t):
    return t if isinstance(t, str) else t["name"]


# -- report ----------------------------------------------------------------

@dataclass
class VerificationReport:
    space: dict
    design: dict
    subsample: dict
    l2_subsample: dict
    constants: dict
    ceilings: dict
    passed: dict
    error_ratios: dict
    oracle: Optional[dict] = None
    artifacts: dict = field(default_factory=dict, repr=False)

    @property
    def all_pass(self) -> bool:
        return all(self.passed.values())

    def to_json(self) -> dict:
        out = {
            "space": self.space,
            "design": self.design,
            "subsample": self.subsample,
            "l2_subsample": self.l2_subsample,
            "constants": self.constants,
            "ceilings": self.ceilings,
            "pass": self.passed,
            "all_pass": self.all_pass,
            "error_ratios": self.error_ratios,
        }
        if self.oracle is not None:
            out["oracle"] = self.oracle
        return _jsonable(out)

    def to_text(self) -> str:
        lines = [
            f"space: {self.space['family']} n={self.space['n']} grid={self.space['grid_size']}",
            f"{'check':<36}{'measured':>14}{'ceiling':>14}  result",
        ]
        for name, ceil in self.ceilings.items():
            meas = ceil["measured"]
            lines.append(f"{name:<36}{_fmt(meas):>14}{_fmt(ceil['bound']):>14}  "
                         f"{'PASS' if self.passed[name] else 'FAIL'}")
        lines.append("")
        lines.append(f"{'test function':<16}{'ls_error':>12}{'lm_error':>12}{'best':>12}{'ratio':>10}")
        for fname, r in self.error_ratios.items():
            if "skipped" in r:
                lines.append(f"{fname:<16}  skipped: {r['skipped']}")
                continue
            lines.append(f"{fname:<16}{_fmt(r['ls_error']):>12}{_fmt(r['lm_error']):>12}"
                         f"{_fmt(r['best_error']):>12}{_fmt(r['ratio']):>10}")
        lines.append("")
        lines.append(f"overall: {'PASS' if self.all_pass else 'FAIL'}")
        return "\n".join(lines) + "\n"


def _fmt(v):
    if v is None:
        return "-"
    return f"{v:.6g}"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else ("inf" if v > 0 else ("-inf" if v < 0 else "nan"))
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def p_key(p: float) -> str:
    return "inf" if math.isinf(p) else f"{p:g}"


def projection_norm_ceiling(n: int, b: float) -> float:
    return 60.0 * (min(b, 2.0) - 1.0) ** -1.5 * math.sqrt(n)


def build_pipeline_inputs(config: PipelineConfig) -> EvalMatrix:
    cand = build_candidate_set(config.domain, config.ground_measure)
    if config.labels is not None:
        cand = CandidateSet(cand.points, cand.ground_weights, tuple(config.labels))
    return evaluate_basis(config.basis, cand)


class StageError(RuntimeError):
    """A pipeline stage failed; ``stage`` names it."""

    def __init__(self, stage: str, exc: Exception):
        super().__init__(f"stage '{stage}' failed: {exc}")
        self.stage = stage
        self.__cause__ = exc


def verify_space(config: PipelineConfig) -> VerificationReport:
    """Run design, reduction, subsampling and projection and check every ceiling."""
    stage = "space"
    try:
        eval = build_pipeline_inputs(config)
        n, M = eval.n, eval.size
        cand = eval.candidates
        mu = np.asarray(cand.ground_weights)
        ground = DesignMeasure.from_dense(mu)
        eps = config.eps

        stage = "design"
        result = optimize_design(eval, eps, config.max_iters)
        if not result.certified:
            raise RuntimeError(
                f"design not certified within {config.max_iters} iterations "
                f"(sup {result.certificate.sup_value:.6g} > {n + eps:.6g})")
        r = dim_product_space(eval)
        stage = "reduce"
        reduced = caratheodory_reduce(eval, result.design)
        cert = kw_certificate(eval, reduced, eps)

        stage = "subsample"
        target = config.target
        sup_ceiling = (58.0 if config.b >= 2 else projection_norm_ceiling(1, config.b)) * math.sqrt(n)
        x_set, x_rep = subsample_to(eval, reduced, target, config.seed, config.max_retries,
                                    norm="sup", ceiling=sup_ceiling)
        p_set, p_rep = subsample_to(eval, ground, target, config.seed, config.max_retries,
                                    norm="l2")
        z_set = union_multisets(p_set, x_set)

        stage = "project"
        op_x = build_least_squares(eval, x_set)
        op_w = build_least_squares(eval, reduced)
        op_z = build_least_squares(eval, z_set)

        stage = "metrics"
        nik = nikolskii_constant(eval, reduced)
        disc_sup = discretization_constant(eval, x_set)
        proj_norm = operator_norm(op_x)
        wproj_norm = operator_norm(op_w)
        c2_z = estimate_lp_constant(eval, cand, z_set, 2.0).value
        cinf_z = discretization_constant(eval, z_set)
        disc_lp = {}
        for p in config.p_values:
            if p < 2:
                continue
            est = estimate_lp_constant(eval, cand, z_set, p, config.lp_starts, config.seed)
            disc_lp[p_key(p)] = {
                **est.to_json(),
                "lower_estimate": not est.exact,
                "chain_bound": interpolation_bound(c2_z, cinf_z, p),
            }
        c1 = None
        if config.discrete_sup and eval.is_real:
            c1 = discrete_sup_constant(eval, x_set)

        ceilings, passed = {}, {}

        def check(name, measured, bound, key=None):
            key = key or name
            ceilings[key] = {"measured": measured, "bound": bound, "source": CEILING_SOURCES[name]}
            passed[key] = bool(measured <= bound + SLACK)

        check("design_certificate", cert.sup_value, n + eps)
        check("nikolskii", nik, math.sqrt(n + eps))
        check("disc_sup", disc_sup, sup_ceiling)
        if len(x_set) == 2 * n:
            check("disc_sup_unnormalized", disc_sup / math.sqrt(2 * n), 42.0)
        check("projection_norm", proj_norm, projection_norm_ceiling(n, config.b))
        check("weighted_projection_norm", wproj_norm, (1 + eps) * math.sqrt(n))
        check("interpolating_projection", wproj_norm, n + 1.0)
        check("norm_chain", proj_norm, disc_sup)
        lp_factor = 83.0 if config.b >= 2 else None
        if lp_factor is not None:
            for key, entry in disc_lp.items():
                p = math.inf if key == "inf" else float(key)
                expo = 0.5 - (0.0 if math.isinf(p) else 1.0 / p)
                check("disc_lp", entry["chain_bound"], lp_factor * n ** expo, f"disc_lp_{key}")

        stage = "error_ratios"
        ratios = {}
        x_idx = list(x_set.indices)
        for t in config.test_functions:
            fname = _fname(t)
            f = named_function_values(t, eval, config.domain, config.seed)
            _, ls = apply_projection(op_x, f[x_idx])
            ls_err = float(np.abs(f - ls).max())
            if not eval.is_real:
                ratios[fname] = {"ls_error": ls_err, "skipped": "complex space: no LP oracle"}
                continue
            best = best_uniform_error(eval, f)
            fit = least_maximum_fit(eval, x_set, f[x_idx])
            mf = fit.coefficients @ eval.values
            lm_err = float(np.abs(f - mf).max())
            entry = {
                "ls_error": ls_err,
                "lm_error": lm_err,
                "best_error": best,
                "ratio": ls_err / best if best > ZERO_ERROR else 0.0,
                "lp_ratios": {},
            }
            check("lebesgue", ls_err, (1 + disc_sup) * best, f"lebesgue[{fname}]")
            for p in config.p_values:
                ratio = lp_error_ratio(eval, cand, z_set, p, f, best)
                entry["lp_ratios"][p_key(p)] = ratio
                if config.b >= 2:
                    expo = max(0.5 - (0.0 if math.isinf(p) else 1.0 / p), 0.0)
                    check("lp_error_ratio", ratio, 84.0 * n ** expo,
                          f"lp_error_ratio_{p_key(p)}[{fname}]")
            if c1 is not None:
                check("least_maximum_error", lm_err, (2 * c1 + 1) * best,
                      f"least_maximum_error[{fname}]")
                check("least_maximum_norm", float(np.abs(mf).max()),
                      (2 + 2 * c1) * float(np.abs(f).max()), f"least_maximum_norm[{fname}]")
            ratios[fname] = entry

        oracle = None
        if config.oracle_check:
            stage = "oracle"
            from .oracle import oracle_check
            oracle = oracle_check(eval, result.design, x_rep, target, eps)
            passed["oracle_design"] = oracle.get("design_match", True)
    except StageError:
        raise
    except Exception as exc:
        raise StageError(stage, exc) from exc

    space_desc = {"family": config.basis.family, "n": n, "grid_size": M,
                  "domain": config.domain,
                  "parameters": {k: v for k, v in config.basis.parameters.items() if k != "table"}}
    report = VerificationReport(
        space=space_desc,
        design={
            "epsilon": eps,
            "certified": result.certified,
            "iterations": result.iterations,
            "support_size": len(result.design),
            "dim_product_space": r,
            "reduced_support_size": len(reduced),
            "certificate": cert.to_json(),
            "design": reduced.to_json(cand),
        },
        subsample={**x_rep.to_json(), "samples": x_set.to_json()},
        l2_subsample={**p_rep.to_json(), "samples": p_set.to_json()},
        constants={
            "nikolskii": nik,
            "disc_sup": disc_sup,
            "disc_sup_unnormalized": disc_sup / math.sqrt(len(x_set)),
            "disc_lp": disc_lp,
            "union_size": len(z_set),
            "projection_norm": proj_norm,
            "weighted_projection_norm": wproj_norm,
            "discrete_sup_c1": c1,
        },
        ceilings=ceilings,
        passed=passed,
        error_ratios=ratios,
        oracle=oracle,
    )
    report.artifacts = {
        "eval": eval,
        "design": reduced,
        "full_design": result.design,
        "x_set": x_set,
        "z_set": z_set,
        "op_x": op_x,
        "op_w": op_w,
    }
    return report
