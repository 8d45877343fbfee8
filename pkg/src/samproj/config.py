"""Pipeline configuration parsed from JSON."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

from .space import FAMILIES, BasisSpec, load_table_csv

DEFAULT_TEST_FUNCTIONS = (
    "abs", "step", "sign", "runge", "sqrt_abs",
    "sawtooth", "highfreq", "noise", "in_space", "indicator",
)


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


@dataclass
class PipelineConfig:
    basis: BasisSpec
    domain: dict
    ground_measure: Optional[list] = None
    epsilon: Optional[float] = None
    max_iters: int = 20000
    b: float = 2.0
    seed: int = 0
    max_retries: int = 8
    p_values: tuple = (2.0, 4.0, math.inf)
    test_functions: tuple = DEFAULT_TEST_FUNCTIONS
    lp_starts: int = 32
    discrete_sup: bool = True
    oracle_check: bool = False
    output: str = "out"
    labels: Optional[list] = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.basis.n

    @property
    def eps(self) -> float:
        return 0.01 * self.n if self.epsilon is None else self.epsilon

    @property
    def target(self) -> int:
        return math.ceil(self.b * self.n - 1e-12)


def _get(d, key, where, default=None, required=False):
    if not isinstance(d, dict):
        raise ConfigError(f"{where}: expected an object")
    if key not in d:
        if required:
            raise ConfigError(f"{where}.{key}: missing required field")
        return default
    return d[key]


def _parse_p(v, where):
    if isinstance(v, str) and v.lower() in ("inf", "infinity"):
        return math.inf
    try:
        p = float(v)
    except (TypeError, ValueError):
        raise ConfigError(f"{where}: not a number: {v!r}") from None
    if not p >= 1:
        raise ConfigError(f"{where}: p must lie in [1, inf], got {v!r}")
    return p


def parse_config(data: dict, base_dir=".") -> PipelineConfig:
    """Validate a JSON config dict and build a :class:`PipelineConfig`."""
    import os

    space = _get(data, "space", "config", required=True)
    family = _get(space, "family", "space", required=True)
    if family not in FAMILIES:
        raise ConfigError(f"space.family: unknown basis family {family!r}")
    n = _get(space, "n", "space", required=True)
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise ConfigError(f"space.n: must be a positive integer, got {n!r}")
    params = dict(_get(space, "parameters", "space", default={}) or {})
    domain = _get(space, "domain", "space", default=None)
    labels = None
    if family == "custom-table":
        csv_path = params.pop("csv", None)
        if csv_path is not None:
            table, labels = load_table_csv(os.path.join(base_dir, csv_path))
            params["table"] = table
        if "table" not in params:
            raise ConfigError("space.parameters: custom-table needs 'csv' or 'table'")
        if domain is None:
            ncols = len(params["table"][0])
            domain = {"kind": "points", "points": list(range(ncols))}
    if domain is None:
        raise ConfigError("space.domain: missing required field")
    try:
        basis = BasisSpec(family, n, params)
    except ValueError as exc:
        raise ConfigError(f"space: {exc}") from None

    design = _get(data, "design", "config", default={}) or {}
    epsilon = _get(design, "epsilon", "design")
    if epsilon is not None and not (isinstance(epsilon, (int, float)) and epsilon > 0):
        raise ConfigError(f"design.epsilon: must be positive, got {epsilon!r}")
    max_iters = _get(design, "max_iters", "design", default=20000)
    if not isinstance(max_iters, int) or max_iters < 1:
        raise ConfigError("design.max_iters: must be a positive integer")

    sub = _get(data, "subsample", "config", required=True)
    b = float(_get(sub, "b", "subsample", default=2.0))
    if not b > 1 + 1 / n:
        raise ConfigError(f"subsample.b: oversampling factor must exceed 1 + 1/n = {1 + 1 / n:.4g}, got {b}")
    seed = _get(sub, "seed", "subsample", required=True)
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise ConfigError("subsample.seed: must be a nonnegative integer")
    max_retries = _get(sub, "max_retries", "subsample", default=8)
    if not isinstance(max_retries, int) or max_retries < 0:
        raise ConfigError("subsample.max_retries: must be a nonnegative integer")

    met = _get(data, "metrics", "config", default={}) or {}
    p_values = tuple(_parse_p(v, f"metrics.p_values[{i}]")
                     for i, v in enumerate(_get(met, "p_values", "metrics", default=[2, 4, "inf"])))
    tests = _get(met, "test_functions", "metrics", default=list(DEFAULT_TEST_FUNCTIONS))
    parsed_tests = []
    for i, t in enumerate(tests):
        if isinstance(t, str):
            parsed_tests.append(t)
        elif isinstance(t, dict) and "csv" in t:
            parsed_tests.append({"name": t.get("name", f"table{i}"),
                                 "csv": os.path.join(base_dir, t["csv"])})
        else:
            raise ConfigError(f"metrics.test_functions[{i}]: expected a name or {{'csv': path}}")

    return PipelineConfig(
        basis=basis,
        domain=domain,
        ground_measure=_get(space, "ground_measure", "space"),
        epsilon=None if epsilon is None else float(epsilon),
        max_iters=max_iters,
        b=b,
        seed=seed,
        max_retries=max_retries,
        p_values=p_values,
        test_functions=tuple(parsed_tests),
        lp_starts=int(_get(met, "lp_starts", "metrics", default=32)),
        discrete_sup=bool(_get(met, "discrete_sup", "metrics", default=True)),
        oracle_check=bool(data.get("oracle_check", False)),
        output=str(data.get("output", "out")),
        labels=labels,
    )
