"""YAML (or JSON) configuration files for scenarios and experiments.

Scenario file::

    T: 2
    L: 1
    requirement: [[1], [1]]          # row-major T x L, or a generator:
    # requirement: {low: [1], high: [1], seed: 0}
    curves:
      - {scale: 1.0, exponent: 3.0, overrides: [{t: 0, scale: 2.0}]}
    spec: {kind: hard, epsilon: 0.1}
    # spec: {kind: soft, alpha: [0.8], beta: 0.9}

Experiment file: any subset of the :class:`~robust_crowdsense.sim.ExperimentConfig`
fields plus an optional ``search`` mapping of
:class:`~robust_crowdsense.soft.SoftSearchParams` fields.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import yaml

from .errors import ConfigError, DomainError, StructuralError
from .model import BiddingCurve, RobustnessSpec, Scenario
from .sim import ExperimentConfig
from .soft import SoftSearchParams
from .tail import make_rng


def load_mapping(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML: {exc}") from exc
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must be a mapping at the top level")
    return data


def _need(data, key, where="config"):
    if key not in data:
        raise ConfigError(f"{where}: missing field '{key}'")
    return data[key]


def _int(value, field):
    if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
        raise ConfigError(f"field '{field}' must be an integer, got {value!r}")
    return int(value)


def parse_spec(data):
    if not isinstance(data, dict):
        raise ConfigError("field 'spec' must be a mapping")
    kind = _need(data, "kind", "spec")
    try:
        if kind == "hard":
            return RobustnessSpec.hard(_need(data, "epsilon", "spec"))
        if kind == "soft":
            return RobustnessSpec.soft(_need(data, "alpha", "spec"), _need(data, "beta", "spec"))
    except (DomainError, TypeError, ValueError) as exc:
        raise ConfigError(f"spec: {exc}") from exc
    raise ConfigError(f"spec.kind must be 'hard' or 'soft', got {kind!r}")


def _parse_requirement(raw, T, L):
    if isinstance(raw, dict):
        low = _need(raw, "low", "requirement")
        high = _need(raw, "high", "requirement")
        if len(low) != L or len(high) != L:
            raise ConfigError(f"requirement.low and requirement.high need {L} entries")
        rng = make_rng(_int(raw.get("seed", 0), "requirement.seed"))
        return np.column_stack([rng.integers(int(lo), int(hi) + 1, size=T) for lo, hi in zip(low, high)])
    try:
        arr = np.asarray(raw, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"field 'requirement' is not a numeric matrix: {exc}") from exc
    if arr.shape != (T, L):
        raise ConfigError(f"field 'requirement' has shape {arr.shape}, expected ({T}, {L})")
    return arr


def _parse_curves(raw, T, L):
    if not isinstance(raw, list) or len(raw) != L:
        raise ConfigError(f"field 'curves' must list {L} per-location entries")
    grid = [[None] * L for _ in range(T)]
    try:
        for l, entry in enumerate(raw):
            base = BiddingCurve(float(_need(entry, "scale", f"curves[{l}]")), float(entry.get("exponent", 3.0)))
            for t in range(T):
                grid[t][l] = base
            for ov in entry.get("overrides", []) or []:
                t = _int(_need(ov, "t", f"curves[{l}].overrides"), f"curves[{l}].overrides.t")
                if not 0 <= t < T:
                    raise ConfigError(f"curves[{l}].overrides: t={t} outside [0, {T})")
                grid[t][l] = BiddingCurve(float(ov.get("scale", base.scale)), float(ov.get("exponent", base.exponent)))
    except DomainError as exc:
        raise ConfigError(f"curves: {exc}") from exc
    return grid


def scenario_from_mapping(data):
    T = _int(_need(data, "T"), "T")
    L = _int(_need(data, "L"), "L")
    if T < 1 or L < 1:
        raise ConfigError("fields 'T' and 'L' must be positive")
    req = _parse_requirement(_need(data, "requirement"), T, L)
    curves = _parse_curves(_need(data, "curves"), T, L)
    spec = parse_spec(_need(data, "spec"))
    try:
        return Scenario(T, L, req, curves, spec)
    except (DomainError, StructuralError) as exc:
        raise ConfigError(str(exc)) from exc


def load_scenario(path):
    return scenario_from_mapping(load_mapping(path))


_EXPERIMENT_FIELDS = {
    "T", "L", "r_low", "r_high", "curve_scale", "curve_exponent", "epsilons",
    "betas", "alpha_range", "replications", "master_seed",
}
_SEARCH_FIELDS = set(SoftSearchParams.__dataclass_fields__)


def experiment_from_mapping(data):
    unknown = set(data) - _EXPERIMENT_FIELDS - {"search"}
    if unknown:
        raise ConfigError(f"unknown experiment fields: {sorted(unknown)}")
    kwargs = {k: v for k, v in data.items() if k in _EXPERIMENT_FIELDS}
    for key in ("r_low", "r_high", "curve_scale", "epsilons", "betas", "alpha_range"):
        if key in kwargs and kwargs[key] is not None:
            kwargs[key] = tuple(kwargs[key])
    search = data.get("search") or {}
    if not isinstance(search, dict):
        raise ConfigError("field 'search' must be a mapping")
    bad = set(search) - _SEARCH_FIELDS
    if bad:
        raise ConfigError(f"unknown search fields: {sorted(bad)}")
    try:
        kwargs["search"] = SoftSearchParams(**search)
        return ExperimentConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def load_experiment(path=None):
    return experiment_from_mapping(load_mapping(path) if path else {})
