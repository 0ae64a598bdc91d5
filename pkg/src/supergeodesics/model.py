"""Model files: JSON descriptions of a chart, metric, initial data and
verification fixtures.

Schema (version 1)::

    {
      "schema_version": 1,
      "name": "...",
      "signature": {"even": ["x"], "odd": ["th1", "th2"]},
      "metric": [["1", "0", ...], ...],          # expression strings
      "domain": {"x": [lo, hi]},                  # open body box, even coords
      "L": 2,                                     # default generator count
      "initial_conditions": {
        "name": {"L": 1,                          # optional override
                 "position": {"x": 0.0, "th1": [[1, 1.0]]},
                 "velocity": {...}}},
      "morphisms": {"name": {"pullbacks": {"x": "x", ...}}},
      "defaults": {"dt": 0.001, "t_end": 1.0},
      "tolerances": {...},                        # per-check overrides
      "verify": {"ic": "name", "exp_points": [[...], ...],
                 "base_point": [...], "vectors": [{...}, ...],
                 "isometries": [...], "negative_controls": [...],
                 "point_symmetries": [...]}
    }

Grassmann values are either a plain number (body value; odd coordinates only
accept 0) or a list of [mask, coefficient] pairs, where bit g of the integer
mask selects generator g.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Mapping

from .errors import ModelError, SuperGeometryError
from .geodesics import InitialCondition
from .geometry import MetricChart, SuperPoint
from .grassmann import GrassmannElement
from .superexpr import ChartSignature, SuperMorphism

SCHEMA_VERSION = 1


def grassmann_value(raw, L: int, where: str) -> GrassmannElement:
    """Decode a model-file Grassmann value (number or [[mask, coeff], ...])."""
    if isinstance(raw, (int, float)):
        return GrassmannElement.from_scalar(float(raw), L)
    if isinstance(raw, list):
        try:
            return GrassmannElement.from_pairs(raw, L)
        except (TypeError, ValueError) as exc:
            raise ModelError(f"{where}: bad Grassmann value {raw!r}: {exc}") from exc
    raise ModelError(f"{where}: expected number or [[mask, coeff], ...], "
                     f"got {raw!r}")


@dataclass
class ModelFile:
    """A loaded and validated model."""

    name: str
    chart: MetricChart
    L: int
    initial_conditions: dict[str, InitialCondition]
    morphisms: dict[str, SuperMorphism]
    defaults: dict[str, float]
    tolerances: dict[str, float]
    verify_config: dict = field(default_factory=dict)

    @property
    def sig(self) -> ChartSignature:
        return self.chart.sig

    def initial_condition(self, name: str) -> InitialCondition:
        try:
            return self.initial_conditions[name]
        except KeyError:
            raise ModelError(
                f"model {self.name!r} has no initial condition {name!r}; "
                f"available: {sorted(self.initial_conditions)}") from None

    def morphism(self, name: str) -> SuperMorphism:
        try:
            return self.morphisms[name]
        except KeyError:
            raise ModelError(
                f"model {self.name!r} has no morphism {name!r}; "
                f"available: {sorted(self.morphisms)}") from None


def bundled_models() -> list[str]:
    """Names of the model files shipped with the package."""
    out = []
    for entry in resources.files("supergeodesics.models").iterdir():
        if entry.name.endswith(".json"):
            out.append(entry.name[:-len(".json")])
    return sorted(out)


def _read_model_text(spec: str | Path) -> tuple[str, str]:
    path = Path(spec)
    if path.suffix == ".json" or path.exists():
        try:
            return path.stem, path.read_text()
        except OSError as exc:
            raise ModelError(f"cannot read model file {path}: {exc}") from exc
    candidate = resources.files("supergeodesics.models") / f"{spec}.json"
    if candidate.is_file():
        return str(spec), candidate.read_text()
    raise ModelError(f"no model file or bundled model named {spec!r}; "
                     f"bundled: {bundled_models()}")


def _require(data: Mapping, key: str, where: str):
    if key not in data:
        raise ModelError(f"{where}: missing required key {key!r}")
    return data[key]


def _build_ic(name: str, raw: Mapping, sig: ChartSignature,
              default_L: int) -> InitialCondition:
    where = f"initial_conditions[{name!r}]"
    L = int(raw.get("L", default_L))
    pos_raw = _require(raw, "position", where)
    vel_raw = raw.get("velocity", {})
    try:
        position = SuperPoint(sig, L, {
            n: grassmann_value(pos_raw.get(n, 0.0), L, f"{where}.position.{n}")
            for n in sig.names})
        velocity = {n: grassmann_value(vel_raw.get(n, 0.0), L,
                                       f"{where}.velocity.{n}")
                    for n in sig.names}
        return InitialCondition(L, position, velocity)
    except SuperGeometryError as exc:
        raise ModelError(f"{where}: {exc}") from exc


def load_model(spec: str | Path) -> ModelFile:
    """Load a model by path or bundled name; raises ModelError on problems."""
    name, text = _read_model_text(spec)
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelError(f"model {name!r}: invalid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ModelError(f"model {name!r}: top level must be an object")
    version = data.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ModelError(f"model {name!r}: unsupported schema_version {version}")
    name = data.get("name", name)

    sig_raw = _require(data, "signature", name)
    try:
        sig = ChartSignature(tuple(sig_raw.get("even", ())),
                             tuple(sig_raw.get("odd", ())))
    except (ValueError, TypeError) as exc:
        raise ModelError(f"model {name!r}: bad signature: {exc}") from exc

    metric_raw = _require(data, "metric", name)
    domain = {k: (float(v[0]), float(v[1]))
              for k, v in data.get("domain", {}).items()}
    try:
        chart = MetricChart(sig, metric_raw, domain, name=name)
    except SuperGeometryError as exc:
        raise ModelError(f"model {name!r}: bad metric: {exc}") from exc
    except ValueError as exc:
        raise ModelError(f"model {name!r}: bad metric: {exc}") from exc

    L = int(data.get("L", 0))
    ics = {ic_name: _build_ic(ic_name, ic_raw, sig, L)
           for ic_name, ic_raw in data.get("initial_conditions", {}).items()}

    morphisms = {}
    for m_name, m_raw in data.get("morphisms", {}).items():
        try:
            morphisms[m_name] = SuperMorphism(
                sig, sig, _require(m_raw, "pullbacks", f"morphisms[{m_name!r}]"))
        except SuperGeometryError as exc:
            raise ModelError(f"morphisms[{m_name!r}]: {exc}") from exc

    defaults = {"dt": 1e-3, "t_end": 1.0}
    defaults.update({k: float(v) for k, v in data.get("defaults", {}).items()})
    tolerances = {k: float(v) for k, v in data.get("tolerances", {}).items()}
    verify_config = data.get("verify", {})

    return ModelFile(name=name, chart=chart, L=L, initial_conditions=ics,
                     morphisms=morphisms, defaults=defaults,
                     tolerances=tolerances, verify_config=verify_config)


def vector_from_spec(raw: Mapping, sig: ChartSignature, L: int, base,
                     where: str = "vector"):
    """Decode a tangent-vector spec {coord: grassmann value} at a body point."""
    from .expmap import TangentFiberPoint

    vec = {n: grassmann_value(raw.get(n, 0.0), L, f"{where}.{n}")
           for n in sig.names}
    try:
        return TangentFiberPoint(sig, L, base, vec)
    except SuperGeometryError as exc:
        raise ModelError(f"{where}: {exc}") from exc
