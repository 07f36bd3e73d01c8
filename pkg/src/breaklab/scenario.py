"""Scenario files: schema validation, semantic checks, object construction.

A scenario is a JSON document with exactly one payload kind ("potential",
"sdot", or "field").  Loading validates against the packaged JSON schema,
then builds the referenced objects eagerly so every input problem surfaces
here as a ScenarioError, before any output is produced.
"""

from __future__ import annotations

import importlib.resources
import json
from dataclasses import dataclass

import jsonschema
import numpy as np

from . import field, geometry, potential, transport

MAX_GRID_NODES = 1_000_000
DEFAULT_RESOLUTION = 64
DEFAULT_SAMPLES = 2048
MIN_FLOW_TIMES = 8


class ScenarioError(Exception):
    """Any defect of the scenario file: unreadable, schema-invalid, or
    semantically inconsistent.  Maps to exit code 2."""


_SCHEMA = None


def load_schema() -> dict:
    global _SCHEMA
    if _SCHEMA is None:
        text = importlib.resources.files(__package__).joinpath(
            "schema.json").read_text(encoding="utf-8")
        _SCHEMA = json.loads(text)
    return _SCHEMA


@dataclass(frozen=True)
class Scenario:
    doc: dict                 # the parsed file, echoed into reports
    kind: str
    name: str
    dimension: int
    domain: geometry.ConvexPolytope
    seed: int | None          # None when the file does not pin one
    t_grid: tuple | None
    tolerances: dict
    payload: object           # PiecewiseAffinePotential | DiscreteTarget | FieldPayload


@dataclass(frozen=True)
class FieldPayload:
    grid: field.Grid
    b: field.GridVectorField
    samples: int
    resolution: int


def _build_domain(spec: dict, dimension: int) -> geometry.ConvexPolytope:
    try:
        if "vertices" in spec:
            verts = np.asarray(spec["vertices"], dtype=float)
            if verts.ndim != 2 or verts.shape[1] != dimension:
                raise ScenarioError(
                    f"domain vertices must be {dimension}-dimensional points")
            return geometry.from_vertices(verts)
        if "interval" in spec:
            if dimension != 1:
                raise ScenarioError("interval domains are 1-dimensional")
            a, b = spec["interval"]
            if not b > a:
                raise ScenarioError("interval needs a < b")
            return geometry.interval(a, b)
        if "box" in spec:
            lo, hi = spec["box"]["lo"], spec["box"]["hi"]
            if len(lo) != dimension or len(hi) != dimension:
                raise ScenarioError(
                    f"box corners must have {dimension} coordinates")
            if not all(h > l for l, h in zip(lo, hi)):
                raise ScenarioError("box needs lo < hi in every coordinate")
            return geometry.box(lo, hi)
        poly = spec["regular_polygon"]
        if dimension != 2:
            raise ScenarioError("regular_polygon domains are 2-dimensional")
        return geometry.regular_polygon(
            poly.get("center", (0.0, 0.0)), poly["radius"],
            poly.get("segments", 64))
    except geometry.GeometryError as err:
        raise ScenarioError(f"bad domain: {err}") from err


def _build_potential(doc: dict, domain, dimension: int):
    spec = doc["potential"]
    cells_raw = spec["cells"]
    grads = np.asarray(spec["gradients"], dtype=float)
    if len(grads) != len(cells_raw):
        raise ScenarioError(
            f"{len(cells_raw)} cells but {len(grads)} gradients")
    if grads.shape[1] != dimension:
        raise ScenarioError(f"gradients must be {dimension}-dimensional")
    try:
        cells = []
        for k, verts in enumerate(cells_raw):
            arr = np.asarray(verts, dtype=float)
            if arr.ndim != 2 or arr.shape[1] != dimension:
                raise ScenarioError(
                    f"cell {k} vertices must be {dimension}-dimensional points")
            cells.append(geometry.from_vertices(arr))
        partition = geometry.make_partition(domain, cells)
    except geometry.GeometryError as err:
        raise ScenarioError(f"bad partition: {err}") from err
    issues = geometry.validate_partition(partition)
    if issues:
        raise ScenarioError("cells do not tile the domain: " + issues[0])
    try:
        if "offsets" in spec:
            offsets = np.asarray(spec["offsets"], dtype=float)
            if len(offsets) != len(cells):
                raise ScenarioError(
                    f"{len(cells)} cells but {len(offsets)} offsets")
            return potential.make_potential(partition, grads, offsets)
        offsets = potential.solve_offsets(partition, grads)
        return potential.make_potential(partition, grads, offsets)
    except potential.PotentialError as err:
        raise ScenarioError(f"bad potential: {err}") from err


def _build_target(doc: dict, domain, dimension: int):
    spec = doc["target"]
    sites = np.asarray(spec["sites"], dtype=float)
    if sites.ndim != 2 or sites.shape[1] != dimension:
        raise ScenarioError(f"sites must be {dimension}-dimensional points")
    try:
        return transport.DiscreteTarget(domain, sites, spec["masses"])
    except transport.TransportError as err:
        raise ScenarioError(f"bad target: {err}") from err


def _build_field(doc: dict, domain, dimension: int) -> FieldPayload:
    spec = doc["field"]
    resolution = spec.get("resolution", DEFAULT_RESOLUTION)
    samples = spec.get("samples", DEFAULT_SAMPLES)
    if resolution ** dimension > MAX_GRID_NODES:
        raise ScenarioError(
            f"resolution {resolution} in dimension {dimension} exceeds "
            f"{MAX_GRID_NODES} grid nodes")
    try:
        grid = field.make_grid(domain, resolution)
        b = field.build_field(grid, spec)
    except field.FieldError as err:
        raise ScenarioError(f"bad field: {err}") from err
    return FieldPayload(grid, b, samples, resolution)


def _check_t_grid(kind: str, t_grid):
    if t_grid is None:
        return None
    ts = tuple(float(t) for t in t_grid)
    if any(t <= 0 for t in ts):
        raise ScenarioError("t_grid entries must be positive")
    if kind == "field":
        if any(a <= b for a, b in zip(ts, ts[1:])):
            raise ScenarioError(
                "field scenarios need a strictly decreasing t_grid")
    elif len(set(ts)) < MIN_FLOW_TIMES:
        raise ScenarioError(
            f"potential and sdot scenarios need at least {MIN_FLOW_TIMES} "
            f"distinct flow times")
    return ts


def load_scenario(path: str) -> Scenario:
    """Read, schema-validate, and semantically validate a scenario file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as err:
        raise ScenarioError(f"cannot read {path}: {err}") from err
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as err:
        raise ScenarioError(f"{path} is not valid JSON: {err}") from err
    try:
        jsonschema.validate(doc, load_schema())
    except jsonschema.ValidationError as err:
        where = "/".join(str(p) for p in err.absolute_path) or "(top level)"
        raise ScenarioError(
            f"{path} violates the scenario schema at {where}: {err.message}"
        ) from err
    kind = doc["kind"]
    dimension = doc["dimension"]
    domain = _build_domain(doc["domain"], dimension)
    t_grid = _check_t_grid(kind, doc.get("t_grid"))
    if kind == "potential":
        payload = _build_potential(doc, domain, dimension)
    elif kind == "sdot":
        payload = _build_target(doc, domain, dimension)
    else:
        payload = _build_field(doc, domain, dimension)
    seed = doc.get("seed")
    return Scenario(doc, kind, doc["name"], dimension, domain,
                    seed, t_grid, dict(doc.get("tolerances", {})), payload)
