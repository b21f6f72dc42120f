"""Declarative scenario files: strict JSON schema, validation, model building.

A scenario names a box (or a box pair), a grid of classical parameter
cells, a detector suite with per-detector settings, and a master seed.
Parsing is strict: unknown keys, duplicate keys, malformed values and
references to undeclared grid parameters are all rejected with the failing
field's path.  Complex numbers appear in files as [re, im] pairs.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass

import numpy as np

from .boxes import (
    BoxModel,
    BoxPair,
    ClassicalParams,
    CollapseNonlinear,
    ComposedBox,
    LinearBox,
    NonlinearBloch,
    NsqChannelPair,
    QracOracle,
    QracQuantum,
    measure_prepare_strategy,
)
from .channels import QuantumChannel
from .linalg import rotation_y
from .states import PureState

__all__ = [
    "GRID_LIMIT",
    "ScenarioError",
    "DetectorSpec",
    "Scenario",
    "parse_scenario",
    "parse_scenario_dict",
]

GRID_LIMIT = 10_000

_SWAP_GATE = np.array(
    [
        [1, 0, 0, 0],
        [0, 0, 1, 0],
        [0, 1, 0, 0],
        [0, 0, 0, 1],
    ],
    dtype=complex,
)


class ScenarioError(Exception):
    """A scenario file failed parsing or schema validation."""


@dataclass(frozen=True)
class _ParamRef:
    name: str


def _fail(where: str, message: str) -> None:
    raise ScenarioError(f"{where}: {message}")


def _check_keys(node: dict, required: tuple, optional: tuple, where: str) -> None:
    if not isinstance(node, dict):
        _fail(where, f"expected an object, got {type(node).__name__}")
    for key in node:
        if key not in required and key not in optional:
            _fail(f"{where}.{key}", "unknown key")
    for key in required:
        if key not in node:
            _fail(where, f"missing required key {key!r}")


def _scalar(node, where: str) -> float:
    if isinstance(node, bool) or not isinstance(node, (int, float)):
        _fail(where, f"expected a number, got {type(node).__name__}")
    value = float(node)
    if not math.isfinite(value):
        _fail(where, "number must be finite")
    return value


def _integer(node, where: str, minimum: int = 0) -> int:
    if isinstance(node, bool) or not isinstance(node, int):
        _fail(where, f"expected an integer, got {type(node).__name__}")
    if node < minimum:
        _fail(where, f"must be at least {minimum}")
    return node


def _scalar_or_ref(node, where: str):
    """A numeric leaf, or a {"param": name} reference into the grid."""
    if isinstance(node, dict):
        _check_keys(node, ("param",), (), where)
        if not isinstance(node["param"], str):
            _fail(f"{where}.param", "parameter name must be a string")
        return _ParamRef(node["param"])
    return _scalar(node, where)


def _complex_entry(node, where: str) -> complex:
    if (
        not isinstance(node, list)
        or len(node) != 2
        or any(isinstance(x, bool) or not isinstance(x, (int, float)) for x in node)
    ):
        _fail(where, "complex entries are [re, im] pairs")
    return complex(node[0], node[1])


def _complex_matrix(node, where: str) -> np.ndarray:
    if not isinstance(node, list) or not node:
        _fail(where, "expected a non-empty list of rows")
    width = None
    rows = []
    for i, row in enumerate(node):
        if not isinstance(row, list) or not row:
            _fail(f"{where}[{i}]", "expected a non-empty row")
        if width is None:
            width = len(row)
        elif len(row) != width:
            _fail(f"{where}[{i}]", "ragged rows")
        rows.append([_complex_entry(x, f"{where}[{i}][{j}]") for j, x in enumerate(row)])
    return np.array(rows, dtype=complex)


def _collect_refs(node) -> set:
    if isinstance(node, _ParamRef):
        return {node.name}
    if isinstance(node, dict):
        return set().union(*(_collect_refs(v) for v in node.values())) if node else set()
    if isinstance(node, (list, tuple)):
        return set().union(*(_collect_refs(v) for v in node)) if node else set()
    return set()


def _resolve(node, params: ClassicalParams, where: str) -> float:
    if isinstance(node, _ParamRef):
        value = params.get(node.name)
        if value is None or isinstance(value, str):
            _fail(where, f"grid cell does not bind numeric parameter {node.name!r}")
        return float(value)
    return node


# ---------------------------------------------------------------------------
# channel, box and pair specs


_CHANNEL_KINDS = ("identity", "depolarizing", "amplitude-damping", "dephasing", "swap", "unitary", "kraus")


def _parse_channel(node, where: str) -> dict:
    _check_keys(node, ("kind",), ("dim", "p", "gamma", "matrix", "operators", "dim_in", "dim_out"), where)
    kind = node["kind"]
    if kind not in _CHANNEL_KINDS:
        _fail(f"{where}.kind", f"unknown channel kind {kind!r}")
    spec = {"kind": kind}
    allowed = {
        "identity": ("dim",),
        "depolarizing": ("p",),
        "amplitude-damping": ("gamma",),
        "dephasing": ("p",),
        "swap": (),
        "unitary": ("matrix",),
        "kraus": ("operators", "dim_in", "dim_out"),
    }[kind]
    for key in node:
        if key != "kind" and key not in allowed:
            _fail(f"{where}.{key}", f"key not accepted by channel kind {kind!r}")
    if kind == "identity":
        spec["dim"] = _integer(node.get("dim", 2), f"{where}.dim", minimum=1)
    elif kind in ("depolarizing", "dephasing"):
        if "p" not in node:
            _fail(where, "missing required key 'p'")
        spec["p"] = _scalar_or_ref(node["p"], f"{where}.p")
    elif kind == "amplitude-damping":
        if "gamma" not in node:
            _fail(where, "missing required key 'gamma'")
        spec["gamma"] = _scalar_or_ref(node["gamma"], f"{where}.gamma")
    elif kind == "unitary":
        if "matrix" not in node:
            _fail(where, "missing required key 'matrix'")
        spec["matrix"] = _complex_matrix(node["matrix"], f"{where}.matrix")
    elif kind == "kraus":
        for key in ("operators", "dim_in", "dim_out"):
            if key not in node:
                _fail(where, f"missing required key {key!r}")
        if not isinstance(node["operators"], list) or not node["operators"]:
            _fail(f"{where}.operators", "expected a non-empty list of matrices")
        spec["operators"] = [
            _complex_matrix(op, f"{where}.operators[{i}]") for i, op in enumerate(node["operators"])
        ]
        spec["dim_in"] = _integer(node["dim_in"], f"{where}.dim_in", minimum=1)
        spec["dim_out"] = _integer(node["dim_out"], f"{where}.dim_out", minimum=1)
    return spec


def _build_channel(spec: dict, params: ClassicalParams, where: str) -> QuantumChannel:
    kind = spec["kind"]
    if kind == "identity":
        return QuantumChannel.identity(spec["dim"])
    if kind == "depolarizing":
        return QuantumChannel.depolarizing(_resolve(spec["p"], params, f"{where}.p"))
    if kind == "amplitude-damping":
        return QuantumChannel.amplitude_damping(_resolve(spec["gamma"], params, f"{where}.gamma"))
    if kind == "dephasing":
        return QuantumChannel.dephasing(_resolve(spec["p"], params, f"{where}.p"))
    if kind == "swap":
        return QuantumChannel.from_unitary(_SWAP_GATE)
    if kind == "unitary":
        return QuantumChannel.from_unitary(spec["matrix"])
    return QuantumChannel.from_kraus(spec["operators"], spec["dim_in"], spec["dim_out"])


_BOX_FAMILIES = ("linear", "nonlinear-bloch", "collapse", "composed")


def _parse_box(node, where: str) -> dict:
    _check_keys(node, ("family",), ("channel", "kappa", "pre_rotation_y", "post_rotation_y", "basis", "stages"), where)
    family = node["family"]
    if family not in _BOX_FAMILIES:
        _fail(f"{where}.family", f"unknown box family {family!r}")
    allowed = {
        "linear": ("channel",),
        "nonlinear-bloch": ("kappa", "pre_rotation_y", "post_rotation_y"),
        "collapse": ("kappa", "pre_rotation_y", "post_rotation_y", "basis"),
        "composed": ("stages",),
    }[family]
    for key in node:
        if key != "family" and key not in allowed:
            _fail(f"{where}.{key}", f"key not accepted by box family {family!r}")
    spec = {"family": family}
    if family == "linear":
        if "channel" not in node:
            _fail(where, "missing required key 'channel'")
        spec["channel"] = _parse_channel(node["channel"], f"{where}.channel")
    elif family in ("nonlinear-bloch", "collapse"):
        spec["kappa"] = _scalar_or_ref(node.get("kappa", 1.0), f"{where}.kappa")
        for key in ("pre_rotation_y", "post_rotation_y"):
            if key in node:
                spec[key] = _scalar_or_ref(node[key], f"{where}.{key}")
        if family == "collapse":
            basis = node.get("basis", "computational")
            if basis != "computational":
                basis = _complex_matrix(basis, f"{where}.basis")
            spec["basis"] = basis
    else:
        stages = node.get("stages")
        if not isinstance(stages, list) or len(stages) < 2:
            _fail(f"{where}.stages", "expected a list of at least two box specs")
        spec["stages"] = [_parse_box(s, f"{where}.stages[{i}]") for i, s in enumerate(stages)]
    return spec


def _build_box(spec: dict, params: ClassicalParams, where: str) -> BoxModel:
    family = spec["family"]
    if family == "linear":
        return LinearBox(_build_channel(spec["channel"], params, f"{where}.channel"))
    if family in ("nonlinear-bloch", "collapse"):
        kappa = _resolve(spec["kappa"], params, f"{where}.kappa")
        unitaries = {}
        for key, arg in (("pre_rotation_y", "pre_unitary"), ("post_rotation_y", "post_unitary")):
            if key in spec:
                unitaries[arg] = rotation_y(_resolve(spec[key], params, f"{where}.{key}"))
        if family == "nonlinear-bloch":
            return NonlinearBloch(kappa, **unitaries)
        basis_spec = spec["basis"]
        if isinstance(basis_spec, str):
            dim = 2
            basis = tuple(PureState(np.eye(dim)[k]) for k in range(dim))
        else:
            basis = tuple(PureState(row) for row in basis_spec)
        return CollapseNonlinear(basis, kappa=kappa, **unitaries)
    stages = [
        _build_box(s, params, f"{where}.stages[{i}]") for i, s in enumerate(spec["stages"])
    ]
    return ComposedBox(stages)


_PAIR_FAMILIES = ("qrac-oracle", "qrac-measure-prepare", "nsq-channel")


def _parse_pair(node, where: str) -> dict:
    _check_keys(node, ("family",), ("channel", "local_dims"), where)
    family = node["family"]
    if family not in _PAIR_FAMILIES:
        _fail(f"{where}.family", f"unknown pair family {family!r}")
    spec = {"family": family}
    if family == "nsq-channel":
        if "channel" not in node or "local_dims" not in node:
            _fail(where, "nsq-channel needs 'channel' and 'local_dims'")
        spec["channel"] = _parse_channel(node["channel"], f"{where}.channel")
        dims = node["local_dims"]
        if not isinstance(dims, list) or len(dims) != 2:
            _fail(f"{where}.local_dims", "expected [dim_a, dim_b]")
        spec["local_dims"] = tuple(
            _integer(d, f"{where}.local_dims[{i}]", minimum=1) for i, d in enumerate(dims)
        )
    elif "channel" in node or "local_dims" in node:
        _fail(where, f"keys not accepted by pair family {family!r}")
    return spec


def _build_pair(spec: dict, params: ClassicalParams, where: str) -> BoxPair:
    family = spec["family"]
    if family == "qrac-oracle":
        return QracOracle()
    if family == "qrac-measure-prepare":
        return measure_prepare_strategy()
    channel = _build_channel(spec["channel"], params, f"{where}.channel")
    return NsqChannelPair(channel, spec["local_dims"])


# ---------------------------------------------------------------------------
# detector settings schemas

_DETECTOR_SETTINGS = {
    "helstrom": ("trials", "thetas", "priors"),
    "ensemble-signalling": (),
    "basis-invariance": ("shots", "deltas"),
    "ancilla-consistency": ("shots",),
    "qrac": ("rounds",),
    "nsq-survey": ("n_samples", "local_dims", "env_dim", "product_channels"),
    "composition-gap": ("second_box", "probe_theta", "shots"),
}

_NEEDS_PAIR = {"qrac"}
_NEEDS_BOX = {"helstrom", "ensemble-signalling", "basis-invariance", "ancilla-consistency", "composition-gap"}


@dataclass(frozen=True)
class DetectorSpec:
    name: str
    settings: dict


def _parse_detector(node, where: str) -> DetectorSpec:
    _check_keys(node, ("name",), ("settings",), where)
    name = node["name"]
    if name not in _DETECTOR_SETTINGS:
        _fail(f"{where}.name", f"unknown detector {name!r}")
    raw = node.get("settings", {})
    if not isinstance(raw, dict):
        _fail(f"{where}.settings", "expected an object")
    for key in raw:
        if key not in _DETECTOR_SETTINGS[name]:
            _fail(f"{where}.settings.{key}", f"unknown setting for detector {name!r}")
    w = f"{where}.settings"
    settings: dict = {}
    if name == "helstrom":
        settings["trials"] = _integer(raw.get("trials", 10_000), f"{w}.trials", minimum=1)
        thetas = raw.get("thetas", [math.pi / 2 - math.pi / 8, math.pi / 2 + math.pi / 8])
        priors = raw.get("priors", [0.5, 0.5])
        for label, pair in (("thetas", thetas), ("priors", priors)):
            if not isinstance(pair, list) or len(pair) != 2:
                _fail(f"{w}.{label}", "expected a pair of numbers")
        settings["thetas"] = tuple(_scalar(t, f"{w}.thetas[{i}]") for i, t in enumerate(thetas))
        settings["priors"] = tuple(_scalar(p, f"{w}.priors[{i}]") for i, p in enumerate(priors))
    elif name == "basis-invariance":
        settings["shots"] = _integer(raw.get("shots", 10_000), f"{w}.shots", minimum=1)
        deltas = raw.get("deltas", [0.0, math.pi / 5, math.pi / 3])
        if not isinstance(deltas, list) or not deltas:
            _fail(f"{w}.deltas", "expected a non-empty list of angles")
        settings["deltas"] = tuple(_scalar(d, f"{w}.deltas[{i}]") for i, d in enumerate(deltas))
    elif name == "ancilla-consistency":
        settings["shots"] = _integer(raw.get("shots", 10_000), f"{w}.shots", minimum=1)
    elif name == "qrac":
        settings["rounds"] = _integer(raw.get("rounds", 20_000), f"{w}.rounds", minimum=1)
    elif name == "nsq-survey":
        settings["n_samples"] = _integer(raw.get("n_samples", 100), f"{w}.n_samples", minimum=1)
        dims = raw.get("local_dims", [2, 2])
        if not isinstance(dims, list) or len(dims) != 2:
            _fail(f"{w}.local_dims", "expected [dim_a, dim_b]")
        settings["local_dims"] = tuple(
            _integer(d, f"{w}.local_dims[{i}]", minimum=1) for i, d in enumerate(dims)
        )
        env = raw.get("env_dim")
        settings["env_dim"] = None if env is None else _integer(env, f"{w}.env_dim", minimum=1)
        flag = raw.get("product_channels", False)
        if not isinstance(flag, bool):
            _fail(f"{w}.product_channels", "expected a boolean")
        settings["product_channels"] = flag
    elif name == "composition-gap":
        if "second_box" not in raw:
            _fail(w, "missing required key 'second_box'")
        settings["second_box"] = _parse_box(raw["second_box"], f"{w}.second_box")
        settings["probe_theta"] = _scalar(raw.get("probe_theta", 2 * math.pi / 3), f"{w}.probe_theta")
        settings["shots"] = _integer(raw.get("shots", 4096), f"{w}.shots", minimum=1)
    return DetectorSpec(name=name, settings=settings)


# ---------------------------------------------------------------------------
# the scenario itself


@dataclass(frozen=True)
class Scenario:
    """Validated scenario: grid cells, detector suite and model builders."""

    name: str
    master_seed: int
    grid: tuple
    detectors: tuple
    box_spec: dict | None
    pair_spec: dict | None
    raw: dict

    def build_box(self, params: ClassicalParams) -> BoxModel:
        if self.box_spec is None:
            raise ScenarioError("scenario declares no box")
        return _build_box(self.box_spec, params, "box")

    def build_pair(self, params: ClassicalParams) -> BoxPair:
        if self.pair_spec is None:
            raise ScenarioError("scenario declares no pair")
        return _build_pair(self.pair_spec, params, "pair")

    def build_second_box(self, spec: dict, params: ClassicalParams) -> BoxModel:
        return _build_box(spec, params, "second_box")


def _parse_grid(node, where: str) -> tuple:
    cells = []
    if isinstance(node, dict):
        names = list(node)
        axes = []
        for name in names:
            values = node[name]
            if not isinstance(values, list) or not values:
                _fail(f"{where}.{name}", "expected a non-empty list of values")
            for i, v in enumerate(values):
                if isinstance(v, bool) or not isinstance(v, (int, float, str)):
                    _fail(f"{where}.{name}[{i}]", "grid values are numbers or strings")
            axes.append(values)
        for combo in itertools.product(*axes):
            cells.append(ClassicalParams.from_dict(dict(zip(names, combo))))
    elif isinstance(node, list):
        for i, cell in enumerate(node):
            if not isinstance(cell, dict):
                _fail(f"{where}[{i}]", "expected an object of parameter bindings")
            for key, v in cell.items():
                if isinstance(v, bool) or not isinstance(v, (int, float, str)):
                    _fail(f"{where}[{i}].{key}", "grid values are numbers or strings")
            cells.append(ClassicalParams.from_dict(cell))
    else:
        _fail(where, "expected an axes object or a list of cells")
    if not cells:
        _fail(where, "the grid is empty")
    if len(cells) > GRID_LIMIT:
        _fail(where, f"grid has {len(cells)} cells, limit is {GRID_LIMIT}")
    return tuple(cells)


def parse_scenario_dict(data: dict, source: str = "scenario") -> Scenario:
    """Validate an already-decoded scenario document."""
    _check_keys(data, ("name", "parameter_grid", "detectors", "master_seed"), ("box", "pair"), source)
    if not isinstance(data["name"], str) or not data["name"]:
        _fail(f"{source}.name", "expected a non-empty string")
    seed = data["master_seed"]
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2**64:
        _fail(f"{source}.master_seed", "expected a 64-bit unsigned integer")
    grid = _parse_grid(data["parameter_grid"], f"{source}.parameter_grid")

    box_spec = pair_spec = None
    if "box" in data and "pair" in data:
        _fail(source, "declare either 'box' or 'pair', not both")
    if "box" in data:
        box_spec = _parse_box(data["box"], f"{source}.box")
    elif "pair" in data:
        pair_spec = _parse_pair(data["pair"], f"{source}.pair")
    else:
        _fail(source, "missing a 'box' or 'pair' declaration")

    if not isinstance(data["detectors"], list) or not data["detectors"]:
        _fail(f"{source}.detectors", "expected a non-empty list")
    detectors = tuple(
        _parse_detector(d, f"{source}.detectors[{i}]") for i, d in enumerate(data["detectors"])
    )
    for i, det in enumerate(detectors):
        if det.name in _NEEDS_PAIR and pair_spec is None:
            _fail(f"{source}.detectors[{i}]", f"detector {det.name!r} needs a pair scenario")
        if det.name in _NEEDS_BOX and box_spec is None:
            _fail(f"{source}.detectors[{i}]", f"detector {det.name!r} needs a box scenario")

    grid_names = set()
    for cell in grid:
        grid_names.update(name for name, _ in cell.entries)
    referenced = _collect_refs(box_spec) | _collect_refs(pair_spec)
    for det in detectors:
        referenced |= _collect_refs(det.settings)
    missing = sorted(referenced - grid_names)
    if missing:
        _fail(f"{source}.parameter_grid", f"specs reference undeclared parameters: {', '.join(missing)}")

    return Scenario(
        name=data["name"],
        master_seed=seed,
        grid=grid,
        detectors=detectors,
        box_spec=box_spec,
        pair_spec=pair_spec,
        raw=data,
    )


def _reject_duplicates(pairs):
    seen = set()
    for key, _ in pairs:
        if key in seen:
            raise ScenarioError(f"duplicate key {key!r} in scenario file")
        seen.add(key)
    return dict(pairs)


def parse_scenario(path) -> Scenario:
    """Load and validate a scenario file, with line diagnostics on bad JSON."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh, object_pairs_hook=_reject_duplicates)
    except FileNotFoundError:
        raise ScenarioError(f"scenario file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise ScenarioError(f"{path}: top level must be an object")
    return parse_scenario_dict(data, source=str(path))
