"""Experiment configuration: a sectioned key-value text file.

Values are Python literals (numbers, strings, lists, tuples, booleans)::

    [run]
    experiments = ["lattice-audit", "converge"]
    seed = 0

    [model]
    group = "u1"
    cutoff = 1

    [couplings]
    a = 1.0
    g = 1.0
    m = 0.5

    [fermion]
    gamma0 = "identity"

Volumes are written as ``"chain:L"`` (sites ``0..L-1``), ``"centered:L"``
(``L`` odd, centred at the origin), ``"box:AxB"`` / ``"box:AxBxC"`` (sites per
axis from the origin) or ``"cube:n:dim"`` (the cube ``S_n``).
"""

from __future__ import annotations

import ast
import configparser
import hashlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .hamiltonian import CouplingParams, HamiltonianError
from .lattice import SubLattice, build_box, build_chain, build_cube, centered_chain
from .linkspace import GaugeGroupModel, LinkSpaceError

EXPERIMENTS = ("lattice-audit", "lr-verify", "converge", "dyson", "ground", "gauss")

DEFAULTS: dict[str, dict[str, Any]] = {
    "lattice-audit": {"pairs": [(1, 3), (2, 4), (3, 5)], "bulk_radius": 5},
    "lr-verify": {"volume": "chain:9", "times": [0.25, 0.5, 1.0]},
    "converge": {"volumes": ["centered:3", "centered:5", "centered:7", "centered:9"], "times": [0.5]},
    "dyson": {"volume": "chain:3", "orders": [1, 2, 3, 4, 5, 6], "x": 0.1},
    "ground": {
        "volumes": ["chain:2", "chain:3", "chain:4"],
        "subadditivity": [("chain:7", "chain:3", "reduced"), ("box:3x3", "box:2x2", "none")],
        "tol": 1e-10,
    },
    "gauss": {"volumes": ["box:2x2", "chain:4"], "presets": ["none", "reduced"], "trials": 20, "exempt_boundary": False},
}


class ConfigError(ValueError):
    """Invalid configuration; the message starts with the offending field path."""


@dataclass
class ExperimentConfig:
    experiments: list[str]
    seed: int
    model: GaugeGroupModel
    couplings: CouplingParams
    fermions: str
    dense_budget: int
    sparse_budget: int
    sector_budget: int
    params: dict[str, dict[str, Any]] = field(default_factory=dict)
    out: str | None = None
    sha256: str = ""
    source: str = ""

    def experiment(self, name: str) -> dict[str, Any]:
        merged = dict(DEFAULTS[name])
        merged.update(self.params.get(name, {}))
        return merged


def _literal(section: str, key: str, raw: str) -> Any:
    try:
        return ast.literal_eval(raw)
    except (ValueError, SyntaxError):
        raise ConfigError(f"{section}.{key}: cannot parse value {raw!r}") from None


def _get(sections: dict, path: str, default: Any, kind: type | tuple, check=None, msg: str = "") -> Any:
    sec, key = path.split(".", 1)
    val = sections.get(sec, {}).get(key, default)
    if isinstance(kind, tuple) and float in kind and isinstance(val, int) and not isinstance(val, bool):
        val = float(val)
    if not isinstance(val, kind) or isinstance(val, bool) and kind is not bool:
        raise ConfigError(f"{path}: expected {getattr(kind, '__name__', kind)}, got {val!r}")
    if check is not None and not check(val):
        raise ConfigError(f"{path}: {msg} (got {val!r})")
    return val


def parse_volume(spec: str, path: str = "volume") -> SubLattice:
    """Build a sublattice from its short text form."""
    if not isinstance(spec, str) or ":" not in spec:
        raise ConfigError(f"{path}: expected a volume like 'chain:5', got {spec!r}")
    kind, _, arg = spec.partition(":")
    try:
        if kind == "chain":
            return build_chain(int(arg))
        if kind == "centered":
            return centered_chain(int(arg))
        if kind == "box":
            sizes = [int(s) for s in arg.split("x")]
            return build_box([0] * len(sizes), [s - 1 for s in sizes], len(sizes))
        if kind == "cube":
            n, dim = (int(s) for s in arg.split(":"))
            return build_cube(n, dim)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    raise ConfigError(f"{path}: unknown volume kind '{kind}'")


def parse_config(text: str, seed: int | None = None) -> ExperimentConfig:
    """Parse and validate configuration text."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str  # type: ignore[assignment]
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config: {exc}") from None
    sections = {s: {k: _literal(s, k, v) for k, v in cp.items(s)} for s in cp.sections()}
    known = {"run", "model", "couplings", "fermion", "budget"} | set(EXPERIMENTS)
    for s in sections:
        if s not in known:
            raise ConfigError(f"{s}: unknown section")

    exps = _get(sections, "run.experiments", [], (list, tuple))
    for i, e in enumerate(exps):
        if e not in EXPERIMENTS:
            raise ConfigError(f"run.experiments[{i}]: unknown experiment '{e}'")
    cfg_seed = _get(sections, "run.seed", 0, int, lambda v: v >= 0, "must be nonnegative")
    out = sections.get("run", {}).get("out")

    group = _get(sections, "model.group", "u1", str, lambda v: v in ("u1", "su2"), "must be 'u1' or 'su2'")
    scale = _get(sections, "model.laplacian_scale", 1.0, (int, float), lambda v: v > 0, "must be positive")
    try:
        if group == "u1":
            cutoff = _get(sections, "model.cutoff", 1, int, lambda v: v >= 0, "must be a nonnegative integer")
            model = GaugeGroupModel.u1(cutoff, scale)
        else:
            jmax = _get(sections, "model.jmax", 0.5, (int, float), lambda v: v >= 0, "must be nonnegative")
            model = GaugeGroupModel.su2(jmax, scale)
    except LinkSpaceError as exc:
        raise ConfigError(f"model: {exc}") from None

    try:
        couplings = CouplingParams(
            _get(sections, "couplings.a", 1.0, (int, float)),
            _get(sections, "couplings.g", 1.0, (int, float)),
            _get(sections, "couplings.m", 0.5, (int, float)),
        )
    except HamiltonianError as exc:
        raise ConfigError(f"couplings: {exc}") from None

    enabled = _get(sections, "fermion.enabled", True, bool)
    gamma0 = _get(sections, "fermion.gamma0", "identity", str, lambda v: v in ("identity", "dirac"), "must be 'identity' or 'dirac'")
    fermions = "none" if not enabled else ("reduced" if gamma0 == "identity" else "dirac")

    dense = _get(sections, "budget.dense", 2048, int, lambda v: v > 0, "must be positive")
    sparse = _get(sections, "budget.sparse", 200_000, int, lambda v: v > 0, "must be positive")
    sector = _get(sections, "budget.sector", 5_000_000, int, lambda v: v > 0, "must be positive")

    params = {name: dict(sections.get(name, {})) for name in EXPERIMENTS if name in sections}
    for name, p in params.items():
        for key in p:
            if key not in DEFAULTS[name]:
                raise ConfigError(f"{name}.{key}: unknown key")
    cfg = ExperimentConfig(
        list(exps), cfg_seed if seed is None else seed, model, couplings, fermions,
        dense, sparse, sector, params, out, hashlib.sha256(text.encode()).hexdigest(), text,
    )
    _validate_volumes(cfg)
    return cfg


def _validate_volumes(cfg: ExperimentConfig) -> None:
    for name in EXPERIMENTS:
        p = cfg.experiment(name)
        for key in ("volume",):
            if key in p:
                parse_volume(p[key], f"{name}.{key}")
        if "volumes" in p:
            for i, v in enumerate(p["volumes"]):
                parse_volume(v, f"{name}.volumes[{i}]")
        if name == "gauss" and len(p["presets"]) != len(p["volumes"]):
            raise ConfigError(f"gauss.presets: expected {len(p['volumes'])} entries, one per volume")
        if name == "ground":
            for i, case in enumerate(p["subadditivity"]):
                if not (isinstance(case, (list, tuple)) and len(case) == 3):
                    raise ConfigError(f"ground.subadditivity[{i}]: expected (outer, inner, fermion_preset)")
                parse_volume(case[0], f"ground.subadditivity[{i}][0]")
                parse_volume(case[1], f"ground.subadditivity[{i}][1]")
                if case[2] not in ("reduced", "dirac", "none"):
                    raise ConfigError(f"ground.subadditivity[{i}][2]: unknown fermion preset {case[2]!r}")


def load_config(path: str | Path, seed: int | None = None) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path}: {exc.strerror}") from None
    return parse_config(text, seed)
