"""Run configuration: JSON schema, semantic checks and construction of model objects."""

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from jsonschema import Draft202012Validator

from .elliptic_solver import FACE_MODES, SolverConfig
from .errors import ConfigError
from .gas_thermo import GasModel
from .geometry import TabulatedWalls, TanhWalls, default_length
from .profiles import (
    ConstantProfile,
    PolynomialProfile,
    Profiles,
    SineProfile,
    TabulatedProfile,
)

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_POS_INT = {"type": "integer", "minimum": 1}

_PROFILE = {
    "oneOf": [
        _POS,
        {
            "type": "object",
            "additionalProperties": False,
            "required": ["type"],
            "properties": {
                "type": {"enum": ["constant", "polynomial", "sine", "tabulated"]},
                "value": _NUM,
                "coeffs": {"type": "array", "items": _NUM, "minItems": 1},
                "base": _NUM,
                "amplitude": _NUM,
                "k": _NUM,
                "path": {"type": "string"},
            },
        },
    ]
}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["gas", "walls"],
    "properties": {
        "gas": {
            "type": "object",
            "additionalProperties": False,
            "required": ["gamma"],
            "properties": {"gamma": _NUM},
        },
        "walls": {
            "type": "object",
            "additionalProperties": False,
            "required": ["family"],
            "properties": {
                "family": {"enum": ["straight", "tanh", "tabulated"]},
                "a": _NUM,
                "b": _NUM,
                "ell": _NUM,
                "path": {"type": "string"},
            },
        },
        "profiles": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"S": _PROFILE, "B": _PROFILE},
        },
        "m": _NUM,
        "m_list": {"type": "array", "items": _NUM, "minItems": 1},
        "sweep": {
            "type": "object",
            "additionalProperties": False,
            "required": ["start", "stop", "num"],
            "properties": {"start": _NUM, "stop": _NUM, "num": _POS_INT},
        },
        "grid": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"L": _NUM, "nx": {"type": "integer"}, "ny": {"type": "integer"}},
        },
        "solver": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "epsilon": _NUM,
                "tol_update": _NUM,
                "tol_residual": _NUM,
                "max_picard": {"type": "integer"},
                "relaxation": _NUM,
                "linear_tol": _NUM,
                "linear_max_iter": {"type": "integer"},
                "face_bc_mode": {"enum": list(FACE_MODES)},
                "initial_guess": {"enum": ["linear", "cubic"]},
            },
        },
        "critical": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"m_seed": _NUM, "tol_m": _NUM, "growth": _NUM},
        },
        "diagnostics": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"n_sections": {"type": "integer"}, "field": {"type": "string"}},
        },
        "workers": _POS_INT,
        "output": {"type": "string"},
    },
}


@dataclass
class RunConfig:
    raw: dict
    gas: GasModel
    walls: object
    profiles: Profiles
    m_values: list
    L: float
    nx: int
    ny: int
    solver: SolverConfig
    initial_guess: str = "linear"
    m_seed: float | None = None
    tol_m: float = 1e-3
    growth: float = 1.25
    n_sections: int = 11
    field_path: str | None = None
    workers: int = 1
    output: str | None = None
    base_dir: Path = field(default_factory=Path.cwd)

    @property
    def m(self):
        return self.m_values[0] if self.m_values else None


def _path_error(err):
    where = "/".join(str(p) for p in err.absolute_path) or "<root>"
    return f"{where}: {err.message}"


def _semantic_violations(doc):
    v = []
    gamma = doc.get("gas", {}).get("gamma")
    if isinstance(gamma, (int, float)) and not gamma > 1.0:
        v.append(f"gas/gamma: adiabatic exponent must satisfy gamma > 1 (got {gamma})")
    w = doc.get("walls", {})
    fam = w.get("family")
    if fam == "tanh":
        for key in ("a", "b", "ell"):
            if key not in w:
                v.append(f"walls/{key}: required for the tanh family")
        a, b = w.get("a"), w.get("b")
        if isinstance(a, (int, float)) and isinstance(b, (int, float)) and not b > a:
            v.append(f"walls: downstream walls need b > a (got a={a}, b={b})")
        ell = w.get("ell")
        if isinstance(ell, (int, float)) and not ell > 0:
            v.append("walls/ell: transition length must be positive")
    if fam == "tabulated" and "path" not in w:
        v.append("walls/path: required for tabulated walls")
    for name, entry in doc.get("profiles", {}).items():
        if isinstance(entry, dict):
            t = entry["type"] if "type" in entry else None
            need = {"constant": ["value"], "polynomial": ["coeffs"], "sine": ["base", "amplitude", "k"],
                    "tabulated": ["path"]}.get(t, [])
            for key in need:
                if key not in entry:
                    v.append(f"profiles/{name}/{key}: required for a {t} profile")
    ms = []
    if "m" in doc:
        ms.append(doc["m"])
    ms.extend(doc.get("m_list", []))
    for mv in ms:
        if isinstance(mv, (int, float)) and not mv > 0:
            v.append(f"m: mass flux must be positive (got {mv})")
    sw = doc.get("sweep")
    if isinstance(sw, dict):
        st, sp_ = sw.get("start"), sw.get("stop")
        if isinstance(st, (int, float)) and not st > 0:
            v.append("sweep/start: mass flux must be positive")
        if isinstance(st, (int, float)) and isinstance(sp_, (int, float)) and sp_ < st:
            v.append("sweep: stop must not be below start")
    g = doc.get("grid", {})
    if isinstance(g.get("L"), (int, float)) and not g["L"] > 0:
        v.append("grid/L: truncation half-length must be positive")
    for key in ("nx", "ny"):
        if isinstance(g.get(key), int) and g[key] < 3:
            v.append(f"grid/{key}: at least 3 nodes required")
    s = doc.get("solver", {})
    for key in ("epsilon", "tol_update", "tol_residual", "linear_tol"):
        if isinstance(s.get(key), (int, float)) and not s[key] > 0:
            v.append(f"solver/{key}: must be positive")
    if isinstance(s.get("relaxation"), (int, float)) and not 0 < s["relaxation"] <= 1:
        v.append("solver/relaxation: must lie in (0, 1]")
    for key in ("max_picard", "linear_max_iter"):
        if isinstance(s.get(key), int) and s[key] < 1:
            v.append(f"solver/{key}: must be at least 1")
    c = doc.get("critical", {})
    for key in ("m_seed", "tol_m"):
        if isinstance(c.get(key), (int, float)) and not c[key] > 0:
            v.append(f"critical/{key}: must be positive")
    if isinstance(c.get("growth"), (int, float)) and not c["growth"] > 1:
        v.append("critical/growth: scan factor must exceed 1")
    d = doc.get("diagnostics", {})
    if isinstance(d.get("n_sections"), int) and d["n_sections"] < 2:
        v.append("diagnostics/n_sections: at least 2 sections required")
    return v


def _profile(entry, base):
    if isinstance(entry, (int, float)):
        return ConstantProfile(float(entry))
    t = entry["type"]
    if t == "constant":
        return ConstantProfile(float(entry["value"]))
    if t == "polynomial":
        return PolynomialProfile(tuple(float(c) for c in entry["coeffs"]))
    if t == "sine":
        return SineProfile(float(entry["base"]), float(entry["amplitude"]), float(entry["k"]))
    return TabulatedProfile.from_csv(base / entry["path"])


def validate(doc):
    """Every schema and semantic violation of a configuration document."""
    validator = Draft202012Validator(SCHEMA)
    errs = [_path_error(e) for e in sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))]
    if isinstance(doc, dict):
        errs.extend(_semantic_violations(doc))
    return errs


def build_config(doc, base_dir=None):
    """Validate ``doc`` and construct the model objects it describes."""
    base = Path(base_dir) if base_dir is not None else Path.cwd()
    errs = validate(doc)
    if errs:
        raise ConfigError(errs)
    errs = []
    gas = GasModel(float(doc["gas"]["gamma"]))
    w = doc["walls"]
    walls = None
    try:
        if w["family"] == "straight":
            walls = TanhWalls.straight()
        elif w["family"] == "tanh":
            walls = TanhWalls(float(w["a"]), float(w["b"]), float(w["ell"]))
        else:
            walls = TabulatedWalls.from_csv(base / w["path"])
    except (OSError, ValueError) as exc:
        errs.append(f"walls: {exc}")
    prof_doc = doc.get("profiles", {})
    try:
        profiles = Profiles(_profile(prof_doc.get("S", 1.0), base), _profile(prof_doc.get("B", 1.0), base))
    except (OSError, ValueError) as exc:
        errs.append(f"profiles: {exc}")
        profiles = None
    if profiles is not None:
        S_min, B_min = profiles.bounds()
        if not S_min > 0:
            errs.append("profiles/S: entropy values must be positive on [0, 1]")
        if not B_min > 0:
            errs.append("profiles/B: Bernoulli values must be positive on [0, 1]")

    ms = []
    if "m" in doc:
        ms.append(float(doc["m"]))
    ms.extend(float(x) for x in doc.get("m_list", []))
    if "sweep" in doc:
        sw = doc["sweep"]
        ms.extend(float(x) for x in np.linspace(sw["start"], sw["stop"], sw["num"]))

    g = doc.get("grid", {})
    ell = float(w.get("ell", 1.0)) if w["family"] == "tanh" else 1.0
    L = float(g.get("L", default_length(ell)))
    s = dict(doc.get("solver", {}))
    guess = s.pop("initial_guess", "linear")
    solver = SolverConfig(**s)
    c = doc.get("critical", {})
    d = doc.get("diagnostics", {})
    if errs:
        raise ConfigError(errs)
    return RunConfig(
        raw=doc, gas=gas, walls=walls, profiles=profiles, m_values=ms,
        L=L, nx=int(g.get("nx", 201)), ny=int(g.get("ny", 51)), solver=solver, initial_guess=guess,
        m_seed=c.get("m_seed"), tol_m=float(c.get("tol_m", 1e-3)), growth=float(c.get("growth", 1.25)),
        n_sections=int(d.get("n_sections", 11)), field_path=d.get("field"),
        workers=int(doc.get("workers", 1)), output=doc.get("output"), base_dir=base,
    )


def parse_config(path):
    """Read and validate a JSON configuration file.

    Raises
    ------
    ConfigError
        Listing every violation found, not just the first.
    """
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError([f"cannot read {path}: {exc}"]) from exc
    except json.JSONDecodeError as exc:
        raise ConfigError([f"{path} is not valid JSON: {exc}"]) from exc
    return build_config(doc, base_dir=path.parent)
