"""JSON encoding of the value types and problem configs.

Numbers may be given as JSON numbers or as strings, including exact
rationals such as "1/2". Complex entries are [re, im] pairs. Classical
objects are plain arrays; density matrices and Kraus operators are 2-D
arrays whose entries may be pairs.
"""

from __future__ import annotations

import hashlib
import json
import math
from fractions import Fraction
from importlib import resources
from typing import Any

import jsonschema
import numpy as np

from .core import ClassicalChannel, DensityMatrix, ProbVector, QuantumChannel

SCHEMA_VERSION = "1"
SIG_DIGITS = 9


class ConfigError(ValueError):
    """The config is not valid JSON or does not follow the schema."""


def load_schema() -> dict:
    text = resources.files("chandisc.schemas").joinpath(f"config-v{SCHEMA_VERSION}.json").read_text()
    return json.loads(text)


def parse_config_text(text: str, source: str = "<config>") -> dict:
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    validate_config(cfg, source)
    return cfg


def validate_config(cfg: Any, source: str = "<config>") -> None:
    validator = jsonschema.Draft202012Validator(load_schema())
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errors:
        lines = []
        for e in errors:
            path = "/".join(str(p) for p in e.absolute_path) or "(root)"
            lines.append(f"{source}: field {path}: {e.message}")
        raise ConfigError("\n".join(lines))


# ---------------------------------------------------------------------------
# Decoding
# ---------------------------------------------------------------------------

def parse_real(v) -> float:
    if isinstance(v, bool):
        raise ConfigError(f"expected a number, got {v!r}")
    if isinstance(v, (int, float)):
        return float(v)
    if isinstance(v, str):
        try:
            return float(Fraction(v.strip()))
        except (ValueError, ZeroDivisionError):
            raise ConfigError(f"cannot parse number {v!r}") from None
    raise ConfigError(f"expected a number, got {v!r}")


def parse_entry(v) -> complex:
    if isinstance(v, list):
        if len(v) != 2:
            raise ConfigError(f"complex entries are [re, im] pairs, got {v!r}")
        return complex(parse_real(v[0]), parse_real(v[1]))
    return complex(parse_real(v), 0.0)


def parse_matrix(rows) -> np.ndarray:
    """2-D array whose entries are reals or [re, im] pairs."""
    if not isinstance(rows, list) or not rows or not all(isinstance(r, list) for r in rows):
        raise ConfigError("expected a non-empty 2-D array")
    out = np.array([[parse_entry(v) for v in r] for r in rows], dtype=complex)
    if out.ndim != 2:
        raise ConfigError("matrix rows have unequal lengths")
    return out


def parse_state(obj):
    """A flat array is a ProbVector; a 2-D array is a DensityMatrix."""
    if isinstance(obj, dict):
        obj = obj.get("probabilities", obj.get("matrix"))
    if isinstance(obj, list) and obj and not any(isinstance(v, list) for v in obj):
        return ProbVector(np.array([parse_real(v) for v in obj]))
    return DensityMatrix(parse_matrix(obj))


def parse_channel(obj):
    """{"rows": [...]} (classical) or {"kraus": [...]} (quantum)."""
    if not isinstance(obj, dict):
        raise ConfigError("channels are objects with 'rows' or 'kraus'")
    if "rows" in obj:
        return ClassicalChannel(np.array([[parse_real(v) for v in r] for r in obj["rows"]]))
    if "kraus" in obj:
        return QuantumChannel(np.array([parse_matrix(k) for k in obj["kraus"]]))
    raise ConfigError("channel needs 'rows' or 'kraus'")


# ---------------------------------------------------------------------------
# Encoding
# ---------------------------------------------------------------------------

def round_sig(x: float) -> float:
    return float(format(x, f".{SIG_DIGITS}g"))


def to_jsonable(obj):
    """Plain JSON types with floats rounded to 9 significant digits.

    Infinities become the strings "inf" / "-inf"; complex values become
    [re, im] pairs.
    """
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, ProbVector):
        return to_jsonable(obj.entries)
    if isinstance(obj, DensityMatrix):
        return to_jsonable(obj.matrix)
    if isinstance(obj, ClassicalChannel):
        return {"rows": to_jsonable(obj.matrix)}
    if isinstance(obj, QuantumChannel):
        return {"kraus": to_jsonable(obj.kraus)}
    if isinstance(obj, np.ndarray):
        if np.iscomplexobj(obj):
            if np.allclose(obj.imag, 0.0, atol=0.0):
                return to_jsonable(obj.real)
            return to_jsonable(np.stack([obj.real, obj.imag], axis=-1).tolist())
        return to_jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, complex):
        return [to_jsonable(obj.real), to_jsonable(obj.imag)]
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return round_sig(x)
    return obj


def dumps(obj) -> str:
    return json.dumps(to_jsonable(obj), indent=2, sort_keys=False) + "\n"


def canonical(cfg) -> str:
    return json.dumps(cfg, sort_keys=True, separators=(",", ":"), ensure_ascii=True)


def config_hash(cfg) -> str:
    return hashlib.sha256(canonical(cfg).encode("ascii")).hexdigest()
