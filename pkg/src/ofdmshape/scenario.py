"""Scenario files: one JSON document describing a complete run.

Example::

    {
      "name": "wide-local",
      "profile": "full",
      "cfg": {"n_co": 2},
      "mask": {"passbands": [{"l_l": 100, "l_r": 146}]},
      "method": "local",
      "flavor": "CC+harmonic",
      "optimize": {"edge": 4050, "orientation": "left", "span": 0.98876953125}
    }

Validation errors carry the line of the offending key.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path

from .config import FLAVORS, ConfigError, SystemConfig, desk_profile, full_profile, parse_orientation
from .mask import EmissionMask, MaskError

__all__ = ["ScenarioError", "Scenario", "load_scenario", "parse_scenario", "METHODS", "PROFILES"]

METHODS = ("rc-only", "local", "adaptive", "adhoc")
PROFILES = {"desk": desk_profile, "full": full_profile}

_TOP = {"name", "profile", "cfg", "mask", "method", "flavor", "optimize", "plan", "verify", "sweep",
        "thresholds", "outputs"}
_SECTIONS = {
    "optimize": {"edge", "orientation", "span", "n_h", "isolated_weight", "tol"},
    "plan": {"n_h", "allow_local_narrow", "sample_domain_fallback", "rc_data", "density"},
    "verify": {"symbols", "seed", "window", "overlap", "guard"},
    "sweep": {"parameter", "values", "nh_max", "flavors", "left_edge", "nd"},
    "thresholds": {"psd_max_db", "welch_dev_db", "evm_db", "papr_gap_db"},
}
_OUTPUTS = {"plan", "psd", "metrics", "ccdf", "waveform"}


class ScenarioError(ValueError):
    """Invalid scenario; ``line`` is 1-based, or None when unknown."""

    def __init__(self, message, path=None, line=None):
        self.path, self.line, self.detail = path, line, message
        where = f"{path or '<scenario>'}:{line}" if line else f"{path or '<scenario>'}"
        super().__init__(f"{where}: {message}")


@dataclass
class Scenario:
    name: str
    cfg: SystemConfig
    mask: EmissionMask
    method: str
    flavor: str
    optimize: dict = field(default_factory=dict)
    plan: dict = field(default_factory=dict)
    verify: dict = field(default_factory=dict)
    sweep: dict = field(default_factory=dict)
    thresholds: dict = field(default_factory=dict)
    outputs: list = field(default_factory=list)
    profile: str = "full"

    def with_cfg(self, **changes) -> "Scenario":
        out = Scenario(**{k: getattr(self, k) for k in self.__dataclass_fields__})
        out.cfg = self.cfg.replace(**changes)
        return out


def _line_of(text: str, key: str, start: int = 0) -> int:
    m = re.search(r'"' + re.escape(key) + r'"\s*:', text[start:])
    if m is None:
        return None
    return text.count("\n", 0, start + m.start()) + 1


def _offset_of(text: str, key: str) -> int:
    m = re.search(r'"' + re.escape(key) + r'"\s*:', text)
    return 0 if m is None else m.start()


def _flavor(value, fail) -> str:
    if not isinstance(value, str) or value.lower() not in FLAVORS:
        fail("flavor", f"flavor must be one of {', '.join(FLAVORS)} (any case), got {value!r}")
    return value.lower()


def parse_scenario(text: str, path=None, profile: str = None) -> Scenario:
    """Validate a scenario document; ``profile`` overrides the file's profile."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"invalid JSON: {exc.msg}", path, exc.lineno) from None

    def fail(key, message, section=None):
        start = _offset_of(text, section) if section else 0
        raise ScenarioError(message, path, _line_of(text, key, start) or _line_of(text, section or key))

    if not isinstance(doc, dict):
        raise ScenarioError("top level must be an object", path, 1)
    for key in doc:
        if key not in _TOP:
            fail(key, f"unknown field {key!r}")
    for section, allowed in _SECTIONS.items():
        body = doc.get(section, {})
        if not isinstance(body, dict):
            fail(section, f"{section} must be an object")
        for key in body:
            if key not in allowed:
                fail(key, f"unknown field {section}.{key}", section)

    prof = profile or doc.get("profile", "full")
    if prof not in PROFILES:
        fail("profile", f"profile must be one of {sorted(PROFILES)}, got {prof!r}")
    overrides = doc.get("cfg", {})
    if not isinstance(overrides, dict):
        fail("cfg", "cfg must be an object")
    try:
        cfg = PROFILES[prof](**overrides)
    except TypeError as exc:
        bad = re.search(r"'(\w+)'", str(exc))
        key = bad.group(1) if bad else "cfg"
        fail(key, f"cfg.{key}: unknown config field", "cfg")
    except ConfigError as exc:
        named = [k for k in overrides if k in str(exc)]
        fail(named[0] if named else "cfg", f"cfg: {exc}", "cfg")

    method = doc.get("method", "rc-only")
    if method not in METHODS:
        fail("method", f"method must be one of {', '.join(METHODS)}, got {method!r}")
    flavor = _flavor(doc.get("flavor", "CC+harmonic"), fail)

    if "mask" not in doc:
        raise ScenarioError("missing field 'mask'", path, 1)
    try:
        mask = EmissionMask.from_dict({"n": cfg.n, **doc["mask"]})
        mask.validate(cfg)
    except (MaskError, KeyError, TypeError, ValueError) as exc:
        fail("mask", f"mask: {exc}")

    opt = dict(doc.get("optimize", {}))
    if "orientation" in opt:
        try:
            opt["orientation"] = parse_orientation(opt["orientation"])
        except ConfigError as exc:
            fail("orientation", f"optimize.orientation: {exc}", "optimize")
    for key in ("edge", "n_h"):
        if key in opt and (not isinstance(opt[key], int) or isinstance(opt[key], bool)):
            fail(key, f"optimize.{key} must be an integer", "optimize")
    if "edge" in opt and not 0 <= opt["edge"] < cfg.n:
        fail("edge", f"optimize.edge {opt['edge']} outside [0, {cfg.n})", "optimize")
    if "span" in opt and not (isinstance(opt["span"], (int, float)) and 0 < opt["span"] <= 1):
        fail("span", "optimize.span must be a fraction in (0, 1]", "optimize")
    if opt.get("isolated_weight", 0) < 0:
        fail("isolated_weight", "optimize.isolated_weight must be non-negative", "optimize")

    ver = dict(doc.get("verify", {}))
    for key in ("symbols", "window", "overlap"):
        if key in ver and (not isinstance(ver[key], int) or ver[key] < 0):
            fail(key, f"verify.{key} must be a non-negative integer", "verify")

    sweep = dict(doc.get("sweep", {}))
    if sweep:
        if sweep.get("parameter") not in ("nh_min", "nh_max", "nd"):
            fail("parameter", "sweep.parameter must be nh_min, nh_max or nd", "sweep")
        values = sweep.get("values")
        if not isinstance(values, list) or not all(isinstance(v, int) for v in values):
            fail("values", "sweep.values must be a list of integers", "sweep")
        if not values:
            fail("values", "sweep.values is empty", "sweep")
        if "flavors" in sweep:
            sweep["flavors"] = [_flavor(f, lambda k, m: fail("flavors", m, "sweep")) for f in sweep["flavors"]]

    outputs = doc.get("outputs", ["plan", "psd", "metrics"])
    if not isinstance(outputs, list) or any(o not in _OUTPUTS for o in outputs):
        fail("outputs", f"outputs must be a list drawn from {sorted(_OUTPUTS)}")

    thresholds = doc.get("thresholds", {})
    for key, value in thresholds.items():
        if not isinstance(value, (int, float)):
            fail(key, f"thresholds.{key} must be a number", "thresholds")

    return Scenario(
        name=str(doc.get("name", Path(path).stem if path else "scenario")),
        cfg=cfg, mask=mask, method=method, flavor=flavor, optimize=opt,
        plan=dict(doc.get("plan", {})), verify=ver, sweep=sweep,
        thresholds=dict(thresholds), outputs=list(outputs), profile=prof,
    )


def load_scenario(path, profile: str = None) -> Scenario:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ScenarioError(exc.strerror or str(exc), path) from None
    return parse_scenario(text, str(path), profile)
