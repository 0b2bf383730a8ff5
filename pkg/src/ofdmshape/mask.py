"""Emission masks and per-carrier pulse plans.

A passband is given by its edge carriers (l_l, l_r).  The edge carriers
hold cancellation carriers; the N_D = l_r - l_l - 1 carriers between them
carry data.  A data carrier within n_ci + N_h of an edge gets that edge's
correction term, so narrow passbands end up with dual (left + right)
pulses and wide ones with single-edge pulses and plain ones in between.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .bands import FrequencyBand, PsdCurve, analytical_psd, band_matrix, psd_max, total_oobe
from .coefficients import BankSet, EdgeBank
from .config import LEFT, RIGHT, ConfigError, SystemConfig, orientation_name
from .pulses import assemble_pulse
from .transforms import derive_bank

__all__ = [
    "MaskError",
    "EmissionMask",
    "CarrierPlan",
    "carrier_terms",
    "plan_mask",
    "plan_pulses",
    "evaluate_plan",
    "plan_oobe",
    "write_plan_csv",
    "cost_report",
]


class MaskError(ValueError):
    """The mask (or one passband of it) cannot be planned."""


@dataclass(frozen=True)
class EmissionMask:
    n: int
    passbands: tuple
    notch_span: float = None
    name: str = ""
    version: int = 1

    def __post_init__(self):
        pbs = tuple(sorted((int(a), int(b)) for a, b in self.passbands))
        if not pbs:
            raise MaskError("mask has no passband")
        for a, b in pbs:
            if not 0 <= a < b < self.n:
                raise MaskError(f"passband ({a}, {b}) needs 0 <= l_l < l_r < {self.n}")
        for (a0, b0), (a1, b1) in zip(pbs, pbs[1:]):
            if a1 - b0 < 2:
                raise MaskError(f"passbands ({a0}, {b0}) and ({a1}, {b1}) are not separated by a notch")
        if len(pbs) > 1 and pbs[0][0] + self.n - pbs[-1][1] < 2:
            raise MaskError("first and last passband touch across the band wrap")
        object.__setattr__(self, "passbands", pbs)

    @classmethod
    def from_notches(cls, n: int, notches, **kw) -> "EmissionMask":
        """Mask from inclusive notched carrier ranges [(a, b), ...]."""
        notches = sorted((int(a), int(b)) for a, b in notches)
        covered = np.zeros(n, dtype=bool)
        for a, b in notches:
            if not 0 <= a <= b < n:
                raise MaskError(f"notch ({a}, {b}) outside [0, {n})")
            covered[a:b + 1] = True
        free = np.flatnonzero(~covered)
        if free.size == 0:
            raise MaskError("everything is notched")
        runs = np.split(free, np.flatnonzero(np.diff(free) > 1) + 1)
        return cls(n, tuple((int(r[0]), int(r[-1])) for r in runs), **kw)

    def validate(self, cfg: SystemConfig) -> None:
        if self.n != cfg.n:
            raise MaskError(f"mask is for N={self.n}, config has N={cfg.n}")
        for a, b in self.passbands:
            nd = b - a - 1
            if nd < cfg.nd_min:
                raise MaskError(f"passband ({a}, {b}) has N_D={nd} < {cfg.nd_min} = nh_min + 2 n_ci")

    def widths(self) -> list:
        return [b - a - 1 for a, b in self.passbands]

    def passband_band(self) -> FrequencyBand:
        out = None
        for a, b in self.passbands:
            piece = FrequencyBand.interval(a / self.n, b / self.n)
            out = piece if out is None else out.union(piece)
        return out

    def notch_components(self) -> list:
        """One band per gap between consecutive passbands, [l_r/N, next l_l/N)."""
        out = []
        pbs = self.passbands
        for idx, (a, b) in enumerate(pbs):
            nxt = pbs[(idx + 1) % len(pbs)][0]
            stop = nxt if idx + 1 < len(pbs) else nxt + self.n
            out.append(FrequencyBand.interval(b / self.n, stop / self.n, label=(b, nxt)))
        return out

    def notch_band(self) -> FrequencyBand:
        out = None
        for piece in self.notch_components():
            out = piece if out is None else out.union(piece)
        return out

    def to_dict(self) -> dict:
        return dict(name=self.name, version=self.version, n=self.n, notch_span=self.notch_span,
                    passbands=[dict(l_l=a, l_r=b) for a, b in self.passbands])

    @classmethod
    def from_dict(cls, data: dict) -> "EmissionMask":
        if "passbands" in data:
            pbs = [(p["l_l"], p["l_r"]) for p in data["passbands"]]
            return cls(int(data["n"]), tuple(pbs), data.get("notch_span"), data.get("name", ""),
                       int(data.get("version", 1)))
        if "notches" in data:
            return cls.from_notches(int(data["n"]), [tuple(x) for x in data["notches"]],
                                    notch_span=data.get("notch_span"), name=data.get("name", ""))
        raise MaskError("mask needs 'passbands' or 'notches'")

    @classmethod
    def load(cls, path) -> "EmissionMask":
        return cls.from_dict(json.loads(Path(path).read_text()))


def carrier_terms(cfg: SystemConfig, mask: EmissionMask, n_h: int = None) -> dict:
    """``{carrier: [(edge, orientation, i), ...]}`` for every shaped carrier."""
    n_h = cfg.nh_max if n_h is None else n_h
    reach = cfg.n_ci + n_h
    out = {}
    for l, r in mask.passbands:
        for k in range(l + cfg.n_ci + 1, r - cfg.n_ci):
            parts = []
            if k - l <= reach:
                parts.append((l, LEFT, k - l))
            if r - k <= reach:
                parts.append((r, RIGHT, k - r))
            if parts:
                out[k] = parts
    return out


@dataclass
class CarrierPlan:
    """Role of every carrier plus the resolved coefficients of shaped ones.

    ``role`` entries are "null", "cc", "data" (basic pulse) or "shaped".
    """

    cfg: SystemConfig
    mask: EmissionMask
    role: list
    terms: dict
    coefficients: dict = field(default_factory=dict)
    notes: dict = field(default_factory=dict)

    @property
    def data_carriers(self) -> list:
        return [k for k, r in enumerate(self.role) if r in ("data", "shaped")]

    @property
    def shaped_carriers(self) -> list:
        return [k for k, r in enumerate(self.role) if r == "shaped"]

    @property
    def cc_carriers(self) -> list:
        return [k for k, r in enumerate(self.role) if r == "cc"]

    def counts(self) -> dict:
        return dict(data=len(self.data_carriers), shaped=len(self.shaped_carriers), cc=len(self.cc_carriers))

    def rows(self):
        """(index, role, edge, i, j) per carrier; blank where not applicable."""
        for k, role in enumerate(self.role):
            edge, i, j = "", "", ""
            parts = self.terms.get(k, [])
            for e, orientation, rel in parts:
                if orientation == LEFT:
                    i = rel
                else:
                    j = rel
                edge = e if edge == "" else f"{edge}|{e}"
            if role == "cc":
                edge = self.notes["cc_edge"][k]
                i = k - edge
            yield k, role, edge, i, j


def _resolve_banks(cfg, source, edges, fallback):
    banks, converted = {}, []
    for edge, orientation in edges:
        bank = derive_bank(source, edge, orientation, cfg, sample_domain_fallback=fallback)
        if bank.flavor != (source.flavor if isinstance(source, (EdgeBank, BankSet)) else None):
            converted.append((edge, orientation_name(orientation)))
        banks[(edge, orientation)] = bank
    return banks, converted


def _source_method(source):
    banks = source.banks if isinstance(source, BankSet) else (source,)
    return banks[0].provenance.get("method")


def plan_mask(cfg: SystemConfig, mask: EmissionMask, source=None, *, n_h: int = None,
              allow_local_narrow: bool = False, sample_domain_fallback: bool = True,
              rc_data: str = "interior") -> CarrierPlan:
    """Assign roles to all carriers and resolve coefficients from ``source``.

    ``source`` is an EdgeBank, a BankSet, a ``{carrier: [coeffs]}`` dict from
    :func:`~ofdmshape.optimize.adhoc_optimize`, or ``None`` for plain RC
    pulses.  With ``None`` the data carriers are the passband interiors
    (``rc_data="interior"``) or the data carriers the shaped plan would
    have (``rc_data="plan"``).
    """
    mask.validate(cfg)
    n_h = cfg.nh_max if n_h is None else n_h
    role = ["null"] * cfg.n
    cc_edge = {}
    if source is None:
        for l, r in mask.passbands:
            if rc_data == "interior":
                rng = range(l + 1, r)
            elif rc_data == "plan":
                rng = range(l + cfg.n_ci + 1, r - cfg.n_ci)
            else:
                raise ValueError(f"unknown rc_data {rc_data!r}")
            for k in rng:
                role[k] = "data"
        return CarrierPlan(cfg, mask, role, {}, {}, dict(method="rc-only", rc_data=rc_data))

    terms = carrier_terms(cfg, mask, n_h)
    for l, r in mask.passbands:
        for edge, rng in ((l, range(l - cfg.n_co, l + cfg.n_ci + 1)), (r, range(r - cfg.n_ci, r + cfg.n_co + 1))):
            for k in rng:
                if not 0 <= k < cfg.n:
                    raise MaskError(f"cancellation carrier {k} of edge {edge} outside [0, {cfg.n})")
                if role[k] == "cc":
                    raise MaskError(f"cancellation carriers of edges {cc_edge[k]} and {edge} collide at {k}")
                role[k] = "cc"
                cc_edge[k] = edge
    for l, r in mask.passbands:
        for k in range(l + cfg.n_ci + 1, r - cfg.n_ci):
            role[k] = "shaped" if k in terms else "data"

    notes = dict(cc_edge=cc_edge, converted=[])
    if isinstance(source, dict):
        coeffs = {}
        for k, parts in terms.items():
            if k not in source or len(source[k]) != len(parts):
                raise MaskError(f"ad hoc coefficients do not cover carrier {k}")
            coeffs[k] = list(source[k])
        notes["method"] = "adhoc"
        return CarrierPlan(cfg, mask, role, terms, coeffs, notes)

    method = _source_method(source)
    notes["method"] = method
    if method == "local" and not allow_local_narrow:
        for (l, r), nd in zip(mask.passbands, mask.widths()):
            if nd < cfg.wide_threshold:
                raise MaskError(f"passband ({l}, {r}) with N_D={nd} is narrower than {cfg.wide_threshold}; "
                                "local banks only serve wide passbands")
    edges = sorted({(e, o) for parts in terms.values() for e, o, _ in parts})
    banks, converted = _resolve_banks(cfg, source, edges, sample_domain_fallback)
    notes["converted"] = converted
    coeffs = {}
    for k, parts in terms.items():
        out = []
        for e, o, rel in parts:
            bank = banks[(e, o)]
            col = abs(rel) - cfg.n_ci - 1
            if col >= bank.n_h:
                raise MaskError(f"bank at edge {e} has {bank.n_h} columns, carrier {k} needs column {col}")
            out.append(bank.columns[col])
        coeffs[k] = out
    return CarrierPlan(cfg, mask, role, terms, coeffs, notes)


def plan_pulses(plan: CarrierPlan) -> dict:
    """``{carrier: pulse}`` for all data carriers; ``None`` marks a basic pulse."""
    out = {}
    for k in plan.data_carriers:
        if k in plan.coefficients:
            out[k] = assemble_pulse(plan.cfg, k, plan.coefficients[k])
        else:
            out[k] = None
    return out


def evaluate_plan(plan: CarrierPlan, pulses: dict = None, density: int = 8):
    """Analytical PSD normalized to the passband maximum, and PSD_max per notch."""
    pulses = plan_pulses(plan) if pulses is None else pulses
    curve = analytical_psd(plan.cfg, pulses, density=density, reference=plan.mask.passband_band())
    report = {}
    for band in plan.mask.notch_components():
        report[band.label] = psd_max(curve, band)
    return curve, report


def plan_oobe(plan: CarrierPlan, pulses: dict = None) -> float:
    """Shaped carriers' energy in the union of the notches, per symbol period."""
    pulses = plan_pulses(plan) if pulses is None else pulses
    phi = band_matrix(plan.mask.notch_band(), plan.cfg.length)
    shaped = {k: pulses[k] for k in plan.shaped_carriers}
    return total_oobe(plan.cfg, shaped, {k: phi for k in shaped})


def write_plan_csv(path, plan: CarrierPlan, provenance: dict = None) -> None:
    with open(path, "w", newline="") as fh:
        for k, v in (provenance or {}).items():
            fh.write(f"# {k}={v}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "role", "edge", "i", "j"])
        for row in plan.rows():
            w.writerow(row)


def cost_report(cfg: SystemConfig, plan_or_count, scheme: str, n_qq: int = None) -> dict:
    """Online products and stored coefficients per OFDM symbol.

    Scheme A keeps the transformed coefficients of every shaped carrier;
    scheme B keeps the R precomputed banks and transforms the harmonic
    start terms on the fly.  ``n_qq`` defaults to 2 n_q.
    """
    n_shaped = plan_or_count if isinstance(plan_or_count, int) else len(plan_or_count.shaped_carriers)
    n_qq = 2 * cfg.n_q if n_qq is None else n_qq
    per_column = cfg.n_cc + 2 * n_qq
    if scheme == "A":
        return dict(scheme="A", shaped=n_shaped, products=0, stored=2 * n_shaped * per_column)
    if scheme == "B":
        return dict(scheme="B", shaped=n_shaped, products=2 * n_shaped * n_qq,
                    stored=cfg.nh_max * cfg.ratio * per_column)
    raise ValueError(f"unknown scheme {scheme!r}")
