"""Optimized coefficient containers and their on-disk format.

A bank file is JSON: a metadata block (config snapshot and hash, tool
version, bank kind) followed by one record per edge bank.  Complex arrays
are stored as lists of ``[re, im]`` pairs, which round-trip bit-exactly
because JSON floats are written with ``repr``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .config import FLAVORS, LEFT, RIGHT, SystemConfig, orientation_name, parse_orientation

__all__ = [
    "EdgeCoefficients",
    "EdgeBank",
    "BankSet",
    "BankFormatError",
    "write_banks",
    "read_banks",
]

FORMAT_TAG = "ofdmshape-bank"
FORMAT_VERSION = 1


class BankFormatError(ValueError):
    pass


def _c(x) -> np.ndarray:
    return np.asarray(x, dtype=complex).reshape(-1)


@dataclass(frozen=True, eq=False)
class EdgeCoefficients:
    """AIC + AST coefficients of one shaped carrier relative to one edge.

    ``i`` is the signed distance from the edge (positive for a left edge).
    Depending on ``flavor`` the transition is given by ``zeta`` (2 beta
    samples, head then tail) or by ``eps_start``/``eps_end`` (harmonic terms).
    ``residue`` is the edge index modulo R for the harmonic flavor.
    """

    alpha: np.ndarray
    flavor: str = "cc"
    i: int = 1
    zeta: Optional[np.ndarray] = None
    eps_start: Optional[np.ndarray] = None
    eps_end: Optional[np.ndarray] = None
    residue: Optional[int] = None

    def __post_init__(self):
        if self.flavor not in FLAVORS:
            raise ValueError(f"unknown flavor {self.flavor!r}")
        if self.i == 0:
            raise ValueError("relative index i must be nonzero")
        object.__setattr__(self, "alpha", _c(self.alpha))
        if self.flavor == "cc+zeta":
            if self.zeta is None:
                raise ValueError("cc+zeta coefficients need zeta")
            object.__setattr__(self, "zeta", _c(self.zeta))
        elif self.flavor == "cc+harmonic":
            if self.eps_start is None or self.eps_end is None:
                raise ValueError("harmonic coefficients need eps_start and eps_end")
            object.__setattr__(self, "eps_start", _c(self.eps_start))
            object.__setattr__(self, "eps_end", _c(self.eps_end))
            if len(self.eps_start) != len(self.eps_end):
                raise ValueError("eps_start and eps_end differ in length")
        elif any(v is not None for v in (self.zeta, self.eps_start, self.eps_end)):
            raise ValueError("cc-only coefficients carry no transition")

    @property
    def orientation(self) -> int:
        return LEFT if self.i > 0 else RIGHT

    def vector(self) -> np.ndarray:
        """Stacked gamma = [alpha; transition]."""
        parts = [self.alpha]
        if self.flavor == "cc+zeta":
            parts.append(self.zeta)
        elif self.flavor == "cc+harmonic":
            parts += [self.eps_start, self.eps_end]
        return np.concatenate(parts)

    @classmethod
    def from_vector(cls, gamma, *, flavor: str, i: int, n_cc: int, residue=None) -> "EdgeCoefficients":
        gamma = _c(gamma)
        alpha, rest = gamma[:n_cc], gamma[n_cc:]
        if flavor == "cc":
            if rest.size:
                raise ValueError("extra coefficients for a cc-only vector")
            return cls(alpha, flavor, i)
        if flavor == "cc+zeta":
            return cls(alpha, flavor, i, zeta=rest)
        if rest.size % 2:
            raise ValueError("harmonic transition needs an even number of coefficients")
        h = rest.size // 2
        return cls(alpha, flavor, i, eps_start=rest[:h], eps_end=rest[h:], residue=residue)

    def check_shape(self, cfg: SystemConfig, edge: int) -> None:
        if self.alpha.size != cfg.n_cc:
            raise ValueError(f"alpha has {self.alpha.size} entries, expected {cfg.n_cc}")
        if self.flavor == "cc+zeta" and self.zeta.size != 2 * cfg.beta:
            raise ValueError(f"zeta has {self.zeta.size} entries, expected {2 * cfg.beta}")
        if self.flavor == "cc+harmonic" and self.eps_start.size != cfg.n_qq(edge):
            raise ValueError(f"edge {edge} needs {cfg.n_qq(edge)} harmonic terms, got {self.eps_start.size}")

    def max_part(self) -> float:
        """Largest |Re| or |Im| over all coefficients."""
        v = self.vector()
        return float(max(np.abs(v.real).max(initial=0.0), np.abs(v.imag).max(initial=0.0)))

    def replace(self, **changes) -> "EdgeCoefficients":
        data = dict(alpha=self.alpha, flavor=self.flavor, i=self.i, zeta=self.zeta,
                    eps_start=self.eps_start, eps_end=self.eps_end, residue=self.residue)
        data.update(changes)
        return EdgeCoefficients(**data)


@dataclass(frozen=True, eq=False)
class EdgeBank:
    """Coefficients of the shaped carriers at one edge (a Gamma matrix).

    Column ``m`` belongs to the carrier at distance ``n_ci + 1 + m`` from the
    edge, on the passband side.
    """

    columns: tuple
    edge: int
    orientation: int
    flavor: str
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "columns", tuple(self.columns))
        for col in self.columns:
            if col.flavor != self.flavor:
                raise ValueError("all columns of a bank must share one flavor")
            if col.orientation != self.orientation:
                raise ValueError("column orientation differs from the bank orientation")

    def __len__(self):
        return len(self.columns)

    @property
    def n_h(self) -> int:
        return len(self.columns)

    def residue(self, cfg: SystemConfig) -> int:
        return self.edge % cfg.ratio

    def carrier(self, m: int) -> int:
        """Carrier index of column m."""
        return self.edge + self.columns[m].i

    def matrix(self) -> np.ndarray:
        """Gamma as a 2-D array, one coefficient vector per column."""
        return np.stack([c.vector() for c in self.columns], axis=1)

    def max_part(self) -> float:
        return max((c.max_part() for c in self.columns), default=0.0)

    def with_provenance(self, **extra) -> "EdgeBank":
        prov = dict(self.provenance)
        prov.update(extra)
        return EdgeBank(self.columns, self.edge, self.orientation, self.flavor, prov)


@dataclass(frozen=True, eq=False)
class BankSet:
    """One left-edge bank per residue class modulo R (an Upsilon set)."""

    banks: tuple
    base_edge: int

    def __post_init__(self):
        object.__setattr__(self, "banks", tuple(self.banks))

    def __len__(self):
        return len(self.banks)

    @property
    def flavor(self) -> str:
        return self.banks[0].flavor

    def bank_for_residue(self, residue: int, ratio: int) -> Optional[EdgeBank]:
        for bank in self.banks:
            if bank.edge % ratio == residue % ratio:
                return bank
        return None


# serialization


def _pairs(x):
    if x is None:
        return None
    return [[float(v.real), float(v.imag)] for v in np.asarray(x)]


def _unpairs(x):
    if x is None:
        return None
    arr = np.asarray(x, dtype=float).reshape(-1, 2)
    return arr[:, 0] + 1j * arr[:, 1]


def _coeff_record(c: EdgeCoefficients) -> dict:
    return {
        "i": c.i,
        "residue": c.residue,
        "alpha": _pairs(c.alpha),
        "zeta": _pairs(c.zeta),
        "eps_start": _pairs(c.eps_start),
        "eps_end": _pairs(c.eps_end),
    }


def _coeff_from_record(c: dict, flavor: str) -> EdgeCoefficients:
    return EdgeCoefficients(
        alpha=_unpairs(c["alpha"]),
        flavor=flavor,
        i=int(c["i"]),
        zeta=_unpairs(c.get("zeta")),
        eps_start=_unpairs(c.get("eps_start")),
        eps_end=_unpairs(c.get("eps_end")),
        residue=c.get("residue"),
    )


def _bank_record(bank: EdgeBank) -> dict:
    return {
        "edge": bank.edge,
        "orientation": orientation_name(bank.orientation),
        "flavor": bank.flavor,
        "provenance": bank.provenance,
        "columns": [_coeff_record(c) for c in bank.columns],
    }


def _bank_from_record(rec: dict) -> EdgeBank:
    cols = [_coeff_from_record(c, rec["flavor"]) for c in rec["columns"]]
    return EdgeBank(cols, int(rec["edge"]), parse_orientation(rec["orientation"]),
                    rec["flavor"], dict(rec.get("provenance", {})))


def write_banks(path, obj, cfg: SystemConfig, provenance: dict = None) -> None:
    """Write an EdgeBank, a BankSet or ad hoc ``{carrier: [coeffs]}`` with a config snapshot."""
    doc = {
        "format": FORMAT_TAG,
        "format_version": FORMAT_VERSION,
        "tool_version": __version__,
        "bound": cfg.bound,
        "cfg_hash": cfg.digest(),
        "cfg": cfg.to_dict(),
    }
    if isinstance(obj, BankSet):
        doc.update(kind="bankset", base_edge=obj.base_edge, banks=[_bank_record(b) for b in obj.banks])
    elif isinstance(obj, EdgeBank):
        doc.update(kind="bank", base_edge=obj.edge, banks=[_bank_record(obj)])
    elif isinstance(obj, dict):
        flavors = {c.flavor for parts in obj.values() for c in parts}
        if len(flavors) > 1:
            raise ValueError(f"mixed flavors {sorted(flavors)} in ad hoc coefficients")
        doc.update(kind="adhoc", flavor=flavors.pop() if flavors else "cc",
                   carriers=[{"k": int(k), "terms": [_coeff_record(c) for c in obj[k]]} for k in sorted(obj)])
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")
    if provenance:
        doc["provenance"] = provenance
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")


def read_banks(path):
    """Read a bank file; returns ``(source, cfg)``.

    ``source`` is an EdgeBank, a BankSet or an ad hoc ``{carrier: [coeffs]}``
    dict, whichever was written.
    """
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise BankFormatError(f"{path}: not valid JSON ({exc})") from exc
    except OSError as exc:
        raise BankFormatError(f"{path}: {exc.strerror}") from exc
    if not isinstance(doc, dict) or doc.get("format") != FORMAT_TAG:
        raise BankFormatError(f"{path}: not a bank file")
    try:
        cfg = SystemConfig.from_dict(doc["cfg"])
        if cfg.digest() != doc.get("cfg_hash"):
            raise BankFormatError(f"{path}: config hash mismatch")
        kind = doc["kind"]
        if kind == "adhoc":
            flavor = doc["flavor"]
            return {int(r["k"]): [_coeff_from_record(c, flavor) for c in r["terms"]]
                    for r in doc["carriers"]}, cfg
        banks = [_bank_from_record(r) for r in doc["banks"]]
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, BankFormatError):
            raise
        raise BankFormatError(f"{path}: malformed bank file ({exc})") from exc
    if kind == "bank":
        return banks[0], cfg
    if kind == "bankset":
        return BankSet(banks, int(doc["base_edge"])), cfg
    raise BankFormatError(f"{path}: unknown kind {kind!r}")
