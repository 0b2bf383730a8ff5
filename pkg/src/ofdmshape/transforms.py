"""Closed-form frequency shift and reversal of optimized coefficients.

A bank optimized at one passband edge is moved to any other edge without
re-optimizing.  Shifting by dk carriers leaves the CC weights alone and
rotates the transition samples by w_N^{dk (n - n_gi)}.  Conjugating every
coefficient mirrors a pulse at carrier k and left edge l onto carrier N-k
and right edge N-l.  Harmonic transitions only admit shifts that are
multiples of R, so a bank set keeps one bank per residue class of the edge.
"""
from __future__ import annotations

import numpy as np

from .coefficients import BankSet, EdgeBank, EdgeCoefficients
from .config import LEFT, RIGHT, ConfigError, SystemConfig
from .pulses import omega, q_matrix, twiddle

__all__ = [
    "UnsupportedTransformError",
    "shift_coefficients",
    "reverse_basic",
    "reverse_coefficients",
    "reversed_carrier",
    "to_sample_domain",
    "shift_bank",
    "reverse_bank",
    "derive_bank",
    "derivation_matrix",
]


class UnsupportedTransformError(ValueError):
    """The requested transform does not exist for this flavor or residue."""


def shift_coefficients(coeffs: EdgeCoefficients, delta_k: int, cfg: SystemConfig) -> EdgeCoefficients:
    """Coefficients of the same pulse moved up by ``delta_k`` carriers (edge included)."""
    if delta_k == 0:
        return coeffs
    if coeffs.flavor == "cc":
        return coeffs
    L, b = cfg.length, cfg.beta
    if coeffs.flavor == "cc+zeta":
        w = omega(cfg, delta_k)
        zeta = np.concatenate([coeffs.zeta[:b] * w[:b], coeffs.zeta[b:] * w[L - b:]])
        return coeffs.replace(zeta=zeta)
    r = cfg.ratio
    if delta_k % r:
        raise UnsupportedTransformError(f"harmonic coefficients shift only by multiples of R={r}, got {delta_k}")
    start = coeffs.eps_start * twiddle(cfg.n, -delta_k * cfg.n_gi)
    end = coeffs.eps_end * twiddle(cfg.n, delta_k * (L - b - cfg.n_gi))
    residue = None if coeffs.residue is None else (coeffs.residue + delta_k) % r
    return coeffs.replace(eps_start=start, eps_end=end, residue=residue)


def reverse_basic(coeffs: EdgeCoefficients, cfg: SystemConfig) -> EdgeCoefficients:
    """Mirror image: carrier k, edge l  ->  carrier N-k, edge N-l, opposite side."""
    out = dict(alpha=coeffs.alpha.conj(), i=-coeffs.i)
    if coeffs.flavor == "cc+zeta":
        out["zeta"] = coeffs.zeta.conj()
    elif coeffs.flavor == "cc+harmonic":
        out["eps_start"] = coeffs.eps_start.conj()
        out["eps_end"] = coeffs.eps_end.conj()
        if coeffs.residue is not None:
            out["residue"] = (-coeffs.residue) % cfg.ratio
    return coeffs.replace(**out)


def reversed_carrier(cfg: SystemConfig, k: int, flavor: str) -> int:
    """Carrier that holds the mirrored pulse of carrier k.

    Plain flavors mirror in place.  Harmonic ones can only move by
    multiples of R after the basic reversal, so they land on
    ``N - k + round((2k - N)/R) R``.  Ties round to even: any other tie
    rule sends the second reversal one comb step away from k.
    """
    if not 0 <= k < cfg.n:
        raise ValueError(f"carrier {k} outside [0, {cfg.n})")
    if flavor != "cc+harmonic":
        return k
    r = cfg.ratio
    # exact rational rounding, half to even
    q, rem = divmod(2 * k - cfg.n, r)
    if 2 * rem > r or (2 * rem == r and q % 2):
        q += 1
    out = cfg.n - k + q * r
    if not 0 <= out < cfg.n:
        raise ValueError(f"mirror of carrier {k} lands on {out}, outside [0, {cfg.n})")
    return out


def reverse_coefficients(coeffs: EdgeCoefficients, k: int, cfg: SystemConfig) -> EdgeCoefficients:
    """Coefficients of the pulse that mirrors ``coeffs`` about carrier k.

    The relative index changes sign, so a left-edge pulse becomes the
    matching right-edge pulse.  See :func:`reversed_carrier` for where the
    harmonic result sits.
    """
    target = reversed_carrier(cfg, k, coeffs.flavor)
    return shift_coefficients(reverse_basic(coeffs, cfg), target - (cfg.n - k), cfg)


def to_sample_domain(coeffs: EdgeCoefficients, edge: int, cfg: SystemConfig) -> EdgeCoefficients:
    """Rewrite a harmonic transition as its 2 beta samples (exact)."""
    if coeffs.flavor != "cc+harmonic":
        return coeffs
    q = q_matrix(cfg, edge, coeffs.orientation)
    zeta = np.concatenate([q @ coeffs.eps_start, q @ coeffs.eps_end])
    return EdgeCoefficients(coeffs.alpha, "cc+zeta", coeffs.i, zeta=zeta)


def _map_bank(bank: EdgeBank, fn, edge, orientation, flavor=None, **prov) -> EdgeBank:
    cols = [fn(c) for c in bank.columns]
    provenance = dict(bank.provenance)
    provenance.update(prov)
    return EdgeBank(cols, edge, orientation, flavor or bank.flavor, provenance)


def shift_bank(bank: EdgeBank, delta_k: int, cfg: SystemConfig) -> EdgeBank:
    if delta_k == 0:
        return bank
    return _map_bank(bank, lambda c: shift_coefficients(c, delta_k, cfg),
                     (bank.edge + delta_k) % cfg.n, bank.orientation)


def reverse_bank(bank: EdgeBank, cfg: SystemConfig) -> EdgeBank:
    return _map_bank(bank, lambda c: reverse_basic(c, cfg), (cfg.n - bank.edge) % cfg.n, -bank.orientation)


def _sample_domain_bank(bank: EdgeBank, cfg: SystemConfig) -> EdgeBank:
    return _map_bank(bank, lambda c: to_sample_domain(c, bank.edge, cfg), bank.edge, bank.orientation,
                     flavor="cc+zeta", converted="sample-domain")


def _as_left(bank: EdgeBank, cfg: SystemConfig) -> EdgeBank:
    return bank if bank.orientation == LEFT else reverse_bank(bank, cfg)


def _source_residue(cfg, target_edge, orientation):
    """Residue a left source edge must have to reach the target by R-multiple shifts."""
    r = cfg.ratio
    return target_edge % r if orientation == LEFT else (-target_edge) % r


def derive_bank(source, target_edge: int, target_orientation: int, cfg: SystemConfig, *,
                sample_domain_fallback: bool = False) -> EdgeBank:
    """Bank for ``target_edge`` obtained from an optimized bank or bank set.

    A harmonic source without the needed residue class raises
    :class:`UnsupportedTransformError`, unless ``sample_domain_fallback`` is
    set: the harmonic transitions are then expanded into samples, which
    transform for any shift, and the result has the ``cc+zeta`` flavor.
    """
    if not 0 <= target_edge < cfg.n:
        raise ValueError(f"edge {target_edge} outside [0, {cfg.n})")
    if target_orientation not in (LEFT, RIGHT):
        raise ConfigError(f"unknown orientation {target_orientation!r}")
    banks = source.banks if isinstance(source, BankSet) else (source,)
    if not banks:
        raise ValueError("empty bank set")
    if isinstance(source, EdgeBank) and source.edge == target_edge and source.orientation == target_orientation:
        return source
    lefts = [_as_left(b, cfg) for b in banks]
    flavor = lefts[0].flavor
    if flavor == "cc+harmonic":
        want = _source_residue(cfg, target_edge, target_orientation)
        match = [b for b in lefts if b.edge % cfg.ratio == want]
        if match:
            left = match[0]
        elif sample_domain_fallback:
            left = _sample_domain_bank(lefts[0], cfg)
        else:
            have = sorted({b.edge % cfg.ratio for b in lefts})
            raise UnsupportedTransformError(
                f"edge {target_edge} ({'left' if target_orientation == LEFT else 'right'}) needs a bank of "
                f"residue {want} mod {cfg.ratio}; available residues {have}")
    else:
        left = lefts[0]
    if target_orientation == LEFT:
        out = shift_bank(left, target_edge - left.edge, cfg)
    else:
        mirrored = reverse_bank(left, cfg)
        out = shift_bank(mirrored, target_edge - mirrored.edge, cfg)
    return out.with_provenance(derived_from=[left.edge, "left"], target=[target_edge, out.orientation])


def derivation_matrix(cfg: SystemConfig, flavor: str, size: int, source_edge: int, target_edge: int,
                      target_orientation: int, n_cc: int = None) -> np.ndarray:
    """Matrix T with gamma_target = T [Re gamma_source; Im gamma_source].

    The transforms are real-linear (conjugation is not complex-linear), so
    T is built by pushing the 2 ``size`` real unit vectors through them.
    ``source_edge`` is a left edge.
    """
    n_cc = cfg.n_cc if n_cc is None else n_cc
    residue = source_edge % cfg.ratio if flavor == "cc+harmonic" else None
    if target_orientation == LEFT:
        def fn(c):
            return shift_coefficients(c, target_edge - source_edge, cfg)
    else:
        mirror = (cfg.n - source_edge) % cfg.n

        def fn(c):
            return shift_coefficients(reverse_basic(c, cfg), target_edge - mirror, cfg)
    out = np.empty((size, 2 * size), dtype=complex)
    eye = np.eye(size)
    for col in range(2 * size):
        unit = eye[col % size] * (1.0 if col < size else 1j)
        c = EdgeCoefficients.from_vector(unit, flavor=flavor, i=1, n_cc=n_cc, residue=residue)
        out[:, col] = fn(c).vector()
    return out
