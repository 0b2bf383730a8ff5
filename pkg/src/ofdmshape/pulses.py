"""Shaping window, basic pulses, cancellation-carrier and harmonic matrices.

Pulses are plain 1-D complex arrays of length ``cfg.length``; matrices of
pulses are 2-D arrays whose columns are pulses.
"""
from __future__ import annotations

import numpy as np

from .config import LEFT, RIGHT, ConfigError, SystemConfig

__all__ = [
    "shaping_window",
    "twiddle",
    "omega",
    "basic_pulse",
    "cc_carriers",
    "cc_matrix",
    "q_exponents",
    "q_matrix",
    "transition_matrix",
    "edge_design",
    "edge_term",
    "assemble_pulse",
]


def shaping_window(cfg: SystemConfig) -> np.ndarray:
    """Raised-cosine window g(n) with beta-sample tapers at both ends.

    The rise is ``0.5 (1 - cos(pi (n+1)/(beta+1)))`` so every taper sample is
    strictly positive and the rise and fall of consecutive symbols add to one.
    """
    g = np.ones(cfg.length)
    if cfg.beta:
        n = np.arange(cfg.beta)
        rise = 0.5 * (1.0 - np.cos(np.pi * (n + 1) / (cfg.beta + 1)))
        g[: cfg.beta] = rise
        g[cfg.length - cfg.beta:] = rise[::-1]
    return g


def twiddle(n: int, exponent) -> np.ndarray:
    """exp(j 2 pi exponent / n) with the integer exponent reduced mod n first.

    Reducing before scaling keeps the phase exact for large exponents.
    """
    e = np.mod(np.asarray(exponent, dtype=np.int64), n)
    return np.exp(2j * np.pi * e / n)


def omega(cfg: SystemConfig, dk: int) -> np.ndarray:
    """Diagonal of the frequency-shift map: w_N^{dk (n - n_gi)}, n = 0..L-1."""
    n = np.arange(cfg.length, dtype=np.int64)
    return twiddle(cfg.n, dk * (n - cfg.n_gi))


def _check_carrier(cfg, k):
    if not 0 <= k < cfg.n:
        raise ValueError(f"carrier {k} outside [0, {cfg.n})")


def basic_pulse(cfg: SystemConfig, k: int) -> np.ndarray:
    """p_k(n) = g(n) w_N^{k (n - n_gi)}."""
    _check_carrier(cfg, k)
    return shaping_window(cfg) * omega(cfg, k)


def cc_carriers(cfg: SystemConfig, edge: int, orientation: int) -> list[int]:
    """Cancellation-carrier indices for an edge, in column order.

    Left edges list ``edge - n_co ... edge + n_ci``; right edges list
    ``edge + n_co ... edge - n_ci``.
    """
    if orientation == LEFT:
        return list(range(edge - cfg.n_co, edge + cfg.n_ci + 1))
    if orientation == RIGHT:
        return list(range(edge + cfg.n_co, edge - cfg.n_ci - 1, -1))
    raise ConfigError(f"unknown orientation {orientation!r}")


def cc_matrix(cfg: SystemConfig, edge: int, orientation: int) -> np.ndarray:
    carriers = cc_carriers(cfg, edge, orientation)
    for c in carriers:
        if not 0 <= c < cfg.n:
            raise ValueError(f"cancellation carrier {c} of edge {edge} outside [0, {cfg.n})")
    g = shaping_window(cfg)
    return g[:, None] * np.stack([omega(cfg, c) for c in carriers], axis=1)


def q_exponents(cfg: SystemConfig, edge: int, orientation: int) -> np.ndarray:
    """beta-point IDFT frequencies used by the harmonic transition of an edge."""
    r = cfg.ratio
    base, rem = divmod(edge, r)
    nq = cfg.n_q
    if rem == 0:
        ex = np.arange(base - nq, base + nq + 1)
    else:
        ex = np.arange(base - nq + 1, base + nq + 1)
    # right edges use the same frequencies in reverse column order
    if orientation == RIGHT:
        ex = ex[::-1]
    elif orientation != LEFT:
        raise ConfigError(f"unknown orientation {orientation!r}")
    return ex


def q_matrix(cfg: SystemConfig, edge: int, orientation: int) -> np.ndarray:
    """beta x N_QQ matrix with columns w_beta^kappa."""
    n = np.arange(cfg.beta, dtype=np.int64)
    ex = q_exponents(cfg, edge, orientation)
    return twiddle(cfg.beta, np.outer(n, ex))


def transition_matrix(cfg: SystemConfig, edge: int, orientation: int, flavor: str) -> np.ndarray:
    """L x M map from transition coefficients to the transition pulse t."""
    L, b = cfg.length, cfg.beta
    if flavor == "cc":
        return np.zeros((L, 0), dtype=complex)
    if flavor == "cc+zeta":
        t = np.zeros((L, 2 * b), dtype=complex)
        idx = np.arange(b)
        t[idx, idx] = 1.0
        t[L - b + idx, b + idx] = 1.0
        return t
    if flavor == "cc+harmonic":
        q = q_matrix(cfg, edge, orientation)
        nqq = q.shape[1]
        t = np.zeros((L, 2 * nqq), dtype=complex)
        t[:b, :nqq] = q
        t[L - b:, nqq:] = q
        return t
    raise ConfigError(f"unknown flavor {flavor!r}")


def edge_design(cfg: SystemConfig, edge: int, orientation: int, flavor: str) -> np.ndarray:
    """[C | T]: maps the stacked coefficient vector gamma to the edge correction."""
    return np.hstack([cc_matrix(cfg, edge, orientation),
                      transition_matrix(cfg, edge, orientation, flavor)])


def edge_term(cfg: SystemConfig, k: int, coeffs) -> np.ndarray:
    """C alpha + t for one set of edge coefficients applied to carrier k."""
    edge = k - coeffs.i
    if coeffs.flavor == "cc+harmonic" and coeffs.residue is not None and edge % cfg.ratio != coeffs.residue:
        raise ValueError(f"coefficients of residue {coeffs.residue} applied at edge {edge}")
    out = cc_matrix(cfg, edge, coeffs.orientation) @ coeffs.alpha
    L, b = cfg.length, cfg.beta
    if coeffs.flavor == "cc+zeta":
        out[:b] += coeffs.zeta[:b]
        out[L - b:] += coeffs.zeta[b:]
    elif coeffs.flavor == "cc+harmonic":
        q = q_matrix(cfg, edge, coeffs.orientation)
        if q.shape[1] != len(coeffs.eps_start):
            raise ValueError(f"edge {edge} needs {q.shape[1]} harmonic terms, got {len(coeffs.eps_start)}")
        out[:b] += q @ coeffs.eps_start
        out[L - b:] += q @ coeffs.eps_end
    return out


def assemble_pulse(cfg: SystemConfig, k: int, coeffs=None) -> np.ndarray:
    """Proposed pulse: p_k plus the correction of every edge term given.

    ``coeffs`` is a single :class:`~ofdmshape.coefficients.EdgeCoefficients`,
    a sequence of them (a left and a right term for a narrow passband), or
    ``None`` for the basic pulse.
    """
    h = basic_pulse(cfg, k)
    if coeffs is None:
        return h
    terms = [coeffs] if hasattr(coeffs, "alpha") else list(coeffs)
    if len(terms) == 2 and not (terms[0].i > 0 > terms[1].i or terms[1].i > 0 > terms[0].i):
        raise ValueError("a dual pulse needs one left term (i > 0) and one right term (i < 0)")
    for term in terms:
        term.check_shape(cfg, k - term.i)
        h = h + edge_term(cfg, k, term)
    return h
