"""Offline optimization of edge banks and mask-specific (ad hoc) pulses.

Every energy here is a quadratic (p + A x)^H Phi (p + A x) in the real
vector x of stacked real and imaginary coefficient parts.  The pulses are
expanded on a small basis Z (CC and transition designs, basic pulses) so
that one Toeplitz product Phi Z per band serves all carriers sharing it.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bands import BandMatrix, band_matrix, notched_band
from .coefficients import BankSet, EdgeBank, EdgeCoefficients
from .config import LEFT, RIGHT, ConfigError, SystemConfig
from .pulses import basic_pulse, cc_carriers, edge_design
from .qp import BoxQP, SolverError, solve_box_qp
from .transforms import derivation_matrix

__all__ = [
    "build_local_qp",
    "local_optimize_edge",
    "adaptive_optimize",
    "adaptive_optimize_harmonic",
    "adaptive_program",
    "adhoc_optimize",
    "CarrierSolveError",
    "AdaptiveProgram",
]


class CarrierSolveError(SolverError):
    """Solver failure tied to one shaped carrier."""

    def __init__(self, carrier, cause: SolverError):
        super().__init__(f"carrier {carrier}: {cause}", cause.x, cause.residual)
        self.carrier = carrier


def _real_basis(size: int) -> np.ndarray:
    """Map [Re g; Im g] -> g."""
    eye = np.eye(size)
    return np.hstack([eye, 1j * eye])


def _quadratic(G: np.ndarray, B: np.ndarray, b: np.ndarray):
    """Real (Q, q, c) of (b + B x)^H G (b + B x)."""
    GB = G @ B
    Q = np.real(B.conj().T @ GB)
    q = 2.0 * np.real(GB.conj().T @ b)
    c = float(np.real(b.conj() @ (G @ b)))
    return Q, q, c


def _gram(phi: BandMatrix, Z: np.ndarray) -> np.ndarray:
    G = Z.conj().T @ phi.matmat(Z)
    return 0.5 * (G + G.conj().T)


def _edge_band(cfg, edge, orientation, span):
    return band_matrix(notched_band(cfg, edge, orientation, span), cfg.length)


def _check_edge(cfg, edge, orientation):
    for c in cc_carriers(cfg, edge, orientation):
        if not 0 <= c < cfg.n:
            raise ValueError(f"cancellation carrier {c} of edge {edge} outside [0, {cfg.n})")


def _coeff_count(cfg, flavor, edge):
    return cfg.n_coeffs(flavor, edge)


def _to_coeffs(cfg, x, flavor, i, edge):
    gamma = x[: x.size // 2] + 1j * x[x.size // 2:]
    residue = edge % cfg.ratio if flavor == "cc+harmonic" else None
    return EdgeCoefficients.from_vector(gamma, flavor=flavor, i=i, n_cc=cfg.n_cc, residue=residue)


def build_local_qp(cfg: SystemConfig, k: int, i: int, flavor: str = "cc+harmonic", *,
                   span: float = None) -> BoxQP:
    """Energy of carrier k's pulse in the notched band of edge k - i."""
    orientation = LEFT if i > 0 else RIGHT
    edge = k - i
    if not 0 <= edge < cfg.n:
        raise ValueError(f"edge {edge} outside [0, {cfg.n})")
    _check_edge(cfg, edge, orientation)
    phi = _edge_band(cfg, edge, orientation, span)
    D = edge_design(cfg, edge, orientation, flavor)
    Z = np.hstack([D, basic_pulse(cfg, k)[:, None]])
    G = _gram(phi, Z)
    m = D.shape[1]
    B = np.vstack([_real_basis(m), np.zeros((1, 2 * m))])
    b = np.zeros(m + 1, dtype=complex)
    b[m] = 1.0
    Q, q, c = _quadratic(G, B, b)
    return BoxQP(Q, q, c, cfg.bound)


def _single_edge_programs(cfg, edge, orientation, flavor, span, n_h):
    """(k, i, BoxQP) for the n_h carriers next to one edge, sharing one Gram matrix."""
    rel = [orientation * (cfg.n_ci + 1 + m) for m in range(n_h)]
    carriers = [edge + i for i in rel]
    for k in carriers:
        if not 0 <= k < cfg.n:
            raise ValueError(f"shaped carrier {k} of edge {edge} outside [0, {cfg.n})")
    phi = _edge_band(cfg, edge, orientation, span)
    D = edge_design(cfg, edge, orientation, flavor)
    m = D.shape[1]
    P = np.stack([basic_pulse(cfg, k) for k in carriers], axis=1)
    G = _gram(phi, np.hstack([D, P]))
    B = np.vstack([_real_basis(m), np.zeros((n_h, 2 * m))])
    out = []
    for col, (k, i) in enumerate(zip(carriers, rel)):
        b = np.zeros(m + n_h, dtype=complex)
        b[m + col] = 1.0
        Q, q, c = _quadratic(G, B, b)
        out.append((k, i, BoxQP(Q, q, c, cfg.bound)))
    return out


def local_optimize_edge(cfg: SystemConfig, edge: int, orientation: int = LEFT, flavor: str = "cc+harmonic",
                        *, span: float = None, n_h: int = None, tol: float = 1e-9) -> EdgeBank:
    """Optimize the n_h (default nh_max) carriers next to one edge independently.

    Column m shapes the carrier at distance n_ci + 1 + m from the edge and
    minimizes only its energy in that edge's notched band.
    """
    if orientation not in (LEFT, RIGHT):
        raise ConfigError(f"unknown orientation {orientation!r}")
    _check_edge(cfg, edge, orientation)
    n_h = cfg.nh_max if n_h is None else n_h
    columns, optimized, initial = [], [], []
    for k, i, qp in _single_edge_programs(cfg, edge, orientation, flavor, span, n_h):
        try:
            x = solve_box_qp(qp, tol)
        except SolverError as exc:
            raise CarrierSolveError(k, exc) from exc
        columns.append(_to_coeffs(cfg, x, flavor, i, edge))
        optimized.append(qp.objective(x))
        initial.append(qp.constant)
    prov = dict(method="local", cfg_hash=cfg.digest(), notch_span=cfg.notch_span if span is None else span,
                energy=optimized, energy_basic=initial)
    return EdgeBank(columns, edge, orientation, flavor, prov)


@dataclass
class AdaptiveProgram:
    """Joint program of the bandwidth-adaptive method.

    ``edges`` are the left edges owning a bank; ``offsets[b]`` is the first
    real variable of bank b and ``sizes[b]`` its complex coefficients per
    column.
    """

    cfg: SystemConfig
    flavor: str
    edges: list
    sizes: list
    offsets: list
    span: float
    widths: list
    qp: BoxQP = None
    isolated_weight: float = 0.0
    terms: list = field(default_factory=list)

    def column_slice(self, b: int, col: int) -> slice:
        start = self.offsets[b] + 2 * self.sizes[b] * col
        return slice(start, start + 2 * self.sizes[b])

    def banks(self, x: np.ndarray, provenance: dict) -> list:
        out = []
        for b, edge in enumerate(self.edges):
            cols = []
            for col in range(self.cfg.nh_max):
                cols.append(_to_coeffs(self.cfg, x[self.column_slice(b, col)], self.flavor,
                                       self.cfg.n_ci + 1 + col, edge))
            out.append(EdgeBank(cols, edge, LEFT, self.flavor, dict(provenance)))
        return out


def _right_source(cfg, flavor, edges, right_edge):
    if flavor != "cc+harmonic":
        return 0
    want = (-right_edge) % cfg.ratio
    for b, e in enumerate(edges):
        if e % cfg.ratio == want:
            return b
    raise ConfigError(f"right edge {right_edge} needs a bank of residue {want} mod {cfg.ratio}")


def adaptive_program(cfg: SystemConfig, edges, flavor: str, *, span: float = None,
                     widths=None, keep_terms: bool = False, isolated_weight: float = 0.0) -> AdaptiveProgram:
    """Assemble the bandwidth-adaptive cost as one real box QP.

    For each bank edge l and width N_D the right edge sits at l + N_D + 1.
    The m-th shaped carrier k = l + n_ci + m uses column m of the bank at
    l and, mirrored and shifted onto the right edge, column N_h + 1 - m of
    the bank whose residue reaches that edge.

    ``isolated_weight`` > 0 adds, per column, that multiple of the column's
    single-edge energy (its pulse without a partner term).  The plain cost
    only ever sees dual pulses, yet wide passbands use the columns alone;
    the extra term trades a little narrow-band performance for much better
    wide-band behaviour.
    """
    edges = list(edges)
    span = cfg.notch_span if span is None else span
    widths = list(range(cfg.nd_min, cfg.nd_max + 1)) if widths is None else list(widths)
    sizes = [_coeff_count(cfg, flavor, e) for e in edges]
    offsets = list(np.cumsum([0] + [2 * s * cfg.nh_max for s in sizes])[:-1])
    total = int(sum(2 * s * cfg.nh_max for s in sizes))
    prog = AdaptiveProgram(cfg, flavor, edges, sizes, offsets, span, widths)
    Q = np.zeros((total, total))
    q = np.zeros(total)
    const = 0.0
    for b, l in enumerate(edges):
        _check_edge(cfg, l, LEFT)
        D_l = edge_design(cfg, l, LEFT, flavor)
        ml = D_l.shape[1]
        phi_l = _edge_band(cfg, l, LEFT, span)
        for nd in widths:
            n_h = nd - 2 * cfg.n_ci
            if not 1 <= n_h <= cfg.nh_max:
                raise ConfigError(f"width {nd} gives {n_h} shaped carriers, outside [1, {cfg.nh_max}]")
            r = l + nd + 1
            _check_edge(cfg, r, RIGHT)
            src = _right_source(cfg, flavor, edges, r)
            T = derivation_matrix(cfg, flavor, sizes[src], edges[src], r, RIGHT)
            D_r = edge_design(cfg, r, RIGHT, flavor)
            mr = D_r.shape[1]
            phi = phi_l + _edge_band(cfg, r, RIGHT, span)
            carriers = [l + cfg.n_ci + m for m in range(1, n_h + 1)]
            P = np.stack([basic_pulse(cfg, k) for k in carriers], axis=1)
            G = _gram(phi, np.hstack([D_l, D_r, P]))
            nz = ml + mr + n_h
            for m, k in enumerate(carriers, start=1):
                left_vars = prog.column_slice(b, m - 1)
                right_vars = prog.column_slice(src, n_h - m)
                idx = np.r_[left_vars, right_vars]
                B = np.zeros((nz, idx.size), dtype=complex)
                B[:ml, : 2 * ml] = _real_basis(ml)
                B[ml:ml + mr, 2 * ml:] = T
                vec = np.zeros(nz, dtype=complex)
                vec[ml + mr + m - 1] = 1.0
                Qk, qk, ck = _quadratic(G, B, vec)
                # np.add.at handles a carrier whose two terms share a column
                np.add.at(Q, np.ix_(idx, idx), Qk)
                np.add.at(q, idx, qk)
                const += ck
                if keep_terms:
                    prog.terms.append(dict(carrier=k, left_edge=l, right_edge=r, width=nd,
                                           left=(b, m - 1), right=(src, n_h - m)))
    if isolated_weight < 0:
        raise ValueError("isolated_weight must be non-negative")
    if isolated_weight:
        for b, l in enumerate(edges):
            for col, (_, _, qp) in enumerate(_single_edge_programs(cfg, l, LEFT, flavor, span, cfg.nh_max)):
                s = prog.column_slice(b, col)
                Q[s, s] += isolated_weight * qp.quadratic
                q[s] += isolated_weight * qp.linear
                const += isolated_weight * qp.constant
    prog.isolated_weight = float(isolated_weight)
    prog.qp = BoxQP(Q, q, const, cfg.bound)
    return prog


def _solve_program(prog: AdaptiveProgram, tol: float, method: str, nh_min: int):
    try:
        x = solve_box_qp(prog.qp, tol)
    except SolverError as exc:
        raise SolverError(f"adaptive program for edges {prog.edges}: {exc}", exc.x, exc.residual) from exc
    cfg = prog.cfg
    prov = dict(method=method, cfg_hash=cfg.digest(), nh_min=nh_min, nh_max=cfg.nh_max,
                notch_span=prog.span, isolated_weight=prog.isolated_weight, objective=prog.qp.objective(x),
                objective_basic=prog.qp.constant, base_edge=prog.edges[0])
    return prog.banks(x, prov)


def adaptive_optimize(cfg: SystemConfig, edge: int = None, flavor: str = "cc+harmonic", *,
                      span: float = None, tol: float = 1e-9, isolated_weight: float = 0.0) -> EdgeBank:
    """Single left-edge bank minimizing the OOBE summed over all widths.

    A harmonic bank can only serve every width on its own when R = 1; use
    :func:`adaptive_optimize_harmonic` otherwise.
    """
    edge = cfg.n // 2 if edge is None else edge
    prog = adaptive_program(cfg, [edge], flavor, span=span, isolated_weight=isolated_weight)
    return _solve_program(prog, tol, "adaptive", cfg.nh_min)[0]


def adaptive_optimize_harmonic(cfg: SystemConfig, edge: int = None, *, span: float = None,
                               tol: float = 1e-9, isolated_weight: float = 0.0) -> BankSet:
    """R jointly optimized harmonic banks at left edges l, l+1, ..., l+R-1."""
    edge = cfg.n // 2 if edge is None else edge
    edges = [edge + r for r in range(cfg.ratio)]
    prog = adaptive_program(cfg, edges, "cc+harmonic", span=span, isolated_weight=isolated_weight)
    return BankSet(_solve_program(prog, tol, "adaptive", cfg.nh_min), edge)


def adhoc_optimize(cfg: SystemConfig, mask, flavor: str = "cc+harmonic", *, n_h: int = None,
                   tol: float = 1e-9) -> dict:
    """Per-carrier coefficients optimized for one mask.

    Every shaped carrier gets its own coefficients for the edge terms the
    plan assigns it, minimizing its energy over the union of the mask's
    notches.  The total OOBE is a sum of per-carrier energies with no shared
    variables, so the joint minimization splits into one QP per carrier.
    Returns ``{carrier: [EdgeCoefficients, ...]}``.
    """
    from .mask import carrier_terms

    terms = carrier_terms(cfg, mask, n_h)
    phi = band_matrix(mask.notch_band(), cfg.length)
    # cache edge designs, most carriers share them
    designs = {}
    out = {}
    for k in sorted(terms):
        parts = terms[k]
        mats = []
        for edge, orientation, i in parts:
            key = (edge, orientation)
            if key not in designs:
                _check_edge(cfg, edge, orientation)
                designs[key] = edge_design(cfg, edge, orientation, flavor)
            mats.append(designs[key])
        Z = np.hstack(mats + [basic_pulse(cfg, k)[:, None]])
        G = _gram(phi, Z)
        sizes = [m.shape[1] for m in mats]
        nz = sum(sizes) + 1
        B = np.zeros((nz, 2 * sum(sizes)), dtype=complex)
        row = col = 0
        for s in sizes:
            B[row:row + s, col:col + 2 * s] = _real_basis(s)
            row += s
            col += 2 * s
        vec = np.zeros(nz, dtype=complex)
        vec[-1] = 1.0
        Q, q, c = _quadratic(G, B, vec)
        try:
            x = solve_box_qp(BoxQP(Q, q, c, cfg.bound), tol)
        except SolverError as exc:
            raise CarrierSolveError(k, exc) from exc
        coeffs, col = [], 0
        for (edge, orientation, i), s in zip(parts, sizes):
            coeffs.append(_to_coeffs(cfg, x[col:col + 2 * s], flavor, i, edge))
            col += 2 * s
        out[k] = coeffs
    return out
