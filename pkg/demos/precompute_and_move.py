"""Optimize one edge once, then reuse the result at other edges.

A left edge is optimized at carrier 40 of the small desk system.  The same
coefficients are then shifted to a far-away edge and mirrored onto a right
edge, and the out-of-band energy of each carrier is compared with the
original.  Run: python3 demos/precompute_and_move.py
"""
import numpy as np

from ofdmshape.bands import analytical_psd, band_matrix, notched_band, oobe_energy, psd_max
from ofdmshape.config import LEFT, RIGHT, desk_profile
from ofdmshape.optimize import local_optimize_edge
from ofdmshape.pulses import assemble_pulse, basic_pulse
from ofdmshape.transforms import derive_bank

cfg = desk_profile(n_co=1)
span = 0.1
bank = local_optimize_edge(cfg, 40, LEFT, "cc+harmonic", span=span)
print(f"N={cfg.n}, guard={cfg.n_gi}, rolloff={cfg.beta}; optimized {len(bank.columns)} carriers at edge 40")


def energies(b):
    # precise=True integrates |H|^2 directly; the quadratic form loses digits on tiny energies
    band = band_matrix(notched_band(cfg, b.edge, b.orientation, span), cfg.length)
    out = []
    for c in b.columns:
        k = b.edge + c.i if b.orientation == LEFT else b.edge - abs(c.i)
        out.append(oobe_energy(assemble_pulse(cfg, k, c), band, precise=True))
    return np.array(out)


base = energies(bank)
moved = derive_bank(bank, 40 + 8 * cfg.ratio, LEFT, cfg)
mirrored = derive_bank(bank, 200, RIGHT, cfg)
for name, other in (("shifted", moved), ("mirrored", mirrored)):
    rel = np.abs(energies(other) - base) / base
    print(f"{name:9s} edge {other.edge:3d}: worst relative energy change {rel.max():.1e}")

# what shaping buys: one carrier next to the edge, alone
k = 40 + bank.columns[0].i
band = notched_band(cfg, 40, LEFT, span)
for label, h in (("raised cosine", basic_pulse(cfg, k)), ("shaped", assemble_pulse(cfg, k, bank.columns[0]))):
    curve = analytical_psd(cfg, {k: h}, density=16)
    print(f"carrier {k} {label:13s}: peak in notch {psd_max(curve, band):7.2f} dB")
