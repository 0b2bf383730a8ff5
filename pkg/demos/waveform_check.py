"""Build a shaped transmitter for a fragmented mask and check it empirically.

The mask leaves two passbands on the desk system.  Adaptive banks are
optimized for the edges, a plan is resolved, and a QPSK waveform is
synthesized.  Its Welch spectrum is compared with the analytical PSD, a
plain DFT receiver recovers the symbols, and the PAPR is compared with an
unshaped transmitter on the same carriers.
Run: python3 demos/waveform_check.py
"""
from pathlib import Path

from ofdmshape.cli import build_plan, optimize_source, verify_plan
from ofdmshape.scenario import load_scenario

sc = load_scenario(Path(__file__).resolve().parent.parent / "scenarios" / "desk-verify.json")
plan = build_plan(sc, optimize_source(sc))
print(f"passbands {sc.mask.passbands}: {len(plan.data_carriers)} data carriers")
report, curves, wave = verify_plan(sc, plan, symbols=2000, seed=1)
print(f"Welch vs expected estimator mean: worst {report['welch_dev_db']:.2f} dB inside the notches")
print(f"Welch vs analytical PSD directly: worst {report['welch_dev_raw_db']:.2f} dB "
      "(window leakage fills the deep nulls)")
print(f"EVM at a plain DFT receiver: {report['evm_db']:.1f} dB")
print(f"PAPR at 1e-2: shaped {report['papr_1e2_db']:.2f} dB, raised cosine {report['papr_rc_1e2_db']:.2f} dB")
for band, value in report["psd_max_db"].items():
    print(f"peak PSD in notch {band}: {value:.1f} dB")
