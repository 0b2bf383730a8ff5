"""Time-domain synthesis and empirical checks of a carrier plan.

The analytical PSD assumes white, unit-variance symbols on every data
carrier.  This module builds an actual waveform under that assumption and
checks it three ways: a Welch estimate of its spectrum, a conventional
receiver (guard interval dropped, N-point DFT), and the PAPR distribution.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np
import scipy.signal

from .bands import FrequencyBand, PsdCurve
from .mask import CarrierPlan, plan_pulses
from .pulses import basic_pulse, shaping_window

__all__ = [
    "WaveformError",
    "SymbolStream",
    "Waveform",
    "synthesize",
    "welch_psd",
    "receive",
    "evm_db",
    "symbol_papr",
    "papr_ccdf",
    "papr_at",
    "welch_expectation",
    "compare_psd",
    "write_waveform",
    "read_waveform",
]

_MAGIC = b"OFDMWAV1"
_HEADER = struct.Struct("<8s4Q")


class WaveformError(ValueError):
    """Bad stream, truncated waveform or unusable estimator settings."""


@dataclass(frozen=True, eq=False)
class SymbolStream:
    """``values[u, j]`` is the symbol sent on ``carriers[j]`` in period u."""

    carriers: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        carriers = np.asarray(self.carriers, dtype=np.int64).reshape(-1)
        values = np.asarray(self.values, dtype=complex)
        if values.ndim != 2 or values.shape[1] != carriers.size:
            raise WaveformError(f"values of shape {values.shape} do not match {carriers.size} carriers")
        if np.unique(carriers).size != carriers.size:
            raise WaveformError("repeated carrier in stream")
        object.__setattr__(self, "carriers", carriers)
        object.__setattr__(self, "values", values)

    @property
    def count(self) -> int:
        return self.values.shape[0]

    @classmethod
    def qpsk(cls, carriers, count: int, seed: int = 0) -> "SymbolStream":
        """Unit-power QPSK, i.i.d. over carriers and periods."""
        if count < 0:
            raise WaveformError("negative symbol count")
        carriers = np.asarray(carriers, dtype=np.int64)
        rng = np.random.default_rng(seed)
        bits = rng.integers(0, 2, size=(count, carriers.size, 2))
        values = ((1 - 2 * bits[..., 0]) + 1j * (1 - 2 * bits[..., 1])) / np.sqrt(2.0)
        return cls(carriers, values)


@dataclass(frozen=True, eq=False)
class Waveform:
    samples: np.ndarray
    n: int
    n_gi: int
    length: int
    count: int

    @property
    def n_s(self) -> int:
        return self.n + self.n_gi


def synthesize(plan: CarrierPlan, stream: SymbolStream, pulses: dict = None) -> Waveform:
    """Overlap-add of every symbol's pulses at stride N_s.

    The basic-pulse part of each period is one inverse DFT; shaped carriers
    add their deviation from the basic pulse on top.
    """
    cfg = plan.cfg
    pulses = plan_pulses(plan) if pulses is None else pulses
    allowed = set(plan.data_carriers)
    stray = [int(k) for k in stream.carriers if int(k) not in allowed]
    if stray:
        raise WaveformError(f"carriers {stray[:5]} are not data carriers of the plan")
    U, L, N, n_s = stream.count, cfg.length, cfg.n, cfg.n_s
    total = U * n_s + L - n_s if U else 0
    x = np.zeros(total, dtype=complex)
    if U == 0:
        return Waveform(x, N, cfg.n_gi, L, 0)

    spectrum = np.zeros((U, N), dtype=complex)
    spectrum[:, stream.carriers] = stream.values
    periodic = np.fft.ifft(spectrum, axis=1) * N
    idx = (np.arange(L) - cfg.n_gi) % N
    blocks = periodic[:, idx] * shaping_window(cfg)

    shaped = [j for j, k in enumerate(stream.carriers) if pulses.get(int(k)) is not None]
    if shaped:
        extra = np.stack([pulses[int(stream.carriers[j])] - basic_pulse(cfg, int(stream.carriers[j]))
                          for j in shaped], axis=1)
        blocks += stream.values[:, shaped] @ extra.T

    # overlap-add in a fixed order: pulses overlap only their neighbours when L <= 2 N_s
    for u in range(U):
        x[u * n_s:u * n_s + L] += blocks[u]
    return Waveform(x, N, cfg.n_gi, L, U)


def welch_psd(wave: Waveform, window_len: int, overlap_len: int, reference: FrequencyBand = None) -> PsdCurve:
    """Hann-window Welch estimate on ``window_len`` bins of [0, 1).

    Density scaling with unit sample rate, so a unit-amplitude tone
    integrates to one.  The curve is referenced to its maximum over
    ``reference`` (or globally).
    """
    x = wave.samples
    if window_len <= 0 or not 0 <= overlap_len < window_len:
        raise WaveformError(f"bad segment settings window={window_len} overlap={overlap_len}")
    if x.size < window_len:
        raise WaveformError(f"waveform of {x.size} samples is shorter than one {window_len}-sample segment")
    f, p = scipy.signal.welch(x, fs=1.0, window="hann", nperseg=window_len, noverlap=overlap_len,
                              detrend=False, return_onesided=False, scaling="density")
    f = np.mod(f, 1.0)
    order = np.argsort(f)
    f, p = f[order], p[order]
    if reference is not None:
        return PsdCurve(f, p).normalized_to(reference)
    return PsdCurve(f, p, float(p.max()) if p.max() > 0 else 1.0)


def receive(wave: Waveform, u: int, carriers=None) -> np.ndarray:
    """Conventional receiver output for period u: drop the guard, N-point DFT.

    Returns all N bins, or only ``carriers`` when given.
    """
    if u < 0 or u >= wave.count:
        raise WaveformError(f"symbol {u} outside [0, {wave.count})")
    start = u * wave.n_s + wave.n_gi
    if start + wave.n > wave.samples.size:
        raise WaveformError(f"symbol {u} is truncated")
    # the basic pulse carries w_N^{+k(n - n_gi)}, so the forward DFT / N inverts it
    bins = np.fft.fft(wave.samples[start:start + wave.n]) / wave.n
    return bins if carriers is None else bins[np.asarray(carriers)]


def evm_db(wave: Waveform, stream: SymbolStream, exclude_edges: bool = True) -> float:
    """Error vector magnitude over the received symbols, in dB.

    The first and last periods lack one overlap partner, so they are left
    out by default.
    """
    lo, hi = (1, stream.count - 1) if exclude_edges else (0, stream.count)
    if hi <= lo:
        raise WaveformError("empty stream")
    err = ref = 0.0
    for u in range(lo, hi):
        got = receive(wave, u, stream.carriers)
        err += float(np.sum(np.abs(got - stream.values[u]) ** 2))
        ref += float(np.sum(np.abs(stream.values[u]) ** 2))
    if ref == 0:
        raise WaveformError("all-zero stream has no EVM")
    if err == 0:
        return -np.inf
    return 10.0 * np.log10(err / ref)


def symbol_papr(wave: Waveform) -> np.ndarray:
    """Peak-to-average power per symbol period in dB.

    Period u covers samples [u N_s, (u+1) N_s); the average is the mean
    power over all complete periods.
    """
    n_s = wave.n_s
    U = wave.samples.size // n_s
    if U == 0:
        raise WaveformError("waveform shorter than one symbol period")
    power = np.abs(wave.samples[:U * n_s].reshape(U, n_s)) ** 2
    mean = power.mean()
    if mean == 0:
        raise WaveformError("all-zero waveform")
    return 10.0 * np.log10(power.max(axis=1) / mean)


def papr_ccdf(wave: Waveform, thresholds) -> np.ndarray:
    """P(PAPR > threshold) for each threshold in dB."""
    papr = symbol_papr(wave)
    thresholds = np.asarray(thresholds, dtype=float)
    return (papr[None, :] > thresholds.reshape(-1, 1)).mean(axis=1)


def papr_at(wave: Waveform, probability: float) -> float:
    """PAPR level exceeded with the given probability (empirical quantile)."""
    return float(np.quantile(symbol_papr(wave), 1.0 - probability))


def welch_expectation(curve: PsdCurve, window_len: int, reference: FrequencyBand = None) -> PsdCurve:
    """Mean of the Hann-window Welch estimate of a process with PSD ``curve``.

    The estimator sees the true PSD through the window's spectral kernel,
    which fills in the deep nulls of a shaped spectrum.  Circular
    convolution on the curve's uniform grid is exact once the grid holds at
    least window_len + pulse_len - 1 points; use a fine analytical grid.
    """
    m = curve.grid.size
    if m < window_len:
        raise WaveformError(f"grid of {m} points is coarser than the {window_len}-sample window")
    kernel = np.abs(np.fft.fft(scipy.signal.get_window("hann", window_len), m)) ** 2
    kernel /= kernel.sum()
    values = np.real(np.fft.ifft(np.fft.fft(curve.values) * np.fft.fft(kernel)))
    values = np.maximum(values, 0.0)
    out = PsdCurve(curve.grid, values)
    if reference is not None:
        return out.normalized_to(reference)
    return PsdCurve(curve.grid, values, float(values.max()) if values.max() > 0 else 1.0)


def compare_psd(analytical: PsdCurve, estimate: PsdCurve, bands, n: int, guard: float = 1.0) -> float:
    """Largest |dB difference| between two normalized curves inside ``bands``.

    The analytical curve is interpolated onto the estimate's grid linearly in
    dB.  Points within ``guard`` carrier spacings of a band's ends are
    skipped.
    """
    grid = np.concatenate([analytical.grid, [1.0]])
    db = analytical.db()
    ref = np.interp(estimate.grid, grid, np.concatenate([db, db[:1]]))
    est = estimate.db()
    worst = 0.0
    f = np.mod(estimate.grid, 1.0)
    for band in bands:
        keep = band.contains(f)
        for e in band.ends():
            keep &= np.abs((f - e + 0.5) % 1.0 - 0.5) > guard / n
        if keep.any():
            worst = max(worst, float(np.max(np.abs(est[keep] - ref[keep]))))
    return worst


def write_waveform(path, wave: Waveform) -> None:
    """Little-endian header (magic, N, N_GI, L, U) then interleaved float64 I/Q."""
    iq = np.empty(2 * wave.samples.size, dtype="<f8")
    iq[0::2] = wave.samples.real
    iq[1::2] = wave.samples.imag
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, wave.n, wave.n_gi, wave.length, wave.count))
        fh.write(iq.tobytes())


def read_waveform(path) -> Waveform:
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) != _HEADER.size:
            raise WaveformError(f"{path}: truncated header")
        magic, n, n_gi, length, count = _HEADER.unpack(head)
        if magic != _MAGIC:
            raise WaveformError(f"{path}: not a waveform file")
        iq = np.frombuffer(fh.read(), dtype="<f8")
    expected = count * (n + n_gi) + length - (n + n_gi) if count else 0
    if iq.size != 2 * expected:
        raise WaveformError(f"{path}: expected {expected} samples, found {iq.size / 2:g}")
    return Waveform(iq[0::2] + 1j * iq[1::2], int(n), int(n_gi), int(length), int(count))
