"""Notched bands, their Hermitian Toeplitz energy matrices, and PSD evaluation."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Optional

import numpy as np
import scipy.linalg

from .config import LEFT, RIGHT, ConfigError, SystemConfig
from .pulses import shaping_window

__all__ = [
    "FrequencyBand",
    "BandMatrix",
    "NumericalConsistencyError",
    "PsdCurve",
    "notched_band",
    "band_matrix",
    "phi",
    "pulse_spectrum",
    "spectrum_on_grid",
    "spectral_energy",
    "oobe_energy",
    "dual_oobe_energy",
    "analytical_psd",
    "psd_max",
    "total_oobe",
    "write_psd_csv",
]

# dense Toeplitz products below this size, FFT embedding above it
_DENSE_LIMIT = 2048


class NumericalConsistencyError(ArithmeticError):
    """A quadratic form of a PSD matrix came out clearly negative."""


@dataclass(frozen=True)
class FrequencyBand:
    """Union of disjoint half-open intervals [a, b) of normalized frequency."""

    segments: tuple
    label: Optional[tuple] = None

    def __post_init__(self):
        segs = tuple(sorted((float(a), float(b)) for a, b in self.segments))
        for a, b in segs:
            if not 0.0 <= a < b <= 1.0:
                raise ValueError(f"bad segment [{a}, {b})")
        for (a0, b0), (a1, b1) in zip(segs, segs[1:]):
            if a1 < b0:
                raise ValueError("segments overlap")
        if not segs:
            raise ValueError("empty band")
        object.__setattr__(self, "segments", segs)

    @classmethod
    def interval(cls, start: float, stop: float, label=None) -> "FrequencyBand":
        """Band [start, stop) taken modulo 1; spans of 1 or more cover everything."""
        span = stop - start
        if span <= 0:
            raise ValueError("empty band")
        if span >= 1.0:
            return cls(((0.0, 1.0),), label)
        a = start % 1.0
        b = a + span
        if b <= 1.0:
            return cls(((a, b),), label)
        segs = [(a, 1.0)]
        if b - 1.0 > 0:
            segs.append((0.0, b - 1.0))
        return cls(tuple(segs), label)

    def ends(self) -> np.ndarray:
        """Boundary frequencies in [0, 1); the 1 -> 0 wrap and shared cuts are interior."""
        ends = np.round(np.mod([e for seg in self.segments for e in seg], 1.0), 12)
        values, counts = np.unique(ends, return_counts=True)
        return values[counts == 1]

    @property
    def measure(self) -> float:
        return sum(b - a for a, b in self.segments)

    def contains(self, f) -> np.ndarray:
        f = np.mod(np.asarray(f, dtype=float), 1.0)
        out = np.zeros(f.shape, dtype=bool)
        for a, b in self.segments:
            out |= (f >= a) & (f < b)
        return out

    def union(self, other: "FrequencyBand") -> "FrequencyBand":
        merged = []
        for a, b in sorted(self.segments + other.segments):
            if merged and a <= merged[-1][1]:
                merged[-1] = (merged[-1][0], max(merged[-1][1], b))
            else:
                merged.append((a, b))
        return FrequencyBand(tuple(merged))

    def shifted(self, df: float) -> "FrequencyBand":
        out = None
        for a, b in self.segments:
            piece = FrequencyBand.interval(a + df, b + df)
            out = piece if out is None else out.union(piece)
        return FrequencyBand(out.segments, self.label)


def notched_band(cfg: SystemConfig, edge: int, orientation: int, span: float = None) -> FrequencyBand:
    """Notched band next to a passband edge.

    A left edge has the band [edge/N - span, edge/N) below it, a right edge
    has [edge/N, edge/N + span) above it, both wrapped into [0, 1).
    """
    if not 0 <= edge < cfg.n:
        raise ValueError(f"edge {edge} outside [0, {cfg.n})")
    span = cfg.notch_span if span is None else span
    if not 0.0 < span < 1.0:
        raise ValueError(f"notch span {span} outside (0, 1)")
    f0 = edge / cfg.n
    if orientation == LEFT:
        return FrequencyBand.interval(f0 - span, f0, label=(edge, LEFT))
    if orientation == RIGHT:
        return FrequencyBand.interval(f0, f0 + span, label=(edge, RIGHT))
    raise ConfigError(f"unknown orientation {orientation!r}")


def phi(band: FrequencyBand, d) -> np.ndarray:
    """phi(d) = integral over the band of exp(j 2 pi f d) df, for integer lags d."""
    d = np.asarray(d, dtype=float)
    out = np.zeros(d.shape, dtype=complex)
    for a, b in band.segments:
        w = b - a
        out += w * np.exp(1j * np.pi * (a + b) * d) * np.sinc(w * d)
    return out


class BandMatrix:
    """Hermitian Toeplitz matrix Phi with entries phi(m - n).

    Only the first column is stored.  Two band matrices of the same size
    can be added (the result is the matrix of the summed energies, not of
    the union band).
    """

    def __init__(self, first_column, bands=()):
        self.first_column = np.asarray(first_column, dtype=complex)
        self.bands = tuple(bands)
        self._dense = None

    @property
    def size(self) -> int:
        return self.first_column.size

    @property
    def band(self) -> Optional[FrequencyBand]:
        return self.bands[0] if len(self.bands) == 1 else None

    def __add__(self, other: "BandMatrix") -> "BandMatrix":
        if other.size != self.size:
            raise ValueError("band matrices differ in size")
        return BandMatrix(self.first_column + other.first_column, self.bands + other.bands)

    def toarray(self) -> np.ndarray:
        if self._dense is None:
            c = self.first_column
            self._dense = scipy.linalg.toeplitz(c, c.conj())
        return self._dense

    def matmat(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=complex)
        if self.size <= _DENSE_LIMIT:
            return self.toarray() @ x
        c = self.first_column
        return scipy.linalg.matmul_toeplitz((c, c.conj()), x)

    def gram(self, a: np.ndarray, b: np.ndarray = None) -> np.ndarray:
        """a^H Phi b."""
        b = a if b is None else b
        return a.conj().T @ self.matmat(b)

    def quad(self, h: np.ndarray) -> float:
        """h^H Phi h, with tiny negative rounding residues clamped to zero."""
        h = np.asarray(h, dtype=complex)
        if h.shape != (self.size,):
            raise ValueError(f"pulse of length {h.shape} does not match matrix size {self.size}")
        value = float(np.vdot(h, self.matmat(h)).real)
        if value < 0:
            scale = abs(self.first_column[0].real) * float(np.vdot(h, h).real)
            if -value > 1e-12 * scale:
                raise NumericalConsistencyError(f"quadratic form {value:.3e} is negative")
            value = 0.0
        return value


def band_matrix(band: FrequencyBand, length: int) -> BandMatrix:
    if band is None or band.measure <= 0:
        raise ValueError("empty band")
    return BandMatrix(phi(band, np.arange(length)), (band,))


def pulse_spectrum(pulse, f) -> np.ndarray:
    """H(f) = sum_n pulse[n] exp(-j 2 pi f n), for scalar or array f."""
    pulse = np.asarray(pulse, dtype=complex)
    f = np.asarray(f, dtype=float)
    flat = f.reshape(-1)
    n = np.arange(pulse.size)
    out = np.empty(flat.size, dtype=complex)
    step = max(1, 2**22 // max(pulse.size, 1))
    for s in range(0, flat.size, step):
        out[s:s + step] = np.exp(-2j * np.pi * np.outer(flat[s:s + step], n)) @ pulse
    return out.reshape(f.shape)


def spectrum_on_grid(pulse, points: int) -> np.ndarray:
    """H(m / points) for m = 0..points-1 (exact when points >= len(pulse))."""
    pulse = np.asarray(pulse, dtype=complex)
    if points < pulse.size:
        raise ValueError("grid too coarse for an exact FFT evaluation")
    return np.fft.fft(pulse, points)


def spectral_energy(pulse, band: FrequencyBand) -> float:
    """Integral of |H(f)|^2 over the band by composite Gauss-Legendre rules.

    Each panel spans at most 4/L so a 48-point rule integrates the
    trigonometric polynomial |H|^2 to rounding accuracy.  Unlike the
    quadratic form this does not lose digits when the in-band energy is a
    tiny fraction of the pulse energy, at the price of O(L^2) work.
    """
    pulse = np.asarray(pulse, dtype=complex)
    x, w = np.polynomial.legendre.leggauss(48)
    total = 0.0
    for a, b in band.segments:
        panels = max(1, math.ceil((b - a) * pulse.size / 4.0))
        edges = np.linspace(a, b, panels + 1)
        half = 0.5 * np.diff(edges)
        mid = 0.5 * (edges[1:] + edges[:-1])
        f = (mid[:, None] + half[:, None] * x[None, :]).reshape(-1)
        weights = (half[:, None] * w[None, :]).reshape(-1)
        total += float(weights @ (np.abs(pulse_spectrum(pulse, f)) ** 2))
    return total


def oobe_energy(pulse, phi_matrix: BandMatrix, *, precise: bool = False) -> float:
    """Energy a pulse radiates into the band of ``phi_matrix``.

    ``precise`` integrates the spectrum over the stored bands instead of
    evaluating the quadratic form; use it when relative accuracy matters
    for very small energies.
    """
    if precise:
        if not phi_matrix.bands:
            raise ValueError("band matrix carries no band description")
        if np.asarray(pulse).shape != (phi_matrix.size,):
            raise ValueError("pulse length does not match matrix size")
        return sum(spectral_energy(pulse, b) for b in phi_matrix.bands)
    return phi_matrix.quad(pulse)


def dual_oobe_energy(pulse, left: BandMatrix, right: BandMatrix, *, precise: bool = False) -> float:
    return oobe_energy(pulse, left + right, precise=precise)


@dataclass(frozen=True)
class PsdCurve:
    """Linear PSD values on a grid of normalized frequencies."""

    grid: np.ndarray
    values: np.ndarray
    reference_level: float = 1.0

    def db(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return 10.0 * np.log10(self.values / self.reference_level)

    def normalized_to(self, band: FrequencyBand) -> "PsdCurve":
        """Same curve with the reference set to its maximum over ``band``."""
        mask = band.contains(self.grid)
        if not mask.any():
            raise ValueError("reference band holds no grid point")
        return PsdCurve(self.grid, self.values, float(self.values[mask].max()))


def analytical_psd(
    cfg: SystemConfig,
    pulses: Mapping[int, Optional[np.ndarray]],
    *,
    sigma2=None,
    density: int = 8,
    reference: FrequencyBand = None,
) -> PsdCurve:
    """PSD of a signal whose data carriers use the given pulses.

    S(f) = (1/N_s) sum_k sigma_k^2 |H_k(f)|^2 on the grid m / (density N).
    A ``None`` pulse stands for the basic pulse of that carrier, which is
    evaluated by shifting the window spectrum instead of a fresh FFT.
    """
    points = density * cfg.n
    if points < cfg.length:
        raise ValueError(f"density {density} is too low for pulses of length {cfg.length}")
    grid = np.arange(points) / points
    acc = np.zeros(points)
    basic_power = None
    for k in sorted(pulses):
        s2 = cfg.sigma2 if sigma2 is None else (sigma2[k] if isinstance(sigma2, Mapping) else sigma2)
        h = pulses[k]
        if h is None:
            if basic_power is None:
                basic_power = np.abs(np.fft.fft(shaping_window(cfg), points)) ** 2
            acc += s2 * np.roll(basic_power, density * k)
        else:
            acc += s2 * np.abs(np.fft.fft(h, points)) ** 2
    acc /= cfg.n_s
    ref = 1.0
    curve = PsdCurve(grid, acc, ref)
    if reference is not None:
        curve = curve.normalized_to(reference)
    elif acc.max() > 0:
        curve = PsdCurve(grid, acc, float(acc.max()))
    return curve


def psd_max(curve: PsdCurve, band: FrequencyBand, *, include_edges: bool = False) -> float:
    """Largest normalized PSD inside ``band`` in dB (a grid maximum).

    Grid points sitting exactly on a segment boundary are skipped unless
    ``include_edges``: a notch starts on the frequency of the edge carrier,
    whose own main lobe peaks there.
    """
    mask = band.contains(curve.grid)
    if not include_edges:
        f = np.mod(curve.grid, 1.0)
        for e in band.ends():
            mask &= ~np.isclose(f, e, rtol=0.0, atol=1e-12)
    if not mask.any():
        raise ValueError("band holds no grid point")
    peak = float(curve.values[mask].max())
    if peak <= 0:
        return -math.inf
    return 10.0 * math.log10(peak / curve.reference_level)


def total_oobe(cfg: SystemConfig, pulses: Mapping[int, np.ndarray], matrices: Mapping[int, BandMatrix],
               sigma2=None) -> float:
    """(1/N_s) sum_k sigma_k^2 E_k over the carriers listed in ``matrices``."""
    total = 0.0
    for k in sorted(matrices):
        s2 = cfg.sigma2 if sigma2 is None else (sigma2[k] if isinstance(sigma2, Mapping) else sigma2)
        total += s2 * matrices[k].quad(pulses[k])
    return total / cfg.n_s


def write_psd_csv(path, curve: PsdCurve, provenance: Mapping[str, str] = None) -> None:
    lines = [f"# {k}={v}" for k, v in (provenance or {}).items()]
    lines.append("f,psd_db")
    for f, v in zip(curve.grid, curve.db()):
        lines.append(f"{f!r},{float(v)!r}")
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
