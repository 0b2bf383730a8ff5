"""System parameters for the OFDM shaping pipeline."""
from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass

__all__ = [
    "ConfigError",
    "SystemConfig",
    "LEFT",
    "RIGHT",
    "FLAVORS",
    "full_profile",
    "desk_profile",
    "orientation_name",
    "parse_orientation",
]

# Orientation of a passband edge; the sign matches the sign of the relative index i.
LEFT = 1
RIGHT = -1

# CC only / CC + sample-domain transition / CC + harmonic (IDFT) transition.
FLAVORS = ("cc", "cc+zeta", "cc+harmonic")


class ConfigError(ValueError):
    """Raised for parameter sets that violate the system constraints."""


def orientation_name(orientation: int) -> str:
    return "left" if orientation == LEFT else "right"


def parse_orientation(value) -> int:
    if value in (LEFT, "left", "+", "L"):
        return LEFT
    if value in (RIGHT, "right", "-", "R"):
        return RIGHT
    raise ConfigError(f"unknown orientation {value!r}")


@dataclass(frozen=True)
class SystemConfig:
    """Scalar parameters of the OFDM system and of the shaping method.

    Attributes
    ----------
    n : int
        Number of carriers (DFT size).
    n_gi : int
        Guard-interval length in samples.
    beta : int
        Length of each raised-cosine transition in samples.
    length : int
        Pulse length L. Defaults to ``n + n_gi + beta``, which keeps the
        window flat over the receiver DFT window.
    n_ci, n_co : int
        Cancellation carriers inside / outside the passband at each edge.
    n_q : int
        Harmonic transition terms per side of an edge.
    nh_min, nh_max : int
        Smallest / largest number of shaped data carriers per edge.
    notch_span : float
        Normalized span B_n of each notched band.
    sigma2 : float
        Symbol variance of every data carrier.
    bound : float
        Box bound on the real and imaginary part of every coefficient.
    wide_guard : int
        Extra carriers beyond ``nh_max + 2 n_ci`` for a passband to count as wide.
    """

    n: int
    n_gi: int
    beta: int
    length: int = None  # type: ignore[assignment]
    n_ci: int = 2
    n_co: int = 2
    n_q: int = 2
    nh_min: int = 4
    nh_max: int = 13
    notch_span: float = 0.5
    sigma2: float = 1.0
    bound: float = math.sqrt(2.0)
    wide_guard: int = 32

    def __post_init__(self):
        if self.length is None:
            object.__setattr__(self, "length", self.n + self.n_gi + self.beta)
        self.validate()

    def validate(self) -> None:
        ints = ("n", "n_gi", "beta", "length", "n_ci", "n_co", "n_q", "nh_min", "nh_max", "wide_guard")
        for name in ints:
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int):
                raise ConfigError(f"{name} must be an integer, got {value!r}")
        if self.n <= 0:
            raise ConfigError("n must be positive")
        if self.n_gi < 0 or self.beta < 0:
            raise ConfigError("n_gi and beta must be non-negative")
        if self.beta > self.n_gi:
            raise ConfigError(f"beta={self.beta} exceeds the guard interval n_gi={self.n_gi}")
        if self.length < self.n + self.n_gi:
            raise ConfigError(f"length={self.length} is shorter than n + n_gi={self.n + self.n_gi}")
        if self.length - 2 * self.beta < self.n:
            raise ConfigError("flat part of the window is shorter than the DFT window")
        if min(self.n_ci, self.n_co, self.n_q) < 0:
            raise ConfigError("n_ci, n_co and n_q must be non-negative")
        if not 1 <= self.nh_min <= self.nh_max:
            raise ConfigError(f"need 1 <= nh_min <= nh_max, got {self.nh_min}, {self.nh_max}")
        if not 0.0 < self.notch_span < 1.0:
            raise ConfigError(f"notch_span must lie in (0, 1), got {self.notch_span}")
        if not self.sigma2 > 0:
            raise ConfigError("sigma2 must be positive")
        if not self.bound > 0:
            raise ConfigError("bound must be positive")
        if self.wide_guard < 0:
            raise ConfigError("wide_guard must be non-negative")

    # derived quantities

    @property
    def ratio(self) -> int:
        """R = n / beta; only defined as an integer."""
        if self.beta == 0 or self.n % self.beta:
            raise ConfigError(f"n/beta = {self.n}/{self.beta} is not an integer")
        return self.n // self.beta

    @property
    def has_integral_ratio(self) -> bool:
        return self.beta > 0 and self.n % self.beta == 0

    @property
    def n_cc(self) -> int:
        return self.n_ci + self.n_co + 1

    @property
    def n_s(self) -> int:
        """Symbol period."""
        return self.n + self.n_gi

    @property
    def nd_min(self) -> int:
        return self.nh_min + 2 * self.n_ci

    @property
    def nd_max(self) -> int:
        return self.nh_max + 2 * self.n_ci

    @property
    def wide_threshold(self) -> int:
        return self.nh_max + 2 * self.n_ci + self.wide_guard

    def n_qq(self, edge: int) -> int:
        return 2 * self.n_q + 1 if edge % self.ratio == 0 else 2 * self.n_q

    def n_coeffs(self, flavor: str, edge: int) -> int:
        """Complex coefficients of one edge term."""
        if flavor == "cc":
            return self.n_cc
        if flavor == "cc+zeta":
            return self.n_cc + 2 * self.beta
        if flavor == "cc+harmonic":
            return self.n_cc + 2 * self.n_qq(edge)
        raise ConfigError(f"unknown flavor {flavor!r}")

    def replace(self, **changes) -> "SystemConfig":
        if "length" not in changes and any(k in changes for k in ("n", "n_gi", "beta")):
            # keep the default relation unless the length was set explicitly
            if self.length == self.n + self.n_gi + self.beta:
                changes["length"] = None
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in dataclasses.fields(self)}

    @classmethod
    def from_dict(cls, data: dict) -> "SystemConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        return cls(**data)

    def digest(self) -> str:
        """Short stable hash of all parameters, used for file provenance."""
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def full_profile(**overrides) -> SystemConfig:
    """G.9960-like parameters: N=4096, N_GI=1024, beta=512."""
    params = dict(n=4096, n_gi=1024, beta=512)
    params.update(overrides)
    return SystemConfig(**params)


def desk_profile(**overrides) -> SystemConfig:
    """The full profile scaled down by 16 for quick runs."""
    params = dict(n=256, n_gi=64, beta=32)
    params.update(overrides)
    return SystemConfig(**params)
