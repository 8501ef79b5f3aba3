"""Network layout, large-scale fading and multicell Rayleigh channel realizations.

Array conventions (j = transmitting BS, i = cell of the receiving users):

* ``taps[j, i, l]``  - N_b x N_u time-domain tap l between BS j and the users of cell i
* ``freq[j, i, k]``  - N_b x N_u frequency response on subcarrier k
* ``g[j, i, u, k]``  - N_b vector, column u of ``freq[j, i, k]``
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import DelaySpreadError, InfeasibleGeometryError, InvalidDimensionError
from .ofdm import freq_from_taps

FORMAT_TAG = "qcompa-channels/1"


@dataclass(frozen=True)
class ScenarioParams:
    carrier_frequency: float = 24e9
    bandwidth: float = 100e6
    bs_spacing: float = 200.0
    min_bs_user_distance: float = 50.0
    pathloss_intercept: float = 72.0
    pathloss_exponent: float = 2.92
    shadowing_std: float = 8.7
    noise_figure: float = 5.0
    antenna_gain: float = 15.0
    delay_spread_L: int = 3
    tap_power_mode: str = "normalized"

    def __post_init__(self):
        if self.delay_spread_L < 1:
            raise InvalidDimensionError("delay spread must be >= 1 tap")
        if self.pathloss_exponent < 2:
            raise ValueError("pathloss exponent must be >= 2")
        if self.tap_power_mode not in ("normalized", "unit_per_tap"):
            raise ValueError(f"unknown tap_power_mode {self.tap_power_mode!r}")
        for name in ("carrier_frequency", "bandwidth", "bs_spacing", "min_bs_user_distance"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.shadowing_std < 0:
            raise ValueError("shadowing_std must be nonnegative")

    def noise_power_w(self) -> float:
        return 10 ** ((noise_power_dbm(self.bandwidth, self.noise_figure) - 30.0) / 10.0)


WIDEBAND = ScenarioParams()
NARROWBAND = ScenarioParams(
    carrier_frequency=2.4e9,
    bandwidth=10e6,
    bs_spacing=2000.0,
    min_bs_user_distance=100.0,
    delay_spread_L=1,
)
SCENARIOS = {"wideband": WIDEBAND, "narrowband": NARROWBAND}


def scenario_params(name: str, **overrides) -> ScenarioParams:
    try:
        base = SCENARIOS[name]
    except KeyError:
        raise ValueError(f"unknown scenario {name!r}; choose from {sorted(SCENARIOS)}") from None
    return replace(base, **overrides) if overrides else base


@dataclass(frozen=True)
class Geometry:
    bs_positions: np.ndarray  # (N_c, 2)
    user_positions: np.ndarray  # (N_c, N_u, 2)

    def distances(self) -> np.ndarray:
        """(N_c BS, N_c cells, N_u) BS-to-user distances in meters."""
        diff = self.user_positions[None, :, :, :] - self.bs_positions[:, None, None, :]
        return np.linalg.norm(diff, axis=-1)


def place_network(n_cells: int, n_users: int, params: ScenarioParams, seed,
                  max_attempts: int = 10_000) -> Geometry:
    """Square BS grid with users dropped uniformly in their serving cell."""
    if n_cells < 1 or n_users < 1:
        raise InvalidDimensionError("need at least one cell and one user")
    rng = np.random.default_rng(seed)
    row = math.ceil(math.sqrt(n_cells))
    s = params.bs_spacing
    bs = np.array([[(c % row) * s, (c // row) * s] for c in range(n_cells)], dtype=float)
    if params.min_bs_user_distance >= s / math.sqrt(2.0):
        raise InfeasibleGeometryError(
            f"cell of side {s} m cannot hold users {params.min_bs_user_distance} m from its BS"
        )
    users = np.empty((n_cells, n_users, 2))
    for c in range(n_cells):
        for u in range(n_users):
            for _ in range(max_attempts):
                p = bs[c] + rng.uniform(-s / 2, s / 2, size=2)
                if np.min(np.linalg.norm(bs - p, axis=1)) >= params.min_bs_user_distance:
                    users[c, u] = p
                    break
            else:
                raise InfeasibleGeometryError(f"could not place user {u} of cell {c}")
    return Geometry(bs, users)


def large_scale_gain_db(distance, params: ScenarioParams, shadow_draw=0.0):
    """Antenna gain minus log-distance pathloss and shadowing, in dB.

    Distances below 1 m are clamped to 1 m with a warning.
    """
    d = np.asarray(distance, dtype=float)
    if np.any(d < 1.0):
        warnings.warn("distance below 1 m clamped to 1 m", RuntimeWarning, stacklevel=2)
        d = np.maximum(d, 1.0)
    loss = params.pathloss_intercept + 10.0 * params.pathloss_exponent * np.log10(d)
    out = params.antenna_gain - (loss + np.asarray(shadow_draw, dtype=float))
    return float(out) if out.ndim == 0 else out


def noise_power_dbm(bandwidth: float, noise_figure: float) -> float:
    if not bandwidth > 0:
        raise ValueError("bandwidth must be positive")
    return -174.0 + 10.0 * math.log10(bandwidth) + noise_figure


@dataclass(frozen=True)
class ChannelRealization:
    taps: np.ndarray  # (N_c, N_c, L, N_b, N_u)
    large_scale_gain: np.ndarray  # (N_c, N_c, N_u) linear
    n_subcarriers: int
    seed: int | None = None
    freq: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        taps = np.asarray(self.taps, dtype=complex)
        if taps.ndim != 5 or taps.shape[0] != taps.shape[1]:
            raise InvalidDimensionError("taps must be shaped (N_c, N_c, L, N_b, N_u)")
        object.__setattr__(self, "taps", taps)
        object.__setattr__(self, "freq", freq_from_taps(taps, self.n_subcarriers))

    @property
    def n_cells(self) -> int:
        return self.taps.shape[0]

    @property
    def n_antennas(self) -> int:
        return self.taps.shape[3]

    @property
    def n_users(self) -> int:
        return self.taps.shape[4]

    @property
    def g(self) -> np.ndarray:
        """Per-user channel vectors shaped (N_c, N_c, N_u, K, N_b)."""
        return np.moveaxis(self.freq, -1, 2)

    def matches(self, config) -> bool:
        return (self.n_cells, self.n_users, self.n_antennas, self.n_subcarriers) == (
            config.n_cells, config.n_users, config.n_antennas, config.n_subcarriers,
        )

    @classmethod
    def from_freq(cls, freq: np.ndarray, large_scale_gain=None) -> "ChannelRealization":
        """Wrap per-subcarrier channels by treating them as K taps of a K-point IDFT."""
        freq = np.asarray(freq, dtype=complex)
        n_sub = freq.shape[2]
        taps = np.fft.ifft(freq, axis=2)
        if large_scale_gain is None:
            large_scale_gain = np.ones(freq.shape[:2] + (freq.shape[-1],))
        return cls(taps, np.asarray(large_scale_gain, dtype=float), n_sub)

    def to_json(self) -> dict:
        return {
            "format": FORMAT_TAG,
            "n_cells": self.n_cells,
            "n_users": self.n_users,
            "n_antennas": self.n_antennas,
            "n_subcarriers": self.n_subcarriers,
            "delay_spread_L": self.taps.shape[2],
            "seed": self.seed,
            "large_scale_gain": self.large_scale_gain.tolist(),
            "taps": np.stack([self.taps.real, self.taps.imag], axis=-1).tolist(),
        }

    @classmethod
    def from_json(cls, data: dict) -> "ChannelRealization":
        if data.get("format") != FORMAT_TAG:
            raise ValueError(f"not a {FORMAT_TAG} document")
        raw = np.asarray(data["taps"], dtype=float)
        taps = raw[..., 0] + 1j * raw[..., 1]
        out = cls(taps, np.asarray(data["large_scale_gain"], dtype=float),
                  int(data["n_subcarriers"]), data.get("seed"))
        expected = (data["n_cells"], data["n_cells"], data["delay_spread_L"],
                    data["n_antennas"], data["n_users"])
        if out.taps.shape != tuple(expected):
            raise InvalidDimensionError(f"tap array shape {out.taps.shape} != {expected}")
        return out

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json()))

    @classmethod
    def load(cls, path) -> "ChannelRealization":
        return cls.from_json(json.loads(Path(path).read_text()))


def draw_channels(geometry: Geometry, params: ScenarioParams, n_antennas: int,
                  n_subcarriers: int, seed, shadowing: bool = True) -> ChannelRealization:
    """Rayleigh taps scaled by pathloss and lognormal shadowing."""
    n_taps = params.delay_spread_L
    if n_subcarriers < n_taps:
        raise DelaySpreadError(f"K={n_subcarriers} is smaller than L={n_taps}")
    rng = np.random.default_rng(seed)
    n_cells, n_users = geometry.user_positions.shape[:2]
    dist = geometry.distances()
    shadow = rng.normal(0.0, params.shadowing_std, size=dist.shape) if shadowing else 0.0
    gain = 10.0 ** (large_scale_gain_db(dist, params, shadow) / 10.0)
    shape = (n_cells, n_cells, n_taps, n_antennas, n_users)
    small = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)
    per_tap = gain / n_taps if params.tap_power_mode == "normalized" else gain
    taps = small * np.sqrt(per_tap)[:, :, None, None, :]
    return ChannelRealization(taps, gain, n_subcarriers, _seed_int(seed))


def _seed_int(seed):
    if isinstance(seed, (int, np.integer)):
        return int(seed)
    if isinstance(seed, np.random.SeedSequence):
        return int(seed.generate_state(1)[0])
    return None


def generate_instance(n_cells: int, n_users: int, n_antennas: int, n_subcarriers: int,
                      params: ScenarioParams, seed, shadowing: bool = True):
    """Geometry and channels from one seed (two independent child streams)."""
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    geo_ss, ch_ss = ss.spawn(2)
    geometry = place_network(n_cells, n_users, params, geo_ss)
    channels = draw_channels(geometry, params, n_antennas, n_subcarriers, ch_ss, shadowing)
    if isinstance(seed, (int, np.integer)):
        channels = replace(channels, seed=int(seed))
    return geometry, channels
