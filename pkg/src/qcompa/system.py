"""Network dimensions, converter resolution, noise power and SQINR targets."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidDimensionError, InvalidParameterError
from .quantization import QuantizerSpec, parse_bits, quant_gain


def db_to_linear(value_db):
    return 10.0 ** (np.asarray(value_db, dtype=float) / 10.0)


def linear_to_db(value):
    return 10.0 * np.log10(np.asarray(value, dtype=float))


def watts_to_dbm(value):
    return linear_to_db(value) + 30.0


def dbm_to_watts(value_dbm):
    return db_to_linear(np.asarray(value_dbm, dtype=float) - 30.0)


@dataclass(frozen=True)
class SystemConfig:
    """Dimensions and link parameters of one multicell OFDM downlink.

    ``gamma`` holds linear SQINR targets: either one scalar for every stream
    or an array of shape (n_cells, n_users, n_subcarriers). ``noise_power`` is
    sigma^2 in watts.
    """

    n_cells: int
    n_users: int
    n_antennas: int
    n_subcarriers: int
    bits: float = math.inf
    noise_power: float = 1.0
    gamma: float | np.ndarray = 1.0
    quantizer: QuantizerSpec = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        for name in ("n_cells", "n_users", "n_antennas", "n_subcarriers"):
            if int(getattr(self, name)) < 1:
                raise InvalidDimensionError(f"{name} must be >= 1")
        object.__setattr__(self, "bits", parse_bits(self.bits))
        object.__setattr__(self, "quantizer", quant_gain(self.bits))
        if not self.noise_power > 0:
            raise InvalidParameterError("noise power must be positive")
        g = np.asarray(self.gamma, dtype=float)
        if g.ndim and g.shape != self.stream_shape:
            raise InvalidDimensionError(f"gamma must be scalar or shaped {self.stream_shape}")
        if np.any(~(g > 0)):
            raise InvalidParameterError("SQINR targets must be positive")

    @property
    def stream_shape(self) -> tuple[int, int, int]:
        return (self.n_cells, self.n_users, self.n_subcarriers)

    @property
    def n_streams(self) -> int:
        return self.n_cells * self.n_users * self.n_subcarriers

    @property
    def alpha(self) -> float:
        return self.quantizer.alpha

    @property
    def beta(self) -> float:
        return self.quantizer.beta

    def targets(self) -> np.ndarray:
        return np.broadcast_to(np.asarray(self.gamma, dtype=float), self.stream_shape).copy()

    def noise(self) -> np.ndarray:
        return np.full(self.stream_shape, float(self.noise_power))

    def with_gamma(self, gamma) -> "SystemConfig":
        return SystemConfig(
            self.n_cells, self.n_users, self.n_antennas, self.n_subcarriers,
            self.bits, self.noise_power, gamma,
        )

    def with_bits(self, bits) -> "SystemConfig":
        return SystemConfig(
            self.n_cells, self.n_users, self.n_antennas, self.n_subcarriers,
            bits, self.noise_power, self.gamma,
        )

    def to_dict(self) -> dict:
        g = np.asarray(self.gamma, dtype=float)
        return {
            "n_cells": self.n_cells,
            "n_users": self.n_users,
            "n_antennas": self.n_antennas,
            "n_subcarriers": self.n_subcarriers,
            "bits": "inf" if math.isinf(self.bits) else int(self.bits),
            "alpha": self.alpha,
            "beta": self.beta,
            "noise_power_w": self.noise_power,
            "gamma": float(g) if g.ndim == 0 else g.tolist(),
        }
