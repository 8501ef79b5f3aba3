"""MMSE scalar quantizers for Gaussian inputs and the additive quantization noise model.

A b-bit converter is modeled as ``Q(x) ~ alpha*x + q`` with ``alpha = 1 - beta``
and ``beta`` the normalized distortion of the Lloyd-Max quantizer for a
unit-variance Gaussian. Designs are computed once per resolution and cached.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import ndtr

from .errors import InvalidDimensionError, InvalidParameterError, UnsupportedResolutionError

SUPPORTED_BITS = (1, 2, 3, 4, 5)
INF_BITS = math.inf

_SQRT_2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class QuantizerSpec:
    bits: float
    alpha: float
    beta: float
    levels: tuple[float, ...] = field(default=())
    thresholds: tuple[float, ...] = field(default=())

    @property
    def is_ideal(self) -> bool:
        return math.isinf(self.bits)


def parse_bits(value) -> float:
    """Accept 1..5, ``inf``, ``"inf"`` or ``None`` (infinite resolution)."""
    if value is None:
        return INF_BITS
    if isinstance(value, str):
        text = value.strip().lower()
        if text in ("inf", "infinity", "∞"):
            return INF_BITS
        value = float(text)
    value = float(value)
    if math.isinf(value) and value > 0:
        return INF_BITS
    if value.is_integer() and int(value) in SUPPORTED_BITS:
        return int(value)
    raise UnsupportedResolutionError(f"unsupported converter resolution: {value!r}")


def _pdf(x: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        return np.where(np.isinf(x), 0.0, np.exp(-0.5 * np.square(x)) / _SQRT_2PI)


def _interval_moments(edges: np.ndarray):
    """P, E[x 1], E[x^2 1] of a standard normal over consecutive intervals."""
    lo, hi = edges[:-1], edges[1:]
    prob = ndtr(hi) - ndtr(lo)
    first = _pdf(lo) - _pdf(hi)
    lo_f = np.where(np.isinf(lo), 0.0, lo)
    hi_f = np.where(np.isinf(hi), 0.0, hi)
    lo_term = lo_f * _pdf(lo)
    hi_term = hi_f * _pdf(hi)
    second = prob + lo_term - hi_term
    return prob, first, second


def lloyd_max_gaussian(n_levels: int, tol: float = 1e-13, max_iter: int = 100_000):
    """Lloyd-Max design for N(0,1). Returns (levels, thresholds, distortion)."""
    if n_levels < 2:
        raise InvalidParameterError("need at least two levels")
    # uniform start over +-3 sigma
    levels = np.linspace(-1.0, 1.0, n_levels) * (3.0 * (n_levels - 1) / n_levels)
    for _ in range(max_iter):
        inner = 0.5 * (levels[:-1] + levels[1:])
        edges = np.concatenate(([-np.inf], inner, [np.inf]))
        prob, first, _ = _interval_moments(edges)
        new_levels = first / prob
        step = np.max(np.abs(new_levels - levels))
        levels = new_levels
        if step < tol:
            break
    else:
        raise RuntimeError(f"Lloyd-Max did not converge for {n_levels} levels")
    inner = 0.5 * (levels[:-1] + levels[1:])
    edges = np.concatenate(([-np.inf], inner, [np.inf]))
    prob, first, second = _interval_moments(edges)
    distortion = float(np.sum(second - 2.0 * levels * first + levels**2 * prob))
    # enforce exact symmetry
    levels = 0.5 * (levels - levels[::-1])
    inner = 0.5 * (inner - inner[::-1])
    return levels, inner, distortion


@lru_cache(maxsize=None)
def quant_gain(bits) -> QuantizerSpec:
    """Quantizer design and AQNM gains for a converter resolution."""
    bits = parse_bits(bits)
    if math.isinf(bits):
        return QuantizerSpec(bits=INF_BITS, alpha=1.0, beta=0.0)
    levels, thresholds, beta = lloyd_max_gaussian(2**bits)
    return QuantizerSpec(
        bits=bits,
        alpha=1.0 - beta,
        beta=beta,
        levels=tuple(float(v) for v in levels),
        thresholds=tuple(float(v) for v in thresholds),
    )


def _quantize_real(x: np.ndarray, spec: QuantizerSpec, scale: np.ndarray) -> np.ndarray:
    levels = np.asarray(spec.levels)
    idx = np.searchsorted(np.asarray(spec.thresholds), x / scale)
    return levels[idx] * scale


def quantize(x: np.ndarray, spec: QuantizerSpec, input_variance) -> np.ndarray:
    """Element-wise quantization of real and imaginary parts.

    ``input_variance`` is E|x|^2 (scalar or broadcastable to ``x``). Complex
    inputs have each real component normalized by sqrt(variance/2); real
    inputs go through a single real quantizer normalized by sqrt(variance).
    """
    var = np.asarray(input_variance, dtype=float)
    if np.any(~(var > 0)):
        raise InvalidParameterError("input variance must be positive")
    x = np.asarray(x)
    if spec.is_ideal:
        return x
    if not np.iscomplexobj(x):
        return _quantize_real(x.astype(float), spec, np.sqrt(var))
    scale = np.sqrt(var / 2.0)
    re = _quantize_real(np.real(x), spec, scale)
    im = _quantize_real(np.imag(x), spec, scale)
    return re + 1j * im


def quant_noise_diag(precoders: np.ndarray, spec: QuantizerSpec) -> np.ndarray:
    """Per-antenna quantization-noise variance ``alpha*beta*(1/K) sum_k diag(W W^H)``.

    ``precoders`` has shape (..., K, Nb, Nu). Returns shape (..., Nb).
    """
    w = np.asarray(precoders)
    if w.ndim < 3:
        raise InvalidDimensionError("precoders must have shape (..., K, Nb, Nu)")
    per_antenna = np.sum(np.abs(w) ** 2, axis=-1).mean(axis=-2)
    return spec.alpha * spec.beta * per_antenna
