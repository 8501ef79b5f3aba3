"""Normalized DFT operators and the OFDM helpers built on them.

The stacked operators ``Psi = W_dft kron I`` are never materialized. The only
structure the rest of the package needs is

    diag(Psi^H blkdiag(A(0), ..., A(K-1)) Psi) = I_K kron (1/K) sum_k diag(A(k))

which makes every quantization covariance time-invariant. Indices are zero-based.
"""

from __future__ import annotations

import numpy as np

from .errors import DelaySpreadError, InvalidDimensionError


def build_dft(size: int) -> np.ndarray:
    """Unitary DFT matrix with entries exp(-2j*pi*r*c/K)/sqrt(K)."""
    if size < 1:
        raise InvalidDimensionError(f"DFT size must be >= 1, got {size}")
    idx = np.arange(size)
    return np.exp(-2j * np.pi * np.outer(idx, idx) / size) / np.sqrt(size)


def psi(n_antennas: int, n_subcarriers: int) -> np.ndarray:
    """Dense ``W_dft kron I_N``. Only used by tests and small oracles."""
    return np.kron(build_dft(n_subcarriers), np.eye(n_antennas))


def psi_row(n_antennas: int, n_subcarriers: int, k: int) -> np.ndarray:
    """Dense N x KN selector ``[W_dft]_{k,:} kron I_N``."""
    return np.kron(build_dft(n_subcarriers)[k : k + 1, :], np.eye(n_antennas))


def freq_from_taps(taps: np.ndarray, n_subcarriers: int) -> np.ndarray:
    """Frequency response ``G(k) = sum_l H_l exp(-2j*pi*k*l/K)``.

    ``taps`` has the delay axis at position -3, i.e. shape (..., L, Nb, Nu);
    the result has shape (..., K, Nb, Nu).
    """
    taps = np.asarray(taps, dtype=complex)
    if taps.ndim < 3:
        raise InvalidDimensionError("taps must have shape (..., L, Nb, Nu)")
    n_taps = taps.shape[-3]
    if n_taps < 1:
        raise InvalidDimensionError("at least one channel tap is required")
    if n_taps > n_subcarriers:
        raise DelaySpreadError(f"delay spread L={n_taps} exceeds K={n_subcarriers}")
    ell = np.arange(n_taps)
    k = np.arange(n_subcarriers)
    phase = np.exp(-2j * np.pi * np.outer(k, ell) / n_subcarriers)  # (K, L)
    return np.einsum("kl,...lab->...kab", phase, taps)


def ofdm_modulate(freq_symbols: np.ndarray, n_antennas: int | None = None) -> np.ndarray:
    """Apply ``Psi^H`` to stacked frequency-domain vectors.

    Accepts either a (K, Nb) array (row k is the symbol vector on subcarrier k)
    or a flat length K*Nb vector together with ``n_antennas``. The output has
    the same layout, with row n holding the time-domain sample n.
    """
    x = np.asarray(freq_symbols, dtype=complex)
    flat = x.ndim == 1
    if flat:
        if n_antennas is None or n_antennas < 1 or x.size % n_antennas:
            raise InvalidDimensionError(
                f"length {x.size} is not a multiple of n_antennas={n_antennas}"
            )
        x = x.reshape(-1, n_antennas)
    elif x.ndim != 2:
        raise InvalidDimensionError("expected a (K, Nb) array or a flat vector")
    elif n_antennas is not None and x.shape[1] != n_antennas:
        raise InvalidDimensionError(f"expected {n_antennas} antennas, got {x.shape[1]}")
    out = np.fft.ifft(x, axis=0, norm="ortho")
    return out.ravel() if flat else out


def ofdm_demodulate(time_samples: np.ndarray) -> np.ndarray:
    """Inverse of :func:`ofdm_modulate` for the (K, Nb) layout."""
    return np.fft.fft(np.asarray(time_samples, dtype=complex), axis=0, norm="ortho")


def time_diag_collapse(blocks: np.ndarray) -> np.ndarray:
    """Per-antenna diagonal of ``Psi^H blkdiag(A(0..K-1)) Psi``.

    ``blocks`` has shape (..., K, N, N). Returns the (..., N) array
    ``(1/K) sum_k diag(A(k))``; the full stacked diagonal is ``I_K kron`` it.
    """
    blocks = np.asarray(blocks)
    if blocks.ndim < 3 or blocks.shape[-1] != blocks.shape[-2]:
        raise InvalidDimensionError("blocks must have shape (..., K, N, N)")
    return np.real(np.diagonal(blocks, axis1=-2, axis2=-1)).mean(axis=-2)
