"""Downlink precoder recovery from virtual-uplink equalizers and downlink evaluation.

Stream-indexed arrays are shaped (N_c, N_u, K) and flattened in that C order
whenever a stream vector is needed (e.g. for the scaling system). Precoders and
equalizers are shaped (N_c, N_u, K, N_b).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateDualityError, InvalidDimensionError, InvalidScalingError
from .quantization import QuantizerSpec
from .system import watts_to_dbm


@dataclass(frozen=True)
class BeamformerSet:
    w: np.ndarray  # (N_c, N_u, K, N_b)

    def __post_init__(self):
        w = np.asarray(self.w, dtype=complex)
        if w.ndim != 4:
            raise InvalidDimensionError("beamformers must be shaped (N_c, N_u, K, N_b)")
        if not np.all(np.isfinite(w)):
            raise ValueError("beamformers must be finite")
        object.__setattr__(self, "w", w)

    @property
    def shape(self):
        return self.w.shape

    def per_cell_matrices(self) -> np.ndarray:
        """W_i(k) as an (N_c, K, N_b, N_u) array."""
        return np.transpose(self.w, (0, 2, 3, 1))


@dataclass(frozen=True)
class SqinrPowerReport:
    gamma_achieved: np.ndarray  # (N_c, N_u, K)
    antenna_power: np.ndarray  # (N_c, N_b) watts
    p0: float
    total_power: float

    @property
    def p0_dbm(self) -> float:
        return float(watts_to_dbm(self.p0))

    @property
    def total_dbm(self) -> float:
        return float(watts_to_dbm(self.total_power))

    def operating_range_db(self) -> float:
        p = self.antenna_power[self.antenna_power > 0]
        return float(10 * np.log10(p.max() / p.min())) if p.size else 0.0

    def to_dict(self) -> dict:
        with np.errstate(divide="ignore"):
            ap_dbm = watts_to_dbm(self.antenna_power)
        return {
            "p0_w": self.p0,
            "p0_dbm": self.p0_dbm,
            "total_power_w": self.total_power,
            "total_dbm": self.total_dbm,
            "antenna_power_w": self.antenna_power.tolist(),
            "antenna_power_dbm": np.where(np.isfinite(ap_dbm), ap_dbm, None).tolist(),
            "gamma_achieved": self.gamma_achieved.tolist(),
        }


def _own_channels(g: np.ndarray) -> np.ndarray:
    """g[i, i, u, k] for every cell: (N_c, N_u, K, N_b)."""
    idx = np.arange(g.shape[0])
    return g[idx, idx]


def _cross_gains(g: np.ndarray, vecs: np.ndarray) -> np.ndarray:
    """|g_{j,i,u}(k)^H v_{j,v}(k)|^2 shaped (i, u, k, j, v)."""
    inner = np.einsum("jiukm,jvkm->iukjv", g.conj(), vecs)
    return np.abs(inner) ** 2


def antenna_powers(W: BeamformerSet | np.ndarray, spec: QuantizerSpec):
    """Per-antenna power ``[alpha/K sum_l W(l) W(l)^H]_{m,m}``.

    Returns (antenna_power (N_c, N_b), p0, total).
    """
    w = W.w if isinstance(W, BeamformerSet) else np.asarray(W)
    n_sub = w.shape[2]
    power = spec.alpha / n_sub * np.sum(np.abs(w) ** 2, axis=(1, 2))
    return power, float(power.max()), float(power.sum())


def quant_noise_per_cell(w: np.ndarray, spec: QuantizerSpec) -> np.ndarray:
    """Time-invariant quantization-noise variance per (cell, antenna)."""
    n_sub = w.shape[2]
    return spec.alpha * spec.beta / n_sub * np.sum(np.abs(w) ** 2, axis=(1, 2))


def evaluate_sqinr(W: BeamformerSet | np.ndarray, g: np.ndarray, spec: QuantizerSpec,
                   noise) -> np.ndarray:
    """Downlink SQINR of every stream, shaped (N_c, N_u, K).

    ``g`` is the (N_c, N_c, N_u, K, N_b) channel array, ``noise`` the noise
    power (scalar or per stream).
    """
    w = W.w if isinstance(W, BeamformerSet) else np.asarray(W)
    alpha = spec.alpha
    gains = _cross_gains(g, w)  # (i,u,k,j,v)
    n_cells, n_users = w.shape[:2]
    idx_c, idx_u = np.meshgrid(np.arange(n_cells), np.arange(n_users), indexing="ij")
    own = gains[idx_c, idx_u, :, idx_c, idx_u]  # (i,u,k)
    interference = alpha**2 * (gains.sum(axis=(3, 4)) - own)
    qn = quant_noise_per_cell(w, spec)  # (j, m)
    qterm = np.einsum("jiukm,jm->iuk", np.abs(g) ** 2, qn)
    denom = interference + qterm + np.broadcast_to(noise, own.shape)
    return alpha**2 * own / denom


def assemble_sigma(f: np.ndarray, g: np.ndarray, targets: np.ndarray,
                   spec: QuantizerSpec) -> np.ndarray:
    """Linear system linking downlink power scalings to the active SQINR constraints.

    Row/column order is the C-order flattening of (cell, user, subcarrier).
    The quantization terms couple every subcarrier pair, so the matrix is dense
    across subcarriers whenever beta > 0.
    """
    f = np.asarray(f)
    n_cells, n_users, n_sub, _ = f.shape
    if g.shape[:4] != (n_cells, n_cells, n_users, n_sub):
        raise InvalidDimensionError("equalizers and channels disagree in dimension")
    alpha, beta = spec.alpha, spec.beta
    gains = _cross_gains(g, f)  # (i,u,k,j,v)
    sigma = np.zeros((n_cells, n_users, n_sub, n_cells, n_users, n_sub))
    kk = np.arange(n_sub)
    # same-subcarrier interference
    sigma[:, :, kk, :, :, kk] = -alpha**2 * np.moveaxis(gains, 2, 0)
    idx_c, idx_u = np.meshgrid(np.arange(n_cells), np.arange(n_users), indexing="ij")
    own = gains[idx_c, idx_u, :, idx_c, idx_u]
    gam = np.broadcast_to(targets, own.shape)
    for c in range(n_cells):
        for u in range(n_users):
            sigma[c, u, kk, c, u, kk] = alpha**2 / gam[c, u] * own[c, u]
    if beta > 0:
        q = np.einsum("jiukm,jvlm->iukjvl", np.abs(g) ** 2, np.abs(f) ** 2)
        sigma -= alpha * beta / n_sub * q
    n = n_cells * n_users * n_sub
    return sigma.reshape(n, n)


def solve_tau(sigma: np.ndarray, noise) -> np.ndarray:
    """Solve ``Sigma tau = sigma^2 1`` (noise may differ per stream)."""
    n = sigma.shape[0]
    rhs = np.broadcast_to(np.asarray(noise, dtype=float).ravel(), (n,)).astype(float)
    try:
        tau = np.linalg.solve(sigma, rhs)
    except np.linalg.LinAlgError as exc:
        raise DegenerateDualityError("downlink scaling system is singular") from exc
    resid = np.linalg.norm(sigma @ tau - rhs)
    if not np.all(np.isfinite(tau)) or resid > 1e-8 * np.linalg.norm(rhs):
        raise DegenerateDualityError(f"scaling solve residual {resid:.3e} too large")
    if np.any(tau <= 0):
        raise InvalidScalingError(
            f"{int(np.sum(tau <= 0))} nonpositive power scalings; dual state not at a fixed point"
        )
    return tau


def build_beamformers(f: np.ndarray, tau: np.ndarray) -> BeamformerSet:
    f = np.asarray(f)
    tau = np.asarray(tau, dtype=float).reshape(f.shape[:3])
    if np.any(tau <= 0):
        raise InvalidScalingError("power scalings must be positive")
    return BeamformerSet(np.sqrt(tau)[..., None] * f)


def evaluate(W: BeamformerSet, g: np.ndarray, spec: QuantizerSpec, noise) -> SqinrPowerReport:
    power, p0, total = antenna_powers(W, spec)
    return SqinrPowerReport(evaluate_sqinr(W, g, spec, noise), power, p0, total)
