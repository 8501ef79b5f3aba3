"""Second-order-cone reference solver for the minimax beamforming problem.

The downlink problem is rewritten over real variables x = [Re w, Im w, t]:

    minimize    t
    subject to  || sqrt(alpha/K) w_{i,:,:,m} || <= t                 per antenna
                || [alpha g^H w_other, quant-noise terms, sigma] ||
                    <= (alpha / sqrt(gamma)) Re(g^H w_own)            per stream

and solved with a plain log-barrier interior-point method. A Phase I problem
decides feasibility first. Rotating each stream's phase so that g^H w_own is
real loses no generality, which is why the real part suffices. The solver is
dense and meant for small instances used as a test oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import primal
from .errors import InfeasibleTargetError, InvalidDimensionError, NoConvergenceError
from .network import ChannelRealization
from .primal import BeamformerSet
from .system import SystemConfig

MAX_REAL_VARIABLES = 2048


@dataclass
class Cone:
    """``||A x + b|| <= c @ x + d``."""

    A: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: float = 0.0

    def margins(self, x):
        u = self.A @ x + self.b
        s = float(self.c @ x + self.d)
        return u, s, s * s - float(u @ u)


def _strictly_inside(cones, x) -> bool:
    for cone in cones:
        _, s, phi = cone.margins(x)
        if s <= 0 or phi <= 0:
            return False
    return True


def _barrier(cones, x):
    n = x.size
    val = 0.0
    grad = np.zeros(n)
    hess = np.zeros((n, n))
    for cone in cones:
        u, s, phi = cone.margins(x)
        val -= math.log(phi)
        gphi = 2.0 * s * cone.c - 2.0 * (cone.A.T @ u)
        grad -= gphi / phi
        hess += (2.0 * (cone.A.T @ cone.A) - 2.0 * np.outer(cone.c, cone.c)) / phi
        hess += np.outer(gphi, gphi) / phi**2
    return val, grad, hess


def _newton_direction(hess, rhs):
    try:
        return np.linalg.solve(hess, rhs)
    except np.linalg.LinAlgError:
        return np.linalg.lstsq(hess, rhs, rcond=None)[0]


def barrier_minimize(f: np.ndarray, cones: list[Cone], x0: np.ndarray, tol: float = 1e-10,
                     mu: float = 10.0, max_newton: int = 200, stop=None):
    """Minimize ``f @ x`` over the cones from a strictly feasible ``x0``.

    Returns (x, bound_gap) where ``bound_gap`` is the barrier duality-gap bound
    2 * len(cones) / t at exit. ``stop(x)`` may end the run early.
    """
    x = np.array(x0, dtype=float)
    if not _strictly_inside(cones, x):
        raise ValueError("starting point is not strictly feasible")
    theta = 2.0 * len(cones)
    t = max(1.0, theta / max(abs(float(f @ x)), 1e-6))
    while True:
        for _ in range(max_newton):
            val, grad, hess = _barrier(cones, x)
            g = t * f + grad
            dx = -_newton_direction(hess, g)
            dec = -float(g @ dx)
            if dec / 2.0 <= 1e-12:
                break
            obj = t * float(f @ x) + val
            step = 1.0
            while step > 1e-14:
                xn = x + step * dx
                if _strictly_inside(cones, xn):
                    vn = _barrier(cones, xn)[0]
                    if t * float(f @ xn) + vn <= obj - 0.25 * step * dec:
                        break
                step *= 0.5
            else:
                break
            x = xn
            if stop is not None and stop(x):
                return x, theta / t
        if theta / t < tol or (stop is not None and stop(x)):
            return x, theta / t
        t *= mu


def phase_one(cones: list[Cone], n: int, radius: float, margin: float = 1e-6):
    """Find x strictly inside every cone with ||x|| <= radius.

    Returns x, or None when the cones have no common interior point in the ball.
    """
    x0 = np.zeros(n)
    shift = max(float(np.linalg.norm(c.b)) - c.d for c in cones) + 1.0
    aug = []
    for cone in cones:
        aug.append(Cone(np.hstack([cone.A, np.zeros((cone.A.shape[0], 1))]), cone.b,
                        np.append(cone.c, 1.0), cone.d))
    aug.append(Cone(np.hstack([np.eye(n), np.zeros((n, 1))]), np.zeros(n),
                    np.zeros(n + 1), radius))
    # keep the slack bounded below so Phase I has a finite optimum
    aug.append(Cone(np.zeros((0, n + 1)), np.zeros(0), np.append(np.zeros(n), 1.0),
                    10.0 * shift))
    f = np.append(np.zeros(n), 1.0)
    z0 = np.append(x0, shift)
    z, gap = barrier_minimize(f, aug, z0, tol=1e-9, stop=lambda z: z[-1] < -margin)
    if z[-1] < -margin / 2 and _strictly_inside(cones, z[:n]):
        return z[:n]
    return None


# ---------------------------------------------------------------------------
# minimax beamforming as an SOCP


def _layout(shape):
    n_cells, n_users, n_sub, n_ant = shape
    ne = n_cells * n_users * n_sub * n_ant
    return ne, np.arange(ne).reshape(shape)


def _complex_rows(coef: np.ndarray, idx: np.ndarray, ne: int, n: int):
    """Real rows for Re and Im of sum_e coef_e w_{idx_e}."""
    re = np.zeros(n)
    im = np.zeros(n)
    re[idx] = coef.real
    re[ne + idx] = -coef.imag
    im[idx] = coef.imag
    im[ne + idx] = coef.real
    return re, im


def _unit_rows(idx, ne, n, scale):
    rows = np.zeros((2 * idx.size, n))
    k = np.arange(idx.size)
    rows[2 * k, idx] = scale
    rows[2 * k + 1, ne + idx] = scale
    return rows


def build_cones(g_hat: np.ndarray, targets: np.ndarray, noise_hat: np.ndarray, alpha: float,
                beta: float, shape, objective: str = "minimax"):
    """Cones of the normalized problem; the last variable is the amplitude bound t.

    The power cones come first: one per antenna for "minimax", a single one
    over every entry for "total".
    """
    n_cells, n_users, n_sub, n_ant = shape
    ne, index = _layout(shape)
    n = 2 * ne + 1
    cones = []
    c = np.zeros(n)
    c[-1] = 1.0
    if objective == "total":
        rows = _unit_rows(index.ravel(), ne, n, math.sqrt(alpha / n_sub))
        cones.append(Cone(rows, np.zeros(rows.shape[0]), c))
    elif objective == "minimax":
        for i in range(n_cells):
            for m in range(n_ant):
                rows = _unit_rows(index[i, :, :, m].ravel(), ne, n, math.sqrt(alpha / n_sub))
                cones.append(Cone(rows, np.zeros(rows.shape[0]), c))
    else:
        raise ValueError(f"unknown objective {objective!r}")
    for i in range(n_cells):
        for u in range(n_users):
            for k in range(n_sub):
                rows = []
                for j in range(n_cells):
                    gv = g_hat[j, i, u, k].conj()
                    for v in range(n_users):
                        re, im = _complex_rows(gv, index[j, v, k], ne, n)
                        if (j, v) == (i, u):
                            own = re
                        else:
                            rows += [alpha * re, alpha * im]
                    if beta > 0:
                        amp = np.abs(g_hat[j, i, u, k]) * math.sqrt(alpha * beta / n_sub)
                        for m in range(n_ant):
                            rows.append(_unit_rows(index[j, :, :, m].ravel(), ne, n, amp[m]))
                A = np.vstack([np.atleast_2d(r) for r in rows] + [np.zeros((1, n))])
                b = np.zeros(A.shape[0])
                b[-1] = math.sqrt(noise_hat[i, u, k])
                cones.append(Cone(A, b, alpha / math.sqrt(targets[i, u, k]) * own))
    return cones, n


@dataclass
class SocpSolution:
    beamformers: BeamformerSet
    p0: float
    total: float
    bound_gap: float


def socp_minimax(config: SystemConfig, channels: ChannelRealization, noise=None,
                 radius: float = 1e4, objective: str = "minimax") -> SocpSolution:
    """Solve the minimax (or, with ``objective="total"``, the total-power)
    problem with the barrier method.

    Raises :class:`InfeasibleTargetError` when Phase I finds no strictly
    feasible point with normalized amplitude below ``radius``.
    """
    if not channels.matches(config):
        raise InvalidDimensionError("channel realization does not match the system config")
    shape = (config.n_cells, config.n_users, config.n_subcarriers, config.n_antennas)
    if 2 * int(np.prod(shape)) + 1 > MAX_REAL_VARIABLES:
        raise InvalidDimensionError("instance too large for the dense reference solver")
    g = channels.g
    noise = config.noise() if noise is None else np.broadcast_to(noise, config.stream_shape)
    idx = np.arange(config.n_cells)
    gain = float(np.mean(np.abs(g[idx, idx]) ** 2))
    nu = float(np.mean(noise))
    g_hat = g / math.sqrt(gain)
    cones, n = build_cones(g_hat, config.targets(), noise / nu, config.alpha, config.beta, shape,
                           objective)
    n_power = 1 if objective == "total" else config.n_cells * config.n_antennas
    start = phase_one(cones[n_power:], n, radius)
    if start is None:
        raise InfeasibleTargetError("no strictly feasible beamformers: SQINR targets too high")
    x0 = start.copy()
    peak = max(float(np.linalg.norm(c.A @ x0 + c.b))
               for c in cones[:n_power])
    x0[-1] = 1.5 * peak + 1e-6
    f = np.zeros(n)
    f[-1] = 1.0
    x, gap = barrier_minimize(f, cones, x0, tol=1e-10)
    ne = (n - 1) // 2
    w = (x[:ne] + 1j * x[ne:2 * ne]).reshape(shape) * math.sqrt(nu / gain)
    W = BeamformerSet(w)
    _, p0, total = primal.antenna_powers(W, config.quantizer)
    if not np.isfinite(p0):
        raise NoConvergenceError("barrier method produced non-finite beamformers")
    return SocpSolution(W, p0, total, gap * nu / gain)


def socp_oracle(config: SystemConfig, channels: ChannelRealization, noise=None,
                objective: str = "minimax"):
    """Reference solution wrapped as a comparison result."""
    from .baselines import BaselineResult

    sol = socp_minimax(config, channels, noise, objective=objective)
    noise = config.noise() if noise is None else np.broadcast_to(noise, config.stream_shape)
    rep = primal.evaluate(sol.beamformers, channels.g, config.quantizer, noise)
    return BaselineResult(
        algorithm_id="socp_oracle",
        beamformers=sol.beamformers,
        report=rep,
        converged=True,
        outer_iterations=1,
        config=config,
        duality_gap=sol.bound_gap,
    )
