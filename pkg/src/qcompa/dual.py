"""Virtual-uplink dual solver for per-antenna minimax beamforming (Q-CoMP-PA).

The dual of the downlink minimax problem is a virtual uplink in which stream
(i, u, k) transmits with power lambda and BS i sees an unknown diagonal noise
covariance D_i. For fixed D the optimal powers solve the fixed point

    lambda = 1 / (alpha (1 + 1/gamma) g^H K^{-1} g)
    K_{i,k} = D_i + alpha sum_{j,v} lambda_{j,v}(k) g g^H + beta diag(Delta_i)

where Delta_i is the time-invariant per-antenna average of the received
virtual-uplink power. The outer problem maximizes the concave dual value over
D by subgradient ascent (multiplicative by default, projected as an
option); the subgradient is K times the per-antenna
downlink power of the recovered precoders.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import primal
from .errors import (
    InfeasibleTargetError,
    InvalidDimensionError,
    NoConvergenceError,
    SingularSystemError,
)
from .network import ChannelRealization
from .primal import BeamformerSet, SqinrPowerReport
from .quantization import QuantizerSpec
from .system import SystemConfig

log = logging.getLogger(__name__)


@dataclass
class DualState:
    lam: np.ndarray  # (N_c, N_u, K) virtual uplink powers
    D: np.ndarray  # (N_c, N_b) diagonals of the virtual noise covariances

    @classmethod
    def initial(cls, config: SystemConfig) -> "DualState":
        return cls(np.zeros(config.stream_shape), np.ones((config.n_cells, config.n_antennas)))

    def copy(self) -> "DualState":
        return DualState(self.lam.copy(), self.D.copy())


@dataclass(frozen=True)
class SolverSettings:
    """Tolerances and step-size controls of the nested dual iteration.

    ``step_size`` is dimensionless. With ``ascent="mirror"`` (default) each
    D entry is multiplied by ``exp(step * P_m / max P)`` and the trace budget
    is restored by rescaling; with ``ascent="projected"`` D moves additively
    along ``step * P_m / mean P`` and is projected back onto the feasible set.
    ``lambda_cap`` bounds lambda * mean|g|^2; exceeding it is reported as an
    infeasible target.

    ``cell_floor`` (rho) reserves a share of the trace budget for every cell:
    tr(D_i) >= rho * N_b with sum_i tr(D_i) = N_c * N_b. The matching primal
    objective is (1 - rho) * p0 + rho * mean_i p0_i, with p0_i the peak of
    cell i. rho = 0 is the pure network minimax, rho = 1 the sum of per-cell
    peaks; the small default breaks ties among the many minimax-optimal
    solutions in favor of ones that keep every cell's own peak low, at a
    relative cost of at most rho in the network peak.
    """

    lambda_tol: float = 1e-11
    lambda_max_iters: int = 5000
    d_tol: float = 1e-5
    d_max_iters: int = 300
    gap_tol: float = 1e-3
    step_size: float = 0.3
    step_schedule: str = "adaptive"  # constant | sqrt | adaptive
    lambda_cap: float = 1e12
    projection_tol: float = 1e-10
    projection_max_iters: int = 10_000
    cell_floor: float = 1e-3
    update_order: str = "jacobi"  # jacobi | gauss_seidel
    ascent: str = "mirror"  # mirror | projected

    def __post_init__(self):
        for name in ("lambda_tol", "d_tol", "gap_tol", "step_size", "lambda_cap", "projection_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        for name in ("lambda_max_iters", "d_max_iters", "projection_max_iters"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.step_schedule not in ("constant", "sqrt", "adaptive"):
            raise ValueError(f"unknown step schedule {self.step_schedule!r}")
        if not 0.0 <= self.cell_floor <= 1.0:
            raise ValueError("cell_floor must lie in [0, 1]")
        if self.ascent == "projected" and self.cell_floor not in (0.0, 1.0):
            raise ValueError("projected ascent supports cell_floor 0 or 1 only")
        if self.ascent not in ("projected", "mirror"):
            raise ValueError(f"unknown ascent rule {self.ascent!r}")
        if self.update_order not in ("jacobi", "gauss_seidel"):
            raise ValueError(f"unknown update order {self.update_order!r}")

    def with_(self, **changes) -> "SolverSettings":
        return replace(self, **changes)


@dataclass
class SolveReport:
    algorithm: str
    config: SystemConfig
    report: SqinrPowerReport
    dual_objective: float
    lam: np.ndarray
    D: np.ndarray
    inner_iterations: int
    outer_iterations: int
    converged: bool
    duality_gap: float = math.nan
    diverged: bool = False
    history: list = field(default_factory=list)

    @property
    def p0(self) -> float:
        return self.report.p0

    @property
    def p0_dbm(self) -> float:
        return self.report.p0_dbm

    def to_dict(self, include_arrays: bool = True) -> dict:
        out = {
            "algorithm_id": self.algorithm,
            "config": self.config.to_dict(),
            "converged": bool(self.converged),
            "diverged": bool(self.diverged),
            "p0_w": self.report.p0,
            "p0_dbm": self.report.p0_dbm,
            "total_power_w": self.report.total_power,
            "total_dbm": self.report.total_dbm,
            "dual_objective": self.dual_objective,
            "dual_objective_over_KNcNb": self.dual_objective
            / (self.config.n_subcarriers * self.config.n_cells * self.config.n_antennas),
            "duality_gap": None if math.isnan(self.duality_gap) else self.duality_gap,
            "inner_iterations": self.inner_iterations,
            "outer_iterations": self.outer_iterations,
            "min_sqinr_ratio": float(np.min(self.report.gamma_achieved / self.config.targets())),
        }
        if include_arrays:
            rep = self.report.to_dict()
            out["antenna_power_w"] = rep["antenna_power_w"]
            out["antenna_power_dbm"] = rep["antenna_power_dbm"]
            out["gamma_achieved"] = rep["gamma_achieved"]
            out["lambda"] = self.lam.tolist()
            out["D"] = self.D.tolist()
        return out


# ---------------------------------------------------------------------------
# K / Z assembly


def _stacked_cell_channels(g: np.ndarray) -> np.ndarray:
    """Channels seen by BS i from every virtual user: (N_c_i, K, N_b, N_c*N_u)."""
    n_cells, _, n_users, n_sub, n_ant = g.shape
    return np.transpose(g, (0, 3, 4, 1, 2)).reshape(n_cells, n_sub, n_ant, n_cells * n_users)


def quant_load(lam: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Delta_i: per-antenna average received virtual-uplink power, (N_c, N_b)."""
    n_sub = g.shape[3]
    return np.einsum("jvk,ijvkm->im", lam, np.abs(g) ** 2) / n_sub


def assemble_K_all(lam: np.ndarray, D: np.ndarray, g: np.ndarray,
                   spec: QuantizerSpec) -> np.ndarray:
    """K_{i,k} for every cell and subcarrier, shaped (N_c, K, N_b, N_b)."""
    n_cells, _, n_users, n_sub, n_ant = g.shape
    G = _stacked_cell_channels(g)
    lam_k = np.transpose(lam, (2, 0, 1)).reshape(n_sub, n_cells * n_users)  # (K, N_c*N_u)
    A = np.matmul(G * lam_k[None, :, None, :], np.conj(np.swapaxes(G, -1, -2)))
    diag = D[:, None, :]
    if spec.beta > 0:
        diag = diag + spec.beta * quant_load(lam, g)[:, None, :]
    K = spec.alpha * A
    idx = np.arange(n_ant)
    K[..., idx, idx] += diag
    return 0.5 * (K + np.conj(np.swapaxes(K, -1, -2)))


def assemble_K(cell: int, subcarrier: int, state: DualState, g: np.ndarray,
               spec: QuantizerSpec) -> np.ndarray:
    """Single K_{i,k} matrix (N_b x N_b)."""
    return assemble_K_all(state.lam, state.D, g, spec)[cell, subcarrier]


def build_Z(cell: int, user: int, subcarrier: int, state: DualState, g: np.ndarray,
            spec: QuantizerSpec) -> np.ndarray:
    """Interference-plus-quantization-plus-noise covariance of one virtual uplink stream.

    Written out term by term, independently of :func:`assemble_K_all`.
    """
    alpha, beta = spec.alpha, spec.beta
    n_cells, _, n_users, n_sub, n_ant = g.shape
    i, u, k = cell, user, subcarrier
    Z = alpha**2 * np.diag(state.D[i]).astype(complex)
    for j in range(n_cells):
        for v in range(n_users):
            if (j, v) == (i, u):
                continue
            gv = g[i, j, v, k]
            Z += alpha**2 * state.lam[j, v, k] * np.outer(gv, gv.conj())
    load = np.zeros(n_ant)
    for j in range(n_cells):
        for v in range(n_users):
            for ell in range(n_sub):
                load += state.lam[j, v, ell] * np.abs(g[i, j, v, ell]) ** 2
    Z += alpha * beta * np.diag(load / n_sub + state.D[i])
    return Z


def _own(g: np.ndarray) -> np.ndarray:
    idx = np.arange(g.shape[0])
    return g[idx, idx]  # (N_c, N_u, K, N_b)


def mmse_equalizers(state: DualState, g: np.ndarray, spec: QuantizerSpec) -> np.ndarray:
    """f = Z^{-1} g for every stream, shaped (N_c, N_u, K, N_b)."""
    alpha = spec.alpha
    K = assemble_K_all(state.lam, state.D, g, spec)  # (N_c, K, N_b, N_b)
    own = _own(g)
    outer = own[..., :, None] * np.conj(own[..., None, :])
    Z = alpha * K[:, None] - alpha**2 * state.lam[..., None, None] * outer
    try:
        f = np.linalg.solve(Z, own[..., None])[..., 0]
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError("singular virtual uplink covariance") from exc
    bad = ~np.all(np.isfinite(f), axis=-1)
    if np.any(bad):
        i, u, k = np.argwhere(bad)[0]
        raise SingularSystemError(f"singular Z for stream (i={i}, u={u}, k={k})")
    return f


def mmse_equalizer(cell: int, user: int, subcarrier: int, state: DualState, g: np.ndarray,
                   spec: QuantizerSpec) -> np.ndarray:
    Z = build_Z(cell, user, subcarrier, state, g, spec)
    try:
        return np.linalg.solve(Z, g[cell, cell, user, subcarrier])
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(
            f"singular Z for stream (i={cell}, u={user}, k={subcarrier})"
        ) from exc


def uplink_sqinr(f: np.ndarray, cell: int, user: int, subcarrier: int, state: DualState,
                 g: np.ndarray, spec: QuantizerSpec) -> float:
    """Virtual uplink SQINR of one stream for an arbitrary combiner."""
    Z = build_Z(cell, user, subcarrier, state, g, spec)
    gv = g[cell, cell, user, subcarrier]
    num = spec.alpha**2 * state.lam[cell, user, subcarrier] * abs(np.vdot(f, gv)) ** 2
    return float(num / np.real(np.vdot(f, Z @ f)))


# ---------------------------------------------------------------------------
# inner fixed point


def _quad_forms(K: np.ndarray, own: np.ndarray) -> np.ndarray:
    """g^H K^{-1} g for each stream; K (N_c, K, N_b, N_b), own (N_c, N_u, K, N_b)."""
    rhs = np.transpose(own, (0, 2, 3, 1))  # (N_c, K, N_b, N_u)
    try:
        sol = np.linalg.solve(K, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError("singular K matrix in power update") from exc
    q = np.real(np.sum(np.conj(rhs) * sol, axis=-2))  # (N_c, K, N_u)
    return np.transpose(q, (0, 2, 1))


LAMBDA_STALL_TOL = 1e-8
LAMBDA_STALL_ITERS = 50


def _lambda_scale(g: np.ndarray) -> float:
    return float(np.mean(np.abs(_own(g)) ** 2))


def lambda_fixed_point(state: DualState, g: np.ndarray, targets: np.ndarray,
                       spec: QuantizerSpec, settings: SolverSettings = SolverSettings()):
    """Iterate the virtual-uplink power update to its fixed point for fixed D.

    Stops once the relative step and the remaining distance estimated from
    the contraction rate are below ``lambda_tol``, or once steps below 1e-8
    stop shrinking (round-off floor of an ill-conditioned K).

    Returns (lambda, iterations). Raises :class:`InfeasibleTargetError` when
    the powers blow past the divergence guard and
    :class:`NoConvergenceError` when the iteration cap is reached.
    """
    coef = spec.alpha * (1.0 + 1.0 / np.broadcast_to(targets, state.lam.shape))
    cap = settings.lambda_cap / _lambda_scale(g)
    own = _own(g)
    lam = np.array(state.lam, dtype=float, copy=True)
    D = state.D
    rel = best = math.inf
    stall = 0
    for it in range(1, settings.lambda_max_iters + 1):
        if settings.update_order == "jacobi":
            K = assemble_K_all(lam, D, g, spec)
            new = 1.0 / (coef * _quad_forms(K, own))
        else:
            new = lam.copy()
            n_cells, n_users, n_sub = lam.shape
            for i in range(n_cells):
                for u in range(n_users):
                    for k in range(n_sub):
                        Kik = assemble_K_all(new, D, g, spec)[i, k]
                        gv = own[i, u, k]
                        q = np.real(np.vdot(gv, np.linalg.solve(Kik, gv)))
                        new[i, u, k] = 1.0 / (coef[i, u, k] * q)
        if not np.all(np.isfinite(new)) or np.any(new < 0):
            raise InfeasibleTargetError("virtual uplink powers became non-finite")
        if np.max(new) > cap:
            raise InfeasibleTargetError(
                f"virtual uplink power exceeded divergence guard after {it} iterations; "
                "SQINR targets are not achievable"
            )
        denom = np.maximum(np.abs(new), np.finfo(float).tiny)
        prev, rel = rel, float(np.max(np.abs(new - lam) / denom))
        lam = new
        if rel < settings.lambda_tol:
            # the map contracts linearly near its fixed point; estimate the
            # remaining distance from the ratio of successive steps
            rho = min(rel / prev, 0.999) if 0 < prev < math.inf else 0.0
            if rel * rho / (1.0 - rho) < settings.lambda_tol:
                return lam, it
        # ill-conditioned K: the steps stop shrinking at the round-off floor
        if rel < 0.999 * best:
            best, stall = rel, 0
        else:
            stall += 1
        if best <= LAMBDA_STALL_TOL and stall >= LAMBDA_STALL_ITERS:
            return lam, it
    raise NoConvergenceError(
        f"power iteration did not converge in {settings.lambda_max_iters} iterations", rel
    )


def fixed_point_residual(lam: np.ndarray, D: np.ndarray, g: np.ndarray, targets: np.ndarray,
                         spec: QuantizerSpec) -> float:
    coef = spec.alpha * (1.0 + 1.0 / np.broadcast_to(targets, lam.shape))
    K = assemble_K_all(lam, D, g, spec)
    mapped = 1.0 / (coef * _quad_forms(K, _own(g)))
    return float(np.max(np.abs(mapped - lam) / mapped))


# ---------------------------------------------------------------------------
# outer update


def subgradient_D(w_cell: np.ndarray) -> np.ndarray:
    """diag(sum_{u,k} w w^H) for one cell's precoders shaped (N_u, K, N_b)."""
    w = np.asarray(w_cell)
    return np.sum(np.abs(w.reshape(-1, w.shape[-1])) ** 2, axis=0)


def project_feasible_D(D: np.ndarray, budget: float | None = None, tol: float = 1e-10,
                       max_iter: int = 10_000) -> np.ndarray:
    """Alternate between the trace half-space and the nonnegative orthant.

    ``D`` holds diagonal entries (any shape); ``budget`` defaults to the number
    of entries. The trace step subtracts (trace - budget)/n from every entry
    and is applied only when the trace exceeds the budget.
    """
    d = np.array(D, dtype=float, copy=True)
    n = d.size
    budget = float(n if budget is None else budget)
    for _ in range(max_iter):
        excess = d.sum() - budget
        if excess > 0:
            d -= excess / n
        np.maximum(d, 0.0, out=d)
        if d.sum() <= budget + tol:
            return d
    return d


def _project(D: np.ndarray, settings: SolverSettings) -> np.ndarray:
    n_ant = D.shape[1]
    if settings.cell_floor == 0.0:
        return project_feasible_D(D, D.size, settings.projection_tol, settings.projection_max_iters)
    return np.stack([
        project_feasible_D(row, n_ant, settings.projection_tol, settings.projection_max_iters)
        for row in D
    ])


def cell_traces(cell_mass: np.ndarray, total: float, floor: float) -> np.ndarray:
    """Per-cell traces max(floor, theta * mass_i) summing to ``total``.

    This is the KL projection of the cell masses onto the floored simplex.
    """
    mass = np.asarray(cell_mass, dtype=float)
    if floor * mass.size > total * (1 + 1e-12):
        raise ValueError("cell floors exceed the trace budget")
    pinned = np.zeros(mass.size, dtype=bool)
    out = np.full(mass.size, floor)
    for _ in range(mass.size + 1):
        free = ~pinned
        theta = (total - floor * pinned.sum()) / mass[free].sum() if free.any() else 0.0
        out = np.where(pinned, floor, theta * mass)
        low = free & (out < floor)
        if not low.any():
            break
        pinned |= low
    return out


def _mirror_step(D: np.ndarray, scaled_grad: np.ndarray, settings: SolverSettings) -> np.ndarray:
    """Exponentiated-gradient step followed by the KL projection onto the budget set."""
    n_cells, n_ant = D.shape
    Y = D * np.exp(scaled_grad - scaled_grad.max())
    mass = Y.sum(axis=1)
    traces = cell_traces(mass, float(n_cells * n_ant), settings.cell_floor * n_ant)
    return Y * (traces / mass)[:, None]


def primal_bound(antenna_power: np.ndarray, n_subcarriers: int, cell_floor: float) -> float:
    """K * N_b * ((1 - rho) * N_c * p0 + rho * sum_i p0_i): the weak-duality bound."""
    n_cells, n_ant = antenna_power.shape
    peaks = antenna_power.max(axis=1)
    return n_subcarriers * n_ant * (
        (1.0 - cell_floor) * n_cells * float(peaks.max()) + cell_floor * float(peaks.sum())
    )


# ---------------------------------------------------------------------------
# full algorithm


def _recover(state: DualState, g: np.ndarray, targets: np.ndarray, noise: np.ndarray,
             spec: QuantizerSpec) -> BeamformerSet:
    f = mmse_equalizers(state, g, spec)
    sigma = primal.assemble_sigma(f, g, targets, spec)
    tau = primal.solve_tau(sigma, noise)
    return primal.build_beamformers(f, tau)


def solve_fixed_D(config: SystemConfig, channels: ChannelRealization, D: np.ndarray,
                  settings: SolverSettings = SolverSettings(), lam0: np.ndarray | None = None,
                  noise: np.ndarray | None = None):
    """Inner solve plus primal recovery for a fixed virtual noise covariance.

    Returns (BeamformerSet, DualState, SqinrPowerReport, dual_objective, iterations).
    """
    g = channels.g
    spec = config.quantizer
    targets = config.targets()
    noise = config.noise() if noise is None else noise
    lam = np.zeros(config.stream_shape) if lam0 is None else lam0
    lam, iters = lambda_fixed_point(DualState(lam, D), g, targets, spec, settings)
    state = DualState(lam, np.array(D, dtype=float))
    W = _recover(state, g, targets, noise, spec)
    rep = primal.evaluate(W, g, spec, noise)
    return W, state, rep, float(np.sum(lam * noise)), iters


def _check_inputs(config: SystemConfig, channels: ChannelRealization):
    if not channels.matches(config):
        raise InvalidDimensionError("channel realization does not match the system config")


def run_qcomp_pa(config: SystemConfig, channels: ChannelRealization,
                 settings: SolverSettings = SolverSettings(), noise: np.ndarray | None = None,
                 algorithm: str = "qcomp_pa", initial: DualState | None = None):
    """Minimize the peak per-antenna power subject to per-stream SQINR targets.

    Alternates the inner power fixed point with subgradient ascent on the
    diagonal virtual noise covariances. Returns
    (BeamformerSet, DualState, SolveReport); the returned iterate is the one
    with the smallest primal objective seen. ``initial`` warm-starts D and
    lambda (D is rescaled onto the trace budget).
    """
    _check_inputs(config, channels)
    noise = config.noise() if noise is None else np.broadcast_to(noise, config.stream_shape)
    n_cells, n_ant, n_sub = config.n_cells, config.n_antennas, config.n_subcarriers
    scale = n_sub * n_cells * n_ant

    D = np.ones((n_cells, n_ant))
    lam = None
    if initial is not None:
        if initial.D.shape != D.shape or initial.lam.shape != config.stream_shape:
            raise InvalidDimensionError("warm-start state does not match the system config")
        D = _mirror_step(np.maximum(initial.D, 1e-12), np.zeros_like(D), settings)
        lam = np.array(initial.lam, dtype=float)
    best = None
    total_inner = 0
    step = settings.step_size
    anchor = None  # last accepted (D, lam, dual, antenna power)
    history = []
    converged = False
    n = 0
    for n in range(1, settings.d_max_iters + 1):
        W, state, rep, dual, iters = solve_fixed_D(config, channels, D, settings, lam, noise)
        total_inner += iters
        lam = state.lam
        bound = primal_bound(rep.antenna_power, n_sub, settings.cell_floor)
        gap = (bound - dual) / bound
        history.append((rep.p0, dual, gap))
        if best is None or bound < best[5]:
            best = (W, state, rep, dual, gap, bound)
        log.debug("outer %d: p0=%.4e dual/scale=%.4e gap=%.3e step=%.3g",
                  n, rep.p0, dual / scale, gap, step)
        if gap <= settings.gap_tol:
            converged = True
            best = (W, state, rep, dual, gap, bound)
            break

        if settings.step_schedule == "adaptive":
            if anchor is not None and dual < anchor[2]:
                # concave ascent: reject the step and retry shorter
                step *= 0.5
                D, lam = anchor[0], anchor[1]
            else:
                if anchor is not None:
                    step = min(step * 1.25, 4.0 * settings.step_size)
                anchor = (D, lam, dual, rep.antenna_power)
            power = anchor[3]
            eta = step
        else:
            power = rep.antenna_power
            eta = step / math.sqrt(n) if settings.step_schedule == "sqrt" else step
        if settings.ascent == "mirror":
            D_new = _mirror_step(D, eta * power / power.max(), settings)
        else:
            D_new = _project(D + eta * power / power.mean(), settings)
        change = np.max(np.abs(D_new - D)) / max(np.max(D), 1e-300)
        D = D_new
        if change < settings.d_tol:
            converged = best[4] <= 10 * settings.gap_tol
            break

    W, state, rep, dual, gap, _ = best
    solve = SolveReport(
        algorithm=algorithm,
        config=config,
        report=rep,
        dual_objective=dual,
        lam=state.lam,
        D=state.D,
        inner_iterations=total_inner,
        outer_iterations=n,
        converged=converged,
        duality_gap=gap,
        history=history,
    )
    return W, state, solve
