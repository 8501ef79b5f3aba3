"""Comparison algorithms: total-power Q-CoMP and per-cell Q-Percell.

Q-CoMP runs the virtual-uplink pipeline with every D_i fixed to the identity,
which makes the dual value K times the total downlink power; the result is the
total-power optimum. Q-Percell lets each cell design its own precoders
(total power by default, peak antenna power as an option) while the
interference and quantization noise leaking in from the other cells is frozen
at its current value and added to the users' noise. Cells then exchange their
solutions and repeat until the leakage stops changing.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import primal
from .dual import DualState, SolverSettings, SolveReport, run_qcomp_pa, solve_fixed_D
from .errors import InfeasibleTargetError, InvalidDimensionError, NoConvergenceError
from .network import ChannelRealization
from .primal import BeamformerSet, SqinrPowerReport
from .system import SystemConfig

log = logging.getLogger(__name__)

ALGORITHMS = ("qcomp_pa", "qcomp", "qpercell", "socp_oracle")


@dataclass
class BaselineResult:
    algorithm_id: str
    beamformers: BeamformerSet
    report: SqinrPowerReport
    converged: bool
    outer_iterations: int
    config: SystemConfig
    diverged: bool = False
    dual_objective: float = math.nan
    inner_iterations: int = 0
    duality_gap: float = math.nan
    lam: np.ndarray | None = None
    D: np.ndarray | None = None
    history: list = field(default_factory=list)

    @property
    def p0(self) -> float:
        return self.report.p0

    @property
    def p0_dbm(self) -> float:
        return self.report.p0_dbm

    @classmethod
    def from_solve(cls, W: BeamformerSet, solve: SolveReport) -> "BaselineResult":
        return cls(
            algorithm_id=solve.algorithm,
            beamformers=W,
            report=solve.report,
            converged=solve.converged,
            outer_iterations=solve.outer_iterations,
            config=solve.config,
            diverged=solve.diverged,
            dual_objective=solve.dual_objective,
            inner_iterations=solve.inner_iterations,
            duality_gap=solve.duality_gap,
            lam=solve.lam,
            D=solve.D,
            history=solve.history,
        )

    def to_dict(self, include_arrays: bool = True) -> dict:
        nan = np.full(self.config.stream_shape, math.nan)
        d_nan = np.full((self.config.n_cells, self.config.n_antennas), math.nan)
        solve = SolveReport(
            algorithm=self.algorithm_id,
            config=self.config,
            report=self.report,
            dual_objective=self.dual_objective,
            lam=nan if self.lam is None else self.lam,
            D=d_nan if self.D is None else self.D,
            inner_iterations=self.inner_iterations,
            outer_iterations=self.outer_iterations,
            converged=self.converged,
            duality_gap=self.duality_gap,
            diverged=self.diverged,
        )
        out = solve.to_dict(include_arrays)
        for key in ("dual_objective", "dual_objective_over_KNcNb"):
            if out[key] is not None and math.isnan(out[key]):
                out[key] = None
        if include_arrays:
            if self.lam is None:
                out["lambda"] = None
            if self.D is None:
                out["D"] = None
        return out


def run_pa(config: SystemConfig, channels: ChannelRealization,
           settings: SolverSettings = SolverSettings()) -> BaselineResult:
    W, _, solve = run_qcomp_pa(config, channels, settings)
    return BaselineResult.from_solve(W, solve)


def run_qcomp(config: SystemConfig, channels: ChannelRealization,
              settings: SolverSettings = SolverSettings(), noise=None) -> BaselineResult:
    """Total-power minimization: the dual pipeline with D_i = I and no D updates."""
    if not channels.matches(config):
        raise InvalidDimensionError("channel realization does not match the system config")
    D = np.ones((config.n_cells, config.n_antennas))
    W, state, rep, dual, iters = solve_fixed_D(config, channels, D, settings, noise=noise)
    bound = config.n_subcarriers * rep.total_power
    return BaselineResult(
        algorithm_id="qcomp",
        beamformers=W,
        report=rep,
        converged=True,
        outer_iterations=1,
        config=config,
        dual_objective=dual,
        inner_iterations=iters,
        duality_gap=(bound - dual) / bound,
        lam=state.lam,
        D=state.D,
    )


def _cell_channels(channels: ChannelRealization, cell: int) -> ChannelRealization:
    sl = slice(cell, cell + 1)
    return ChannelRealization(channels.taps[sl, sl], channels.large_scale_gain[sl, sl],
                              channels.n_subcarriers, channels.seed)


def leakage(W: np.ndarray, g: np.ndarray, spec) -> np.ndarray:
    """Inter-cell interference plus cross-cell quantization noise per stream.

    Only contributions of BS j != i reach the users of cell i; shape (N_c, N_u, K).
    """
    n_cells = W.shape[0]
    gains = primal._cross_gains(g, W)  # (i,u,k,j,v)
    qn = primal.quant_noise_per_cell(W, spec)  # (j, m)
    q = np.einsum("jiukm,jm->iukj", np.abs(g) ** 2, qn)
    out = spec.alpha**2 * gains.sum(axis=4) + q  # (i,u,k,j)
    own = np.arange(n_cells)
    out[own, :, :, own] = 0.0
    return out.sum(axis=3)


def _solve_cell(objective, cfg, ch, settings, noise, initial):
    if objective == "minimax":
        W, st, solve = run_qcomp_pa(cfg, ch, settings, noise=noise, algorithm="qpercell",
                                    initial=initial)
        return W, st, solve.inner_iterations
    lam0 = None if initial is None else initial.lam
    W, st, _, _, iters = solve_fixed_D(cfg, ch, np.ones((1, cfg.n_antennas)), settings,
                                       lam0, noise)
    return W, st, iters


def run_qpercell(config: SystemConfig, channels: ChannelRealization,
                 settings: SolverSettings = SolverSettings(), max_outer: int = 60,
                 tol: float = 1e-7, noise=None, objective: str = "total") -> BaselineResult:
    """Per-cell designs with frozen inter-cell leakage, iterated to a fixed point.

    ``objective`` picks the single-cell problem: "total" (total transmit
    power) or "minimax" (peak antenna power). Hitting ``max_outer`` or an
    infeasible per-cell subproblem sets ``diverged``; the last complete
    iterate is still returned.
    """
    if objective not in ("total", "minimax"):
        raise ValueError(f"unknown per-cell objective {objective!r}")
    if not channels.matches(config):
        raise InvalidDimensionError("channel realization does not match the system config")
    if config.n_cells == 1 and objective == "minimax":
        W, _, solve = run_qcomp_pa(config, channels, settings, noise=noise, algorithm="qpercell")
        return BaselineResult.from_solve(W, solve)

    spec = config.quantizer
    g = channels.g
    base_noise = config.noise() if noise is None else np.broadcast_to(noise, config.stream_shape)
    gamma = config.targets()
    cells = [_cell_channels(channels, i) for i in range(config.n_cells)]
    cell_cfg = [
        SystemConfig(1, config.n_users, config.n_antennas, config.n_subcarriers, config.bits,
                     config.noise_power, gamma[i:i + 1])
        for i in range(config.n_cells)
    ]
    W = np.zeros((config.n_cells, config.n_users, config.n_subcarriers, config.n_antennas),
                 dtype=complex)
    states: list[DualState | None] = [None] * config.n_cells
    prev_power = None
    converged = diverged = False
    history = []
    inner = 0
    it = 0
    for it in range(1, max_outer + 1):
        extra = leakage(W, g, spec)
        new_W = np.empty_like(W)
        try:
            for i in range(config.n_cells):
                Wi, st, iters = _solve_cell(objective, cell_cfg[i], cells[i], settings,
                                            (base_noise[i] + extra[i])[None], states[i])
                new_W[i] = Wi.w[0]
                states[i] = st
                inner += iters
        except (InfeasibleTargetError, NoConvergenceError) as exc:
            log.info("qpercell: per-cell subproblem failed at outer %d: %s", it, exc)
            diverged = True
            break
        W = new_W
        power, p0, _ = primal.antenna_powers(W, spec)
        history.append(p0)
        if prev_power is not None:
            change = float(np.max(np.abs(power - prev_power)) / np.max(power))
            if change < tol:
                converged = True
                break
        prev_power = power
    else:
        diverged = True

    if not np.any(W):
        raise InfeasibleTargetError("per-cell subproblems infeasible on the first pass")
    Wset = BeamformerSet(W)
    rep = primal.evaluate(Wset, g, spec, base_noise)
    if converged and np.min(rep.gamma_achieved / gamma) < 1 - 1e-3:
        converged = False
    return BaselineResult(
        algorithm_id="qpercell",
        beamformers=Wset,
        report=rep,
        converged=converged,
        outer_iterations=it,
        config=config,
        diverged=diverged,
        inner_iterations=inner,
        history=history,
    )
