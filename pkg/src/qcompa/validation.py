"""Quick self-checks behind ``qcompa validate``."""

from __future__ import annotations

import numpy as np

from .baselines import run_pa
from .dual import DualState, SolverSettings, lambda_fixed_point
from .errors import InfeasibleTargetError
from .network import ChannelRealization
from .quantization import quant_gain, quantize
from .socp import socp_oracle
from .system import SystemConfig


def aqnm_check(bits: int, draws: int, seed) -> tuple[float, float]:
    """Relative errors of the measured quantization-noise variance and gain."""
    spec = quant_gain(bits)
    rng = np.random.default_rng(seed)
    x = (rng.standard_normal(draws) + 1j * rng.standard_normal(draws)) / np.sqrt(2.0)
    xq = quantize(x, spec, 1.0)
    gain = float(np.real(np.vdot(x, xq)) / np.vdot(x, x).real)
    q = xq - spec.alpha * x
    var_err = abs(float(np.mean(np.abs(q) ** 2)) / (spec.alpha * spec.beta) - 1.0)
    return var_err, abs(gain / spec.alpha - 1.0)


def random_channels(rng, n_cells, n_users, n_ant, n_sub) -> ChannelRealization:
    shape = (n_cells, n_cells, n_sub, n_ant, n_users)
    freq = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)
    return ChannelRealization.from_freq(freq)


def run_validation(seed: int = 0, trials: int = 5, draws: int = 200_000):
    lines = []
    ok = True

    def report(name, passed, detail):
        nonlocal ok
        ok &= bool(passed)
        lines.append(f"{'PASS' if passed else 'FAIL'} {name}: {detail}")

    for bits in (1, 2, 3):
        v, g = aqnm_check(bits, draws, [seed, bits])
        report(f"quantization noise model, {bits} bit", v < 0.02 and g < 0.005,
               f"variance error {v:.2e}, gain error {g:.2e}")

    g = np.array([1.0 + 0.5j, -0.3 + 1.0j, 0.2j])
    ch = ChannelRealization.from_freq(g.reshape(1, 1, 1, 3, 1))
    lam, _ = lambda_fixed_point(DualState(np.zeros((1, 1, 1)), np.ones((1, 3))), ch.g,
                                np.array([[[2.0]]]), quant_gain("inf"))
    expect = 2.0 / np.sum(np.abs(g) ** 2)
    report("single-user fixed point", abs(lam.item() / expect - 1) < 1e-10,
           f"lambda {lam.item():.12g} vs {expect:.12g}")

    spec = quant_gain(1)
    ceiling = spec.alpha / spec.beta
    ch1 = ChannelRealization.from_freq(np.ones((1, 1, 1, 1, 1)))
    settings = SolverSettings(lambda_max_iters=200_000)
    verdicts = []
    for ratio, feasible in ((0.99, True), (1.01, False)):
        cfg = SystemConfig(1, 1, 1, 1, 1, 1.0, ratio * ceiling)
        try:
            lambda_fixed_point(DualState(np.zeros((1, 1, 1)), np.ones((1, 1))), ch1.g,
                               cfg.targets(), spec, settings)
            verdicts.append(feasible)
        except InfeasibleTargetError:
            verdicts.append(not feasible)
    report("1-bit feasibility threshold", all(verdicts), f"ceiling alpha/beta = {ceiling:.5f}")

    rng = np.random.default_rng(seed)
    worst = 0.0
    for t in range(trials):
        bits = (1, 3, "inf")[t % 3]
        n_cells, n_ant = int(rng.integers(1, 3)), int(rng.integers(2, 5))
        n_sub = int(rng.integers(1, 3))
        ch = random_channels(rng, n_cells, 1, n_ant, n_sub)
        cfg = SystemConfig(n_cells, 1, n_ant, n_sub, bits, 1.0, 0.5)
        a, b = socp_oracle(cfg, ch).p0, run_pa(cfg, ch).p0
        worst = max(worst, abs(a - b) / a)
    report("conic oracle agreement", worst <= 5e-3, f"worst relative p0 difference {worst:.2e}")
    return lines, ok
