import numpy as np
import pytest

from conftest import random_channels
from qcompa.baselines import run_pa
from qcompa.errors import InfeasibleTargetError, InvalidDimensionError
from qcompa.network import ChannelRealization
from qcompa.socp import Cone, barrier_minimize, phase_one, socp_oracle
from qcompa.system import SystemConfig


def test_barrier_on_unit_disk():
    # minimize x + y over the unit disk
    cone = Cone(np.eye(2), np.zeros(2), np.zeros(2), 1.0)
    x, gap = barrier_minimize(np.array([1.0, 1.0]), [cone], np.zeros(2), tol=1e-10)
    np.testing.assert_allclose(x, -np.ones(2) / np.sqrt(2), atol=1e-6)
    assert gap < 1e-10


def test_phase_one_detects_empty_intersection():
    # |x1| <= x0 - 1 and |x1| <= -x0 - 1 cannot hold together
    sel = np.array([[0.0, 1.0]])
    a = Cone(sel, np.zeros(1), np.array([1.0, 0.0]), -1.0)
    b = Cone(sel, np.zeros(1), np.array([-1.0, 0.0]), -1.0)
    assert phase_one([a, b], 2, 100.0) is None
    x = phase_one([a], 2, 100.0)
    assert x is not None and x[0] - 1 > abs(x[1])


def test_two_antenna_analytic_optimum():
    g = np.array([0.6 - 0.8j, 2.0j])
    ch = ChannelRealization.from_freq(g.reshape(1, 1, 1, 2, 1))
    cfg = SystemConfig(1, 1, 2, 1, "inf", 0.5, 1.0)
    res = socp_oracle(cfg, ch)
    # equal magnitudes with matched phases: p0 = gamma sigma^2 / (|g1| + |g2|)^2
    assert res.p0 == pytest.approx(0.5 / 9.0, rel=1e-6)
    assert res.report.gamma_achieved.item() >= 1 - 1e-6


@pytest.mark.parametrize("seed,bits", [(0, 1), (1, 3), (2, "inf")])
def test_matches_dual_solver(seed, bits):
    rng = np.random.default_rng(seed)
    cfg = SystemConfig(2, 1, 3, 2, bits, 1.0, 0.5)
    ch = random_channels(rng, 2, 1, 3, 2)
    assert socp_oracle(cfg, ch).p0 == pytest.approx(run_pa(cfg, ch).p0, rel=5e-3)


def test_infeasible_scalar_ceiling():
    ch = ChannelRealization.from_freq(np.ones((1, 1, 1, 1, 1)))
    cfg = SystemConfig(1, 1, 1, 1, 1, 1.0, 3.0)
    with pytest.raises(InfeasibleTargetError):
        socp_oracle(cfg, ch)
    with pytest.raises(InfeasibleTargetError):
        run_pa(cfg, ch)


def test_rejects_large_instances(rng):
    cfg = SystemConfig(2, 2, 16, 16, 3, 1.0, 0.5)
    with pytest.raises(InvalidDimensionError):
        socp_oracle(cfg, random_channels(rng, 2, 2, 16, 16))
