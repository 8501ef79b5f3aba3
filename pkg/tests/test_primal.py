import numpy as np
import pytest

from conftest import random_channels
from qcompa.dual import DualState, lambda_fixed_point, mmse_equalizers, run_qcomp_pa
from qcompa.errors import InvalidScalingError
from qcompa.ofdm import ofdm_demodulate, ofdm_modulate
from qcompa.primal import (
    BeamformerSet,
    antenna_powers,
    assemble_sigma,
    build_beamformers,
    evaluate_sqinr,
    solve_tau,
)
from qcompa.quantization import QuantizerSpec, quant_gain, quantize
from qcompa.system import SystemConfig


def _random_f(rng, n_cells, n_users, n_sub, n_ant):
    shape = (n_cells, n_users, n_sub, n_ant)
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def _loop_terms(w, g, spec):
    """Signal, interference and quantization-noise powers written out per stream."""
    n_cells, n_users, n_sub, n_ant = w.shape
    a, b = spec.alpha, spec.beta
    S = np.zeros((n_cells, n_users, n_sub))
    I = np.zeros_like(S)
    Q = np.zeros_like(S)
    for i in range(n_cells):
        for u in range(n_users):
            for k in range(n_sub):
                for j in range(n_cells):
                    h = g[j, i, u, k]
                    for v in range(n_users):
                        p = a**2 * abs(np.vdot(h, w[j, v, k])) ** 2
                        if (j, v) == (i, u):
                            S[i, u, k] = p
                        else:
                            I[i, u, k] += p
                    for m in range(n_ant):
                        load = sum(abs(w[j, v, ell, m]) ** 2 for v in range(n_users)
                                   for ell in range(n_sub))
                        Q[i, u, k] += abs(h[m]) ** 2 * a * b * load / n_sub
    return S, I, Q


@pytest.mark.parametrize("bits", [1, 3, "inf"])
def test_sigma_matches_loop_oracle(rng, bits):
    spec = quant_gain(bits)
    ch = random_channels(rng, 2, 2, 3, 3)
    f = _random_f(rng, 2, 2, 3, 3)
    targets = rng.uniform(0.3, 2.0, (2, 2, 3))
    sigma = assemble_sigma(f, ch.g, targets, spec)
    tau = rng.uniform(0.5, 2.0, 12)
    S, I, Q = _loop_terms(np.sqrt(tau.reshape(2, 2, 3))[..., None] * f, ch.g, spec)
    np.testing.assert_allclose(sigma @ tau, (S / targets - I - Q).ravel(), rtol=1e-10, atol=1e-12)


def test_sigma_scalar_case(rng):
    ch = random_channels(rng, 1, 1, 3, 1)
    f = _random_f(rng, 1, 1, 1, 3)
    gamma = 2.0
    spec = quant_gain("inf")
    sigma = assemble_sigma(f, ch.g, np.full((1, 1, 1), gamma), spec)
    val = abs(np.vdot(ch.g[0, 0, 0, 0], f[0, 0, 0])) ** 2 / gamma
    np.testing.assert_allclose(sigma, [[val]])
    tau = solve_tau(sigma, 0.3)
    assert tau[0] == pytest.approx(0.3 * gamma / abs(np.vdot(ch.g[0, 0, 0, 0], f[0, 0, 0])) ** 2)


def test_unquantized_sigma_has_no_cross_subcarrier_blocks(rng):
    ch = random_channels(rng, 2, 2, 3, 4)
    sigma = assemble_sigma(_random_f(rng, 2, 2, 4, 3), ch.g, np.ones((2, 2, 4)), quant_gain("inf"))
    k = np.tile(np.arange(4), 4)
    assert not np.any(sigma[k[:, None] != k[None, :]])


def test_sigma_continuous_in_beta(rng):
    ch = random_channels(rng, 2, 1, 3, 2)
    f = _random_f(rng, 2, 1, 2, 3)
    t = np.ones((2, 1, 2))
    zero = assemble_sigma(f, ch.g, t, QuantizerSpec(3, 1.0, 0.0))
    tiny = assemble_sigma(f, ch.g, t, QuantizerSpec(3, 1.0, 1e-10))
    np.testing.assert_allclose(tiny, zero, atol=1e-8)


@pytest.mark.parametrize("bits", [1, 2, "inf"])
def test_recovered_beamformers_meet_targets(rng, bits):
    spec = quant_gain(bits)
    ch = random_channels(rng, 2, 2, 4, 3)
    targets = np.full((2, 2, 3), 0.4)
    noise = 0.7
    D = rng.uniform(0.5, 1.5, (2, 4))
    lam, _ = lambda_fixed_point(DualState(np.zeros((2, 2, 3)), D), ch.g, targets, spec)
    f = mmse_equalizers(DualState(lam, D), ch.g, spec)
    tau = solve_tau(assemble_sigma(f, ch.g, targets, spec), noise)
    W = build_beamformers(f, tau)
    np.testing.assert_allclose(evaluate_sqinr(W, ch.g, spec, noise), targets, rtol=1e-6)


def test_build_beamformers_scaling(rng):
    f = _random_f(rng, 1, 1, 2, 3)
    np.testing.assert_allclose(build_beamformers(f, np.ones(2)).w, f)
    w = build_beamformers(f, 4 * np.ones(2)).w
    np.testing.assert_allclose(np.linalg.norm(w, axis=-1), 2 * np.linalg.norm(f, axis=-1))
    with pytest.raises(InvalidScalingError):
        build_beamformers(f, np.array([1.0, -1.0]))


def test_negative_tau_flagged():
    sigma = np.array([[1.0, 2.0], [0.0, 1.0]])  # tau = (-1, 1)
    with pytest.raises(InvalidScalingError):
        solve_tau(sigma, 1.0)


def test_evaluate_sqinr_simple_cases(rng):
    ch = random_channels(rng, 2, 2, 3, 2)
    spec = quant_gain(2)
    assert not np.any(evaluate_sqinr(np.zeros((2, 2, 2, 3)), ch.g, spec, 1.0))
    ch1 = random_channels(rng, 1, 1, 3, 1)
    w = _random_f(rng, 1, 1, 1, 3)
    got = evaluate_sqinr(w, ch1.g, quant_gain("inf"), 0.5)
    assert got.item() == pytest.approx(abs(np.vdot(ch1.g[0, 0, 0, 0], w[0, 0, 0])) ** 2 / 0.5)


def test_antenna_power_examples(rng):
    spec = quant_gain(3)
    w = np.zeros((1, 1, 1, 3), dtype=complex)
    w[0, 0, 0, 0] = np.sqrt(2.0)
    power, p0, total = antenna_powers(w, spec)
    np.testing.assert_allclose(power, [[2 * spec.alpha, 0, 0]])
    W = _random_f(rng, 2, 2, 4, 3)
    power, p0, total = antenna_powers(W, spec)
    assert total == pytest.approx(spec.alpha / 4 * np.sum(np.abs(W) ** 2))
    assert p0 == power.max()


def _simulate_link(w, g, spec, noise, n_frames, rng):
    """Frequency-domain symbols -> OFDM -> per-antenna quantizer -> channel -> receiver."""
    n_users, n_sub, n_ant = w.shape[1:]
    var = np.sum(np.abs(w[0]) ** 2, axis=(0, 1)) / n_sub  # time-domain variance per antenna
    shape = (n_frames, n_users, n_sub)
    s = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)
    X = np.einsum("ukm,fuk->fkm", w[0], s)
    x = np.fft.ifft(X, axis=1, norm="ortho")
    xq = quantize(x, spec, var[None, None, :])
    Xq = np.fft.fft(xq, axis=1, norm="ortho")
    return s, x, xq, Xq, var


def test_sqinr_matches_monte_carlo_link():
    rng = np.random.default_rng(5)
    spec = quant_gain(2)
    ch = random_channels(rng, 1, 1, 4, 2)
    w = _random_f(rng, 1, 1, 2, 4)
    noise = 0.5
    s, _, _, Xq, _ = _simulate_link(w, ch.g, spec, noise, 100_000, rng)
    m = s.shape[0]
    n = np.sqrt(noise / 2) * (rng.standard_normal(m) + 1j * rng.standard_normal(m))
    analytic = evaluate_sqinr(w, ch.g, spec, noise)[0, 0]
    for k in range(2):
        y = Xq[:, k, :] @ ch.g[0, 0, 0, k].conj() + n
        c = np.vdot(s[:, 0, k], y) / np.vdot(s[:, 0, k], s[:, 0, k])
        err = y - c * s[:, 0, k]
        empirical = abs(c) ** 2 / np.mean(np.abs(err) ** 2)
        assert empirical == pytest.approx(analytic[k], rel=0.05)


def test_antenna_powers_match_monte_carlo():
    rng = np.random.default_rng(6)
    spec = quant_gain(3)
    ch = random_channels(rng, 1, 2, 4, 4)
    w = _random_f(rng, 1, 2, 4, 4)
    _, _, xq, _, _ = _simulate_link(w, ch.g, spec, 1.0, 100_000, rng)
    empirical = np.mean(np.abs(xq) ** 2, axis=(0, 1))
    np.testing.assert_allclose(empirical, antenna_powers(w, spec)[0][0], rtol=0.03)


def test_ofdm_round_trip_inside_link(rng):
    X = _random_f(rng, 1, 1, 8, 3)[0, 0]
    np.testing.assert_allclose(ofdm_demodulate(ofdm_modulate(X)), X, atol=1e-12)


def test_report_level_strong_duality(rng):
    cfg = SystemConfig(2, 2, 4, 2, 3, 1.0, 0.5)
    ch = random_channels(rng, 2, 2, 4, 2)
    W, _, solve = run_qcomp_pa(cfg, ch)
    scale = cfg.n_subcarriers * cfg.n_cells * cfg.n_antennas
    assert solve.dual_objective / scale == pytest.approx(solve.p0, rel=1e-2)
    assert isinstance(W, BeamformerSet)
    np.testing.assert_allclose(evaluate_sqinr(W, ch.g, cfg.quantizer, 1.0), 0.5, rtol=1e-4)
