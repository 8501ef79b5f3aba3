import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qcompa.errors import InvalidParameterError, UnsupportedResolutionError
from qcompa.quantization import parse_bits, quant_gain, quant_noise_diag, quantize

# distortions from an independent quadrature-based Lloyd iteration
BETA_2BIT = 0.11748184782932927
BETA_3BIT = 0.034547760788503745


def test_infinite_resolution_is_lossless():
    spec = quant_gain("inf")
    assert (spec.alpha, spec.beta) == (1.0, 0.0)
    x = np.array([0.3 + 1j, -2.0])
    np.testing.assert_array_equal(quantize(x, spec, 1.0), x)


def test_one_bit_closed_form():
    spec = quant_gain(1)
    assert spec.beta == pytest.approx(1 - 2 / math.pi, abs=1e-12)
    assert spec.levels[-1] == pytest.approx(math.sqrt(2 / math.pi), abs=1e-12)


@pytest.mark.parametrize("bits,beta", [(2, BETA_2BIT), (3, BETA_3BIT)])
def test_lloyd_max_distortion(bits, beta):
    assert quant_gain(bits).beta == pytest.approx(beta, abs=1e-8)


def test_distortion_decreases_with_bits():
    betas = [quant_gain(b).beta for b in (1, 2, 3, 4, 5)]
    assert all(a > b for a, b in zip(betas, betas[1:]))
    assert all(abs(quant_gain(b).alpha + quant_gain(b).beta - 1) < 1e-15 for b in (1, 2, 3))


def test_one_bit_quantize_value():
    spec = quant_gain(1)
    # a real unit-variance input maps to the conditional-mean level
    assert quantize(np.array([0.3]), spec, 1.0)[0] == pytest.approx(math.sqrt(2 / math.pi))
    assert quantize(np.array([0.3]), spec, 1.0)[0] == pytest.approx(0.7978845608)
    # complex unit-variance input: each component has variance 1/2
    out = quantize(np.array([0.3 - 0.1j]), spec, 1.0)
    assert out[0] == pytest.approx(math.sqrt(1 / math.pi) * (1 - 1j))


def test_rejects_unsupported_bits():
    for bad in (0, 6, 2.5, -1):
        with pytest.raises(UnsupportedResolutionError):
            parse_bits(bad)


def test_rejects_nonpositive_variance():
    with pytest.raises(InvalidParameterError):
        quantize(np.ones(2), quant_gain(2), 0.0)


@pytest.mark.parametrize("bits", [1, 2, 3, 4, 5])
def test_empirical_distortion(bits):
    spec = quant_gain(bits)
    rng = np.random.default_rng(bits)
    var = 2.5
    x = np.sqrt(var / 2) * (rng.standard_normal(10**6) + 1j * rng.standard_normal(10**6))
    xq = quantize(x, spec, var)
    d = np.mean(np.abs(x - xq) ** 2) / np.mean(np.abs(x) ** 2)
    assert d == pytest.approx(spec.beta, rel=0.01)


@pytest.mark.parametrize("bits", [1, 2, 3])
def test_bussgang_gain_and_noise_variance(bits):
    spec = quant_gain(bits)
    rng = np.random.default_rng(10 + bits)
    n = 10**6
    x = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / math.sqrt(2)
    xq = quantize(x, spec, 1.0)
    gain = np.real(np.vdot(x, xq)) / np.vdot(x, x).real
    assert gain == pytest.approx(spec.alpha, rel=0.005)
    q = xq - spec.alpha * x
    assert np.mean(np.abs(q) ** 2) == pytest.approx(spec.alpha * spec.beta, rel=0.02)


def test_quant_noise_diag_examples():
    spec = quant_gain(1)
    assert not np.any(quant_noise_diag(np.zeros((4, 3, 2)), spec))
    assert not np.any(quant_noise_diag(np.ones((4, 3, 2)), quant_gain("inf")))
    ab = (2 / math.pi) * (1 - 2 / math.pi)
    np.testing.assert_allclose(quant_noise_diag(np.eye(3)[None], spec), ab * np.ones(3))
    assert ab == pytest.approx(0.23134, abs=1e-5)


@settings(max_examples=30, deadline=None)
@given(st.sampled_from([1, 2, 3, 4, 5]), st.floats(0.01, 100.0), st.integers(0, 2**32 - 1))
def test_quantizer_output_on_level_grid(bits, var, seed):
    spec = quant_gain(bits)
    rng = np.random.default_rng(seed)
    x = math.sqrt(var / 2) * (rng.standard_normal(50) + 1j * rng.standard_normal(50))
    xq = quantize(x, spec, var)
    scale = math.sqrt(var / 2)
    levels = np.asarray(spec.levels) * scale
    for comp in (xq.real, xq.imag):
        assert np.all(np.min(np.abs(comp[:, None] - levels[None]), axis=1) <= 1e-12 * scale)
    assert np.all(np.sign(xq.real[x.real != 0]) == np.sign(x.real[x.real != 0]))
