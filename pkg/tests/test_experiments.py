import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qcompa.experiments import (
    CSV_HEADER,
    PRESETS,
    MetricRecord,
    SweepSpec,
    compute_papr,
    emit_csv,
    empirical_cdf,
    load_sweep_spec,
    parse_csv,
    run_sweep,
    summarize,
    trial_seed,
    waveform_papr_db,
    write_outputs,
)
from qcompa.ofdm import ofdm_modulate
from qcompa.quantization import quant_gain

SMALL = dict(n_antennas=4, n_cells=2, n_users=1, n_subcarriers=4, bits=(3,), gamma_db=(-3.0,),
             trials=2)


def test_waveform_papr_of_flat_spectrum():
    for K in (4, 16, 64):
        x = ofdm_modulate(np.ones((K, 1)))
        assert waveform_papr_db(x)[0] == pytest.approx(10 * math.log10(K))


def test_single_tone_has_flat_envelope():
    K = 8
    w = np.zeros((1, 1, K, 2), dtype=complex)
    w[0, 0, 3] = [1.0, 0.5j]
    for est in ("temporal", "temporal_unquantized"):
        assert compute_papr(w, quant_gain("inf"), 100, 0, est) == pytest.approx(0.0, abs=1e-9)


def test_spatial_papr():
    w = np.zeros((1, 1, 2, 2), dtype=complex)
    w[0, 0, :, 0] = 1.0
    w[0, 0, :, 1] = np.sqrt(3.0)
    # antenna powers 1 and 3: peak over mean = 3/2
    assert compute_papr(w, quant_gain(3)) == pytest.approx(10 * math.log10(1.5))


def test_papr_skips_silent_antennas():
    w = np.zeros((1, 1, 2, 3), dtype=complex)
    w[0, 0, :, :2] = 1.0
    with pytest.warns(RuntimeWarning):
        assert compute_papr(w, quant_gain(3)) == pytest.approx(0.0)


def test_papr_requires_enough_draws():
    with pytest.raises(ValueError):
        compute_papr(np.ones((1, 1, 4, 2)), quant_gain(3), 10, 0, "temporal")


def test_empirical_cdf_examples():
    assert empirical_cdf([4.2]) == [(4.2, 1.0)]
    assert [f for _, f in empirical_cdf([3, 1, 2])] == pytest.approx([1 / 3, 2 / 3, 1.0])
    with pytest.raises(ValueError):
        empirical_cdf([])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-200, 100), min_size=1, max_size=30))
def test_empirical_cdf_monotone(values):
    cdf = empirical_cdf(values)
    xs, fs = zip(*cdf)
    assert list(xs) == sorted(xs) and fs[-1] == 1.0
    assert all(a < b for a, b in zip(fs, fs[1:]))


def _records():
    return [
        MetricRecord("wideband", "qcomp", 3, -1.0, 1, 10.5, 20.25, 3.1, True, (10.5, 9.0)),
        MetricRecord("wideband", "qcomp_pa", math.inf, -1.0, 0, 1 / 3, 2.0, 0.1, True),
        MetricRecord("narrowband", "qpercell", 1, 2.0, 0, math.nan, math.nan, math.nan, False,
                     (), "infeasible"),
    ]


def test_csv_round_trip():
    recs = _records()
    text = emit_csv(recs)
    assert text.splitlines()[0] == ",".join(CSV_HEADER)
    assert sorted(parse_csv(text), key=lambda r: r.key) == sorted(recs, key=lambda r: r.key)
    assert emit_csv(parse_csv(text)) == text


def test_csv_rejects_bad_header():
    with pytest.raises(ValueError):
        parse_csv("a,b\n1,2\n")


def test_spec_rejects_unknown_keys(tmp_path):
    with pytest.raises(ValueError):
        SweepSpec.from_dict({"trails": 3})
    with pytest.raises(ValueError):
        SweepSpec(settings={"step": 1.0})
    path = tmp_path / "spec.json"
    path.write_text(json.dumps({"n_cells": 2, "bits": ["inf", 3], "gamma_db": 1.0}))
    spec = load_sweep_spec(path)
    assert spec.bits == (math.inf, 3) and spec.gamma_db == (1.0,)
    assert SweepSpec.from_dict(spec.to_dict()) == spec


def test_env_overrides():
    spec = SweepSpec().with_env({"QCOMPA_SEED": "17", "QCOMPA_THREADS": "3"})
    assert (spec.seed, spec.threads) == (17, 3)
    assert SweepSpec().with_env({}) == SweepSpec()


def test_presets_cover_both_layouts():
    assert PRESETS["wideband-full-3cell"].n_cells == 3
    assert PRESETS["wideband-full-4cell"].n_cells == 4
    papr = {PRESETS["wideband-papr-16"].n_antennas, PRESETS["wideband-papr-32"].n_antennas}
    assert papr == {16, 32}


def test_trial_seeds_are_independent_of_call_order():
    a = trial_seed(5, 1, 2).generate_state(4)
    trial_seed(5, 0, 0).generate_state(4)
    assert np.array_equal(a, trial_seed(5, 1, 2).generate_state(4))
    assert not np.array_equal(a, trial_seed(5, 2, 1).generate_state(4))


def test_sweep_deterministic_and_consistent(tmp_path):
    spec = SweepSpec(**SMALL)
    first = run_sweep(spec)
    second = run_sweep(spec)
    assert emit_csv(first.records) == emit_csv(second.records)
    for rec in first.records:
        if rec.antenna_powers_dbm:
            assert rec.p0_dbm == max(rec.antenna_powers_dbm)
        assert math.isnan(rec.papr_db) or rec.papr_db >= 0
    written = write_outputs(first, tmp_path)
    names = {p.name for p in written}
    assert "records.csv" in names and "summary.json" in names
    assert any(n.startswith("p0_vs_gamma_qcomp_pa_b3") for n in names)
    assert any(n.startswith("cdf_qcomp_b3_gm3") for n in names)
    assert parse_csv((tmp_path / "records.csv").read_text()) == first.records


def test_parallel_sweep_matches_serial():
    spec = SweepSpec(**SMALL, algorithms=("qcomp_pa", "qcomp"))
    serial = emit_csv(run_sweep(spec).records)
    parallel = emit_csv(run_sweep(SweepSpec(**SMALL, algorithms=("qcomp_pa", "qcomp"),
                                            threads=2)).records)
    assert serial == parallel


def test_infeasible_points_are_recorded():
    spec = SweepSpec(**{**SMALL, "bits": (1,), "gamma_db": (12.0,), "trials": 1},
                     algorithms=("qcomp",))
    rec = run_sweep(spec).records[0]
    assert rec.status == "infeasible" and not rec.converged and math.isnan(rec.p0_dbm)
    row = summarize([rec])[0]
    assert row["flagged"] and row["infeasible"] == 1 and row["mean_p0_dbm"] is None
