import json

import numpy as np
import pytest

from peakpower.harness import (PRESETS, SCENARIOS, ExperimentSpec, ResultTable, SpecError, emit, load_json,
                               output_hash, preset, run)
from peakpower.metrics import papr
from peakpower.ofdm import Constellation, random_frames, synthesize
from peakpower import rng as rngmod

# desk-scale settings per scenario for the thread-count determinism check
DETERMINISM_SPECS = {
    "ccdf": dict(n=64, trials=1000),
    "derand-ccdf": dict(n=32, trials=1000, candidates=2),
    "slm-ccdf": dict(n=64, trials=1000, candidates=4),
    "mimo-slm": dict(n=32, trials=1000, antennas=2, candidates=2),
    "threshold-count": dict(n=64, trials=1000, oversample=1),
    "clip-duration": dict(n=128, trials=1000),
    "cs-ber": dict(n=64, oversample=1, trials=2500, knobs={"snr_db": [10.0]}),
    "codes-report": dict(trials=1, knobs={"m_max": 6, "balancing_m": 4, "balancing_d": 5}),
    "scaling-sweep": dict(trials=40, oversample=2, knobs={"sizes": [16], "samples": 4}),
}


def test_every_scenario_has_a_determinism_case():
    assert set(DETERMINISM_SPECS) == set(SCENARIOS)


@pytest.mark.parametrize("scenario", SCENARIOS)
def test_output_independent_of_thread_count(scenario):
    spec = ExperimentSpec(scenario, seed=11, **DETERMINISM_SPECS[scenario])
    one = run(spec, threads=1)
    many = run(spec, threads=4)
    assert output_hash(one) == output_hash(many)
    assert output_hash(run(spec, threads=1)) == output_hash(one)


def test_single_trial_repeat():
    spec = ExperimentSpec("ccdf", n=16, trials=1, seed=5)
    assert emit(run(spec)) == emit(run(spec))


def test_trial_streams_are_per_trial():
    # trial t of a run equals the frame drawn from stream (seed, t, DATA) in isolation
    spec = ExperimentSpec("ccdf", n=32, trials=300, seed=9, knobs={"step_db": 0.01})
    table = run(spec)
    frame = random_frames(rngmod.stream(9, 123, rngmod.DATA), Constellation.qpsk(), 32)
    value_db = 10 * np.log10(papr(synthesize(frame, 4)))
    grid = np.array(table.column("metric_db"))
    assert grid.min() <= value_db <= grid.max()
    assert table.meta["config_hash"] == spec.config_hash()
    assert set(table.column("run_id")) == {spec.config_hash()}
    assert ExperimentSpec.from_dict(table.meta["spec"]) == spec


def test_validation_messages():
    with pytest.raises(SpecError, match="unknown scenario"):
        ExperimentSpec("fig9").validate()
    with pytest.raises(SpecError, match="trials"):
        ExperimentSpec("ccdf", trials=0).validate()
    with pytest.raises(SpecError, match="knobs"):
        ExperimentSpec("ccdf", knobs={"snr_db": [1]}).validate()
    with pytest.raises(SpecError):
        ExperimentSpec("ccdf", constellation="7QAM").validate()
    with pytest.raises(SpecError, match="n >= 59"):
        ExperimentSpec("cs-ber", n=32).validate()
    with pytest.raises(SpecError):
        ExperimentSpec("ccdf", metric="aom", hpa="bogus").validate()
    with pytest.raises(SpecError):
        ExperimentSpec.from_dict({"scenario": "ccdf", "colour": 1})


def test_ccdf_knee_and_ldp_rows():
    table = run(ExperimentSpec("ccdf", n=128, trials=2000, seed=1))
    assert table.meta["knee_db"] == pytest.approx(10 * np.log10(np.log(128)))
    curves = set(table.column("curve"))
    assert curves == {"uncoded", "ldp"}
    assert table.columns == ("curve", "metric_db", "ccdf", "run_id")


def test_derand_ccdf_curve_order():
    table = run(ExperimentSpec("derand-ccdf", n=64, trials=1000, candidates=4, seed=2))
    s = table.meta["summary"]
    # right to left: uncoded, SLM, derandomization
    assert s["uncoded"]["median_db"] > s["slm"]["median_db"] > s["derand"]["median_db"]
    assert table.meta["bound_increases"] == 0 and table.meta["bound_steps"] == 1000 * 64
    assert {r["side_info"] for r in table.where(curve="slm")} == {"out-of-band"}


def test_threshold_rows():
    table = run(ExperimentSpec("threshold-count", n=64, oversample=1, trials=500, seed=3,
                               knobs={"thresholds_db": [6.0, 1e3]}))
    never, always = table.rows
    assert always[table.columns.index("mean_count")] == 1.0
    assert never[table.columns.index("cdf")] > 0


def test_cs_ber_schema():
    table = run(ExperimentSpec("cs-ber", n=64, oversample=1, trials=200, seed=4,
                               knobs={"snr_db": [12.0], "schemes": ["none", "reserved"]}))
    assert table.columns == ("snr_db", "scheme", "ber", "bit_errors", "bits", "trials", "clip_level_db",
                             "M", "S", "run_id")
    assert table.column("scheme") == ["none", "reserved"]
    assert table.meta["ber_accounting"] == "data tones only"
    assert isinstance(table.meta["monotonicity_counterexamples"], list)


def test_cs_ber_logs_counterexamples():
    # at a 0 dB clip and high SNR the cancelled receiver can lose despite a smaller error norm
    table = run(ExperimentSpec("cs-ber", n=64, oversample=1, clip_db=0.0, trials=3000, seed=1,
                               knobs={"snr_db": [20.0], "schemes": ["reserved"]}))
    logged = table.meta["monotonicity_counterexamples"]
    assert len(logged) == 1
    for ce in logged:
        assert ce["recovery_error"] < ce["clip_power"] and ce["ber"] > ce["uncancelled_ber"]


def test_emit_formats():
    empty = ResultTable(("a", "b"), [])
    assert emit(empty, "csv") == b"a,b\n"
    table = ResultTable(("x", "y", "name"), [(0.1, 2, "p"), (float("inf"), -3, "q,r")], {"k": [1, 2]})
    text = emit(table, "csv").decode()
    assert text.splitlines()[0] == "x,y,name"
    assert text.splitlines()[1] == "0.1,2,p"
    assert '"q,r"' in text and "\r" not in text
    doc = emit(ResultTable(("x",), [(0.5,)], {"k": 1}), "json")
    back = load_json(doc)
    assert emit(back, "json") == doc
    assert json.loads(doc)["schema_version"] == 1
    with pytest.raises(SpecError):
        emit(table, "xml")
    with pytest.raises(ValueError):
        ResultTable(("a",), [(1, 2)])
    with pytest.raises(ValueError):
        load_json('{"schema": "other"}')


def test_presets_expand():
    assert set(PRESETS) == {"fig2", "fig3", "fig4", "fig7"}
    for name in PRESETS:
        spec = preset(name).validate()
        assert spec.scenario in SCENARIOS
    spec = preset("fig7", trials=10, knobs={"snr_db": [9.0]})
    assert spec.trials == 10 and spec.knobs["snr_db"] == [9.0]
    assert preset("fig7").trials == 100_000
    with pytest.raises(SpecError):
        preset("fig5")


def test_threads_env(monkeypatch):
    from peakpower.harness import default_threads
    monkeypatch.setenv("PEAKPOWER_THREADS", "3")
    assert default_threads() == 3
    monkeypatch.setenv("PEAKPOWER_THREADS", "x")
    with pytest.raises(SpecError):
        default_threads()
