import json

import pytest

from peakpower.cli import main, spec_from_args, build_parser
from peakpower.harness import load_json


def test_ccdf_to_stdout(capsys):
    assert main(["ccdf", "--n", "16", "--trials", "20", "--seed", "1"]) == 0
    out = capsys.readouterr().out
    assert out.splitlines()[0] == "curve,metric_db,ccdf,run_id"


def test_json_file_and_meta(tmp_path):
    out = tmp_path / "r.json"
    assert main(["slm-ccdf", "--n", "16", "--trials", "30", "--candidates", "2", "--format", "json",
                 "--out", str(out)]) == 0
    table = load_json(out.read_text())
    assert table.meta["spec"]["candidates"] == 2
    csv_out = tmp_path / "r.csv"
    assert main(["ccdf", "--n", "16", "--trials", "5", "--out", str(csv_out)]) == 0
    assert json.loads((tmp_path / "r.csv.meta.json").read_text())["spec"]["n"] == 16


def test_spec_error_exit_code(capsys):
    assert main(["ccdf", "--trials", "0"]) == 2
    assert "spec error" in capsys.readouterr().err
    assert main(["cs-ber", "--n", "16"]) == 2
    assert main(["ccdf", "--set", "nonsense"]) == 2
    assert main(["ccdf", "--config", "/nonexistent.json"]) == 2


def test_config_layering(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"n": 32, "trials": 7, "seed": 4, "knobs": {"step_db": 0.5}}))
    args = build_parser().parse_args(["ccdf", "--config", str(cfg), "--trials", "9"])
    spec = spec_from_args(args)
    assert (spec.n, spec.trials, spec.seed, spec.knobs["step_db"]) == (32, 9, 4, 0.5)
    args = build_parser().parse_args(["ccdf", "--config", str(cfg), "--set", "step_db=0.25"])
    assert spec_from_args(args).knobs["step_db"] == 0.25
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"scenario": "cs-ber"}))
    assert main(["ccdf", "--config", str(bad)]) == 2


def test_preset_with_overrides(capsys):
    args = build_parser().parse_args(["preset", "fig7", "--trials", "50", "--set", "snr_db=10,12"])
    spec = spec_from_args(args)
    assert spec.scenario == "cs-ber" and spec.trials == 50 and spec.knobs["snr_db"] == [10, 12]
    assert main(["presets"]) == 0
    assert "fig4" in capsys.readouterr().out


def test_single_value_list_knobs(capsys):
    argv = ["cs-ber", "--n", "64", "--oversample", "1", "--trials", "20", "--set", "snr_db=10", "--set", "schemes=none"]
    assert main(argv) == 0
    rows = capsys.readouterr().out.splitlines()[1:]
    assert len(rows) == 1 and rows[0].startswith("10.0,none,")
    assert main(["scaling-sweep", "--trials", "2", "--set", "sizes=16", "--set", "samples=4"]) == 0
    assert len(capsys.readouterr().out.splitlines()) == 3


def test_argparse_rejects_unknown_subcommand():
    with pytest.raises(SystemExit) as exc:
        main(["nope"])
    assert exc.value.code == 2


def test_module_entry_point():
    import subprocess, sys
    res = subprocess.run([sys.executable, "-m", "peakpower", "codes-report", "--set", "m_max=3",
                          "--set", "balancing_m=4", "--set", "balancing_d=5"], capture_output=True, text=True)
    assert res.returncode == 0
    assert "rudin-shapiro" in res.stdout
