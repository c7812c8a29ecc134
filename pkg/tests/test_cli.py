import json
from pathlib import Path

import numpy as np
import pytest

from liouville.cli import main
from liouville.config import THREADS_ENV, load_config
from liouville.curves import PdfCurve
from liouville.errors import ConfigError

CONFIGS = Path(__file__).resolve().parents[1] / "scripts" / "configs"


def write(tmp_path, name, obj):
    path = tmp_path / name
    path.write_text(json.dumps(obj))
    return str(path)


def run(args, capsys):
    code = main(args)
    return code, capsys.readouterr().err


def test_pdf_figure_config(tmp_path, capsys):
    out = tmp_path / "pdf"
    code, err = run(["pdf", str(CONFIGS / "fig2_position_pdf.json"), "--out-dir", str(out)], capsys)
    assert code == 0, err
    files = sorted(out.glob("pdf_*.csv"))
    assert len(files) == 6
    for f in files:
        assert PdfCurve.from_csv(f).mass() == pytest.approx(1.0, abs=1e-6)
    first = files[0].read_text().splitlines()
    assert first[0].startswith("# ")
    assert first[1] == "coordinate,density"


def test_mc_zero_diffusion_single_bin(tmp_path, capsys):
    out = tmp_path / "mc"
    code, err = run(["mc", str(CONFIGS / "mc_zero_diffusion.json"), "--out-dir", str(out)], capsys)
    assert code == 0, err
    for f in out.glob("mc_*.csv"):
        curve = PdfCurve.from_csv(f)
        assert np.count_nonzero(curve.density) == 1
    report = json.loads((out / "mc_report.json").read_text())
    assert all(run_["ks"] is None for run_ in report["runs"])


def test_fit_synthetic_recovers_sigma(tmp_path, capsys):
    out = tmp_path / "fit"
    code, err = run(["fit", str(CONFIGS / "fig8_fit_synthetic.json"), "--out-dir", str(out)], capsys)
    assert code == 0, err
    report = json.loads((out / "fit_report.json").read_text())
    row = next(r for r in report["table"] if r["Re_m"] == 20)
    assert row["sigma_xi"] == pytest.approx(0.9488, rel=0.01)
    assert report["loglog"]["sigma"]["slope"] == pytest.approx(0.06258, rel=1e-4)


def test_fit_from_csv_files(tmp_path, capsys):
    from liouville.fhhs import model_for_re, synthetic_temperature

    t, T = synthetic_temperature(model_for_re(20))
    np.savetxt(tmp_path / "re20.csv", np.column_stack([t, T]), delimiter=",", header="t,T", comments="")
    cfg = write(tmp_path, "fit.json", {"data": [{"Re_m": 20, "path": "re20.csv"}]})
    code, err = run(["fit", cfg, "--out-dir", str(tmp_path / "o")], capsys)
    assert code == 0, err
    report = json.loads((tmp_path / "o" / "fit_report.json").read_text())
    assert report["sigma_xi"] == pytest.approx(0.9488, rel=0.01)


@pytest.mark.parametrize("name", ["fp_heat.json", "moments_position.json",
                                  "fig6_fhhs_temperature_re20.json"])
def test_other_commands_run(name, tmp_path, capsys):
    command = {"fp": "fp", "mo": "moments", "fi": "fhhs"}[name[:2]]
    code, err = run([command, str(CONFIGS / name), "--out-dir", str(tmp_path)], capsys)
    assert code == 0, err
    reports = list(tmp_path.glob("*_report.json"))
    assert len(reports) == 1


def test_fp_report_l1(tmp_path, capsys):
    code, err = run(["fp", str(CONFIGS / "fp_heat.json"), "--out-dir", str(tmp_path)], capsys)
    assert code == 0, err
    report = json.loads((tmp_path / "fp_report.json").read_text())
    assert all(s["l1_vs_analytic"] < 1e-3 for s in report["snapshots"])


def test_reruns_are_byte_identical(tmp_path, capsys):
    cfg = write(tmp_path, "mc.json", {"model": {"type": "velocity", "tau_p": 10.0, "D": 0.02},
                                      "times": [0.1], "n": 2000, "dt": 0.01, "dump_paths": True})
    for d in ("a", "b"):
        assert run(["mc", cfg, "--out-dir", str(tmp_path / d)], capsys)[0] == 0
    names = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert "paths.bin" in names
    for name in names:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_thread_count_does_not_change_outputs(tmp_path, capsys, monkeypatch):
    cfg = write(tmp_path, "mc.json", {"model": {"type": "position", "u_p": 1.0, "D": 0.5},
                                      "times": [0.05], "n": 70000, "dt": 0.01})
    assert run(["mc", cfg, "--out-dir", str(tmp_path / "one"), "--threads", "1"], capsys)[0] == 0
    monkeypatch.setenv(THREADS_ENV, "3")
    assert run(["mc", cfg, "--out-dir", str(tmp_path / "env")], capsys)[0] == 0
    for f in (tmp_path / "one").glob("*.csv"):
        assert f.read_bytes() == (tmp_path / "env" / f.name).read_bytes()


def test_seed_override_changes_samples(tmp_path, capsys):
    cfg = write(tmp_path, "mc.json", {"model": {"type": "position", "u_p": 1.0, "D": 0.5},
                                      "times": [0.5], "n": 500, "dt": 0.01, "langevin": False})
    run(["mc", cfg, "--out-dir", str(tmp_path / "s1"), "--seed", "1"], capsys)
    run(["mc", cfg, "--out-dir", str(tmp_path / "s2"), "--seed", "2"], capsys)
    a = (tmp_path / "s1" / "mc_liouville_x_t0.5.csv").read_bytes()
    b = (tmp_path / "s2" / "mc_liouville_x_t0.5.csv").read_bytes()
    assert a != b


@pytest.mark.parametrize("body", [
    {"model": {"type": "position", "u_p": 1.0, "D": 1.0}, "times": [1.0], "colour": "red"},
    {"model": {"type": "position", "u_p": 1.0, "D": -1.0}, "times": [1.0]},
    {"model": {"type": "position", "u_p": 1.0, "D": 1.0}, "times": [-1.0]},
    {"times": [1.0]},
])
def test_malformed_configs_exit_2(body, tmp_path, capsys):
    code, err = run(["pdf", write(tmp_path, "bad.json", body), "--out-dir", str(tmp_path)], capsys)
    assert code == 2
    assert "error" in json.loads(err)


def test_usage_errors_exit_2(tmp_path, capsys):
    code, err = run(["pdf", str(tmp_path / "missing.json")], capsys)
    assert code == 2 and json.loads(err)["error"]
    code, err = run(["nonsense"], capsys)
    assert code == 2 and json.loads(err)["error"] == "usage"
    (tmp_path / "broken.json").write_text("{not json")
    code, err = run(["pdf", str(tmp_path / "broken.json")], capsys)
    assert code == 2


def test_numerical_failure_exit_3(tmp_path, capsys):
    cfg = write(tmp_path, "fp.json", {"model": {"type": "position", "u_p": 5.0, "D": 0.01},
                                      "times": [1.0], "n": 101, "dt": 0.2, "t0": 0.5,
                                      "domain": [-2, 10]})
    code, err = run(["fp", cfg, "--out-dir", str(tmp_path)], capsys)
    assert code == 3
    assert json.loads(err)["error"] == "scheme_failure"


def test_bad_thread_environment(monkeypatch, tmp_path):
    monkeypatch.setenv(THREADS_ENV, "zero")
    cfg = write(tmp_path, "c.json", {"model": {"type": "position", "u_p": 1.0, "D": 1.0}, "times": [1.0]})
    with pytest.raises(ConfigError):
        load_config("pdf", cfg, {})


def test_every_shipped_config_validates():
    for path in sorted(CONFIGS.glob("*.json")):
        stem = path.stem
        command = ("pdf" if "pdf" in stem or "evolution" in stem else
                   "fit" if "fit" in stem else "moments" if "moments" in stem else
                   "fhhs" if "temperature" in stem else "fp" if stem.startswith("fp_") else "mc")
        load_config(command, str(path), {"out_dir": "unused"})
