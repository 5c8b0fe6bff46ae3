import csv
import json

import numpy as np
import pytest

from optobec.cli import main
from optobec.experiments import STATUSES, ExperimentSpec, Grid, figure_spec, run
from optobec.model import paper_defaults
from optobec.paramfile import serialize


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _only_csv(out, pattern="*.csv"):
    return sorted(out.glob(pattern))


def test_linewidth_variants_write_three_csvs(tmp_path):
    out = tmp_path / "linewidths"
    code = main(["run", "fig5", "--gamma-l", "1kHz,10kHz,100kHz", "--grid", "-30:0:7", "--out", str(out)])
    assert code == 0
    files = _only_csv(out)
    assert len(files) == 3
    rows = _rows(files[0])
    assert len(rows) == 7
    assert {"delta_c", "delta_c_over_kappa", "EN_mirror_atom", "EN_atom_field", "EN_mirror_field",
            "stable_flag", "branch_id", "status"} <= set(rows[0])
    assert all(r["status"] in STATUSES for r in rows)
    k = paper_defaults().kappa
    assert float(rows[0]["delta_c"]) == pytest.approx(float(rows[0]["delta_c_over_kappa"]) * k)
    manifest = json.loads((out / "manifest.json").read_text())
    assert len(manifest["outputs"]) == 3 and manifest["wall_time_s"] >= 0
    assert "kerr" in manifest["outputs"][0]["derived"]


def test_effective_sweep_has_undefined_segment(tmp_path):
    out = tmp_path / "effective"
    assert main(["fig2", "--out", str(out)]) == 0
    rows = _rows(_only_csv(out)[0])
    undefined = [float(r["Delta_d_over_kappa"]) for r in rows if r["status"] == "undefined"]
    assert undefined and min(undefined) > 0
    assert all(r["omega_c_eff"] == "" for r in rows if r["status"] == "undefined")


def test_output_is_deterministic_and_hash_tracks_inputs(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert main(["fig4", "--grid", "-10:10:5", "--out", str(d)]) == 0
    fa, fb = _only_csv(a)[0], _only_csv(b)[0]
    assert fa.read_bytes() == fb.read_bytes()
    ma = json.loads((a / "manifest.json").read_text())
    mb = json.loads((b / "manifest.json").read_text())
    assert ma["input_hash"] == mb["input_hash"]
    main(["fig4", "--grid", "-10:10:6", "--out", str(b)])
    assert json.loads((b / "manifest.json").read_text())["input_hash"] != ma["input_hash"]


def test_params_file_and_override(tmp_path):
    pf = tmp_path / "p.txt"
    pf.write_text(serialize(paper_defaults()))
    out = tmp_path / "o"
    assert main(["sweep", "--params", str(pf), "--override", "eta=50kappa", "--grid", "-20:0:3",
                 "--out", str(out)]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["spec"]["params"]["eta"] == pytest.approx(50 * paper_defaults().kappa)


def test_pump_sweep(tmp_path):
    out = tmp_path / "o"
    assert main(["sweep", "--variable", "eta", "--delta-c=-40kappa", "--grid", "10:100:4",
                 "--out", str(out)]) == 0
    rows = _rows(_only_csv(out)[0])
    assert [float(r["eta_over_kappa"]) for r in rows] == [10.0, 40.0, 70.0, 100.0]


@pytest.mark.parametrize("argv", [[], ["fig9"], ["fig5", "--grid", "1:2"], ["fig5", "--jobs", "x"]])
def test_usage_errors_exit_1(argv, capsys):
    assert main(argv) == 1
    assert "usage error" in capsys.readouterr().err


def test_validation_errors_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.txt"
    bad.write_text("")
    assert main(["fig5", "--params", str(bad), "--out", str(tmp_path)]) == 2
    err = capsys.readouterr().err
    assert "kappa: missing" in err and "N_atoms: missing" in err
    assert main(["fig5", "--override", "kappa=-1", "--out", str(tmp_path)]) == 2
    assert main(["fig5", "--grid", "0:1:1", "--out", str(tmp_path)]) in (1, 2)


def test_numerical_failure_exits_3(tmp_path):
    # a marginal noise filter has no stationary state, so the oracle cannot run
    assert main(["oracle-check", "--override", "gamma_tilde=0", "--out", str(tmp_path)]) == 3


def test_spectrum_columns(tmp_path):
    out = tmp_path / "s"
    assert main(["spectrum", "--trajectories", "4", "--out", str(out)]) == 0
    rows = _rows(_only_csv(out)[0])
    assert set(rows[0]) >= {"omega", "S_analytic", "S_empirical", "stderr", "status"}


def test_spec_invariants():
    with pytest.raises(ValueError):
        Grid(0, 1, 1)
    with pytest.raises(ValueError):
        ExperimentSpec(kind="fig5", params=paper_defaults())
    with pytest.raises(ValueError):
        ExperimentSpec(kind="spectrum", params=paper_defaults(), variants=[])
    assert figure_spec("fig7").variants[2]["omega_sw"] == "1omega_R"


def test_run_records_unstable_points(tmp_path):
    k = paper_defaults().kappa
    spec = ExperimentSpec(kind="entanglement_sweep", params=paper_defaults().with_updates(eta=30 * k),
                          grid=Grid(-15, 200, 2), branch="upper",
                          model_overrides={"xi_c": "0.2kappa", "xi_m": "0.05kappa", "omega_c": "1omega_m"})
    assert run(spec, tmp_path) == 0
    rows = _rows(_only_csv(tmp_path)[0])
    assert [r["status"] for r in rows] == ["ok", "unstable"]
    assert rows[1]["EN_mirror_atom"] == "" and np.isfinite(float(rows[0]["EN_mirror_atom"]))
