import csv
import json

import numpy as np
import pytest

from glmcurl import cli
from glmcurl import scenarios as sc
from glmcurl.state import GridSpec, StateError
from glmcurl.systems import make_system

TOY_SMALL = ["--preset", "toy-pure-curl-error", "--resolution", "16", "--t-end", "0.5"]


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_config_grammar():
    vals = cli.parse_config_text("""
        # comment line
        nx = 12   # trailing comment
        lower = -1, -1, -1
        boundary = extrapolate
        glm = off
        a_c_A =
        cut_axes = x y
    """)
    assert vals == {"nx": 12, "lower": (-1.0, -1.0, -1.0), "boundary": ("extrapolate",) * 3,
                    "glm": False, "a_c_A": None, "cut_axes": ("x", "y")}


@pytest.mark.parametrize("text, match", [
    ("nxx = 3", "unknown key"),
    ("nx 3", "expected"),
    ("nx = three", "int"),
    ("slicing = maximal", "one of"),
    ("lower = 1, 2", "vec3"),
    ("boundary = open", "bc3"),
])
def test_config_errors(text, match):
    with pytest.raises(cli.ConfigError, match=match):
        cli.parse_config_text(text)


def test_every_key_is_documented_and_echoed(capsys):
    assert cli.main(["--print-config"]) == cli.EXIT_OK
    out = capsys.readouterr().out
    lines = [ln for ln in out.splitlines() if ln]
    assert len(lines) == len(cli.SCHEMA)
    for line, (key, spec) in zip(lines, cli.SCHEMA.items()):
        assert line.startswith(f"{key} = ") and line.endswith("# " + spec.doc)
    # the echo is itself a valid config
    again = cli.parse_config_text(out)
    assert again == {k: s.default for k, s in cli.SCHEMA.items()}


def test_config_file_and_overrides(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("nx = 10\nt_end = 3\nseed = 5\n", encoding="utf-8")
    code = cli.main(["--config", str(cfg), "--set", "nx=14", "--t-end", "2", "--print-config"])
    assert code == cli.EXIT_OK
    vals = cli.parse_config_text(capsys.readouterr().out)
    assert (vals["nx"], vals["t_end"], vals["seed"]) == (14, 2.0, 5)


def test_resolution_skips_flat_axes(capsys):
    cli.main(TOY_SMALL + ["--print-config"])
    vals = cli.parse_config_text(capsys.readouterr().out)
    assert (vals["nx"], vals["ny"], vals["nz"]) == (16, 16, 1)


def test_bad_cli_input_is_a_config_error(tmp_path, capsys):
    assert cli.main(["--set", "bogus=1"]) == cli.EXIT_CONFIG
    assert cli.main(["--set", "nx"]) == cli.EXIT_CONFIG
    assert cli.main(["--set", "cfl=0"]) == cli.EXIT_CONFIG
    assert cli.main(["--config", str(tmp_path / "missing.cfg")]) == cli.EXIT_CONFIG
    assert cli.main(["--set", "scenario=external_file"]) == cli.EXIT_CONFIG
    assert cli.main(["--set", "cut_fields=rho"]) == cli.EXIT_CONFIG
    assert "error:" in capsys.readouterr().err


def test_preset_values():
    rs = cli.build_config("robust-stability-coarse")
    assert (rs["nx"], rs["ny"], rs["nz"], rs["t_end"], rs["perturbation"]) == (20, 20, 20, 100.0, 1e-6)
    assert (rs["e"], rs["a_c"], rs["a_d"], rs["eps_c"], rs["eps_d"]) == (2.0, 1.5, 2.0, 1.0, 1.0)
    assert (rs["c"], rs["kappa1"], rs["s"], rs["slicing"]) == (0.0, 0.0, 0, "harmonic")
    assert any("t_end" in d for d in rs.deviations)
    rm = cli.build_config("rotating-masses-desk")
    assert (rm["lower"], rm["upper"]) == ((-40.0, -40.0, -4.0), (40.0, 40.0, 4.0))
    assert (rm["omega"], rm["A_L"], rm["A_R"], rm["sigma_L"], rm["t_end"]) == ((0, 0, 0.2), 5e-4, 5e-4, 1.0, 50.0)
    assert rm.system_kind == "foccz4" and rm.with_tau
    tov = cli.build_config("tov-ingest", overrides={"initial_data": "star.bin"})
    assert (tov["e"], tov["a_c"], tov["a_d"], tov["eps_c"], tov["kappa1"]) == (1.2, 0.1, 0.1, 5.0, 0.03)
    with pytest.raises(cli.ConfigError, match="initial_data"):
        cli.build_config("tov-ingest")
    with pytest.raises(cli.ConfigError, match="unknown preset"):
        cli.build_config("nope")


@pytest.mark.parametrize("preset", sorted(cli.PRESETS))
def test_glm_off_pins_cleaning_to_zero(preset):
    over = {"glm": False}
    if preset == "tov-ingest":
        over["initial_data"] = "star.bin"
    cfg = cli.build_config(preset, overrides=over)
    kind = cfg.system_kind
    if kind == "foccz4":
        p = cli._ccz4_params(cfg)
        assert all(getattr(p.effective_cleaning(f), name) == 0.0 for f in cli.FAMILIES
                   for name in ("a_c", "a_d", "eps_c", "eps_d"))
    elif kind.startswith("toy"):
        p = cli._toy_params(cfg)
        assert (p.a_c, p.a_d, p.a_b, p.eps_c, p.eps_d, p.eps_b) == (0.0,) * 6
    else:
        p = cli._induction_params(cfg)
        assert (p.a_d, p.eps_d) == (0.0, 0.0)


def test_toy_run_artifacts(tmp_path):
    out = tmp_path / "toy"
    code = cli.main(TOY_SMALL + ["--output", str(out), "--set", "snapshot_every=0.25", "--set", "cut_axes=x y"])
    assert code == cli.EXIT_OK
    rows = _rows(out / "constraints.csv")
    assert rows[0][:4] == ["t", "curlJ_L1", "curlJ_L2", "curlJ_Linf"]
    assert [float(r[0]) for r in rows[1:]] == [0.0, 0.5]
    meta = json.loads((out / "run.json").read_text())
    assert meta["status"] == "completed" and meta["preset"] == "toy-pure-curl-error"
    assert meta["final_time"] == 0.5 and meta["steps"] > 0 and meta["wall_time_s"] >= 0
    assert meta["config"]["nx"] == "16" and meta["seed"] == 0 and meta["version"]
    # snapshots at 0, 0.25, 0.5 plus the final state
    snaps = sorted(p.name for p in out.glob("snapshot_*.vtk"))
    assert snaps == ["snapshot_0000.vtk", "snapshot_0001.vtk", "snapshot_0002.vtk"]
    info = cli.read_vtk_header(out / "final.vtk")
    assert info["dimensions"] == (16, 16, 1)
    assert info["spacing"] == (0.125, 0.125, 1.0)
    assert info["origin"] == (-0.9375, -0.9375, 0.0)
    assert set(info["arrays"]) == {"J1", "J2"}
    assert all(len(a) == 256 for a in info["arrays"].values())
    cut = _rows(out / "cuts_y.csv")
    assert cut[0] == ["t", "y", "J2"]
    assert len(cut) == 1 + 3 * 16
    assert float(cut[1][1]) == -0.9375


def test_vtk_values_are_x_fastest(tmp_path):
    g = GridSpec((3, 2, 2), (0, 0, 0), (3, 2, 2))
    data = np.arange(12.0).reshape(1, 2, 2, 3).transpose(0, 3, 2, 1).copy()
    cli.write_vtk(tmp_path / "a.vtk", g, data, ["u"], ["all"], "x fastest")
    info = cli.read_vtk_header(tmp_path / "a.vtk")
    assert info["arrays"]["u"] == list(np.arange(12.0))
    text = (tmp_path / "a.vtk").read_text().splitlines()
    assert text[:4] == ["# vtk DataFile Version 3.0", "x fastest", "ASCII", "DATASET STRUCTURED_POINTS"]
    assert "POINT_DATA 12" in text and "FIELD FieldData 1" in text and "u 1 12 double" in text


def test_cuts_pass_through_centre(tmp_path):
    g = GridSpec((4, 4, 4), (0, 0, 0), (4, 4, 4))
    q = np.zeros((2, 4, 4, 4))
    q[1, :, 2, 2] = [1.0, 2.0, 3.0, 4.0]
    w = cli.CutWriter(tmp_path / "c.csv", "x", g, ["a", "b"], ["b"])
    w.write(0.5, q)
    w.close()
    rows = _rows(tmp_path / "c.csv")
    assert rows == [["t", "x", "b"]] + [["0.5", f"{i + 0.5}", f"{i + 1.0}"] for i in range(4)]


def test_default_output_root_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUTPUT_ROOT_ENV, str(tmp_path))
    assert cli.main(TOY_SMALL + ["--glm", "off"]) == cli.EXIT_OK
    assert (tmp_path / "toy-pure-curl-error-glm-off" / "constraints.csv").exists()


def test_repeat_runs_are_bit_identical(tmp_path):
    for name in ("a", "b"):
        assert cli.main(TOY_SMALL + ["--output", str(tmp_path / name)]) == cli.EXIT_OK
    for f in ("constraints.csv", "cuts_x.csv", "final.vtk"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_divergence_exit_code(tmp_path):
    out = tmp_path / "div"
    code = cli.main(["--preset", "induction-wave", "--resolution", "8", "--output", str(out),
                     "--set", "divergence_limit=0.5"])
    assert code == cli.EXIT_DIVERGED
    meta = json.loads((out / "run.json").read_text())
    assert meta["status"] == "diverged" and "exceeds" in meta["message"]
    assert "diverged" in (out / "final.vtk").read_text().splitlines()[1]
    assert len(_rows(out / "constraints.csv")) == 3


def test_unwritable_output(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert cli.main(TOY_SMALL + ["--output", str(blocker / "sub")]) == cli.EXIT_IO


def test_bad_threads():
    assert cli.main(TOY_SMALL + ["--threads", "0", "--print-config"]) == cli.EXIT_CONFIG


def test_external_file_ingestion(tmp_path):
    g = GridSpec.cube(8)
    path = tmp_path / "flat.bin"
    sc.save_initial_data(path, sc.minkowski_init(g))
    out = tmp_path / "tov"
    code = cli.main(["--preset", "tov-ingest", "--output", str(out), "--t-end", "0.05",
                     "--set", f"initial_data={path}", "--set", "nx=8", "--set", "ny=8", "--set", "nz=8",
                     "--set", "lower=0,0,0", "--set", "upper=1,1,1"])
    assert code == cli.EXIT_OK
    rows = _rows(out / "constraints.csv")
    assert rows[0][:7] == ["t", "H_L1", "H_L2", "H_Linf", "M_L1", "M_L2", "M_Linf"]
    assert all(float(x) < 1e-12 for x in rows[-1][1:])
    meta = json.loads((out / "run.json").read_text())
    assert meta["desk_scale_deviations"] == cli.PRESETS["tov-ingest"]["deviations"]


def test_external_file_rejected(tmp_path):
    path = tmp_path / "short.bin"
    path.write_bytes(sc.MAGIC + b"\0" * 4)
    code = cli.main(["--preset", "tov-ingest", "--output", str(tmp_path / "o"),
                     "--set", f"initial_data={path}", "--set", "nx=8", "--set", "ny=8", "--set", "nz=8"])
    assert code == cli.EXIT_CONFIG
    with pytest.raises(StateError):
        sc.load_initial_data(path, make_system("foccz4"), GridSpec.cube(8))


def _write_constraints(d, rows, header=("t", "H_L2", "A_L2")):
    d.mkdir()
    with open(d / "constraints.csv", "w") as fh:
        fh.write(",".join(header) + "\n")
        for r in rows:
            fh.write(",".join(repr(float(x)) for x in r) + "\n")


def test_compare_identical_runs(tmp_path, capsys):
    _write_constraints(tmp_path / "a", [(0, 0.0, 1.0), (1, 2.0, 3.0)])
    header, rows = cli.compare(tmp_path / "a", tmp_path / "a")
    assert header == ["t", "H_L2", "A_L2"]
    assert rows == [[0.0, 1.0, 1.0], [1.0, 1.0, 1.0]]
    assert cli.main(["compare", str(tmp_path / "a"), str(tmp_path / "a")]) == cli.EXIT_OK
    assert capsys.readouterr().out.splitlines() == ["t,H_L2,A_L2", "0,1,1", "1,1,1"]


def test_compare_interpolates_linearly(tmp_path):
    _write_constraints(tmp_path / "a", [(0.5, 1.0, 1.0), (2.0, 1.0, 1.0)])
    _write_constraints(tmp_path / "b", [(0.0, 2.0, 4.0), (1.0, 4.0, 8.0)])
    header, rows = cli.compare(tmp_path / "a", tmp_path / "b")
    # b at t = 0.5 is (3, 6); t = 2 lies outside b's range and is skipped
    assert rows == [[0.5, 1.0 / 3.0, 1.0 / 6.0]]


def test_compare_missing_dir(tmp_path, capsys):
    assert cli.main(["compare", str(tmp_path / "x"), str(tmp_path / "y")]) == cli.EXIT_IO
