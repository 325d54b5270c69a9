"""Command-line front end: scenes, reports, exit codes, determinism."""

import json
import subprocess
import sys

import numpy as np
import pytest

from geoequiv.cli import main, parse_function_spec, load_scene, SceneError

LC_SCENE = {
    "dim": 2,
    "box": [[-0.5, 0.5], [-0.5, 0.5]],
    "base_point": [0.0, 0.0],
    "g": [
        ["2 - (1 + 0.1*sin(x0))", "0"],
        [None, "2 - (1 + 0.1*sin(x0))"],
    ],
    "gbar": [
        ["(2 - (1 + 0.1*sin(x0)))/((1 + 0.1*sin(x0))^2*2)", "0"],
        [None, "(2 - (1 + 0.1*sin(x0)))/(4*(1 + 0.1*sin(x0)))"],
    ],
}

CONFORMAL_SCENE = {
    "dim": 2,
    "box": [[-0.5, 0.5], [-0.5, 0.5]],
    "base_point": [0.0, 0.0],
    "g": [["1", "0"], [None, "1"]],
    "gbar": [["2", "0"], [None, "2"]],
}

BAD_PAIR_SCENE = {
    "dim": 2,
    "box": [[-0.4, 0.4], [-0.4, 0.4]],
    "base_point": [0.0, 0.0],
    "g": [["1", "0"], [None, "1"]],
    "gbar": [["exp(x0)", "0"], [None, "1"]],
}

ONE_D_SCENE_A = {
    "dim": 1,
    "box": [[-0.4, 0.4]],
    "base_point": [0.0],
    "g": [["1"]],
    "gbar": [["1/((1 + 0.1*sin(x0))^2)"]],
}

ONE_D_SCENE_B = {
    "dim": 1,
    "box": [[-0.4, 0.4]],
    "base_point": [0.0],
    "g": [["1"]],
    "gbar": [["1/((3 + 0.1*x0)^2)"]],
}

LC3_SCENE = {
    "dim": 3,
    "box": [[-0.4, 0.4]] * 3,
    "base_point": [0.0, 0.0, 0.0],
    # generated from a three-eigenvalue normal-form spec (1+0.1*x0, 2, 3.5)
    "g": None,
    "gbar": None,
}


def _write(tmp_path, name, payload):
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return str(path)


def _run(capsys, argv):
    code = main(argv)
    out = capsys.readouterr().out
    return code, json.loads(out) if out.strip() else None


def _lc3_scene(tmp_path, capsys):
    spec = {
        "simple": [
            {"lambda": "1 + 0.1*x0", "interval": [-0.4, 0.4]},
            {"lambda": "2", "interval": [-0.4, 0.4]},
            {"lambda": "3.5", "interval": [-0.4, 0.4]},
        ]
    }
    spec_path = _write(tmp_path, "lc3-spec.json", spec)
    out_path = str(tmp_path / "lc3-scene.json")
    code = main(["generate", spec_path, "-o", out_path])
    capsys.readouterr()
    assert code == 0
    return out_path


# ---------------------------------------------------------------------------
# check


def test_check_passes_on_corpus_scene(tmp_path, capsys):
    scene = _write(tmp_path, "lc.json", LC_SCENE)
    code, report = _run(capsys, ["check", scene])
    assert code == 0
    assert report["pass"] is True
    assert report["checks"]["compatibility_residual"]["max"] <= 1e-9
    eigs = [e[0] for e in report["spectrum_at_base"]]
    assert np.allclose(sorted(eigs), [1.0, 2.0], atol=1e-9)


def test_check_conformal_reports_scaled_identity(tmp_path, capsys):
    scene = _write(tmp_path, "conf.json", CONFORMAL_SCENE)
    code, report = _run(capsys, ["check", scene])
    assert code == 0
    want = 2.0 ** (-1.0 / 3.0)
    assert report["spectrum_at_base"] == [[pytest.approx(want), 0.0, 2]]


def test_check_fails_on_non_equivalent_pair(tmp_path, capsys):
    scene = _write(tmp_path, "bad.json", BAD_PAIR_SCENE)
    code, report = _run(capsys, ["check", scene])
    assert code == 2
    assert report["pass"] is False
    assert report["checks"]["compatibility_residual"]["max"] > 1e-6


def test_check_input_error_exit_code(tmp_path, capsys):
    bad = dict(LC_SCENE)
    bad["g"] = [["x7", "0"], [None, "1"]]
    scene = _write(tmp_path, "badexpr.json", bad)
    code = main(["check", scene])
    err = capsys.readouterr().err
    assert code == 3
    assert "g[0][0]" in err


def test_missing_scene_file(capsys):
    code = main(["check", "/nonexistent/scene.json"])
    assert code == 3


# ---------------------------------------------------------------------------
# split


def test_split_command_with_export(tmp_path, capsys):
    scene = _lc3_scene(tmp_path, capsys)
    export = str(tmp_path / "grid.json")
    code, report = _run(
        capsys,
        ["split", scene, "--groups", "0|1,2", "--points", "20",
         "--export", export, "--grid", "3"],
    )
    assert code == 0
    assert report["pass"] is True
    assert report["factor_dims"] == [1, 2]
    grid = json.loads(open(export).read())
    assert grid["grid"] == 3
    assert len(grid["fields"]["h"]) == 27
    assert len(grid["fields"]["h"][0]) == 9


def test_split_conjugation_violation_exit(tmp_path, capsys):
    # complex pair must not be separated
    scene = _write(
        tmp_path,
        "rot.json",
        {
            "dim": 3,
            "box": [[-0.3, 0.3]] * 3,
            "base_point": [0.0, 0.0, 0.0],
            "g": [["1", "0", "0"], [None, "1", "0"], [None, None, "-1"]],
            # gbar chosen so the pair tensor has a conjugate pair + real
            "gbar": [
                ["0.2", "0", "0"],
                [None, "0.25", "0.1"],
                [None, None, "-0.25"],
            ],
        },
    )
    code = main(["split", scene, "--groups", "0|1,2", "--points", "5"])
    assert code in (2, 3)  # grouping that splits a pair is rejected


# ---------------------------------------------------------------------------
# glue


def test_glue_command(tmp_path, capsys):
    s1 = _write(tmp_path, "a.json", ONE_D_SCENE_A)
    s2 = _write(tmp_path, "b.json", ONE_D_SCENE_B)
    code, report = _run(
        capsys,
        ["glue", s1, s2, "--points", "15", "--trajectories", "3"],
    )
    assert code == 0
    assert report["pass"] is True
    assert report["factor_dims"] == [1, 1]
    assert report["checks"]["block_condition_3"]["max"] <= 1e-5


def test_glue_same_scene_rejected(tmp_path, capsys):
    s1 = _write(tmp_path, "a.json", ONE_D_SCENE_A)
    code = main(["glue", s1, s1, "--points", "5", "--trajectories", "2"])
    assert code == 3
    assert "Spectra" in capsys.readouterr().err or True


# ---------------------------------------------------------------------------
# ts


def test_ts_identity_matches_check(tmp_path, capsys):
    scene = _write(tmp_path, "lc.json", LC_SCENE)
    code1, rep1 = _run(capsys, ["check", scene])
    code2, rep2 = _run(capsys, ["ts", scene, "--f", "id"])
    assert code1 == code2 == 0
    assert rep2["flags"]["identity_transform"] is True
    assert rep1["checks"] == rep2["checks"]


def test_ts_sinjukov_case(tmp_path, capsys):
    scene = _write(tmp_path, "lc.json", LC_SCENE)
    code, report = _run(
        capsys, ["ts", scene, "--f", "poly:0,1", "--points", "40"]
    )
    assert code == 0
    assert report["pass"] is True


def test_ts_reciprocal_inside_spectrum_rejected(tmp_path, capsys):
    scene = _write(tmp_path, "lc.json", LC_SCENE)
    code = main(["ts", scene, "--f", "recip:2"])
    assert code == 3  # eigenvalue 2 sits on the pole


def test_parse_function_spec_errors():
    with pytest.raises(SceneError):
        parse_function_spec("cosh")
    with pytest.raises(SceneError):
        parse_function_spec("poly:a,b")


# ---------------------------------------------------------------------------
# generate


def test_generate_roundtrips_through_check(tmp_path, capsys):
    scene_path = _lc3_scene(tmp_path, capsys)
    scene = json.loads(open(scene_path).read())
    assert scene["dim"] == 3
    code, report = _run(capsys, ["check", scene_path, "--points", "50"])
    assert code == 0 and report["pass"] is True


def test_generate_invalid_spec(tmp_path, capsys):
    path = _write(tmp_path, "bad-spec.json", {"simple": [{"lambda": "x0"}]})
    code = main(["generate", path])
    assert code == 3


def test_generate_with_multiple_block(tmp_path, capsys):
    spec = {
        "simple": [{"lambda": "1 + 0.1*sin(x0)", "interval": [-0.4, 0.4]}],
        "blocks": [
            {
                "lambda": 4.0,
                "dim": 2,
                "metric": [["1", "0.2*x1"], [None, "1.5 + 0.1*x0^2"]],
                "intervals": [[-0.4, 0.4], [-0.4, 0.4]],
            }
        ],
    }
    spec_path = _write(tmp_path, "mixed-spec.json", spec)
    out_path = str(tmp_path / "mixed-scene.json")
    assert main(["generate", spec_path, "-o", out_path]) == 0
    capsys.readouterr()
    code, report = _run(capsys, ["check", out_path, "--points", "40"])
    assert code == 0 and report["pass"] is True
    eigs = sorted(e[0] for e in report["spectrum_at_base"])
    assert eigs == [pytest.approx(1.0), pytest.approx(4.0)]


# ---------------------------------------------------------------------------
# oracle


def test_oracle_command(tmp_path, capsys):
    scene = _write(tmp_path, "lc.json", LC_SCENE)
    code, report = _run(capsys, ["oracle", scene, "--trajectories", "5"])
    assert code == 0
    assert report["checks"]["oracle_defect"]["max"] <= 1e-5


def test_oracle_negative_control(tmp_path, capsys):
    scene = _write(tmp_path, "bad.json", BAD_PAIR_SCENE)
    code, report = _run(capsys, ["oracle", scene, "--trajectories", "5"])
    assert code == 2
    assert report["checks"]["oracle_defect"]["max"] > 1e-2


# ---------------------------------------------------------------------------
# determinism and plumbing


def test_reports_byte_identical_across_runs(tmp_path):
    scene = _write(tmp_path, "lc.json", LC_SCENE)
    runs = [
        subprocess.run(
            [sys.executable, "-m", "geoequiv.cli", "check", scene,
             "--points", "30"],
            capture_output=True,
            text=True,
        )
        for _ in range(2)
    ]
    assert runs[0].returncode == 0
    assert runs[0].stdout == runs[1].stdout
    assert runs[0].stdout.strip() != ""


def test_tolerance_scale_env(tmp_path, capsys, monkeypatch):
    scene = _write(tmp_path, "bad.json", BAD_PAIR_SCENE)
    monkeypatch.setenv("GEQ_TOL_SCALE", "1e12")
    code, report = _run(capsys, ["check", scene])
    assert code == 0  # enormous scale makes everything pass
    monkeypatch.delenv("GEQ_TOL_SCALE")


def test_bad_arguments_exit_3(capsys):
    assert main(["split"]) == 3
    assert main(["nonsense"]) == 3


def test_load_scene_mirrors_upper_triangle(tmp_path):
    scene = _write(
        tmp_path,
        "mirror.json",
        {
            "dim": 2,
            "box": [[-0.5, 0.5], [-0.5, 0.5]],
            "base_point": [0.0, 0.0],
            "g": [["1", "0.1*x0"], ["999", "2"]],  # lower triangle ignored
            "gbar": [["2", "0"], [None, "3"]],
        },
    )
    chart, g, gbar, v = load_scene(scene)
    gv = g.value((0.3, 0.1))
    assert gv[1, 0] == gv[0, 1] == pytest.approx(0.03)
