import json
import os
import sys

import numpy as np
import pytest

from sargram import cli

ECHO = f"{sys.executable} -m sargram.echo_matcher"

SMALL_RUN = [
    "--extent", "300",
    "--patch", "128x128",
    "--pyramid-levels", "2",
    "--pixel-stride", "2",
    "--seed", "11",
    "--dsm-params",  # filled per test with a params file
]

_HILL_PARAMS = {
    "base": 90.0,
    "hills": [
        {"amplitude": 6.0, "sigma": 150.0, "center": (-0.1, -0.1)},
        {"amplitude": 4.0, "sigma": 120.0, "center": (0.2, 0.2)},
    ],
}


def _small_args(tmp_path, out_name, extra=()):
    params = tmp_path / "hills.json"
    if not params.exists():
        params.write_text(json.dumps(_HILL_PARAMS))
    out = tmp_path / out_name
    return [
        "run-all", "--out", str(out),
        "--extent", "300", "--patch", "128x128", "--pyramid-levels", "2",
        "--pixel-stride", "2", "--seed", "11", "--dsm-params", str(params),
        *extra,
    ], out


@pytest.fixture(scope="module")
def small_run(tmp_path_factory):
    tmp_path = tmp_path_factory.mktemp("cli")
    argv, out = _small_args(tmp_path, "run1", extra=["--jobs", "2"])
    code = cli.main(argv)
    assert code == 0
    return tmp_path, out


class TestRunAll:
    def test_outputs_exist_and_exit_zero(self, small_run):
        _, out = small_run
        for rel in (
            "scene/ref.json", "scene/ref.srgr", "scene/dsm.json", "scene/layover.srgr",
            "tiles/plan.json", "flows/match_report.json",
            "clouds/triangulate_report.json", "map/map.json", "calibration.json",
            "eval/stats.json", "eval/table.txt", "eval/curve.csv",
            "error_map.png", "report.json",
        ):
            assert (out / rel).exists(), rel

    def test_stats_reasonable(self, small_run):
        _, out = small_run
        stats = json.loads((out / "eval" / "stats.json").read_text())
        assert abs(stats["mean_error_m"]) < 1.0
        assert stats["std_error_m"] < 2.0
        pct = [stats["pct_within"][k] for k in sorted(stats["pct_within"], key=float)]
        assert all(a <= b for a, b in zip(pct, pct[1:]))

    def test_report_structure(self, small_run):
        _, out = small_run
        report = json.loads((out / "report.json").read_text())
        assert report["seed"] == 11
        assert set(report["stages"]) == {
            "synth", "tile", "match", "triangulate", "fuse", "calibrate", "eval", "render"
        }
        assert all(v >= 0 for v in report["timings"].values())
        # paths inside the report are run-dir relative
        assert report["stages"]["synth"]["outputs"].startswith("./")

    def test_stats_curve_csv_monotone(self, small_run):
        _, out = small_run
        rows = (out / "eval" / "curve.csv").read_text().strip().splitlines()
        assert rows[0] == "threshold_m,pct_within"
        pct = [float(r.split(",")[1]) for r in rows[1:]]
        assert len(pct) == 5
        assert all(a <= b for a, b in zip(pct, pct[1:]))

    def test_reproducible_modulo_timings(self, small_run, tmp_path):
        first_tmp, out1 = small_run
        argv, out2 = _small_args(first_tmp, "run2", extra=["--jobs", "2"])
        assert cli.main(argv) == 0
        r1 = json.loads((out1 / "report.json").read_text())
        r2 = json.loads((out2 / "report.json").read_text())
        r1.pop("timings")
        r2.pop("timings")
        r1["config"].pop("out")
        r2["config"].pop("out")
        assert r1 == r2

    def test_stage_rerun_from_disk(self, small_run):
        """eval re-run standalone over the finished run reproduces its stats."""
        _, out = small_run
        before = (out / "eval" / "stats.json").read_bytes()
        code = cli.main([
            "eval", "--out", str(out), "--dsm", str(out / "scene" / "dsm.json"),
        ])
        assert code == 0
        assert (out / "eval" / "stats.json").read_bytes() == before


class TestExternalMatcher:
    def test_echo_matcher_end_to_end(self, tmp_path):
        argv, out = _small_args(
            tmp_path, "echo_run",
            extra=["--matcher", f"external:{ECHO}", "--extent", "250"],
        )
        code = cli.main(argv)
        assert code == 0
        report = json.loads((out / "report.json").read_text())
        assert report["stages"]["match"]["matched"] > 0

    def test_failing_matcher_exits_nonzero(self, tmp_path):
        params = tmp_path / "hills.json"
        params.write_text(json.dumps(_HILL_PARAMS))
        out = tmp_path / "fail_run"
        scene_args = [
            "synth", "--out", str(out), "--extent", "250",
            "--dsm-params", str(params), "--seed", "3",
        ]
        assert cli.main(scene_args) == 0
        assert cli.main([
            "tile", "--out", str(out),
            "--ref", str(out / "scene" / "ref.json"),
            "--src", str(out / "scene" / "src.json"),
            "--patch", "128x128",
        ]) == 0
        code = cli.main([
            "match", "--out", str(out), "--matcher", "external:false",
            "--timeout", "5",
        ])
        assert code == 4


class TestDatasetCommand:
    def test_dataset_builds_standard_layout(self, small_run):
        _, out = small_run
        code = cli.main([
            "dataset", "--out", str(out),
            "--ref", str(out / "scene" / "ref.json"),
            "--src", str(out / "scene" / "src.json"),
            "--dsm", str(out / "scene" / "dsm.json"),
            "--patch", "128x128", "--pair-name", "pair-a",
        ])
        assert code == 0
        split = json.loads((out / "dataset" / "split.json").read_text())
        ids = split["splits"]["train"]["pair-a"]
        assert len(ids) > 0
        patch_dir = out / "dataset" / "train" / "pair-a" / ids[0]
        for name in ("ref.srgr", "src.srgr", "D.srgr", "C.srgr", "elev.srgr", "meta.json"):
            assert (patch_dir / name).exists()


class TestConfigFile:
    def test_flags_override_config(self, tmp_path, capsys):
        config = tmp_path / "config.json"
        config.write_text(json.dumps({"extent": 250.0, "seed": 5}))
        params = tmp_path / "hills.json"
        params.write_text(json.dumps(_HILL_PARAMS))
        out = tmp_path / "cfg_run"
        code = cli.main([
            "synth", "--config", str(config), "--out", str(out),
            "--seed", "9", "--dsm-params", str(params),
        ])
        assert code == 0
        scene = json.loads((out / "scene" / "scene.json").read_text())
        assert scene["extent_m"] == 250.0, "config value used"
        assert scene["seed"] == 9, "flag overrides config"

    def test_bad_matcher_is_config_error(self, tmp_path):
        out = tmp_path / "x"
        os.makedirs(out / "tiles" / "pairs", exist_ok=True)
        code = cli.main(["match", "--out", str(out), "--matcher", "bogus"])
        assert code == 2
