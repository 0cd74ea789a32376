import json
import shutil

import numpy as np
import pytest

from scartrack.cli import main
from scartrack.raster import (
    GeoGrid,
    read_grid,
    read_mask,
    resample_bilinear,
    write_grid,
    write_mask,
)
from scartrack.synthetic import two_patch_refine_prompt, write_scenario
from scartrack.tracker import save_prompts


@pytest.fixture(scope="module")
def growing_scenario(tmp_path_factory):
    root = tmp_path_factory.mktemp("growing")
    summary = write_scenario(root, kind="growing", n_frames=8, size=64,
                             start_cells=60, end_cells=400)
    return root, summary


def run(*argv):
    return main([str(a) for a in argv])


class TestNdviCommand:
    def write_bands(self, tmp_path, red_vals, nir_vals):
        red = tmp_path / "red.asc"
        nir = tmp_path / "nir.asc"
        write_grid(GeoGrid.create(red_vals, cell_size=10.0), red)
        write_grid(GeoGrid.create(nir_vals, cell_size=10.0), nir)
        return red, nir

    def test_writes_ndvi_grid(self, tmp_path):
        red, nir = self.write_bands(tmp_path, [[1000.0]], [[4000.0]])
        out = tmp_path / "ndvi.asc"
        assert run("ndvi", "--red", red, "--nir", nir, "--out", out) == 0
        assert read_grid(out).values[0, 0] == pytest.approx(0.6)

    def test_shape_mismatch_exits_3(self, tmp_path, capsys):
        red, nir = self.write_bands(tmp_path, [[1000.0, 1000.0]], [[4000.0]])
        code = run("ndvi", "--red", red, "--nir", nir, "--out", tmp_path / "o.asc")
        assert code == 3
        assert "match" in capsys.readouterr().err

    def test_zero_scale_exits_2(self, tmp_path):
        red, nir = self.write_bands(tmp_path, [[1000.0]], [[4000.0]])
        code = run("ndvi", "--red", red, "--nir", nir, "--scale", "0",
                   "--out", tmp_path / "o.asc")
        assert code == 2


class TestResampleCommand:
    def test_matches_library_call_byte_identical(self, tmp_path):
        rng = np.random.default_rng(9)
        grid = GeoGrid.create(rng.uniform(-1, 1, (6, 6)), cell_size=10.0)
        src = tmp_path / "src.asc"
        write_grid(grid, src)
        out = tmp_path / "out.asc"
        assert run("resample", "--in", src, "--cell", "2.5", "--out", out) == 0
        lib = tmp_path / "lib.asc"
        write_grid(resample_bilinear(grid, 2.5), lib)
        assert out.read_bytes() == lib.read_bytes()

    def test_missing_input_exits_3(self, tmp_path):
        assert run("resample", "--in", tmp_path / "nope.asc", "--cell", "2",
                   "--out", tmp_path / "o.asc") == 3


class TestPipeline:
    def build(self, root, summary, out_dir):
        manifest = out_dir / "manifest.json"
        out_dir.mkdir(parents=True, exist_ok=True)
        code = run("build", "--frames", summary["frames_dir"],
                   "--dates", summary["dates_csv"], "--out", manifest)
        assert code == 0
        return manifest

    def test_full_pipeline_produces_expected_artifacts(self, growing_scenario, tmp_path):
        root, summary = growing_scenario
        manifest = self.build(root, summary, tmp_path / "video")

        track_dir = tmp_path / "out"
        assert run("track", "--manifest", manifest, "--prompts", summary["prompts"],
                   "--params", summary["params"], "--out", track_dir) == 0
        masks = sorted(track_dir.glob("mask_*.pgm"))
        assert len(masks) == summary["n_frames"]
        assert (track_dir / "session" / "record.json").exists()
        assert (track_dir / "session" / "events.jsonl").exists()

        report = tmp_path / "report.json"
        assert run("eval", "--pred", track_dir, "--truth", summary["truth_dir"],
                   "--manifest", manifest, "--out", report) == 0
        doc = json.loads(report.read_text())
        assert doc["mean_iou"] >= 0.95
        assert report.with_suffix(".csv").exists()

        area_csv = tmp_path / "area.csv"
        assert run("analyze", "area", "--masks", track_dir, "--manifest", manifest,
                   "--out", area_csv) == 0
        lines = area_csv.read_text().strip().splitlines()
        assert len(lines) == summary["n_frames"] + 1

        assert run("analyze", "spikes", "--series", area_csv,
                   "--out", tmp_path / "spikes.json") == 0
        assert run("analyze", "seasons", "--series", area_csv,
                   "--out-prefix", tmp_path / "season") == 0
        assert (tmp_path / "season_summer_autumn.csv").exists()
        assert (tmp_path / "season_winter_spring.csv").exists()

    def test_track_masks_match_library(self, growing_scenario, tmp_path):
        root, summary = growing_scenario
        manifest = self.build(root, summary, tmp_path / "video")
        track_dir = tmp_path / "out"
        assert run("track", "--manifest", manifest, "--prompts", summary["prompts"],
                   "--out", track_dir) == 0

        from scartrack.sequence import load_manifest
        from scartrack.tracker import TrackerParams, init_session, load_prompts, propagate

        seq = load_manifest(manifest)
        session = init_session(seq, TrackerParams(), load_prompts(summary["prompts"]))
        propagate(session, 1)
        from scartrack.raster import mask_to_bytes

        for k in range(seq.n):
            disk = (track_dir / f"mask_{k:04d}.pgm").read_bytes()
            assert disk == mask_to_bytes(session.masks[k])

    def test_two_runs_byte_identical(self, growing_scenario, tmp_path):
        root, summary = growing_scenario
        manifest = self.build(root, summary, tmp_path / "video")
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        for out in (out_a, out_b):
            assert run("track", "--manifest", manifest, "--prompts", summary["prompts"],
                       "--out", out) == 0
        files_a = sorted(p.name for p in out_a.glob("mask_*.pgm"))
        assert files_a == sorted(p.name for p in out_b.glob("mask_*.pgm"))
        for name in files_a:
            assert (out_a / name).read_bytes() == (out_b / name).read_bytes()

    def test_refine_run(self, tmp_path):
        summary = write_scenario(tmp_path / "scen", kind="two_patch", n_frames=10,
                                 size=64, appear_at=5)
        manifest = self.build(tmp_path / "scen", summary, tmp_path / "video")
        track_dir = tmp_path / "out"
        assert run("track", "--manifest", manifest, "--prompts", summary["prompts"],
                   "--out", track_dir) == 0

        report = tmp_path / "before.json"
        run("eval", "--pred", track_dir, "--truth", summary["truth_dir"], "--out", report)
        before = json.loads(report.read_text())["mean_iou"]

        refine_prompts = tmp_path / "extra.json"
        save_prompts([two_patch_refine_prompt(appear_at=5, size=64)], refine_prompts)
        assert run("refine", "--session", track_dir, "--prompts", refine_prompts) == 0

        run("eval", "--pred", track_dir, "--truth", summary["truth_dir"],
            "--out", tmp_path / "after.json")
        after = json.loads((tmp_path / "after.json").read_text())["mean_iou"]
        assert after > before
        assert after >= 0.95

    def test_eval_count_mismatch_exits_2(self, growing_scenario, tmp_path):
        root, summary = growing_scenario
        manifest = self.build(root, summary, tmp_path / "video")
        track_dir = tmp_path / "out"
        run("track", "--manifest", manifest, "--prompts", summary["prompts"],
            "--out", track_dir)
        short = tmp_path / "short"
        short.mkdir()
        for p in sorted(track_dir.glob("mask_*.pgm"))[:-1]:
            shutil.copy(p, short / p.name)
        assert run("eval", "--pred", short, "--truth", summary["truth_dir"]) == 2

    def test_unreachable_backend_exits_4(self, growing_scenario, tmp_path):
        root, summary = growing_scenario
        manifest = self.build(root, summary, tmp_path / "video")
        code = run("track", "--manifest", manifest, "--prompts", summary["prompts"],
                   "--backend-url", "http://127.0.0.1:9", "--out", tmp_path / "out")
        assert code == 4


class TestAnalyzeCommands:
    def test_diff_on_identical_masks(self, tmp_path, capsys):
        from scartrack.raster import BinaryMask

        mask = BinaryMask.from_bits(np.eye(5, dtype=bool), cell_size=2.0)
        path = tmp_path / "m.pgm"
        write_mask(mask, path)
        assert run("analyze", "diff", "--reference", path, "--current", path,
                   "--out-prefix", tmp_path / "d", "--json") == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc == {"new_m2": 0.0, "lost_m2": 0.0, "net_m2": 0.0}
        assert read_mask(tmp_path / "d_new.pgm").count == 0
        assert read_mask(tmp_path / "d_lost.pgm").count == 0

    def test_diff_counts_gain(self, tmp_path, capsys):
        from scartrack.raster import BinaryMask

        ref = BinaryMask.from_bits([[True, False]], cell_size=3.0)
        cur = BinaryMask.from_bits([[True, True]], cell_size=3.0)
        write_mask(ref, tmp_path / "ref.pgm")
        write_mask(cur, tmp_path / "cur.pgm")
        assert run("analyze", "diff", "--reference", tmp_path / "ref.pgm",
                   "--current", tmp_path / "cur.pgm") == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc == {"new_m2": 9.0, "lost_m2": 0.0, "net_m2": 9.0}

    def test_spikes_json_output(self, tmp_path, capsys):
        lines = ["frame_index,date,area_m2"]
        areas = [100, 104, 102, 101, 103, 500]
        for i, a in enumerate(areas):
            lines.append(f"{i},2018-0{i + 1}-01,{a}")
        series = tmp_path / "area.csv"
        series.write_text("\n".join(lines) + "\n")
        assert run("analyze", "spikes", "--series", series, "--json") == 0
        doc = json.loads(capsys.readouterr().out)
        assert len(doc) == 1 and doc[0]["frame_index"] == 5


class TestSynthCommand:
    def test_writes_scenario(self, tmp_path, capsys):
        assert run("synth", "--out", tmp_path / "scen", "--kind", "two_patch") == 0
        doc = json.loads(capsys.readouterr().out)
        assert (tmp_path / "scen" / "dates.csv").exists()
        assert doc["n_frames"] > 0


def test_console_entry_point():
    import subprocess

    proc = subprocess.run(["scartrack", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "track" in proc.stdout
