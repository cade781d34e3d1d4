import json

import numpy as np
import pytest

from dispmix import (
    DisparityMap,
    EnsembleVolumes,
    PerturbSpec,
    ProbabilityVolume,
    SceneSpec,
    gen_scene,
    perturb_ensemble,
    read_pfm,
    read_volume,
    write_pfm,
    write_pgm,
    write_volume,
)
from dispmix.cli import main, parse_keyvalue_config

SPEC_TEXT = """\
# toy scene
height=8
width=8
d_range=64
seed=3
region_size=4
k_choices=1,2
gap_lo=8
gap_hi=20
members=3
mu_jitter=0.5
w_jitter=0.05
perturb_seed=11
"""


@pytest.fixture
def scene_files(tmp_path):
    spec_path = tmp_path / "scene.cfg"
    spec_path.write_text(SPEC_TEXT)
    paths = {
        "spec": spec_path,
        "truth": tmp_path / "truth.mpv",
        "labels": tmp_path / "labels.pfm",
        "ensemble": tmp_path / "ensemble.mpv",
    }
    code = main([
        "synth",
        "--spec", str(paths["spec"]),
        "--out-truth", str(paths["truth"]),
        "--out-labels", str(paths["labels"]),
        "--out-ensemble", str(paths["ensemble"]),
    ])
    assert code == 0
    return paths


class TestSynth:
    def test_outputs_exist_and_parse(self, scene_files):
        truth = read_volume(scene_files["truth"])
        ens = read_volume(scene_files["ensemble"])
        labels = read_pfm(scene_files["labels"])
        assert truth.m_count == 1 and ens.m_count == 3
        assert (labels.height, labels.width) == (8, 8)

    def test_matches_library_pipeline(self, scene_files, tmp_path):
        scene = gen_scene(SceneSpec(height=8, width=8, d_range=64, seed=3, region_size=4,
                                    k_choices=(1, 2), gap_range=(8.0, 20.0)))
        ens = perturb_ensemble(scene, PerturbSpec(members=3, mu_jitter=0.5, w_jitter=0.05, seed=11))
        from_cli = read_volume(scene_files["ensemble"])
        for a, b in zip(ens.members, from_cli.members):
            np.testing.assert_array_equal(a.data, b.data)

    def test_set_overrides_file(self, scene_files, tmp_path):
        out = tmp_path / "override.mpv"
        code = main([
            "synth",
            "--spec", str(scene_files["spec"]),
            "--set", "members=2",
            "--out-truth", str(tmp_path / "t2.mpv"),
            "--out-labels", str(tmp_path / "l2.pfm"),
            "--out-ensemble", str(out),
        ])
        assert code == 0
        assert read_volume(out).m_count == 2

    def test_unknown_key_exits_one(self, tmp_path, capsys):
        bad = tmp_path / "bad.cfg"
        bad.write_text("height=4\nwidth=4\nflux=9\n")
        code = main([
            "synth", "--spec", str(bad),
            "--out-truth", str(tmp_path / "t.mpv"),
            "--out-labels", str(tmp_path / "l.pfm"),
            "--out-ensemble", str(tmp_path / "e.mpv"),
        ])
        assert code == 1
        assert "flux" in capsys.readouterr().err

    def test_config_parser(self):
        entries = parse_keyvalue_config("a=1\n# comment\n\nb = two # trailing\n")
        assert entries == {"a": "1", "b": "two"}


class TestModelGt:
    def test_end_to_end_with_mask_and_json(self, scene_files, tmp_path):
        out = tmp_path / "gt.mpv"
        modes_json = tmp_path / "modes.json"
        code = main([
            "model-gt",
            "--ensemble", str(scene_files["ensemble"]),
            "--labels", str(scene_files["labels"]),
            "--out", str(out),
            "--modes-json", str(modes_json),
            "--workers", "1",
        ])
        assert code == 0
        gt = read_volume(out)
        assert gt.m_count == 1
        sums = gt.members[0].data.sum(axis=2, dtype=np.float64)
        np.testing.assert_allclose(sums, 1.0, atol=1e-6)
        mask = read_pfm(str(out) + ".mask.pfm")
        assert mask.values.min() == 1.0  # dense labels: everything supervised
        doc = json.loads(modes_json.read_text())
        assert doc["H"] == 8 and doc["W"] == 8 and doc["D"] == 64
        assert len(doc["pixels"]) == 64
        labels = read_pfm(scene_files["labels"])
        for px in doc["pixels"]:
            centers = [m["mu"] for m in px["modes"]]
            assert float(labels.values[px["y"], px["x"]]) in centers

    def test_worker_count_invariance(self, scene_files, tmp_path):
        outs = []
        for workers in ("1", "2"):
            out = tmp_path / f"gt_{workers}.mpv"
            code = main([
                "model-gt",
                "--ensemble", str(scene_files["ensemble"]),
                "--labels", str(scene_files["labels"]),
                "--out", str(out),
                "--workers", workers,
            ])
            assert code == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]

    def test_multiple_ensemble_files_concatenate(self, scene_files, tmp_path):
        ens = read_volume(scene_files["ensemble"])
        singles = []
        for i, member in enumerate(ens.members):
            p = tmp_path / f"m{i}.mpv"
            write_volume(p, member)
            singles.append(str(p))
        out_multi = tmp_path / "gt_multi.mpv"
        out_single = tmp_path / "gt_single.mpv"
        base = ["model-gt", "--labels", str(scene_files["labels"]), "--workers", "1"]
        assert main(base + ["--ensemble"] + singles + ["--out", str(out_multi)]) == 0
        assert main(base + ["--ensemble", str(scene_files["ensemble"]), "--out", str(out_single)]) == 0
        assert out_multi.read_bytes() == out_single.read_bytes()

    def test_missing_labels_flag_exits_one(self, scene_files, capsys):
        code = main(["model-gt", "--ensemble", str(scene_files["ensemble"]), "--out", "x.mpv"])
        assert code == 1
        err = capsys.readouterr().err
        assert "usage" in err

    def test_nonexistent_input_exits_two(self, tmp_path, scene_files):
        code = main([
            "model-gt",
            "--ensemble", str(tmp_path / "missing.mpv"),
            "--labels", str(scene_files["labels"]),
            "--out", str(tmp_path / "x.mpv"),
        ])
        assert code == 2

    def test_corrupt_magic_exits_two(self, tmp_path, scene_files):
        bad = tmp_path / "bad.mpv"
        blob = bytearray((tmp_path.parent / scene_files["ensemble"]).read_bytes())
        blob[0] = ord("X")
        bad.write_bytes(bytes(blob))
        code = main([
            "model-gt",
            "--ensemble", str(bad),
            "--labels", str(scene_files["labels"]),
            "--out", str(tmp_path / "x.mpv"),
        ])
        assert code == 2


class TestSeparateCommand:
    def test_fixture_modes_round_trip(self, tmp_path):
        probs = np.zeros((1, 2, 7), dtype=np.float32)
        probs[0, 0] = [0.05, 0.45, 0.05, 0.0, 0.05, 0.35, 0.05]
        probs[0, 1] = 0.0  # empty pixel
        vol_path = tmp_path / "v.mpv"
        write_volume(vol_path, ProbabilityVolume(probs))
        out = tmp_path / "modes.json"
        assert main(["separate", "--volume", str(vol_path), "--out", str(out)]) == 0
        doc = json.loads(out.read_text())
        first, second = doc["pixels"]
        assert [round(m["w"], 4) for m in first["modes"]] == [0.55, 0.45]
        assert [m["mu"] for m in first["modes"]] == [1.0, 5.0]
        assert second["modes"] == []
        # stable under a second run
        out2 = tmp_path / "modes2.json"
        assert main(["separate", "--volume", str(vol_path), "--out", str(out2)]) == 0
        assert out.read_text() == out2.read_text()

    def test_multi_member_volume_rejected(self, scene_files, tmp_path):
        code = main([
            "separate", "--volume", str(scene_files["ensemble"]), "--out", str(tmp_path / "m.json")
        ])
        assert code == 1


class TestInferAndEval:
    def test_one_hot_volume_constant_map(self, tmp_path):
        data = np.zeros((2, 3, 16), dtype=np.float32)
        data[:, :, 11] = 1.0
        vol_path = tmp_path / "v.mpv"
        write_volume(vol_path, ProbabilityVolume(data))
        out = tmp_path / "d.pfm"
        assert main(["infer", "--volume", str(vol_path), "--estimator", "dme", "--out", str(out)]) == 0
        np.testing.assert_array_equal(read_pfm(out).values, np.full((2, 3), 11.0, dtype=np.float32))

    def test_estimators_differ_on_bimodal(self, tmp_path):
        data = np.zeros((1, 1, 96), dtype=np.float32)
        data[0, 0, 20] = 0.6
        data[0, 0, 60] = 0.4
        vol_path = tmp_path / "v.mpv"
        write_volume(vol_path, ProbabilityVolume(data))
        outs = {}
        for est in ("dme", "softargmin"):
            out = tmp_path / f"{est}.pfm"
            assert main(["infer", "--volume", str(vol_path), "--estimator", est, "--out", str(out)]) == 0
            outs[est] = float(read_pfm(out).values[0, 0])
        assert outs["dme"] == 20.0
        assert abs(outs["softargmin"] - 36.0) <= 1e-4

    def test_bad_estimator_exits_one(self, tmp_path):
        assert main(["infer", "--volume", "v.mpv", "--estimator", "argmax", "--out", "d.pfm"]) == 1

    def test_eval_output_format(self, tmp_path, capsys):
        gt = DisparityMap(values=np.array([[1.0, 2.0, 3.0, 4.0, 10.0]], dtype=np.float32),
                          validity=np.ones((1, 5), dtype=bool))
        pred = DisparityMap(values=np.array([[1.0, 2.0, 3.0, 4.0, 20.0]], dtype=np.float32),
                            validity=np.ones((1, 5), dtype=bool))
        gt_path, pred_path = tmp_path / "gt.pfm", tmp_path / "pred.pfm"
        write_pfm(gt_path, gt)
        write_pfm(pred_path, pred)
        code = main(["eval", "--pred", str(pred_path), "--gt", str(gt_path),
                     "--threshold", "3", "--epe"])
        assert code == 0
        out = capsys.readouterr().out.splitlines()
        assert out[0] == "outliers_gt_3px=20.0000"
        assert out[1] == "epe=2.0000"

    def test_eval_identical_maps(self, tmp_path, capsys):
        gt = DisparityMap(values=np.full((2, 2), 5.0, dtype=np.float32),
                          validity=np.ones((2, 2), dtype=bool))
        path = tmp_path / "gt.pfm"
        write_pfm(path, gt)
        assert main(["eval", "--pred", str(path), "--gt", str(path), "--threshold", "3"]) == 0
        assert capsys.readouterr().out.splitlines()[0] == "outliers_gt_3px=0.0000"

    def test_eval_no_valid_pixels_exits_one(self, tmp_path):
        gt = DisparityMap(values=np.full((1, 1), -1.0, dtype=np.float32),
                          validity=np.zeros((1, 1), dtype=bool))
        path = tmp_path / "gt.pfm"
        write_pfm(path, gt)
        assert main(["eval", "--pred", str(path), "--gt", str(path), "--threshold", "3"]) == 1


class TestMatch:
    def test_match_pipeline(self, tmp_path):
        from dispmix import shifted_texture_pair

        left, right = shifted_texture_pair(16, 48, shift=4, seed=5)
        left_path, right_path = tmp_path / "l.pgm", tmp_path / "r.pgm"
        write_pgm(left_path, left, maxval=65535)
        write_pgm(right_path, right, maxval=65535)
        out = tmp_path / "cost.mpv"
        code = main(["match", "--left", str(left_path), "--right", str(right_path),
                     "--dmax", "8", "--window", "5", "--tau", "0.05", "--out", str(out)])
        assert code == 0
        vol = read_volume(out).members[0]
        assert vol.d_range == 8
        interior = vol.data[3:-3, 12:-3]
        hits = (np.argmax(interior, axis=2) == 4).mean()
        assert hits >= 0.9
