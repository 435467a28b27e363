import json

import numpy as np
import pytest
from PIL import Image

from posesynth.exceptions import ConfigError
from posesynth.pipeline import (
    BONE_COLOR,
    EXIT_OK,
    JOINT_COLOR,
    MANIFEST_FILE,
    TRACE_FILE,
    RunConfig,
    RunManifest,
    cmd_evaluate,
    cmd_generate,
    cmd_make_desk_corpus,
    cmd_preview,
    draw_skeleton,
    split_by_sequence,
    strip_timing,
)
from posesynth.dataset import AnnotatedImage, MocapPose, load_annotations, save_annotations
from posesynth.pose import Pose2D, Pose3D


@pytest.fixture(scope="module")
def corpus_dir(tmp_path_factory):
    return cmd_make_desk_corpus(30, seed=3, out=tmp_path_factory.mktemp("desk"), mocap_size=120)


def _cfg(corpus_dir, out, **kw):
    base = dict(seed=7, annotations=corpus_dir, mocap=corpus_dir, out=out, views=2,
                subsample_mm=None, max_poses=5, K=3)
    base.update(kw)
    return RunConfig(**base)


@pytest.fixture(scope="module")
def run(corpus_dir, tmp_path_factory):
    out = tmp_path_factory.mktemp("gen")
    manifest, code = cmd_generate(_cfg(corpus_dir, out, trace=True))
    return out, manifest, code


# -- config --------------------------------------------------------------------


def test_config_requires_seed(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"K": 3}))
    with pytest.raises(ConfigError):
        RunConfig.load(p)


@pytest.mark.parametrize("bad", [{"seed": 1, "sigma": 0}, {"seed": 1, "views": 0}, {"seed": 1, "bogus": 2},
                                 {"seed": "x"}, {"seed": 1, "subsample_criterion": "median"},
                                 {"seed": 1, "test_fraction": 1.0}])
def test_config_rejects(bad):
    with pytest.raises(ConfigError):
        RunConfig.from_dict(bad)


def test_config_paths_relative_and_overrides(tmp_path):
    p = tmp_path / "sub" / "c.json"
    p.parent.mkdir()
    p.write_text(json.dumps({"seed": 1, "annotations": "corpus", "workers": 2}))
    cfg = RunConfig.load(p, seed=9, workers=None)
    assert cfg.annotations == p.parent / "corpus"
    assert cfg.seed == 9 and cfg.workers == 2


def test_config_unreadable(tmp_path):
    (tmp_path / "c.json").write_text("{not json")
    with pytest.raises(ConfigError):
        RunConfig.load(tmp_path / "c.json")


def test_echo_omits_execution_fields():
    echo = RunConfig(seed=1, workers=4).echo()
    assert "workers" not in echo and "out" not in echo and echo["seed"] == 1


def test_strip_timing():
    d = {"runtime": 1, "a": [{"timing_ms": 3, "b": 2}], "c": {"runtime": {}}}
    assert strip_timing(d) == {"a": [{"b": 2}], "c": {}}


# -- generate ------------------------------------------------------------------


def test_generate_file_counts(run):
    out, manifest, code = run
    assert code == EXIT_OK
    assert len(list((out / "images").glob("*.png"))) == 10
    assert len(list((out / "images").glob("*.json"))) == 10
    assert (out / MANIFEST_FILE).exists()
    assert len(manifest.records) == 10
    ids = [r.sample_id for r in manifest.records]
    assert ids == sorted(ids) and len(set(ids)) == 10


def test_sidecar_contents(run):
    out, manifest, _ = run
    rec = manifest.records[0]
    side = json.loads((out / rec.sidecar).read_text())
    assert side["sample_id"] == rec.sample_id
    assert np.array(side["pose3d_mm"]).shape == (13, 3)
    assert np.array(side["pose2d_px"]).shape == (13, 2)
    assert side["camera"] == rec.camera
    assert 0 <= side["class_id"] < 3
    assert set(side["provenance"]["image_ids"]) == set(rec.image_ids)
    assert len(side["provenance"]["matches"]) + len(side["provenance"]["skipped_joints"]) == 13


def test_trace_rows(run):
    out, manifest, _ = run
    rows = [json.loads(line) for line in (out / TRACE_FILE).read_text().splitlines()]
    assert {r["query_id"] for r in rows} == {r.sample_id for r in manifest.records}


def test_manifest_round_trip(run):
    out, manifest, _ = run
    back = RunManifest.load(out / MANIFEST_FILE)
    assert back.to_dict() == json.loads((out / MANIFEST_FILE).read_text())
    assert back.stats["n_emitted"] == 10


def test_rerun_identical(run, corpus_dir, tmp_path):
    out, manifest, _ = run
    again, _ = cmd_generate(_cfg(corpus_dir, tmp_path, trace=True, workers=3))
    assert strip_timing(again.to_dict()) == strip_timing(manifest.to_dict())
    for rec in manifest.records:
        assert (tmp_path / rec.file).read_bytes() == (out / rec.file).read_bytes()
        assert (tmp_path / rec.sidecar).read_bytes() == (out / rec.sidecar).read_bytes()


def test_debug_maps(corpus_dir, tmp_path):
    cmd_generate(_cfg(corpus_dir, tmp_path, max_poses=1, views=1, K=1, debug_maps=True))
    assert sorted(p.name for p in (tmp_path / "debug").iterdir()) == ["000000_field.png", "000000_index.png"]


def test_injected_queries_reproduce_sources(corpus_dir, tmp_path):
    items = load_annotations(corpus_dir)[:4]
    qdir = tmp_path / "queries"
    save_annotations(items, qdir)
    manifest, code = cmd_generate(_cfg(corpus_dir, tmp_path / "out", queries=qdir))
    assert code == EXIT_OK and len(manifest.records) == 4
    for rec, src in zip(manifest.records, items):
        got = np.asarray(Image.open(tmp_path / "out" / rec.file), dtype=int)
        assert np.abs(got - src.pixels.astype(int)).max() <= 1
        assert rec.pose_id == src.image_id and rec.class_id is None


def test_partial_run_exit_code(corpus_dir, tmp_path):
    items = load_annotations(corpus_dir)[:2]
    hidden = items[1].pose.visible.copy()
    hidden[:] = False
    items[1] = AnnotatedImage(items[1].image_id, items[1].pixels, Pose2D(items[1].pose.coords, hidden))
    save_annotations(items, tmp_path / "q")
    manifest, code = cmd_generate(_cfg(corpus_dir, tmp_path / "out", queries=tmp_path / "q"))
    assert code == 2
    assert len(manifest.records) == 1 and manifest.skipped[0]["sample_id"] == "000001"


def test_missing_corpus(tmp_path):
    with pytest.raises(ConfigError):
        cmd_generate(RunConfig(seed=1, out=tmp_path))
    with pytest.raises(ConfigError):
        cmd_generate(RunConfig(seed=1, annotations=tmp_path / "nope", out=tmp_path))


def test_k_too_large(corpus_dir, tmp_path):
    with pytest.raises(ConfigError):
        cmd_generate(_cfg(corpus_dir, tmp_path, K=50))


# -- evaluate ------------------------------------------------------------------


def _mp(seq, k):
    return MocapPose(f"{seq}{k}", Pose3D(np.zeros((13, 3))), seq)


def test_split_by_sequence():
    poses = [_mp(s, k) for s in "abcde" for k in range(2)]
    train, test = split_by_sequence(poses, 0.2)
    assert {p.sequence_id for p in test} == {"e"} and len(train) == 8
    assert split_by_sequence(poses, 0) == (poses, poses)
    train, test = split_by_sequence(poses, 0.99)
    assert {p.sequence_id for p in train} == {"a"}
    with pytest.raises(ConfigError):
        split_by_sequence(poses[:2], 0.5)


def test_evaluate_train_is_test(corpus_dir, tmp_path):
    cfg = _cfg(corpus_dir, tmp_path, max_poses=8, views=1, K=8, test_fraction=0.0, k_values=(2, 8), n_values=(1, 4))
    rep = cmd_evaluate(cfg)
    assert rep.err_2d_px == pytest.approx(0, abs=1e-9)
    assert rep.abs_3d_mm == pytest.approx(0, abs=1e-9)
    assert rep.aligned_3d_mm == pytest.approx(0, abs=1e-6)
    assert {p.name for p in tmp_path.iterdir()} == {"eval_report.json", "lower_bound.csv", "rerank.csv"}


def test_evaluate_rerun_identical(corpus_dir, tmp_path):
    cfg = _cfg(corpus_dir, tmp_path / "a", max_poses=None, K=4, k_values=(2, 4))
    cmd_evaluate(cfg)
    cmd_evaluate(_cfg(corpus_dir, tmp_path / "b", max_poses=None, K=4, k_values=(2, 4)))
    for name in ("eval_report.json", "lower_bound.csv", "rerank.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_evaluate_empty_test_set(corpus_dir, tmp_path):
    empty = tmp_path / "empty"
    empty.mkdir()
    (empty / "mocap.jsonl").write_text("")
    with pytest.raises(ConfigError):
        cmd_evaluate(_cfg(corpus_dir, tmp_path, test_mocap=empty))


# -- preview -------------------------------------------------------------------


def test_preview_single_tile(run, tmp_path):
    out, _, _ = run
    sheet = cmd_preview(out / MANIFEST_FILE, 1, tmp_path / "s.png")
    assert Image.open(sheet).size == (220, 220)


def test_preview_count_exceeds_records(run, tmp_path):
    out, _, _ = run
    sheet = Image.open(cmd_preview(out / MANIFEST_FILE, 99, tmp_path / "s.png"))
    assert sheet.size == (5 * 220, 2 * 220)


def test_preview_default_path(run):
    out, _, _ = run
    assert cmd_preview(out / MANIFEST_FILE, 3) == out / "contact_sheet.png"


def test_overlay_joints_on_coordinates(run, skel):
    out, manifest, _ = run
    side = json.loads((out / manifest.records[0].sidecar).read_text())
    pose = Pose2D(side["pose2d_px"], side["visible"])
    img = draw_skeleton(np.zeros((220, 220, 3), np.uint8), pose, skel)
    for (x, y), vis in zip(np.floor(pose.coords + 0.5).astype(int), pose.visible):
        if vis:
            assert tuple(img[y, x]) == JOINT_COLOR


def test_overlay_bone_drawn(chain3):
    pose = Pose2D([(20, 50), (120, 50), (120, 150)])
    img = draw_skeleton(np.zeros((220, 220, 3), np.uint8), pose, chain3)
    assert tuple(img[50, 70]) == BONE_COLOR and tuple(img[100, 120]) == BONE_COLOR
    assert tuple(img[100, 70]) == (0, 0, 0)
