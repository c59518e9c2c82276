import json
import logging
import os

import numpy as np
import pytest

from sceneparse.cli import main
from sceneparse.context import FusionModel
from sceneparse.exceptions import InsufficientDataError, InvalidInputError, MissingArtifactError
from sceneparse.io import read_label_grid, read_ppm, write_label_grid, write_ppm
from sceneparse.pipeline import (
    Dataset,
    DatasetManifest,
    RunConfig,
    SceneParser,
    confusion_counts,
    evaluate,
    generate_corpus,
    load_dataset,
    render_overlay,
    split_folds,
    synth_corpus,
)
from sceneparse.pipeline.synth import Region, Row, SceneGrammar, default_grammar, generate_scene

ARTIFACT_FILES = ["config.txt", "classes.txt", "codebook_texton.csv", "codebook_descriptor.csv",
                  "thresholds.csv", "selected_features.txt", "global_prior.txt", "local_prior.csv",
                  "fusion.csv"] + [f"classifiers/class_{c:03d}.txt" for c in range(4)]

SMALL = RunConfig(texton_budget=3000, descriptor_budget=1000, n_selected=20, clf_max_iter=500)


def small_parser(n_classes=4, **kw):
    return SceneParser.from_config(SMALL.replace(**kw), n_classes)


@pytest.fixture(scope="module")
def corpus():
    return generate_corpus(12, seed=3, size=(64, 64))


@pytest.fixture(scope="module")
def fitted(corpus):
    return small_parser().fit(corpus.images, corpus.labels)


def write_pair(root, stem, image, labels):
    write_ppm(os.path.join(root, f"{stem}.ppm"), image)
    write_label_grid(os.path.join(root, f"{stem}.txt"), labels)
    return [f"{stem}.ppm", f"{stem}.txt"]


def write_manifest(root, classes, pairs):
    path = os.path.join(root, "manifest.json")
    with open(path, "w") as fh:
        json.dump({"classes": classes, "pairs": pairs}, fh)
    return path


# dataset -----------------------------------------------------------------

def test_load_two_image_manifest(tmp_path):
    rng = np.random.default_rng(0)
    pairs = [write_pair(tmp_path, f"im{i}", rng.integers(0, 256, (10, 12, 3)).astype(np.uint8),
                        rng.integers(-1, 3, (10, 12))) for i in range(2)]
    data = load_dataset(write_manifest(tmp_path, ["a", "b", "c"], pairs))
    assert len(data) == 2
    assert data.images[0].shape == (10, 12, 3) and data.labels[1].shape == (10, 12)


def test_label_dimension_mismatch_names_both_files(tmp_path):
    write_ppm(tmp_path / "im.ppm", np.zeros((10, 12, 3), np.uint8))
    write_label_grid(tmp_path / "im.txt", np.zeros((10, 10), np.int64))
    with pytest.raises(InvalidInputError) as err:
        load_dataset(write_manifest(tmp_path, ["a"], [["im.ppm", "im.txt"]]))
    assert "im.ppm" in str(err.value) and "im.txt" in str(err.value)


def test_label_out_of_range(tmp_path):
    labels = np.zeros((4, 4), np.int64)
    labels[2, 1] = 2
    pair = write_pair(tmp_path, "im", np.zeros((4, 4, 3), np.uint8), labels)
    with pytest.raises(InvalidInputError, match=r"im\.txt:3"):
        load_dataset(write_manifest(tmp_path, ["a", "b"], [pair]))


def test_missing_manifest(tmp_path):
    with pytest.raises(MissingArtifactError):
        load_dataset(tmp_path / "nope.json")


def test_folds_paper_split():
    folds = split_folds(715, 5, seed=42)
    assert [len(te) for _, te in folds] == [143] * 5
    assert [len(tr) for tr, _ in folds] == [572] * 5
    assert np.array_equal(np.sort(np.concatenate([te for _, te in folds])), np.arange(715))
    for tr, te in folds:
        assert not set(tr) & set(te)


def test_folds_small_and_deterministic():
    assert [len(te) for _, te in split_folds(10, 5)] == [2] * 5
    a, b = split_folds(37, 5, seed=1), split_folds(37, 5, seed=1)
    assert all(np.array_equal(x[1], y[1]) for x, y in zip(a, b))
    with pytest.raises(InvalidInputError):
        split_folds(4, 5)


# metrics -----------------------------------------------------------------

def test_metrics_perfect():
    rng = np.random.default_rng(0)
    truth = [rng.integers(0, 3, (8, 8)) for _ in range(3)]
    m = evaluate(truth, truth, 3)
    assert m.global_accuracy == m.class_accuracy == 1.0
    np.testing.assert_array_equal(m.confusion, np.eye(3))


def test_metrics_half_right():
    truth = np.array([[0, 0, 1, 1]])
    pred = np.array([[0, 0, 0, 0]])
    m = evaluate([pred], [truth], 2)
    assert m.global_accuracy == 0.5 and m.class_accuracy == 0.5


def test_metrics_class_accuracy_skips_absent_classes():
    m = evaluate([np.array([[0, 1, 1]])], [np.array([[0, 1, -1]])], 3)
    assert m.class_accuracy == 1.0
    assert np.isnan(m.confusion[2]).all()
    assert "n/a" in m.table(["a", "b", "c"])


def test_metrics_global_is_trace_over_total():
    rng = np.random.default_rng(1)
    truth = [rng.integers(-1, 4, (9, 7)) for _ in range(4)]
    pred = [rng.integers(0, 4, (9, 7)) for _ in range(4)]
    counts = confusion_counts(pred, truth, 4)
    direct = sum(((p == t) & (t >= 0)).sum() for p, t in zip(pred, truth)) / sum((t >= 0).sum() for t in truth)
    assert evaluate(pred, truth, 4).global_accuracy == pytest.approx(np.trace(counts) / counts.sum())
    assert evaluate(pred, truth, 4).global_accuracy == pytest.approx(direct)


def test_metrics_shape_mismatch():
    with pytest.raises(InvalidInputError):
        evaluate([np.zeros((2, 2), int)], [np.zeros((2, 3), int)], 2)


# overlay -----------------------------------------------------------------

def test_overlay_alpha_limits():
    rng = np.random.default_rng(0)
    img = rng.integers(0, 256, (6, 5, 3)).astype(np.uint8)
    labels = rng.integers(-1, 3, (6, 5))
    palette = [(255, 0, 0), (0, 255, 0), (0, 0, 255)]
    np.testing.assert_array_equal(render_overlay(img, labels, palette, 0.0), img)
    full = render_overlay(img, labels, palette, 1.0)
    keep = labels >= 0
    np.testing.assert_array_equal(full[keep], np.asarray(palette)[labels[keep]])
    np.testing.assert_array_equal(full[~keep], img[~keep])
    np.testing.assert_array_equal(render_overlay(img, labels, palette), render_overlay(img, labels, palette))


def test_overlay_short_palette():
    with pytest.raises(InvalidInputError):
        render_overlay(np.zeros((2, 2, 3)), np.array([[0, 1], [2, 0]]), [(0, 0, 0)] * 2)


# synthetic corpus --------------------------------------------------------

def test_synth_three_bands():
    grammar = SceneGrammar(
        layouts=((Row(1, (Region("a", 1, "a"),)), Row(1, (Region("b", 1, "b"),)),
                  Row(1, (Region("c", 1, "c"),))),),
        appearances={"a": ((255, 0, 0),), "b": ((0, 255, 0),), "c": ((0, 0, 255),)})
    _, labels = generate_scene(grammar, (30, 20), noise=0, rng=0)
    order = [int(labels[r, 0]) for r in range(30)]
    assert sorted(set(order)) == [0, 1, 2]
    assert order == sorted(order)


def test_synth_zero_area_region():
    with pytest.raises(InvalidInputError):
        SceneGrammar(layouts=((Row(1, (Region("a", 0, "a"),)),),), appearances={"a": ((0, 0, 0),)})


def test_synth_same_seed_same_corpus(tmp_path):
    a, b = generate_corpus(3, seed=9), generate_corpus(3, seed=9)
    for x, y in zip(a.images, b.images):
        np.testing.assert_array_equal(x, y)
    manifest = synth_corpus(tmp_path, 2, seed=9)
    data = load_dataset(tmp_path / "manifest.json")
    assert data.manifest.classes == default_grammar().classes == manifest.classes
    np.testing.assert_array_equal(data.images[1], a.images[1])
    np.testing.assert_array_equal(data.labels[0], a.labels[0])


def test_synth_ambiguous_pair_shares_colors():
    grammar = default_grammar()
    sea, floor = (grammar.classes.index(n) for n in ("sea", "floor"))
    data = generate_corpus(20, seed=1, size=(48, 48))
    pools = [set(), set()]
    for img, lab in zip(data.images, data.labels):
        for i, c in enumerate((sea, floor)):
            if (lab == c).any():
                pools[i].add(tuple(np.round(img[lab == c].mean(0) / 40).astype(int)))
    assert pools[0] & pools[1]


# config ------------------------------------------------------------------

def test_config_roundtrip(tmp_path):
    cfg = RunConfig(seed=7, prior_alpha=0.5, blocks_x=3)
    cfg.to_file(tmp_path / "c.txt")
    assert RunConfig.from_file(tmp_path / "c.txt") == cfg


def test_config_errors(tmp_path):
    (tmp_path / "bad.txt").write_text("# comment\nseed = 4\nbogus = 1\n")
    with pytest.raises(InvalidInputError, match=":3"):
        RunConfig.from_file(tmp_path / "bad.txt")


# end to end --------------------------------------------------------------

def test_predict_shapes_and_range(fitted, corpus):
    res = fitted.parse(corpus.images[0])
    assert res.labels.shape == corpus.labels[0].shape
    assert res.labels.min() >= 0 and res.labels.max() < 4
    np.testing.assert_allclose(res.global_.sum(1), 1.0)
    np.testing.assert_allclose(res.local.sum(1), 1.0)
    np.testing.assert_array_equal(res.labels, res.superpixel_labels[res.spmap.ids])


def test_identity_fusion_reproduces_visual_map(fitted, corpus):
    for img in corpus.images[:3]:
        res = fitted.parse(img, fusion=FusionModel.visual_only(4))
        np.testing.assert_array_equal(res.labels, res.visual_labels)


def test_estimator_interface(fitted, corpus):
    params = fitted.get_params()
    assert params["n_classes"] == 4 and params["seed"] == 42
    assert 0.0 <= fitted.score(corpus.images[:2], corpus.labels[:2]) <= 1.0
    fused, visual = fitted.evaluate(corpus.images[:2], corpus.labels[:2])
    assert fused.confusion_counts.sum() == visual.confusion_counts.sum()


def test_train_is_deterministic_and_persists_everything(fitted, corpus, tmp_path):
    fitted.save(tmp_path / "a", default_grammar().classes)
    small_parser().fit(corpus.images, corpus.labels).save(tmp_path / "b", default_grammar().classes)
    for name in ARTIFACT_FILES:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes(), name
    loaded = SceneParser.load(tmp_path / "a")
    for img in corpus.images[:2]:
        np.testing.assert_array_equal(loaded.parse(img).labels, fitted.parse(img).labels)


def test_absent_class_falls_back(corpus, caplog):
    # no image contains a fifth class
    with caplog.at_level(logging.WARNING):
        parser = small_parser(n_classes=5).fit(corpus.images[:6], corpus.labels[:6])
    assert "class 4" in caplog.text
    assert parser.classifier_.models_[4].constant == 0.0


@pytest.mark.filterwarnings("ignore::sklearn.exceptions.ConvergenceWarning")
def test_stage_errors_name_the_stage():
    img = np.zeros((16, 16, 3), np.uint8)
    with pytest.raises(InsufficientDataError, match="codebook"):
        small_parser().fit([img], [np.zeros((16, 16), np.int64)])


def test_fit_input_validation():
    with pytest.raises(InvalidInputError):
        small_parser().fit([], [])


def test_missing_artifact(tmp_path):
    with pytest.raises(MissingArtifactError, match="config.txt"):
        SceneParser.load(tmp_path)


# CLI ---------------------------------------------------------------------

@pytest.fixture(scope="module")
def cli_corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    synth_corpus(root / "data", 8, seed=5, size=(64, 64))
    cfg = root / "run.txt"
    SMALL.to_file(cfg)
    return root


def test_cli_stages_match_train(cli_corpus, capsys):
    manifest = str(cli_corpus / "data" / "manifest.json")
    cfg = str(cli_corpus / "run.txt")
    staged, full = str(cli_corpus / "staged"), str(cli_corpus / "full")
    for cmd in ("codebook", "features", "select", "train-clf", "prior", "train-fusion"):
        assert main([cmd, manifest, "--config", cfg, "--out-dir", staged]) == 0
    assert main(["--config", cfg, "--out-dir", full, "train", manifest]) == 0
    for name in ARTIFACT_FILES:
        a = open(os.path.join(staged, name), "rb").read()
        assert a == open(os.path.join(full, name), "rb").read(), name

    img = str(cli_corpus / "data" / "images" / "scene_0000.ppm")
    assert main(["predict", img, "--out-dir", full]) == 0
    pred = read_label_grid(os.path.join(full, "predictions", "scene_0000.labels.txt"))
    assert pred.shape == (64, 64)
    capsys.readouterr()
    assert main(["evaluate", manifest, "--out-dir", full]) == 0
    out = capsys.readouterr().out
    assert "global accuracy" in out and "class accuracy" in out and "floor" in out
    confusion = np.loadtxt(os.path.join(full, "confusion.csv"), delimiter=",", skiprows=1)
    assert confusion.shape == (4, 4)

    overlay = str(cli_corpus / "ov.ppm")
    assert main(["visualize", img, os.path.join(full, "predictions", "scene_0000.labels.txt"),
                 "-o", overlay, "--manifest", manifest]) == 0
    assert read_ppm(overlay).shape == (64, 64, 3)


def test_cli_segment_and_synth(tmp_path):
    assert main(["synth", "--out-dir", str(tmp_path / "d"), "--n-images", "2", "--size", "48"]) == 0
    img = str(tmp_path / "d" / "images" / "scene_0001.ppm")
    assert main(["segment", img, "-o", str(tmp_path / "s.txt")]) == 0
    assert (tmp_path / "s.txt").read_text().split()[:2] == ["48", "48"]


def test_cli_exit_codes(tmp_path, capsys):
    assert main(["evaluate", str(tmp_path / "none.json"), "--out-dir", str(tmp_path)]) == 3
    assert main(["predict", "x.ppm", "--out-dir", str(tmp_path / "empty")]) == 3
    (tmp_path / "bad.ppm").write_bytes(b"P3\n1 1\n255\n0 0 0\n")
    assert main(["segment", str(tmp_path / "bad.ppm"), "-o", str(tmp_path / "o.txt")]) == 2
    tiny = tmp_path / "tiny"
    synth_corpus(tiny, 1, size=(16, 16))
    assert main(["codebook", str(tiny / "manifest.json"), "--out-dir", str(tmp_path / "a")]) == 4
    assert "error:" in capsys.readouterr().err
