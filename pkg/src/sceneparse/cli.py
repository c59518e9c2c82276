"""Command-line entry point: ``sceneparse <command> ...``.

Stage commands (``codebook`` through ``train-fusion``) read and write the
artifact directory given by ``--out-dir``; ``train`` runs all of them.
Exit codes: 0 success, 2 invalid input, 3 missing artifact, 4 insufficient
data.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys

import numpy as np

from .context import FusionModel
from .exceptions import SceneParseError
from .features import N_FEATURES
from .imgseg import write_superpixel_map
from .io import read_label_grid, read_ppm, write_label_grid
from .pipeline import stages
from .pipeline.artifacts import ArtifactStore
from .pipeline.config import RunConfig
from .pipeline.dataset import DatasetManifest, default_palette, load_dataset, split_folds
from .pipeline.metrics import evaluate
from .pipeline.model import SceneParser
from .pipeline.render import write_overlay
from .pipeline.synth import synth_corpus

logger = logging.getLogger("sceneparse")


def _config(args, store) -> RunConfig:
    if args.config:
        cfg = RunConfig.from_file(args.config)
    elif os.path.exists(store.path("config.txt")):
        cfg = store.load_config()
    else:
        cfg = RunConfig()
    return cfg.replace(seed=args.seed, n_jobs=args.jobs)


def _stem(path):
    return os.path.splitext(os.path.basename(path))[0]


def _load(args):
    store = ArtifactStore(args.out_dir)
    cfg = _config(args, store)
    data = load_dataset(args.manifest)
    return store, cfg, data


def _stored_features(store, data):
    stems = data.manifest.stems()
    spmaps = [store.load_segments(s) for s in stems]
    pairs = [store.load_features(s) for s in stems]
    return spmaps, [p[0] for p in pairs], [p[1] for p in pairs]


# commands ---------------------------------------------------------------

def cmd_synth(args):
    manifest = synth_corpus(args.out_dir, args.n_images, seed=args.seed if args.seed is not None else 42,
                            size=(args.size, args.size), noise=args.noise)
    print(f"wrote {len(manifest.pairs)} scenes to {os.path.join(args.out_dir, 'manifest.json')}")


def cmd_segment(args):
    store = ArtifactStore(args.out_dir)
    cfg = _config(args, store)
    if args.input.endswith(".json"):
        data = load_dataset(args.input)
        for stem, sp in zip(data.manifest.stems(), stages.segment_images(data.images, cfg)):
            store.save_segments(stem, sp)
        print(f"segmented {len(data)} images into {store.path('segments')}")
        return
    image = read_ppm(args.input)
    spmap = stages.segment_images([image], cfg)[0]
    out = args.output or os.path.join(store.ensure("segments"), _stem(args.input) + ".txt")
    write_superpixel_map(out, spmap)
    print(f"{spmap.n_segments} superpixels -> {out}")


def cmd_codebook(args):
    store, cfg, data = _load(args)
    texton, descriptor = stages.train_codebooks(data.images, cfg)
    store.save_config(cfg, data.manifest.classes)
    store.save_codebooks(texton, descriptor)
    print(f"codebooks ({texton.size} textons, {descriptor.size} descriptor words) -> {store.root}")


def cmd_features(args):
    store, cfg, data = _load(args)
    codebooks = store.load_codebooks()
    stems = data.manifest.stems()
    for stem, image, labels in zip(stems, data.images, data.labels):
        if store.has_segments(stem):
            spmap = store.load_segments(stem)
        else:
            spmap = stages.segment_images([image], cfg)[0]
            store.save_segments(stem, spmap)
        feats = stages.extract_all([image], [spmap], codebooks, cfg)[0]
        sp_labels = stages.label_superpixels([spmap], [labels], data.manifest.n_classes)[0]
        store.save_features(stem, feats, sp_labels)
    print(f"features for {len(stems)} images -> {store.path('features')}")


def _classifier_slice(store, cfg, data):
    spmaps, feats, labels = _stored_features(store, data)
    clf_idx, fus_idx = stages.fusion_split(len(spmaps), cfg.fusion_fraction, cfg.seed)
    return spmaps, feats, labels, clf_idx, fus_idx


def cmd_select(args):
    store, cfg, data = _load(args)
    _, feats, labels, clf_idx, _ = _classifier_slice(store, cfg, data)
    X, y = stages.stack_labelled([feats[i] for i in clf_idx], [labels[i] for i in clf_idx])
    disc, selected = stages.select_features(X, y, data.manifest.n_classes, cfg)
    store.save_selection(disc, selected)
    print(f"selected features for {len(selected)} classes -> {store.path('selected_features.txt')}")


def cmd_train_clf(args):
    store, cfg, data = _load(args)
    _, feats, labels, clf_idx, _ = _classifier_slice(store, cfg, data)
    X, y = stages.stack_labelled([feats[i] for i in clf_idx], [labels[i] for i in clf_idx])
    _, selected = store.load_selection()
    clf = stages.train_classifiers(X, y, selected, data.manifest.n_classes, cfg)
    store.save_classifier(clf)
    print(f"trained {data.manifest.n_classes} classifiers -> {store.path('classifiers')}")


def cmd_prior(args):
    store, cfg, data = _load(args)
    spmaps, _, labels = _stored_features(store, data)
    gprior, lprior = stages.build_priors(spmaps, labels, data.manifest.n_classes, cfg)
    store.save_priors(gprior, lprior)
    print(f"priors -> {store.path('global_prior.txt')}, {store.path('local_prior.csv')}")


def cmd_train_fusion(args):
    store, cfg, data = _load(args)
    m = data.manifest.n_classes
    spmaps, feats, labels, clf_idx, fus_idx = _classifier_slice(store, cfg, data)
    clf = store.load_classifier(m)
    fit_priors = stages.build_priors([spmaps[i] for i in clf_idx], [labels[i] for i in clf_idx], m, cfg)
    model = stages.train_fusion([spmaps[i] for i in fus_idx], [feats[i] for i in fus_idx],
                                [labels[i] for i in fus_idx], clf, *fit_priors, m, cfg)
    store.save_fusion(model)
    print(f"fusion weights -> {store.path('fusion.csv')}")


def cmd_train(args):
    store, cfg, data = _load(args)
    parser = SceneParser.from_config(cfg, data.manifest.n_classes).fit(data.images, data.labels)
    parser.save(store.root, data.manifest.classes)
    print(f"trained on {len(data)} images; artifacts in {store.root}")


def _write_prediction(out_dir, stem, result):
    os.makedirs(out_dir, exist_ok=True)
    write_label_grid(os.path.join(out_dir, f"{stem}.labels.txt"), result.labels)
    write_label_grid(os.path.join(out_dir, f"{stem}.visual.txt"), result.visual_labels)
    write_superpixel_map(os.path.join(out_dir, f"{stem}.segments.txt"), result.spmap)
    m = result.fused.shape[1]
    np.savetxt(os.path.join(out_dir, f"{stem}.probs.csv"), result.fused, delimiter=",",
               fmt="%.17g", header=",".join(str(c) for c in range(m)), comments="")


def cmd_predict(args):
    parser = SceneParser.load(args.out_dir)
    if args.visual_only:
        parser.fusion_ = FusionModel.visual_only(parser.n_classes)
    out_dir = args.output or os.path.join(args.out_dir, "predictions")
    for path in args.images:
        result = parser.parse(read_ppm(path))
        _write_prediction(out_dir, _stem(path), result)
        print(f"{path}: {result.spmap.n_segments} superpixels -> {out_dir}")


def _report(metrics, classes, confusion_path):
    print(metrics.table(classes))
    np.savetxt(confusion_path, metrics.confusion, delimiter=",", fmt="%.6f",
               header=",".join(classes), comments="")
    print(f"confusion matrix -> {confusion_path}")


def cmd_evaluate(args):
    store = ArtifactStore(args.out_dir)
    cfg = _config(args, store)
    data = load_dataset(args.manifest)
    classes = data.manifest.classes
    m = data.manifest.n_classes
    store.ensure()
    if args.folds:
        fused_all, visual_all, truth_all = [], [], []
        for fold, (train, test) in enumerate(split_folds(len(data), args.folds, cfg.seed)):
            parser = SceneParser.from_config(cfg, m).fit([data.images[i] for i in train],
                                                         [data.labels[i] for i in train])
            results = [parser.parse(data.images[i]) for i in test]
            truth = [data.labels[i] for i in test]
            fm = evaluate([r.labels for r in results], truth, m)
            vm = evaluate([r.visual_labels for r in results], truth, m)
            print(f"fold {fold}: train {len(train)} test {len(test)} "
                  f"global {fm.global_accuracy:.4f} class {fm.class_accuracy:.4f} "
                  f"(visual only {vm.global_accuracy:.4f} / {vm.class_accuracy:.4f})")
            fused_all += [r.labels for r in results]
            visual_all += [r.visual_labels for r in results]
            truth_all += truth
        print("visual only:")
        print(evaluate(visual_all, truth_all, m).table(classes))
        print("fused:")
        _report(evaluate(fused_all, truth_all, m), classes, store.path("confusion.csv"))
        return
    if args.pred_dir:
        preds = [read_label_grid(os.path.join(args.pred_dir, f"{s}.labels.txt"))
                 for s in data.manifest.stems()]
    else:
        parser = SceneParser.load(args.out_dir)
        preds = parser.predict(data.images)
    _report(evaluate(preds, data.labels, m), classes, store.path("confusion.csv"))


def cmd_visualize(args):
    image = read_ppm(args.image)
    labels = read_label_grid(args.labels)
    if args.manifest:
        palette = DatasetManifest.load(args.manifest).palette
    else:
        palette = default_palette(max(int(labels.max()) + 1, 1))
    write_overlay(args.output, image, labels, palette, args.alpha)
    print(f"overlay -> {args.output}")


# parser -------------------------------------------------------------------

def _global_flags(parser, suppress):
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--config", default=default, help="flat 'key = value' run config file")
    parser.add_argument("--seed", type=int, default=default)
    parser.add_argument("--out-dir", default=argparse.SUPPRESS if suppress else "artifacts",
                        help="artifact directory (default: ./artifacts)")
    parser.add_argument("--jobs", type=int, default=default, help="parallel workers per stage")
    parser.add_argument("-v", "--verbose", action="store_true",
                        default=argparse.SUPPRESS if suppress else False)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sceneparse", description=__doc__.split("\n")[0])
    _global_flags(parser, suppress=False)
    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common, suppress=True)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        p = sub.add_parser(name, parents=[common], help=help_)
        p.set_defaults(func=fn)
        return p

    p = add("synth", cmd_synth, "generate a synthetic labelled corpus into --out-dir")
    p.add_argument("--n-images", type=int, default=80)
    p.add_argument("--size", type=int, default=96)
    p.add_argument("--noise", type=float, default=10.0)

    p = add("segment", cmd_segment, "oversegment a PPM image (or every image of a manifest)")
    p.add_argument("input")
    p.add_argument("-o", "--output", help="superpixel grid file (single image only)")

    for name, fn, help_ in [
        ("codebook", cmd_codebook, "learn texton and gradient-descriptor codebooks"),
        ("features", cmd_features, "extract superpixel features and labels"),
        ("select", cmd_select, "discretize features and run class-specific mRMR"),
        ("train-clf", cmd_train_clf, "train one-vs-all classifiers"),
        ("prior", cmd_prior, "build global and local location priors"),
        ("train-fusion", cmd_train_fusion, "fit the per-class fusion weights"),
        ("train", cmd_train, "run every training stage"),
    ]:
        add(name, fn, help_).add_argument("manifest")

    p = add("predict", cmd_predict, "label images with trained artifacts")
    p.add_argument("images", nargs="+")
    p.add_argument("-o", "--output", help="prediction directory (default: <out-dir>/predictions)")
    p.add_argument("--visual-only", action="store_true", help="skip contextual fusion")

    p = add("evaluate", cmd_evaluate, "score predictions against a labelled manifest")
    p.add_argument("manifest")
    p.add_argument("--pred-dir", help="directory of <stem>.labels.txt predictions")
    p.add_argument("--folds", type=int, help="run k-fold cross-validation instead")

    p = add("visualize", cmd_visualize, "blend a label map over its image")
    p.add_argument("image")
    p.add_argument("labels")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--manifest", help="take the class palette from this manifest")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except SceneParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
