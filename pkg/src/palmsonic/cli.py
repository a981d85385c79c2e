"""Batch command-line surface.

Verbs: synth, extract, combine, train, eval, predict. Every verb accepts
--config (key/value file), --seed (overrides the config seed), and --jobs
(worker processes for extract). Exit codes: 0 success, 1 total failure,
2 usage error, 3 partial failure (some clips failed, the rest completed).

A typical offline run:

    palmsonic synth --out data/audio --n-per-class 100 --seed 7
    palmsonic extract --audio-dir data/audio --image-dir data/images
    palmsonic combine --image-dir data/images
    palmsonic train --manifest data/audio/manifest.csv --image-dir data/images \
        --model-out model.psmd --log-out training_log.csv
    palmsonic eval --manifest data/audio/manifest.csv --image-dir data/images \
        --model model.psmd --report report.json
    palmsonic predict --model model.psmd data/audio/infested_0000.wav
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np
from PIL import Image

from . import classifiers, features, imaging
from .audio_io import load_wav, resample
from .config import PipelineConfig, load_config, with_seed
from .evaluation import confusion, load_manifest, metrics, split
from .synth import SynthSpec, generate_corpus

log = logging.getLogger("palmsonic")

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2
EXIT_PARTIAL = 3


def _ingest(path, cfg: PipelineConfig):
    clip = load_wav(path)
    return resample(clip, cfg.sample_rate_hz)


def _extract_one(args):
    """Worker for one WAV: render every configured feature image."""
    wav_path, cfg, image_dir = args
    clip = _ingest(wav_path, cfg)
    for kind in cfg.features:
        m = features.extract(kind, clip, cfg.extraction)
        img = imaging.render(m, cfg.colormap)
        imaging.save_png(img, Path(image_dir) / kind / f"{clip.source_id}.png")
    return clip.source_id


def _kind_marker(cfg, kind):
    return f"{features.params_digest(kind, cfg.extraction)};colormap={cfg.colormap};rate={cfg.sample_rate_hz}"


def cmd_extract(cfg: PipelineConfig, audio_dir, image_dir, jobs=1):
    audio_dir = Path(audio_dir)
    image_dir = Path(image_dir)
    wavs = sorted(audio_dir.glob("*.wav"))
    if not wavs:
        raise FileNotFoundError(f"no WAV files in {audio_dir}")

    fresh = set()
    for kind in cfg.features:
        kind_dir = image_dir / kind
        kind_dir.mkdir(parents=True, exist_ok=True)
        marker = kind_dir / ".digest"
        wanted = _kind_marker(cfg, kind)
        if not marker.exists() or marker.read_text() != wanted:
            fresh.add(kind)
            marker.write_text(wanted)

    todo = []
    for wav in wavs:
        outputs = [image_dir / kind / f"{wav.stem}.png" for kind in cfg.features]
        if not fresh and all(p.exists() for p in outputs):
            log.info("skip %s (digest match)", wav.stem)
            continue
        todo.append(wav)

    failures = {}
    work = [(str(w), cfg, str(image_dir)) for w in todo]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for wav, result in zip(todo, pool.map(_try_extract, work)):
                _note(result, wav, failures)
    else:
        for wav, item in zip(todo, work):
            _note(_try_extract(item), wav, failures)

    if failures:
        (image_dir / "failures.json").write_text(json.dumps(failures, indent=2))
    log.info("extracted %d clips, %d failures", len(todo) - len(failures), len(failures))
    if failures and len(failures) == len(todo):
        return EXIT_FAILURE
    return EXIT_PARTIAL if failures else EXIT_OK


def _try_extract(item):
    try:
        _extract_one(item)
        return None
    except Exception as exc:  # one bad file must not abort the batch
        return f"{type(exc).__name__}: {exc}"


def _note(result, wav, failures):
    if result is None:
        log.info("extracted %s", wav.stem)
    else:
        log.error("failed %s: %s", wav.stem, result)
        failures[wav.stem] = result


def cmd_combine(cfg: PipelineConfig, image_dir):
    image_dir = Path(image_dir)
    first_dir = image_dir / cfg.features[0]
    if not first_dir.is_dir():
        raise FileNotFoundError(f"no rendered images under {first_dir}; run extract first")
    out_dir = image_dir / "combined"
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / ".order").write_text(",".join(cfg.features))

    failures = {}
    stems = sorted(p.stem for p in first_dir.glob("*.png"))
    done = 0
    for stem in stems:
        try:
            parts = []
            for kind in cfg.features:
                path = image_dir / kind / f"{stem}.png"
                if not path.exists():
                    raise FileNotFoundError(f"missing constituent {kind} for {stem}")
                parts.append(imaging.FeatureImage(imaging.load_png(path), kind, stem))
            imaging.save_png(imaging.combine(parts), out_dir / f"{stem}.png")
            done += 1
        except Exception as exc:
            log.error("combine failed for %s: %s", stem, exc)
            failures[stem] = f"{type(exc).__name__}: {exc}"
    if failures:
        (image_dir / "combine_failures.json").write_text(json.dumps(failures, indent=2))
    log.info("combined %d clips, %d failures", done, len(failures))
    if failures and done == 0:
        return EXIT_FAILURE
    return EXIT_PARTIAL if failures else EXIT_OK


def _load_combined(image_dir, clip_ids, order):
    out = []
    for clip_id in clip_ids:
        path = Path(image_dir) / "combined" / f"{clip_id}.png"
        if not path.exists():
            raise FileNotFoundError(f"missing combined image for {clip_id}; run combine first")
        out.append(imaging.CombinedImage(imaging.load_png(path), order, clip_id))
    return out


def _vector_data(images, labels_by_id, cfg):
    out = []
    for img in images:
        fv = classifiers.vectorize(img, cfg.downsample)
        out.append(
            classifiers.FeatureVector(fv.values, fv.source, labels_by_id[img.clip_id])
        )
    return out


def _val_scores(model, inputs, y, cfg):
    """Validation accuracy and mean loss for the current model state."""
    preds = [classifiers.predict(model, i) for i in inputs]
    hits = np.array([p.label == ("infested" if t else "not_infested") for p, t in zip(preds, y)])
    scores = np.clip(np.array([p.score for p in preds]), 1e-12, 1 - 1e-12)
    if model.variant in ("logistic", "small_cnn"):
        loss = float(-np.mean(y * np.log(scores) + (1 - y) * np.log(1 - scores)))
    elif model.variant == "linear_svm":
        x = np.stack([v.values for v in inputs])
        loss = classifiers.hinge_loss_grad(
            model.params["weights"], model.params["bias"], x, 2.0 * y - 1.0, cfg.train.svm_l2
        )[0]
    else:
        loss = float(1.0 - hits.mean())  # zero-one loss for the tree models
    return float(hits.mean()), loss


def cmd_train(cfg: PipelineConfig, manifest_path, image_dir, model_out, log_out=None):
    manifest = load_manifest(manifest_path)
    labels = manifest.labels_by_id()
    parts = split(manifest, cfg.seed)
    order = cfg.features
    train_images = _load_combined(image_dir, parts.train, order)
    val_images = _load_combined(image_dir, parts.val, order)
    log.info(
        "training %s on %d clips (val %d, test %d held out)",
        cfg.model,
        len(parts.train),
        len(parts.val),
        len(parts.test),
    )

    rows = []
    y_val = np.array([1 if labels[c] == "infested" else 0 for c in parts.val])
    if cfg.model == "small_cnn":
        data = [(img, labels[img.clip_id]) for img in train_images]
        val_inputs = val_images

        def hook(epoch, state):
            acc, loss = _val_scores(state, val_inputs, y_val, cfg)
            rows.append((epoch, acc, loss))

        model = classifiers.train_small_cnn(data, cfg.train, epoch_hook=hook)
    else:
        train_vectors = _vector_data(train_images, labels, cfg)
        val_inputs = _vector_data(val_images, labels, cfg)
        trainers = {
            "logistic": classifiers.train_logistic,
            "linear_svm": classifiers.train_linear_svm,
            "decision_tree": classifiers.train_decision_tree,
            "random_forest": classifiers.train_random_forest,
        }
        if cfg.model in ("logistic", "linear_svm"):

            def hook(epoch, state):
                acc, loss = _val_scores(state, val_inputs, y_val, cfg)
                rows.append((epoch, acc, loss))

            model = trainers[cfg.model](train_vectors, cfg.train, epoch_hook=hook)
        else:
            model = trainers[cfg.model](train_vectors, cfg.train)

    if not rows:  # tree models train in one shot; log their single summary row
        acc, loss = _val_scores(model, val_inputs, y_val, cfg)
        rows.append((0, acc, loss))

    if log_out:
        with open(log_out, "w") as fh:
            fh.write("epoch,val_accuracy,val_loss\n")
            for epoch, acc, loss in rows:
                fh.write(f"{epoch},{acc:.6f},{loss:.6f}\n")
    classifiers.save_model(model, model_out)
    log.info("model written to %s (val accuracy %.3f)", model_out, rows[-1][1])
    return EXIT_OK


def cmd_eval(cfg: PipelineConfig, manifest_path, image_dir, model_path, report_out):
    manifest = load_manifest(manifest_path)
    labels = manifest.labels_by_id()
    parts = split(manifest, cfg.seed)
    model = classifiers.load_model(model_path)
    test_images = _load_combined(image_dir, parts.test, cfg.features)

    preds = []
    for img in test_images:
        if model.variant == "small_cnn":
            inp = img
        else:
            inp = classifiers.vectorize(img, cfg.downsample)
        try:
            preds.append(classifiers.predict(model, inp))
        except ValueError as exc:
            raise ValueError(
                f"{exc} (pipeline config digest {cfg.digest()}, "
                f"model train digest {model.train_config_digest})"
            ) from exc
    truth = [labels[img.clip_id] for img in test_images]
    cm = confusion(preds, truth)
    m = metrics(cm)

    report = {
        "split_sizes": {"train": len(parts.train), "val": len(parts.val), "test": len(parts.test)},
        "seed": cfg.seed,
        "confusion": {"tp": cm.tp, "fp": cm.fp, "tn": cm.tn, "fn": cm.fn},
        "metrics": {
            "accuracy": m.accuracy,
            "precision": m.precision,
            "recall": m.recall,
            "f1": m.f1,
        },
        "undefined_flags": {
            "precision_undefined": not m.precision_defined,
            "recall_undefined": not m.recall_defined,
        },
        "model_variant": model.variant,
        "config_digest": cfg.digest(),
        "extraction_digests": cfg.extraction_digests(),
        "train_config_digest": model.train_config_digest,
    }
    report_out = Path(report_out)
    report_out.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    _write_confusion_image(cm, report_out.with_suffix(".png"))
    log.info("report written to %s (accuracy %.3f)", report_out, m.accuracy)
    return EXIT_OK


def _write_confusion_image(cm, path):
    # 2x2 grid, rows = actual (infested, clean), cols = predicted
    cells = np.array([[cm.tp, cm.fn], [cm.fp, cm.tn]], dtype=np.float64)
    peak = cells.max() if cells.max() > 0 else 1.0
    shade = np.rint(255 * cells / peak).astype(np.uint8)
    pixels = np.kron(shade, np.ones((112, 112), dtype=np.uint8))
    Image.fromarray(np.repeat(pixels[:, :, None], 3, axis=2), "RGB").save(path, format="PNG")


def cmd_predict(cfg: PipelineConfig, model_path, wav_path):
    started = time.perf_counter()
    model = classifiers.load_model(model_path)
    clip = _ingest(wav_path, cfg)
    parts = [
        imaging.render(features.extract(kind, clip, cfg.extraction), cfg.colormap)
        for kind in cfg.features
    ]
    img = imaging.combine(parts)
    inp = img if model.variant == "small_cnn" else classifiers.vectorize(img, cfg.downsample)
    pred = classifiers.predict(model, inp)
    elapsed = time.perf_counter() - started
    print(f"label={pred.label} score={pred.score:.4f}")
    log.info("predicted %s in %.2fs", wav_path, elapsed)
    return EXIT_OK


def cmd_synth(args) -> int:
    spec = SynthSpec(
        n_infested=args.n_per_class,
        n_clean=args.n_per_class,
        clip_seconds=args.seconds,
        sample_rate_hz=args.rate,
        snr_db=args.snr_db,
        pulse_rate_range_hz=(args.pulse_rate_min, args.pulse_rate_max),
        seed=args.seed if args.seed is not None else 0,
    )
    manifest = generate_corpus(spec, args.out)
    counts = manifest.class_counts()
    log.info(
        "wrote %d clips to %s (%d infested / %d clean)",
        len(manifest.records),
        args.out,
        counts["infested"],
        counts["not_infested"],
    )
    print(str(Path(args.out) / "manifest.csv"))
    return EXIT_OK


def _resolve_config(args) -> PipelineConfig:
    cfg = load_config(args.config) if args.config else PipelineConfig()
    if getattr(args, "model", None):
        cfg = replace(cfg, model=args.model)
    if args.seed is not None:
        cfg = with_seed(cfg, args.seed)
    return cfg


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key/value config file")
    common.add_argument("--seed", type=int, default=None, help="override the config seed")
    common.add_argument("--jobs", type=int, default=1, help="worker processes where supported")

    parser = argparse.ArgumentParser(
        prog="palmsonic",
        description="Trunk-vibration pest detection: feature images and classifiers",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common], help="generate a labeled synthetic corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--n-per-class", type=int, default=100)
    p.add_argument("--seconds", type=float, default=20.0)
    p.add_argument("--rate", type=int, default=16000)
    p.add_argument("--snr-db", type=float, default=10.0)
    p.add_argument("--pulse-rate-min", type=float, default=5.0)
    p.add_argument("--pulse-rate-max", type=float, default=15.0)

    p = sub.add_parser("extract", parents=[common], help="render per-feature images for a WAV folder")
    p.add_argument("--audio-dir", required=True)
    p.add_argument("--image-dir", required=True)

    p = sub.add_parser("combine", parents=[common], help="fuse per-feature images into combined images")
    p.add_argument("--image-dir", required=True)

    p = sub.add_parser("train", parents=[common], help="train a classifier on combined images")
    p.add_argument("--manifest", required=True)
    p.add_argument("--image-dir", required=True)
    p.add_argument("--model-out", required=True)
    p.add_argument("--log-out", help="per-epoch validation log CSV")
    p.add_argument("--model", help="model variant override")

    p = sub.add_parser("eval", parents=[common], help="evaluate a model on the held-out test split")
    p.add_argument("--manifest", required=True)
    p.add_argument("--image-dir", required=True)
    p.add_argument("--model", dest="model_path", required=True)
    p.add_argument("--report", required=True)

    p = sub.add_parser("predict", parents=[common], help="classify a single WAV file")
    p.add_argument("--model", dest="model_path", required=True)
    p.add_argument("wav")

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s", stream=sys.stderr)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "synth":
            return cmd_synth(args)
        cfg = _resolve_config(args)
        if args.command == "extract":
            return cmd_extract(cfg, args.audio_dir, args.image_dir, jobs=args.jobs)
        if args.command == "combine":
            return cmd_combine(cfg, args.image_dir)
        if args.command == "train":
            return cmd_train(cfg, args.manifest, args.image_dir, args.model_out, args.log_out)
        if args.command == "eval":
            return cmd_eval(cfg, args.manifest, args.image_dir, args.model_path, args.report)
        if args.command == "predict":
            return cmd_predict(cfg, args.model_path, args.wav)
        parser.error(f"unknown command {args.command}")
    except Exception as exc:
        log.error("%s", exc)
        return EXIT_FAILURE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
