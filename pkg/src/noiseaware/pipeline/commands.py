"""Pipeline commands: each is a pure function of the config and its seeds.

Artifacts land under ``cfg.out``::

    corpus/    clean/ noisy/ manifest.csv manifest.json        (synth)
    models/    denoiser_gaussian denoiser_periodic noiseclf defectclf
    train/     histories, held-out scores and EvalReports   (train-*)
    run/       denoised/ per_image.csv aggregate.csv report.txt summary.json
    lift/      seed_<s>/ lift.csv lift.json lift.txt

Floats are written with ``repr`` so reruns can be diffed byte for byte.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from pathlib import Path

import numpy as np

from .. import metrics, models
from ..casting import DefectLabel
from ..filters import median_denoise
from ..imagecore import read_pgm, resize, write_pgm
from ..models import FREQUENCY, SPATIAL, TrainedModel
from ..noisegen import NoiseKind, add_noise
from .config import PipelineConfig
from .corpus import Manifest, derive_seed, noisy_castings, synthesize

log = logging.getLogger(__name__)

NOISECLF = "noiseclf"
DEFECTCLF = "defectclf"
DEFECT_NAMES = ["Defected", "OK"]
NOISE_NAMES = [k.label for k in NoiseKind]
AE_KINDS = (NoiseKind.GAUSSIAN, NoiseKind.PERIODIC)


def denoiser_name(kind: NoiseKind) -> str:
    return f"denoiser_{NoiseKind(kind).label}"


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _write_json(path: Path, obj) -> None:
    _write(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _csv(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def _load_model(cfg: PipelineConfig, name: str) -> TrainedModel:
    if not TrainedModel.exists(cfg.models_dir, name):
        raise FileNotFoundError(f"model {name!r} not found in {cfg.models_dir}; train it first")
    return TrainedModel.load(cfg.models_dir, name)


# routing -----------------------------------------------------------------------


class Router:
    """Detect the noise kind of each image and send it to the matching denoiser.

    Models are loaded on first use, so rule-based detection with median-only
    routing needs no trained models at all.
    """

    def __init__(self, cfg: PipelineConfig):
        self.cfg = cfg
        self._models: dict[str, TrainedModel] = {}

    def model(self, name: str) -> TrainedModel:
        if name not in self._models:
            self._models[name] = _load_model(self.cfg, name)
        return self._models[name]

    def detect(self, images) -> list[NoiseKind]:
        if self.cfg.detector == "rule":
            d = self.cfg.detect
            return [models.rule_based_noise_detect(im, d.tau_sp, d.exclusion_radius, d.threshold_k) for im in images]
        if not len(images):
            return []
        return [NoiseKind(int(k)) for k in models.predict(self.model(NOISECLF), images)]

    def route(self, kind: NoiseKind) -> str:
        method = self.cfg.method
        if method in ("median", "identity"):
            return method
        if kind is NoiseKind.SALT_PEPPER and method == "auto":
            return "median"
        # no autoencoder is trained for impulse noise; the Gaussian one stands in
        return denoiser_name(NoiseKind.PERIODIC if kind is NoiseKind.PERIODIC else NoiseKind.GAUSSIAN)

    def apply(self, route: str, images) -> list[np.ndarray]:
        if route == "identity":
            return [np.asarray(im, dtype=np.float64).copy() for im in images]
        if route == "median":
            return [median_denoise(im, self.cfg.median_passes, self.cfg.kernel) for im in images]
        model = self.model(route)
        size = model.network.input_shape[1]
        fitted = [im if im.shape == (size, size) else resize(im, size, size) for im in images]
        out = models.denoise_batch(model, fitted)
        return [o if o.shape == im.shape else resize(o, im.shape[1], im.shape[0]) for o, im in zip(out, images)]

    def process(self, images, kinds=None):
        """Returns ``(detected kinds, routes, outputs)`` in input order.

        ``kinds`` skips detection (a perfect detector).
        """
        kinds = list(kinds) if kinds is not None else self.detect(images)
        routes = [self.route(k) for k in kinds]
        outputs: list = [None] * len(images)
        for route in sorted(set(routes)):
            idx = [i for i, r in enumerate(routes) if r == route]
            for i, out in zip(idx, self.apply(route, [images[i] for i in idx])):
                outputs[i] = out
        return kinds, routes, outputs


# single-image commands -----------------------------------------------------------


def cmd_addnoise(src, dst, kind: NoiseKind, params, seed: int) -> None:
    write_pgm(dst, add_noise(read_pgm(src), kind, params, seed))


def cmd_detect(cfg: PipelineConfig, paths) -> list[tuple[str, NoiseKind]]:
    images = [read_pgm(p) for p in paths]
    return list(zip(map(str, paths), Router(cfg).detect(images)))


def cmd_denoise(cfg: PipelineConfig, src, dst) -> tuple[NoiseKind, str]:
    img = read_pgm(src)
    (kind,), (route,), (out,) = Router(cfg).process([img])
    write_pgm(dst, out)
    return kind, route


# corpus and training ----------------------------------------------------------------


def corpus_dir(cfg: PipelineConfig) -> Path:
    return cfg.out_dir / "corpus"


def cmd_synth(cfg: PipelineConfig) -> Manifest:
    manifest = synthesize(cfg, corpus_dir(cfg))
    log.info("wrote %d manifest entries to %s", len(manifest.entries), manifest.root)
    return manifest


def _score_rows(samples, outputs):
    rows = []
    for s, out in zip(samples, outputs):
        before, after = metrics.score(s.clean, s.noisy), metrics.score(s.clean, out)
        rows.append((s.index, s.kind.label, before.psnr_db, before.ssim, after.psnr_db, after.ssim))
    return rows


def cmd_train_denoiser(cfg: PipelineConfig, kind: NoiseKind) -> dict:
    """Train the autoencoder for one noise kind on its own seeded pair corpus.

    The corpus holds ``denoiser.n_pairs`` castings split train / held-out by
    ``denoiser.split``; held-out scores go to ``train/<name>_eval.csv``.
    """
    kind = NoiseKind(kind)
    if kind not in AE_KINDS:
        raise ValueError(f"autoencoders are trained for {[k.label for k in AE_KINDS]}, not {kind.label}")
    name = denoiser_name(kind)
    seed = derive_seed(cfg.seed, "denoiser", kind.label)
    samples = noisy_castings(cfg, cfg.denoiser.n_pairs, seed, ratios=cfg.denoiser.split, kinds=(kind,))
    train = [s for s in samples if s.split == "train"]
    held = [s for s in samples if s.split != "train"]
    model, history = models.train_denoiser(
        cfg.denoiser.model_config(cfg.size), [(s.noisy, s.clean) for s in train], derive_seed(seed, "init")
    )
    model.save(cfg.models_dir, name)
    out = cfg.out_dir / "train"
    _write(out / f"{name}_history.csv", _csv(("epoch", "train_mse"), enumerate(history, 1)))
    rows = _score_rows(held, models.denoise_batch(model, [s.noisy for s in held]))
    header = ("index", "kind", "psnr_noisy", "ssim_noisy", "psnr_denoised", "ssim_denoised")
    _write(out / f"{name}_eval.csv", _csv(header, rows))
    gains = [r[5] - r[3] for r in rows]
    summary = {
        "kind": kind.label,
        "train_pairs": len(train),
        "heldout_pairs": len(held),
        "final_train_mse": history[-1],
        "ssim_noisy_mean": float(np.mean([r[3] for r in rows])),
        "ssim_denoised_mean": float(np.mean([r[5] for r in rows])),
        "ssim_gain_mean": float(np.mean(gains)),
    }
    _write_json(out / f"{name}_summary.json", summary)
    return summary


def _write_report(out: Path, stem: str, report: models.EvalReport, title: str) -> None:
    _write(out / f"{stem}.json", report.to_json())
    _write(out / f"{stem}.txt", report.to_text(title))


def _history_csv(history) -> str:
    keys = ("epoch", "train_loss", "val_loss", "val_accuracy")
    return _csv(keys, ([h[k] for k in keys] for h in history))


def cmd_train_noiseclf(cfg: PipelineConfig) -> dict:
    """Train the frequency-domain noise classifier on its own balanced corpus.

    Also scores the rule-based detector on the same test split for comparison.
    """
    setup = cfg.noiseclf
    seed = derive_seed(cfg.seed, "noiseclf")
    samples = noisy_castings(cfg, setup.n_images, seed, ratios=setup.split, kinds=tuple(NoiseKind))
    split = {name: [(s.noisy, int(s.kind)) for s in samples if s.split == name] for name in ("train", "val", "test")}
    model, history = models.train_noise_classifier(
        setup.model_config(len(NoiseKind), FREQUENCY, cfg.size), split["train"], split["val"], derive_seed(seed, "init")
    )
    model.save(cfg.models_dir, NOISECLF)
    out = cfg.out_dir / "train"
    _write(out / "noiseclf_history.csv", _history_csv(history))
    report = models.evaluate_classifier(model, split["test"], NOISE_NAMES)
    _write_report(out, "noiseclf_eval", report, "[INFO] noise-type classifier")
    d = cfg.detect
    rule = [int(models.rule_based_noise_detect(im, d.tau_sp, d.exclusion_radius, d.threshold_k)) for im, _ in split["test"]]
    rule_report = models.evaluation_report([lab for _, lab in split["test"]], rule, NOISE_NAMES)
    _write_report(out, "noiseclf_rule_eval", rule_report, "[INFO] rule-based detector")
    summary = {
        "sizes": {k: len(v) for k, v in split.items()},
        "epochs_run": len(history),
        "learned_accuracy": report.accuracy,
        "rule_accuracy": rule_report.accuracy,
    }
    _write_json(out / "noiseclf_summary.json", summary)
    return summary


def read_manifest(cfg: PipelineConfig) -> Manifest:
    root = corpus_dir(cfg)
    if not (root / "manifest.csv").exists():
        raise FileNotFoundError(f"no manifest in {root}; run synth first")
    return Manifest.read(root)


def cmd_train_defectclf(cfg: PipelineConfig) -> dict:
    """Train the Defected / OK classifier on the clean images of the corpus."""
    manifest = read_manifest(cfg)
    split = {
        name: [(manifest.load(e), int(e.defect_label)) for e in manifest.select(name, noisy=False)]
        for name in ("train", "val", "test")
    }
    model, history = models.train_defect_classifier(
        cfg.defectclf.model_config(2, SPATIAL, cfg.size), split["train"], split["val"], derive_seed(cfg.seed, "defectclf")
    )
    model.save(cfg.models_dir, DEFECTCLF)
    out = cfg.out_dir / "train"
    _write(out / "defectclf_history.csv", _history_csv(history))
    report = models.evaluate_classifier(model, split["test"], DEFECT_NAMES)
    _write_report(out, "defectclf_eval", report, "[INFO] defect classifier, clean test images")
    summary = {"sizes": {k: len(v) for k, v in split.items()}, "epochs_run": len(history), "accuracy": report.accuracy}
    _write_json(out / "defectclf_summary.json", summary)
    return summary


# end-to-end ------------------------------------------------------------------------


RUN_HEADER = (
    "index", "path", "true_kind", "detected_kind", "route",
    "psnr_noisy", "ssim_noisy", "psnr_denoised", "ssim_denoised",
)


def cmd_run(cfg: PipelineConfig, split: str = "test", oracle_kinds: bool = False) -> dict:
    """Detect, route, denoise and score every noisy entry of one split.

    Args:
        oracle_kinds: route on the generating noise labels instead of a
            detector (isolates denoiser quality from detection errors).
    """
    manifest = read_manifest(cfg)
    entries = manifest.select(split, noisy=True)
    if not entries:
        raise ValueError(f"split {split!r} has no noisy entries")
    noisy = [manifest.load(e) for e in entries]
    clean = [manifest.load(e, clean=True) for e in entries]
    kinds, routes, outputs = Router(cfg).process(noisy, [e.noise_kind for e in entries] if oracle_kinds else None)
    out = cfg.out_dir / "run"
    (out / "denoised").mkdir(parents=True, exist_ok=True)
    rows, before, after = [], [], []
    for e, k, r, n, c, d in zip(entries, kinds, routes, noisy, clean, outputs):
        write_pgm(out / "denoised" / Path(e.path).name, d)
        sb, sa = metrics.score(c, n), metrics.score(c, d)
        before.append((e.noise_kind, sb))
        after.append((e.noise_kind, sa))
        rows.append((e.index, e.path, e.noise_kind.label, k.label, r, sb.psnr_db, sb.ssim, sa.psnr_db, sa.ssim))
    _write(out / "per_image.csv", _csv(RUN_HEADER, rows))
    agg_before, agg_after = metrics.aggregate(before), metrics.aggregate(after)
    _write(out / "aggregate.csv", agg_after.to_csv())
    _write(out / "aggregate_noisy.csv", agg_before.to_csv())
    text = "[noisy input]\n" + agg_before.to_text() + "\n[denoised]\n" + agg_after.to_text()
    _write(out / "report.txt", text)
    summary = {
        "images": len(rows),
        "detector": "oracle" if oracle_kinds else cfg.detector,
        "method": cfg.method,
        "detection_accuracy": float(np.mean([e.noise_kind == k for e, k in zip(entries, kinds)])),
        "routes": {r: routes.count(r) for r in sorted(set(routes))},
        "ssim_mean": {row.kind.label: row.ssim_mean / 100.0 for row in agg_after.rows},
        "ssim_noisy_mean": {row.kind.label: row.ssim_mean / 100.0 for row in agg_before.rows},
    }
    _write_json(out / "summary.json", summary)
    return summary


def cmd_lift(cfg: PipelineConfig) -> dict:
    """Defect-classification accuracy on noisy versus pipeline-denoised images.

    For each lift seed a fresh noisy casting test set is generated; the trained
    defect classifier scores it before and after detect-route-denoise. With
    ``method = identity`` the two image sets are identical and the delta is 0.
    """
    clf = _load_model(cfg, DEFECTCLF)
    router = Router(cfg)
    out = cfg.out_dir / "lift"
    rows, per_seed = [], []
    for s in cfg.lift_seeds:
        samples = noisy_castings(cfg, cfg.lift_images, derive_seed(s, "lift"), ratios=(0.0, 0.0, 1.0))
        labels = [int(x.label) for x in samples]
        noisy = [x.noisy for x in samples]
        _, routes, denoised = router.process(noisy)
        seed_dir = out / f"seed_{s}"
        reports, roc_rows = {}, []
        for stage, images in (("before", noisy), ("after", denoised)):
            proba = models.predict_proba(clf, images)
            rep = models.evaluation_report(labels, proba.argmax(axis=1), DEFECT_NAMES, int(DefectLabel.DEFECTED))
            reports[stage] = rep
            _write_report(seed_dir, stage, rep, f"[INFO] defect classifier, {stage} denoising (seed {s})")
            pos = proba[:, int(DefectLabel.DEFECTED)]
            roc_rows += [(stage, t, fpr, tpr) for t, fpr, tpr in models.roc_points(labels, pos, int(DefectLabel.DEFECTED))]
        _write(seed_dir / "roc.csv", _csv(("stage", "threshold", "fpr", "tpr"), roc_rows))
        delta = reports["after"].accuracy - reports["before"].accuracy
        rows.append((s, reports["before"].accuracy, reports["after"].accuracy, delta))
        per_seed.append({"seed": s, "accuracy_before": rows[-1][1], "accuracy_after": rows[-1][2], "delta": delta,
                         "routes": {r: routes.count(r) for r in sorted(set(routes))}})
        log.info("lift seed %d: %.4f -> %.4f", s, rows[-1][1], rows[-1][2])
    _write(out / "lift.csv", _csv(("seed", "accuracy_before", "accuracy_after", "delta"), rows))
    summary = {
        "method": cfg.method,
        "detector": cfg.detector,
        "images_per_seed": cfg.lift_images,
        "seeds": per_seed,
        "mean_delta": float(np.mean([r[3] for r in rows])),
    }
    _write_json(out / "lift.json", summary)
    _write(out / "lift.txt", lift_text(summary))
    return summary


def lift_text(summary: dict) -> str:
    lines = [f"[INFO] classification lift (method={summary['method']}, detector={summary['detector']})"]
    for row in summary["seeds"]:
        lines.append(
            f"seed {row['seed']}: Test Accuracy {100 * row['accuracy_before']:.3f} -> "
            f"{100 * row['accuracy_after']:.3f} (delta {100 * row['delta']:+.3f} pts)"
        )
    lines.append(f"mean delta: {100 * summary['mean_delta']:+.3f} pts")
    return "\n".join(lines) + "\n"


def cmd_report(cfg: PipelineConfig) -> str:
    """Collect the text reports of whatever stages have run under ``cfg.out``."""
    parts = []
    for path in (
        cfg.out_dir / "train" / "noiseclf_eval.txt",
        cfg.out_dir / "train" / "defectclf_eval.txt",
        cfg.out_dir / "run" / "report.txt",
    ):
        if path.exists():
            parts.append(path.read_text())
    lift = cfg.out_dir / "lift" / "lift.json"
    if lift.exists():
        parts.append(lift_text(json.loads(lift.read_text())))
    if not parts:
        raise FileNotFoundError(f"no reports found under {cfg.out_dir}")
    text = "\n".join(parts)
    _write(cfg.out_dir / "report.txt", text)
    return text
