"""Concrete networks, their training loops, and classification metrics.

* a skip-connected convolutional autoencoder for Gaussian and periodic noise,
* a small CNN classifier used both on spectral planes (noise type) and on
  raw images (defect / OK),
* a deterministic rule-based noise-type detector,
* :class:`EvalReport` with precision / recall / F1 / sensitivity / specificity.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import neural as nn
from .imagecore import resize
from .neural import LayerSpec, Network, ParamSet
from .noisegen import NoiseKind
from .spectral import dft2d, detect_spikes, fftshift, has_symmetric_pair, log_magnitude

log = logging.getLogger(__name__)

SPATIAL = "spatial"
FREQUENCY = "frequency"


@dataclass
class AutoencoderConfig:
    input_size: int = 64
    enc_channels: tuple[int, ...] = (16, 32, 64)
    skip_indices: tuple[int, ...] = (0, 1, 2)
    epochs: int = 20
    batch_size: int = 16
    lr: float = 2e-3

    def __post_init__(self):
        self.enc_channels = tuple(int(c) for c in self.enc_channels)
        self.skip_indices = tuple(int(i) for i in self.skip_indices)
        if not self.enc_channels:
            raise ValueError("need at least one encoder level")
        if self.input_size % (2 ** len(self.enc_channels)):
            raise ValueError(
                f"input_size {self.input_size} is not divisible by 2^{len(self.enc_channels)}"
            )
        if not set(self.skip_indices) <= set(range(len(self.enc_channels))):
            raise ValueError(f"skip_indices {self.skip_indices} are not encoder levels")


@dataclass
class ClassifierConfig:
    n_classes: int
    domain: str = SPATIAL
    input_size: int = 64
    conv_channels: tuple[int, ...] = (8, 16, 32)
    epochs: int = 30
    batch_size: int = 32
    lr: float = 2e-3
    patience: int = 5

    def __post_init__(self):
        self.conv_channels = tuple(int(c) for c in self.conv_channels)
        if self.n_classes < 2:
            raise ValueError("a classifier needs at least two classes")
        if self.domain not in (SPATIAL, FREQUENCY):
            raise ValueError(f"unknown domain {self.domain!r}")
        if self.input_size % (2 ** len(self.conv_channels)):
            raise ValueError("input_size must be divisible by 2^len(conv_channels)")


@dataclass
class TrainedModel:
    """Network + weights + enough metadata to reload and apply them."""

    network: Network
    params: ParamSet
    role: str
    config: dict = field(default_factory=dict)

    def save(self, directory, name: str) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        (directory / f"{name}.params").write_bytes(nn.dump_params(self.params))
        meta = {"role": self.role, "config": self.config, "network": self.network.describe()}
        (directory / f"{name}.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, directory, name: str) -> "TrainedModel":
        directory = Path(directory)
        meta = json.loads((directory / f"{name}.json").read_text())
        params = nn.load_params((directory / f"{name}.params").read_bytes())
        net = Network.from_description(meta["network"])
        net.check_params(params)
        return cls(net, params, meta["role"], meta["config"])

    @staticmethod
    def exists(directory, name: str) -> bool:
        return all(os.path.exists(Path(directory) / f"{name}.{ext}") for ext in ("json", "params"))


# autoencoder ------------------------------------------------------------------


def build_autoencoder(cfg: AutoencoderConfig) -> Network:
    """Encoder levels ``Conv-ReLU-MaxPool``, a ``Conv-ReLU`` bottleneck, and a
    mirrored decoder ``Upsample-[ConcatSkip]-Conv-ReLU`` ending in a one-channel
    ``Conv-Sigmoid`` head. Skips concatenate the encoder ReLU output of the
    same resolution.
    """
    layers: list[LayerSpec] = []
    taps = []
    c = 1
    for ch in cfg.enc_channels:
        layers += [LayerSpec(nn.CONV, c, ch), LayerSpec(nn.RELU)]
        taps.append(len(layers) - 1)
        layers.append(LayerSpec(nn.MAXPOOL))
        c = ch
    layers += [LayerSpec(nn.CONV, c, c), LayerSpec(nn.RELU)]
    for level in reversed(range(len(cfg.enc_channels))):
        layers.append(LayerSpec(nn.UPSAMPLE))
        if level in cfg.skip_indices:
            layers.append(LayerSpec(nn.CONCAT, c, c + cfg.enc_channels[level], skip_source=taps[level]))
            c += cfg.enc_channels[level]
        layers += [LayerSpec(nn.CONV, c, cfg.enc_channels[level]), LayerSpec(nn.RELU)]
        c = cfg.enc_channels[level]
    layers += [LayerSpec(nn.CONV, c, 1), LayerSpec(nn.SIGMOID)]
    return Network(layers, (1, cfg.input_size, cfg.input_size))


def _stack(images, size: int | None = None) -> np.ndarray:
    arr = np.stack([np.asarray(im, dtype=np.float32) for im in images])[:, None]
    if size is not None and arr.shape[2:] != (size, size):
        raise ValueError(f"images are {arr.shape[2]}x{arr.shape[3]}, model expects {size}x{size}")
    return arr


def train_denoiser(cfg: AutoencoderConfig, pairs, seed: int, progress=None):
    """Fit the autoencoder to map noisy images onto their clean counterparts.

    Args:
        pairs: sequence of ``(noisy, clean)`` square images of side
            ``cfg.input_size``.
        progress: optional callback ``(epoch, loss)``.

    Returns:
        ``(TrainedModel, history)`` where history holds the mean training MSE
        of every epoch.
    """
    pairs = list(pairs)
    if len(pairs) < 2:
        raise ValueError("need at least two training pairs")
    noisy = _stack([p[0] for p in pairs], cfg.input_size)
    clean = _stack([p[1] for p in pairs], cfg.input_size)
    net = build_autoencoder(cfg)
    params = net.init_params(seed)
    state = nn.AdamState.zeros_like(params)
    rng = np.random.Generator(np.random.PCG64(seed))
    history = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(pairs))
        total = 0.0
        for start in range(0, len(order), cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            out, cache = net.forward(params, noisy[idx])
            loss, grad = nn.mse_loss(out, clean[idx])
            grads, _ = net.backward(params, cache, grad)
            params, state = nn.adam_step(params, grads, state, lr=cfg.lr)
            total += loss * len(idx)
        history.append(total / len(pairs))
        log.info("denoiser epoch %d loss %.6f", epoch + 1, history[-1])
        if progress:
            progress(epoch + 1, history[-1])
    return TrainedModel(net, params, "denoiser", asdict(cfg)), history


def denoise(model: TrainedModel, img) -> np.ndarray:
    """Run a trained autoencoder on one image of the model's input size."""
    arr = np.asarray(img, dtype=np.float32)
    if arr.shape != model.network.input_shape[1:]:
        raise ValueError(f"image shape {arr.shape} does not match model input {model.network.input_shape[1:]}")
    out, _ = model.network.forward(model.params, arr[None, None])
    return np.clip(out[0, 0].astype(np.float64), 0.0, 1.0)


def denoise_batch(model: TrainedModel, images, batch_size: int = 32) -> list[np.ndarray]:
    if not len(images):
        return []
    x = _stack(images, model.network.input_shape[1])
    out = model.network.predict(model.params, x, batch_size)
    return [np.clip(o[0].astype(np.float64), 0.0, 1.0) for o in out]


# features and rule-based detection -----------------------------------------------


def spectral_input(img, size: int = 64) -> np.ndarray:
    """Classifier input plane: resize, 2D DFT, center, log-magnitude in [0, 1].

    The DC bin is zeroed before the log-magnitude stretch, so the plane does
    not depend on mean brightness and a flat image maps to all zeros.
    """
    spec = dft2d(resize(img, size, size))
    spec[0, 0] = 0.0
    return log_magnitude(fftshift(spec))


def spatial_input(img, size: int = 64) -> np.ndarray:
    """Classifier input plane: resize, then standardize to zero mean, unit std."""
    arr = resize(img, size, size)
    return (arr - arr.mean()) / (arr.std() + 1e-6)


def rule_based_noise_detect(img, tau_sp: float = 0.01, exclusion_radius: int = 8, threshold_k: float = 6.0) -> NoiseKind:
    """Deterministic baseline: saturated-pixel fraction, then spectral spikes."""
    arr = np.asarray(img, dtype=np.float64)
    extreme = np.count_nonzero((arr == 0.0) | (arr == 1.0)) / arr.size
    if extreme > tau_sp:
        return NoiseKind.SALT_PEPPER
    h, w = arr.shape
    plane = log_magnitude(fftshift(dft2d(arr)))
    spikes = detect_spikes(plane, exclusion_radius, threshold_k)
    if len(spikes) >= 2 and has_symmetric_pair(spikes, w, h):
        return NoiseKind.PERIODIC
    return NoiseKind.GAUSSIAN


# classifiers ---------------------------------------------------------------------


def build_classifier(cfg: ClassifierConfig) -> Network:
    """``[Conv-ReLU-MaxPool] x len(conv_channels)`` then GAP, Dense, Softmax."""
    layers: list[LayerSpec] = []
    c = 1
    for ch in cfg.conv_channels:
        layers += [LayerSpec(nn.CONV, c, ch), LayerSpec(nn.RELU), LayerSpec(nn.MAXPOOL)]
        c = ch
    layers += [LayerSpec(nn.GLOBAL_AVG), LayerSpec(nn.DENSE, c, cfg.n_classes), LayerSpec(nn.SOFTMAX)]
    return Network(layers, (1, cfg.input_size, cfg.input_size))


def classifier_features(cfg: ClassifierConfig | dict, images) -> np.ndarray:
    if isinstance(cfg, dict):
        domain, size = cfg["domain"], cfg["input_size"]
    else:
        domain, size = cfg.domain, cfg.input_size
    fn = spectral_input if domain == FREQUENCY else spatial_input
    return _stack([fn(im, size) for im in images])


def _accuracy_and_loss(net, params, x, y, batch_size=128):
    logits = net_logits(net, params, x, batch_size)
    loss, _ = nn.softmax_xent(logits, y)
    return float(np.mean(logits[:, :, 0, 0].argmax(axis=1) == y)), loss


def net_logits(net: Network, params: ParamSet, x, batch_size=128) -> np.ndarray:
    stop = len(net.layers) - 1
    return np.concatenate(
        [net.forward(params, x[s : s + batch_size], stop=stop)[0] for s in range(0, len(x), batch_size)]
    )


def train_classifier(cfg: ClassifierConfig, train, val, seed: int, role: str = "classifier"):
    """Softmax classifier with Adam and early stopping on validation accuracy.

    ``train`` and ``val`` are sequences of ``(image, label)``. Images go through
    the domain transform of ``cfg`` first. Training stops once neither
    validation accuracy nor validation loss has improved for ``cfg.patience``
    epochs. The returned parameters are those with the best validation
    accuracy (ties broken by lower validation loss).

    Returns:
        ``(TrainedModel, history)``; history entries are dicts with
        ``epoch``, ``train_loss``, ``val_loss``, ``val_accuracy``.
    """
    train, val = list(train), list(val)
    labels = np.array([int(lab) for _, lab in train])
    missing = sorted(set(range(cfg.n_classes)) - set(labels.tolist()))
    if missing:
        raise ValueError(f"classes {missing} are absent from the training split")
    if not val:
        raise ValueError("validation split is empty")
    x = classifier_features(cfg, [im for im, _ in train])
    xv = classifier_features(cfg, [im for im, _ in val])
    yv = np.array([int(lab) for _, lab in val])
    net = build_classifier(cfg)
    params = net.init_params(seed)
    state = nn.AdamState.zeros_like(params)
    rng = np.random.Generator(np.random.PCG64(seed))
    stop = len(net.layers) - 1
    best = (-1.0, np.inf)
    best_params = params
    lowest = np.inf
    stale = 0
    history = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(train))
        total = 0.0
        for start in range(0, len(order), cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            logits, cache = net.forward(params, x[idx], stop=stop)
            loss, grad = nn.softmax_xent(logits, labels[idx])
            grads, _ = net.backward(params, cache, grad)
            params, state = nn.adam_step(params, grads, state, lr=cfg.lr)
            total += loss * len(idx)
        acc, vloss = _accuracy_and_loss(net, params, xv, yv)
        history.append(
            {"epoch": epoch + 1, "train_loss": total / len(train), "val_loss": vloss, "val_accuracy": acc}
        )
        log.info("%s epoch %d val acc %.4f loss %.4f", role, epoch + 1, acc, vloss)
        progressed = vloss < lowest
        lowest = min(lowest, vloss)
        if acc > best[0] or (acc == best[0] and vloss < best[1]):
            best = (acc, vloss)
            best_params = params
            progressed = True
        stale = 0 if progressed else stale + 1
        if stale >= cfg.patience:
            break
    return TrainedModel(net, best_params, role, asdict(cfg)), history


def train_noise_classifier(cfg: ClassifierConfig, train, val, seed: int):
    """Three-way noise-type classifier on centered log-magnitude spectra."""
    if cfg.domain != FREQUENCY or cfg.n_classes != len(NoiseKind):
        raise ValueError("noise classifier must be a 3-class frequency-domain model")
    return train_classifier(cfg, train, val, seed, role="noise_classifier")


def train_defect_classifier(cfg: ClassifierConfig, train, val, seed: int):
    """Binary Defected/OK classifier on resized spatial images."""
    if cfg.domain != SPATIAL or cfg.n_classes != 2:
        raise ValueError("defect classifier must be a 2-class spatial-domain model")
    return train_classifier(cfg, train, val, seed, role="defect_classifier")


def predict_proba(model: TrainedModel, images, batch_size: int = 128) -> np.ndarray:
    x = classifier_features(model.config, images)
    return model.network.predict(model.params, x, batch_size)[:, :, 0, 0].astype(np.float64)


def predict(model: TrainedModel, images) -> np.ndarray:
    """Class indices; ``argmax`` resolves ties toward the lower index."""
    return predict_proba(model, images).argmax(axis=1)


# evaluation ----------------------------------------------------------------------


@dataclass
class EvalReport:
    """Classification metrics. Rows of ``confusion`` are truth, columns predictions.

    ``sensitivity`` is the recall of ``positive`` and ``specificity`` the
    fraction of non-positive samples not predicted as ``positive``.
    """

    class_names: list[str]
    confusion: list[list[int]]
    accuracy: float
    precision: list[float]
    recall: list[float]
    f1: list[float]
    support: list[int]
    sensitivity: float
    specificity: float
    positive: int = 0

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_text(self, title: str = "") -> str:
        lines = [title] if title else []
        lines.append(f" Test Accuracy: {100.0 * self.accuracy!r}")
        lines.append("")
        lines.append("[INFO] Confusion Matrix:")
        lines.append(str(np.array(self.confusion)))
        lines.append("")
        lines.append("[INFO] classification report:")
        width = max(len(n) for n in self.class_names + ["weighted avg"])
        lines.append(f"{'':>{width}}  precision    recall  f1-score   support")
        for i, name in enumerate(self.class_names):
            lines.append(
                f"{name:>{width}}  {self.precision[i]:9.2f} {self.recall[i]:9.2f}"
                f" {self.f1[i]:9.2f} {self.support[i]:9d}"
            )
        total = sum(self.support)
        lines.append(f"{'accuracy':>{width}}  {'':9} {'':9} {self.accuracy:9.2f} {total:9d}")
        macro = [float(np.mean(v)) for v in (self.precision, self.recall, self.f1)]
        wts = np.array(self.support, dtype=float) / max(total, 1)
        weighted = [float(np.dot(wts, v)) for v in (self.precision, self.recall, self.f1)]
        lines.append(f"{'macro avg':>{width}}  " + " ".join(f"{v:9.2f}" for v in macro) + f" {total:9d}")
        lines.append(f"{'weighted avg':>{width}}  " + " ".join(f"{v:9.2f}" for v in weighted) + f" {total:9d}")
        lines.append("")
        lines.append(f"Sensitivity: {self.sensitivity!r}")
        lines.append(f"Specificity: {self.specificity!r}")
        return "\n".join(lines) + "\n"


def _ratio(num: float, den: float) -> float:
    return float(num) / float(den) if den else 0.0


def evaluation_report(y_true, y_pred, class_names, positive: int = 0) -> EvalReport:
    """Build an :class:`EvalReport` from label vectors. Undefined ratios are 0."""
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.size == 0:
        raise ValueError("cannot evaluate an empty test set")
    k = len(class_names)
    cm = np.zeros((k, k), dtype=np.int64)
    np.add.at(cm, (y_true, y_pred), 1)
    tp = np.diag(cm)
    precision = [_ratio(tp[i], cm[:, i].sum()) for i in range(k)]
    recall = [_ratio(tp[i], cm[i].sum()) for i in range(k)]
    f1 = [_ratio(2 * p * r, p + r) for p, r in zip(precision, recall)]
    neg = [i for i in range(k) if i != positive]
    tn = cm[np.ix_(neg, neg)].sum()
    fp = cm[neg, positive].sum()
    return EvalReport(
        class_names=list(class_names),
        confusion=cm.tolist(),
        accuracy=_ratio(np.trace(cm), cm.sum()),
        precision=precision,
        recall=recall,
        f1=f1,
        support=cm.sum(axis=1).tolist(),
        sensitivity=recall[positive],
        specificity=_ratio(tn, tn + fp),
        positive=positive,
    )


def evaluate_classifier(model: TrainedModel, test, class_names, positive: int = 0) -> EvalReport:
    test = list(test)
    if not test:
        raise ValueError("cannot evaluate an empty test set")
    y_pred = predict(model, [im for im, _ in test])
    return evaluation_report([int(lab) for _, lab in test], y_pred, class_names, positive)


def roc_points(y_true, scores, positive: int = 0) -> list[tuple[float, float, float]]:
    """``(threshold, fpr, tpr)`` for every distinct score, highest threshold first."""
    y = np.asarray(y_true) == positive
    s = np.asarray(scores, dtype=np.float64)
    pts = [(float("inf"), 0.0, 0.0)]
    n_pos, n_neg = max(int(y.sum()), 1), max(int((~y).sum()), 1)
    for t in np.unique(s)[::-1]:
        pred = s >= t
        pts.append((float(t), float((pred & ~y).sum() / n_neg), float((pred & y).sum() / n_pos)))
    return pts
