"""A small hand-differentiated CNN kernel in numpy.

Tensors are ``(n, c, h, w)`` arrays. A :class:`Network` is a sequence of
:class:`LayerSpec` entries evaluated in order; a ``ConcatSkip`` layer appends
(along channels) the output of an earlier layer to the running tensor, which
is how encoder/decoder skip connections are expressed.

Convolutions are 3x3, stride 1, zero "same" padding. Downsampling is 2x2 max
pooling, upsampling is nearest-neighbour x2. Computation runs in the dtype of
the parameters and input: float32 for training, float64 for gradient checks.
"""

from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass, field

import numpy as np

CONV = "Conv3x3"
RELU = "ReLU"
MAXPOOL = "MaxPool2"
UPSAMPLE = "UpsampleNearest2"
CONCAT = "ConcatSkip"
GLOBAL_AVG = "GlobalAvgPool"
DENSE = "Dense"
SIGMOID = "Sigmoid"
SOFTMAX = "Softmax"

LAYER_KINDS = (CONV, RELU, MAXPOOL, UPSAMPLE, CONCAT, GLOBAL_AVG, DENSE, SIGMOID, SOFTMAX)
PARAM_KINDS = (CONV, DENSE)


class ShapeError(ValueError):
    """Raised when a tensor does not fit the layer graph."""


class StaleCacheError(RuntimeError):
    """Raised when backward is given a cache from a different forward pass."""


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    in_channels: int | None = None
    out_channels: int | None = None
    skip_source: int | None = None

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "in_channels": self.in_channels,
            "out_channels": self.out_channels,
            "skip_source": self.skip_source,
        }


@dataclass
class ParamSet:
    """Weights keyed by layer index: ``{idx: {"W": array, "b": array}}``."""

    arrays: dict[int, dict[str, np.ndarray]]
    seed: int = 0

    def astype(self, dtype) -> "ParamSet":
        return ParamSet(
            {i: {k: v.astype(dtype) for k, v in d.items()} for i, d in self.arrays.items()},
            self.seed,
        )

    def copy(self) -> "ParamSet":
        return ParamSet(
            {i: {k: v.copy() for k, v in d.items()} for i, d in self.arrays.items()}, self.seed
        )

    def entries(self):
        for i in sorted(self.arrays):
            for name in sorted(self.arrays[i]):
                yield i, name, self.arrays[i][name]

    def count(self) -> int:
        return sum(a.size for _, _, a in self.entries())


@dataclass
class Cache:
    network: "Network"
    acts: list
    layer_caches: list
    n_layers: int
    token: tuple = field(default_factory=tuple)


class Network:
    """A layer sequence with fixed input shape ``(channels, height, width)``."""

    def __init__(self, layers, input_shape):
        self.layers = tuple(layers)
        self.input_shape = tuple(int(v) for v in input_shape)
        self.shapes = self._infer_shapes()

    @property
    def output_shape(self) -> tuple[int, int, int]:
        return self.shapes[-1]

    def _infer_shapes(self) -> list[tuple[int, int, int]]:
        shapes = []
        c, h, w = self.input_shape
        for i, spec in enumerate(self.layers):
            kind = spec.kind
            if kind not in LAYER_KINDS:
                raise ShapeError(f"layer {i}: unknown kind {kind!r}")
            if kind in (CONV, DENSE, CONCAT) and spec.in_channels is not None:
                expect = c * h * w if kind == DENSE else c
                if spec.in_channels != expect:
                    raise ShapeError(
                        f"layer {i} ({kind}): expects {spec.in_channels} inputs, receives {expect}"
                    )
            if kind == CONV:
                if not spec.out_channels or spec.out_channels < 1:
                    raise ShapeError(f"layer {i} (Conv3x3): out_channels required")
                c = spec.out_channels
            elif kind == MAXPOOL:
                if h % 2 or w % 2:
                    raise ShapeError(f"layer {i} (MaxPool2): odd spatial size {h}x{w}")
                h, w = h // 2, w // 2
            elif kind == UPSAMPLE:
                h, w = h * 2, w * 2
            elif kind == CONCAT:
                src = spec.skip_source
                if src is None or not 0 <= src < i:
                    raise ShapeError(f"layer {i} (ConcatSkip): skip_source must precede it")
                sc, sh, sw = shapes[src]
                if (sh, sw) != (h, w):
                    raise ShapeError(
                        f"layer {i} (ConcatSkip): source {src} is {sh}x{sw}, current is {h}x{w}"
                    )
                c = c + sc
                if spec.out_channels is not None and spec.out_channels != c:
                    raise ShapeError(f"layer {i} (ConcatSkip): out_channels should be {c}")
            elif kind == GLOBAL_AVG:
                h, w = 1, 1
            elif kind == DENSE:
                if not spec.out_channels or spec.out_channels < 1:
                    raise ShapeError(f"layer {i} (Dense): out_channels required")
                c, h, w = spec.out_channels, 1, 1
            shapes.append((c, h, w))
        if not shapes:
            raise ShapeError("network has no layers")
        return shapes

    def _in_shape(self, i: int) -> tuple[int, int, int]:
        return self.input_shape if i == 0 else self.shapes[i - 1]

    def init_params(self, seed: int, dtype=np.float32) -> ParamSet:
        """He-uniform weights (limit ``sqrt(6 / fan_in)``), zero biases."""
        rng = np.random.Generator(np.random.PCG64(seed))
        arrays = {}
        for i, spec in enumerate(self.layers):
            c, h, w = self._in_shape(i)
            if spec.kind == CONV:
                fan_in = c * 9
                shape = (spec.out_channels, c, 3, 3)
            elif spec.kind == DENSE:
                fan_in = c * h * w
                shape = (fan_in, spec.out_channels)
            else:
                continue
            limit = np.sqrt(6.0 / fan_in)
            arrays[i] = {
                "W": rng.uniform(-limit, limit, size=shape).astype(dtype),
                "b": np.zeros(spec.out_channels, dtype=dtype),
            }
        return ParamSet(arrays, seed)

    def check_params(self, params: ParamSet) -> None:
        for i, spec in enumerate(self.layers):
            if spec.kind not in PARAM_KINDS:
                continue
            if i not in params.arrays:
                raise ShapeError(f"layer {i} ({spec.kind}): parameters missing")
            c, h, w = self._in_shape(i)
            want = (spec.out_channels, c, 3, 3) if spec.kind == CONV else (c * h * w, spec.out_channels)
            got = params.arrays[i]["W"].shape
            if got != want:
                raise ShapeError(f"layer {i} ({spec.kind}): weight shape {got}, expected {want}")

    def forward(self, params: ParamSet, x, stop: int | None = None):
        """Run layers ``[0, stop)`` (all by default).

        Returns:
            ``(output, cache)``; the cache feeds :meth:`backward`.
        """
        x = np.asarray(x)
        if x.ndim != 4 or tuple(x.shape[1:]) != self.input_shape:
            raise ShapeError(f"input shape {x.shape} does not match (n,) + {self.input_shape}")
        n_layers = len(self.layers) if stop is None else stop
        acts = [x]
        caches = []
        for i in range(n_layers):
            spec = self.layers[i]
            p = params.arrays.get(i)
            try:
                y, lc = _FORWARD[spec.kind](acts[-1], p, spec, acts)
            except ShapeError:
                raise
            except (ValueError, KeyError, TypeError) as exc:
                raise ShapeError(f"layer {i} ({spec.kind}): {exc}") from exc
            acts.append(y)
            caches.append(lc)
        token = (id(params), n_layers, x.shape)
        return acts[-1], Cache(self, acts, caches, n_layers, token)

    def predict(self, params: ParamSet, x, batch_size: int = 64) -> np.ndarray:
        x = np.asarray(x)
        outs = [self.forward(params, x[s : s + batch_size])[0] for s in range(0, len(x), batch_size)]
        return np.concatenate(outs, axis=0)

    def backward(self, params: ParamSet, cache: Cache, grad_out):
        """Reverse-mode pass through the layers recorded in ``cache``.

        Returns:
            ``(param_grads, input_grad)`` with ``param_grads`` shaped like
            ``params.arrays``.
        """
        if cache.network is not self or cache.token[0] != id(params):
            raise StaleCacheError("cache was produced by a different network or parameter set")
        grad = np.asarray(grad_out)
        if grad.shape != cache.acts[-1].shape:
            raise StaleCacheError(
                f"grad_out shape {grad.shape} does not match cached output {cache.acts[-1].shape}"
            )
        pending = [None] * cache.n_layers
        grads: dict[int, dict[str, np.ndarray]] = {}
        for i in range(cache.n_layers - 1, -1, -1):
            if pending[i] is not None:
                grad = grad + pending[i]
            spec = self.layers[i]
            dx, pgrad, skip = _BACKWARD[spec.kind](
                grad, cache.acts[i], cache.acts[i + 1], params.arrays.get(i), cache.layer_caches[i], spec
            )
            if pgrad is not None:
                grads[i] = pgrad
            if skip is not None:
                src = spec.skip_source
                pending[src] = skip if pending[src] is None else pending[src] + skip
            grad = dx
        return grads, grad

    def describe(self) -> dict:
        return {
            "format": "noiseaware-network",
            "version": 1,
            "input_shape": list(self.input_shape),
            "layers": [s.to_dict() for s in self.layers],
        }

    @classmethod
    def from_description(cls, desc: dict) -> "Network":
        if desc.get("format") != "noiseaware-network":
            raise ValueError("not a network description")
        layers = [LayerSpec(**d) for d in desc["layers"]]
        return cls(layers, desc["input_shape"])


# layer kernels ------------------------------------------------------------


def _im2col(x_nhwc):
    """Gather zero-padded 3x3 neighbourhoods into ``(n*h*w, 9*c)`` rows ordered (dy, dx, c)."""
    n, h, w, c = x_nhwc.shape
    cols = np.zeros((n, h, w, 9, c), dtype=x_nhwc.dtype)
    for k in range(9):
        dy, dx = divmod(k, 3)
        dy -= 1
        dx -= 1
        cols[:, max(0, -dy) : h - max(0, dy), max(0, -dx) : w - max(0, dx), k, :] = x_nhwc[
            :, max(0, dy) : h - max(0, -dy), max(0, dx) : w - max(0, -dx), :
        ]
    return cols.reshape(n * h * w, 9 * c)


def _conv_forward(x, p, spec, acts):
    n, c, h, w = x.shape
    W, b = p["W"], p["b"]
    if W.shape[1] != c:
        raise ShapeError(f"conv expects {W.shape[1]} channels, got {c}")
    cols = _im2col(x.transpose(0, 2, 3, 1))
    wmat = W.transpose(2, 3, 1, 0).reshape(9 * c, -1)
    out = cols @ wmat + b
    y = np.ascontiguousarray(out.reshape(n, h, w, -1).transpose(0, 3, 1, 2))
    return y, cols


def _conv_backward(grad, x, y, p, cols, spec):
    n, c, h, w = x.shape
    W = p["W"]
    o = W.shape[0]
    g_nhwc = grad.transpose(0, 2, 3, 1)
    dy = g_nhwc.reshape(-1, o)
    dW = (dy.T @ cols).reshape(o, 3, 3, c).transpose(0, 3, 1, 2)
    db = dy.sum(axis=0)
    # input gradient = same-padded correlation of grad with the flipped, transposed kernel
    wflip = W[:, :, ::-1, ::-1].transpose(2, 3, 0, 1).reshape(9 * o, c)
    dx = (_im2col(g_nhwc) @ wflip).reshape(n, h, w, c).transpose(0, 3, 1, 2)
    return np.ascontiguousarray(dx), {"W": np.ascontiguousarray(dW), "b": db}, None


def _relu_forward(x, p, spec, acts):
    return np.maximum(x, 0), None


def _relu_backward(grad, x, y, p, lc, spec):
    return grad * (x > 0), None, None


def _sigmoid_forward(x, p, spec, acts):
    # exp of -|x| avoids overflow for large negative inputs
    e = np.exp(-np.abs(x))
    y = np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e)).astype(x.dtype)
    return y, None


def _sigmoid_backward(grad, x, y, p, lc, spec):
    return grad * y * (1 - y), None, None


def _softmax(x):
    z = x - x.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _softmax_forward(x, p, spec, acts):
    return _softmax(x), None


def _softmax_backward(grad, x, y, p, lc, spec):
    return y * (grad - (grad * y).sum(axis=1, keepdims=True)), None, None


def _maxpool_forward(x, p, spec, acts):
    n, c, h, w = x.shape
    if h % 2 or w % 2:
        raise ShapeError(f"max pool needs even spatial size, got {h}x{w}")
    blocks = x.reshape(n, c, h // 2, 2, w // 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, h // 2, w // 2, 4)
    idx = blocks.argmax(axis=-1)
    y = np.take_along_axis(blocks, idx[..., None], axis=-1)[..., 0]
    return y, idx


def _maxpool_backward(grad, x, y, p, idx, spec):
    n, c, h, w = x.shape
    blocks = np.zeros((n, c, h // 2, w // 2, 4), dtype=grad.dtype)
    np.put_along_axis(blocks, idx[..., None], grad[..., None], axis=-1)
    dx = blocks.reshape(n, c, h // 2, w // 2, 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, h, w)
    return dx, None, None


def _upsample_forward(x, p, spec, acts):
    return x.repeat(2, axis=2).repeat(2, axis=3), None


def _upsample_backward(grad, x, y, p, lc, spec):
    n, c, h, w = x.shape
    return grad.reshape(n, c, h, 2, w, 2).sum(axis=(3, 5)), None, None


def _concat_forward(x, p, spec, acts):
    skip = acts[spec.skip_source + 1]
    if skip.shape[0] != x.shape[0] or skip.shape[2:] != x.shape[2:]:
        raise ShapeError(f"skip tensor {skip.shape} does not match {x.shape}")
    return np.concatenate([x, skip], axis=1), x.shape[1]


def _concat_backward(grad, x, y, p, split, spec):
    return grad[:, :split], None, grad[:, split:]


def _gap_forward(x, p, spec, acts):
    return x.mean(axis=(2, 3), keepdims=True), None


def _gap_backward(grad, x, y, p, lc, spec):
    n, c, h, w = x.shape
    return np.broadcast_to(grad / (h * w), x.shape).copy(), None, None


def _dense_forward(x, p, spec, acts):
    n = x.shape[0]
    flat = x.reshape(n, -1)
    out = flat @ p["W"] + p["b"]
    return out.reshape(n, -1, 1, 1), flat


def _dense_backward(grad, x, y, p, flat, spec):
    g = grad.reshape(grad.shape[0], -1)
    dW = flat.T @ g
    db = g.sum(axis=0)
    dx = (g @ p["W"].T).reshape(x.shape)
    return dx, {"W": dW, "b": db}, None


_FORWARD = {
    CONV: _conv_forward,
    RELU: _relu_forward,
    SIGMOID: _sigmoid_forward,
    SOFTMAX: _softmax_forward,
    MAXPOOL: _maxpool_forward,
    UPSAMPLE: _upsample_forward,
    CONCAT: _concat_forward,
    GLOBAL_AVG: _gap_forward,
    DENSE: _dense_forward,
}

_BACKWARD = {
    CONV: _conv_backward,
    RELU: _relu_backward,
    SIGMOID: _sigmoid_backward,
    SOFTMAX: _softmax_backward,
    MAXPOOL: _maxpool_backward,
    UPSAMPLE: _upsample_backward,
    CONCAT: _concat_backward,
    GLOBAL_AVG: _gap_backward,
    DENSE: _dense_backward,
}


# losses ---------------------------------------------------------------------


def mse_loss(pred, target):
    """Mean squared error and its gradient ``2 (pred - target) / count``."""
    pred = np.asarray(pred)
    target = np.asarray(target)
    if pred.shape != target.shape:
        raise ShapeError(f"prediction {pred.shape} and target {target.shape} differ")
    diff = pred - target
    loss = float(np.mean(diff.astype(np.float64) ** 2))
    return loss, (2.0 / diff.size) * diff


def softmax_xent(logits, labels):
    """Mean cross-entropy of ``(n, c, 1, 1)`` logits against integer labels.

    Returns:
        ``(loss, grad)`` with ``grad = (softmax - onehot) / n``.
    """
    logits = np.asarray(logits)
    n, c = logits.shape[:2]
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if labels.shape[0] != n:
        raise ShapeError(f"{labels.shape[0]} labels for {n} samples")
    if labels.min(initial=0) < 0 or labels.max(initial=0) >= c:
        raise ValueError(f"labels must lie in [0, {c})")
    z = logits.reshape(n, c)
    z = z - z.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(z).sum(axis=1, keepdims=True))
    logp = z - log_norm
    loss = float(-np.mean(logp[np.arange(n), labels].astype(np.float64)))
    grad = np.exp(logp)
    grad[np.arange(n), labels] -= 1.0
    return loss, (grad / n).reshape(logits.shape).astype(logits.dtype)


# optimizer ------------------------------------------------------------------


@dataclass
class AdamState:
    m: dict
    v: dict
    t: int = 0

    @classmethod
    def zeros_like(cls, params: ParamSet) -> "AdamState":
        m = {i: {k: np.zeros_like(a) for k, a in d.items()} for i, d in params.arrays.items()}
        v = {i: {k: np.zeros_like(a) for k, a in d.items()} for i, d in params.arrays.items()}
        return cls(m, v, 0)


def adam_step(params: ParamSet, grads, state: AdamState, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
    """One bias-corrected Adam update.

    Layers absent from ``grads`` are treated as having zero gradient.

    Raises:
        FloatingPointError: if any gradient is NaN or infinite.
    """
    for i, d in grads.items():
        for k, g in d.items():
            if not np.all(np.isfinite(g)):
                raise FloatingPointError(f"non-finite gradient in layer {i} parameter {k}")
    t = state.t + 1
    new_arrays, new_m, new_v = {}, {}, {}
    c1 = 1.0 - beta1**t
    c2 = 1.0 - beta2**t
    for i, d in params.arrays.items():
        new_arrays[i], new_m[i], new_v[i] = {}, {}, {}
        for k, p in d.items():
            g = grads.get(i, {}).get(k)
            if g is None:
                g = np.zeros_like(p)
            m = beta1 * state.m[i][k] + (1 - beta1) * g
            v = beta2 * state.v[i][k] + (1 - beta2) * g * g
            step = lr * (m / c1) / (np.sqrt(v / c2) + eps)
            new_arrays[i][k] = (p - step).astype(p.dtype)
            new_m[i][k] = m.astype(p.dtype)
            new_v[i][k] = v.astype(p.dtype)
    return ParamSet(new_arrays, params.seed), AdamState(new_m, new_v, t)


# serialization --------------------------------------------------------------

PARAM_MAGIC = b"NAPS"
PARAM_VERSION = 1
_DTYPE_CODES = {np.dtype("<f4"): 1, np.dtype("<f8"): 2}
_CODE_DTYPES = {v: k for k, v in _DTYPE_CODES.items()}


def dump_params(params: ParamSet) -> bytes:
    """Serialize to the versioned little-endian container.

    Layout: ``b"NAPS"``, u16 version, u64 init seed, u32 entry count, then
    per entry: u32 layer index, u8 name length, ASCII name, u8 dtype code
    (1 = float32, 2 = float64), u8 ndim, ndim x u32 shape, raw values.
    """
    buf = io.BytesIO()
    entries = list(params.entries())
    buf.write(PARAM_MAGIC)
    buf.write(struct.pack("<HQI", PARAM_VERSION, int(params.seed), len(entries)))
    for idx, name, arr in entries:
        dt = arr.dtype.newbyteorder("<")
        if dt not in _DTYPE_CODES:
            raise TypeError(f"unsupported dtype {arr.dtype}")
        raw = name.encode("ascii")
        buf.write(struct.pack("<IB", idx, len(raw)))
        buf.write(raw)
        buf.write(struct.pack("<BB", _DTYPE_CODES[dt], arr.ndim))
        buf.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        buf.write(np.ascontiguousarray(arr, dtype=dt).tobytes())
    return buf.getvalue()


def load_params(data: bytes) -> ParamSet:
    if data[:4] != PARAM_MAGIC:
        raise ValueError("not a parameter file")
    version, seed, count = struct.unpack_from("<HQI", data, 4)
    if version != PARAM_VERSION:
        raise ValueError(f"unsupported parameter file version {version}")
    pos = 4 + struct.calcsize("<HQI")
    arrays: dict[int, dict[str, np.ndarray]] = {}
    for _ in range(count):
        idx, nlen = struct.unpack_from("<IB", data, pos)
        pos += 5
        name = data[pos : pos + nlen].decode("ascii")
        pos += nlen
        code, ndim = struct.unpack_from("<BB", data, pos)
        pos += 2
        shape = struct.unpack_from(f"<{ndim}I", data, pos)
        pos += 4 * ndim
        dt = _CODE_DTYPES[code]
        size = int(np.prod(shape)) * dt.itemsize
        arr = np.frombuffer(data[pos : pos + size], dtype=dt).reshape(shape).copy()
        pos += size
        arrays.setdefault(idx, {})[name] = arr
    if pos != len(data):
        raise ValueError("trailing bytes in parameter file")
    return ParamSet(arrays, seed)


def dump_network(net: Network) -> str:
    return json.dumps(net.describe(), indent=2, sort_keys=True) + "\n"
