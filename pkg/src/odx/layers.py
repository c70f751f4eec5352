"""Layer vocabulary: forward evaluation and reverse-mode gradients per kind.

Every layer works on batches: the leading axis of ``x`` is the batch axis and
``input_shape``/``output_shape`` describe a single sample. Images are laid out
(channels, height, width), row-major.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np
import numpy.typing as npt
from scipy.special import expit

from odx.errors import ConditioningError, ConfigurationError, DimensionError

Tensor = npt.NDArray[np.float64]
Grads = dict[str, Tensor]


def f32_grid(a: Any) -> Tensor:
    """float64 array holding the nearest float32 values of a."""
    return np.asarray(a, dtype=np.float32).astype(np.float64)

LAYER_KINDS = (
    "dense",
    "conv",
    "conv_transpose",
    "batchnorm_inference",
    "relu",
    "tanh",
    "sigmoid",
    "reshape",
    "upsample_nearest",
    "concat_onehot",
)

# Parameter tensors per kind, in container order.
PARAM_NAMES: dict[str, tuple[str, ...]] = {
    "dense": ("weight", "bias"),
    "conv": ("weight", "bias"),
    "conv_transpose": ("weight", "bias"),
    "batchnorm_inference": ("gamma", "beta", "running_mean", "running_var"),
}

# Running statistics are fixed buffers, not trained.
TRAINABLE: dict[str, tuple[str, ...]] = {
    "dense": ("weight", "bias"),
    "conv": ("weight", "bias"),
    "conv_transpose": ("weight", "bias"),
    "batchnorm_inference": ("gamma", "beta"),
}


@dataclass
class LayerSpec:
    """One layer: its kind, weight tensors and hyperparameters."""

    kind: str
    params: dict[str, Tensor] = field(default_factory=dict)
    stride: int = 1
    padding: int = 0
    eps: float = 1e-5
    class_count: int = 0
    shape: tuple[int, ...] = ()  # reshape target, per sample
    factor: int = 1  # upsample factor

    def __post_init__(self) -> None:
        if self.kind not in LAYER_KINDS:
            raise ConfigurationError(f"unknown layer kind: {self.kind!r}")
        # stored tensors are float32-exact so a GTC round trip is lossless
        self.params = {k: f32_grid(v) for k, v in self.params.items()}
        self.shape = tuple(int(s) for s in self.shape)
        missing = [n for n in PARAM_NAMES.get(self.kind, ()) if n not in self.params]
        if missing:
            raise ConfigurationError(f"{self.kind} layer is missing tensors: {missing}")
        if self.kind == "batchnorm_inference" and not np.all(self.params["running_var"] > 0):
            raise ConfigurationError("batchnorm running variance must be strictly positive")
        if self.kind in ("conv", "conv_transpose") and (self.stride < 1 or self.padding < 0):
            raise ConfigurationError(f"{self.kind}: invalid stride/padding")
        if self.kind == "upsample_nearest" and self.factor < 1:
            raise ConfigurationError("upsample factor must be >= 1")
        if self.kind == "concat_onehot" and self.class_count < 1:
            raise ConfigurationError("concat_onehot needs class_count >= 1")

    # -- shapes ---------------------------------------------------------

    def output_shape(self, input_shape: tuple[int, ...]) -> tuple[int, ...]:
        """Per-sample output shape; raises DimensionError on a mismatch."""
        s = tuple(input_shape)
        k = self.kind
        if k == "dense":
            w = self.params["weight"]
            if len(s) != 1 or s[0] != w.shape[1]:
                raise DimensionError(f"dense expects input ({w.shape[1]},), got {s}")
            return (w.shape[0],)
        if k == "conv":
            cout, cin, kh, kw = self.params["weight"].shape
            if len(s) != 3 or s[0] != cin:
                raise DimensionError(f"conv expects ({cin}, H, W), got {s}")
            ho = (s[1] + 2 * self.padding - kh) // self.stride + 1
            wo = (s[2] + 2 * self.padding - kw) // self.stride + 1
            if ho < 1 or wo < 1:
                raise DimensionError(f"conv kernel larger than padded input {s}")
            return (cout, ho, wo)
        if k == "conv_transpose":
            cin, cout, kh, kw = self.params["weight"].shape
            if len(s) != 3 or s[0] != cin:
                raise DimensionError(f"conv_transpose expects ({cin}, H, W), got {s}")
            ho = (s[1] - 1) * self.stride - 2 * self.padding + kh
            wo = (s[2] - 1) * self.stride - 2 * self.padding + kw
            if ho < 1 or wo < 1:
                raise DimensionError(f"conv_transpose padding too large for input {s}")
            return (cout, ho, wo)
        if k == "batchnorm_inference":
            c = self.params["gamma"].shape[0]
            if len(s) not in (1, 3) or s[0] != c:
                raise DimensionError(f"batchnorm expects {c} channels, got {s}")
            return s
        if k == "reshape":
            if int(np.prod(s)) != int(np.prod(self.shape)):
                raise DimensionError(f"cannot reshape {s} into {self.shape}")
            return self.shape
        if k == "upsample_nearest":
            if len(s) != 3:
                raise DimensionError(f"upsample expects (C, H, W), got {s}")
            return (s[0], s[1] * self.factor, s[2] * self.factor)
        if k == "concat_onehot":
            if len(s) != 1:
                raise DimensionError(f"concat_onehot expects a flat input, got {s}")
            return (s[0] + self.class_count,)
        return s

    # -- evaluation -----------------------------------------------------

    def forward(self, x: Tensor, y: npt.NDArray[np.int64] | None = None) -> Tensor:
        k = self.kind
        p = self.params
        if k == "dense":
            return x @ p["weight"].T + p["bias"]
        if k == "conv":
            return _conv_forward(x, p["weight"], p["bias"], self.stride, self.padding)
        if k == "conv_transpose":
            return _conv_transpose_forward(x, p["weight"], p["bias"], self.stride, self.padding)
        if k == "batchnorm_inference":
            scale, shift = self._bn_affine(x.ndim)
            return x * scale + shift
        if k == "relu":
            return np.maximum(x, 0.0)
        if k == "tanh":
            return np.tanh(x)
        if k == "sigmoid":
            return expit(x)
        if k == "reshape":
            return x.reshape((x.shape[0],) + self.shape)
        if k == "upsample_nearest":
            return x.repeat(self.factor, axis=2).repeat(self.factor, axis=3)
        # concat_onehot
        return np.concatenate([x, self.onehot(y, x.shape[0])], axis=1)

    def backward(
        self,
        x: Tensor,
        out: Tensor,
        d_out: Tensor,
        y: npt.NDArray[np.int64] | None = None,
        need_grads: bool = True,
    ) -> tuple[Tensor, Grads]:
        """Vector-Jacobian products: (d_input, {param: d_param}) summed over batch."""
        k = self.kind
        p = self.params
        grads: Grads = {}
        if k == "dense":
            dx = d_out @ p["weight"]
            if need_grads:
                grads = {"weight": d_out.T @ x, "bias": d_out.sum(axis=0)}
            return dx, grads
        if k == "conv":
            return _conv_backward(x, d_out, p["weight"], self.stride, self.padding, need_grads)
        if k == "conv_transpose":
            return _conv_transpose_backward(
                x, d_out, p["weight"], self.stride, self.padding, need_grads
            )
        if k == "batchnorm_inference":
            scale, _ = self._bn_affine(x.ndim)
            dx = d_out * scale
            if need_grads:
                axes = _channel_reduce_axes(x.ndim)
                inv_std = 1.0 / np.sqrt(p["running_var"] + self.eps)
                xhat = (x - _per_channel(p["running_mean"], x.ndim)) * _per_channel(inv_std, x.ndim)
                grads = {"gamma": (d_out * xhat).sum(axis=axes), "beta": d_out.sum(axis=axes)}
            return dx, grads
        if k == "relu":
            return d_out * (x > 0.0), grads
        if k == "tanh":
            return d_out * (1.0 - out * out), grads
        if k == "sigmoid":
            return d_out * out * (1.0 - out), grads
        if k == "reshape":
            return d_out.reshape(x.shape), grads
        if k == "upsample_nearest":
            b, c, h, w = x.shape
            f = self.factor
            return d_out.reshape(b, c, h, f, w, f).sum(axis=(3, 5)), grads
        # concat_onehot: the class channel receives no gradient
        return d_out[:, : x.shape[1]], grads

    # -- helpers --------------------------------------------------------

    def onehot(self, y: npt.NDArray[np.int64] | None, batch: int) -> Tensor:
        if y is None:
            raise ConditioningError("conditional layer needs a class input y")
        y = np.asarray(y, dtype=np.int64).reshape(-1)
        if y.shape[0] != batch:
            raise ConditioningError(f"expected {batch} class labels, got {y.shape[0]}")
        if np.any(y < 0) or np.any(y >= self.class_count):
            raise ConditioningError(
                f"class index out of range [0, {self.class_count}): {y.tolist()}"
            )
        eye = np.zeros((batch, self.class_count))
        eye[np.arange(batch), y] = 1.0
        return eye

    def _bn_affine(self, ndim: int) -> tuple[Tensor, Tensor]:
        p = self.params
        scale = p["gamma"] / np.sqrt(p["running_var"] + self.eps)
        shift = p["beta"] - p["running_mean"] * scale
        return _per_channel(scale, ndim), _per_channel(shift, ndim)

    @property
    def trainable(self) -> tuple[str, ...]:
        return TRAINABLE.get(self.kind, ())

    def hyperparameters(self) -> dict[str, Any]:
        """Kind-relevant hyperparameters, as stored in the GTC manifest."""
        h: dict[str, Any] = {"kind": self.kind}
        if self.kind in ("conv", "conv_transpose"):
            h.update(stride=self.stride, padding=self.padding)
        elif self.kind == "batchnorm_inference":
            h["eps"] = self.eps
        elif self.kind == "reshape":
            h["shape"] = list(self.shape)
        elif self.kind == "upsample_nearest":
            h["factor"] = self.factor
        elif self.kind == "concat_onehot":
            h["class_count"] = self.class_count
        return h

    def copy(self) -> LayerSpec:
        return LayerSpec(
            kind=self.kind,
            params={k: v.copy() for k, v in self.params.items()},
            stride=self.stride,
            padding=self.padding,
            eps=self.eps,
            class_count=self.class_count,
            shape=self.shape,
            factor=self.factor,
        )


def _per_channel(v: Tensor, ndim: int) -> Tensor:
    return v.reshape((1, -1) + (1,) * (ndim - 2))


def _channel_reduce_axes(ndim: int) -> tuple[int, ...]:
    return (0,) + tuple(range(2, ndim))


# -- convolution ----------------------------------------------------------
#
# conv uses zero padding, symmetric padding amounts and unit dilation.
# conv_transpose is the adjoint of conv with the same weight tensor viewed as
# (conv_out_channels, conv_in_channels, kh, kw), so the im2col/col2im pair
# serves both directions.


def _im2col(xp: Tensor, kh: int, kw: int, stride: int, ho: int, wo: int) -> Tensor:
    b, c = xp.shape[:2]
    cols = np.empty((b, c, kh, kw, ho, wo))
    for i in range(kh):
        for j in range(kw):
            cols[:, :, i, j] = xp[:, :, i : i + stride * ho : stride, j : j + stride * wo : stride]
    return cols


def _col2im(cols: Tensor, hp: int, wp: int, stride: int) -> Tensor:
    b, c, kh, kw, ho, wo = cols.shape
    xp = np.zeros((b, c, hp, wp))
    for i in range(kh):
        for j in range(kw):
            xp[:, :, i : i + stride * ho : stride, j : j + stride * wo : stride] += cols[:, :, i, j]
    return xp


def _pad(x: Tensor, padding: int) -> Tensor:
    if padding == 0:
        return x
    return np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))


def _unpad(x: Tensor, padding: int) -> Tensor:
    if padding == 0:
        return x
    return x[:, :, padding:-padding, padding:-padding]


def _conv_forward(x: Tensor, w: Tensor, bias: Tensor, stride: int, padding: int) -> Tensor:
    _, _, kh, kw = w.shape
    xp = _pad(x, padding)
    ho = (xp.shape[2] - kh) // stride + 1
    wo = (xp.shape[3] - kw) // stride + 1
    cols = _im2col(xp, kh, kw, stride, ho, wo)
    out = np.tensordot(cols, w, axes=([1, 2, 3], [1, 2, 3]))  # (B, ho, wo, cout)
    return out.transpose(0, 3, 1, 2) + bias[None, :, None, None]


def _conv_backward(
    x: Tensor, d_out: Tensor, w: Tensor, stride: int, padding: int, need_grads: bool
) -> tuple[Tensor, Grads]:
    _, _, kh, kw = w.shape
    xp_shape = (x.shape[2] + 2 * padding, x.shape[3] + 2 * padding)
    dcols = np.tensordot(d_out, w, axes=([1], [0]))  # (B, ho, wo, cin, kh, kw)
    dcols = dcols.transpose(0, 3, 4, 5, 1, 2)
    dx = _unpad(_col2im(dcols, xp_shape[0], xp_shape[1], stride), padding)
    grads: Grads = {}
    if need_grads:
        ho, wo = d_out.shape[2:]
        cols = _im2col(_pad(x, padding), kh, kw, stride, ho, wo)
        grads = {
            "weight": np.tensordot(d_out, cols, axes=([0, 2, 3], [0, 4, 5])),
            "bias": d_out.sum(axis=(0, 2, 3)),
        }
    return dx, grads


def _conv_transpose_forward(
    x: Tensor, w: Tensor, bias: Tensor, stride: int, padding: int
) -> Tensor:
    _, _, kh, kw = w.shape
    h, wd = x.shape[2:]
    cols = np.tensordot(x, w, axes=([1], [0]))  # (B, h, w, cout, kh, kw)
    cols = cols.transpose(0, 3, 4, 5, 1, 2)
    hp = (h - 1) * stride + kh
    wp = (wd - 1) * stride + kw
    out = _unpad(_col2im(cols, hp, wp, stride), padding)
    return out + bias[None, :, None, None]


def _conv_transpose_backward(
    x: Tensor, d_out: Tensor, w: Tensor, stride: int, padding: int, need_grads: bool
) -> tuple[Tensor, Grads]:
    _, _, kh, kw = w.shape
    h, wd = x.shape[2:]
    dcols = _im2col(_pad(d_out, padding), kh, kw, stride, h, wd)  # (B, cout, kh, kw, h, w)
    dx = np.tensordot(dcols, w, axes=([1, 2, 3], [1, 2, 3])).transpose(0, 3, 1, 2)
    grads: Grads = {}
    if need_grads:
        grads = {
            "weight": np.tensordot(x, dcols, axes=([0, 2, 3], [0, 4, 5])),
            "bias": d_out.sum(axis=(0, 2, 3)),
        }
    return dx, grads
