"""Generator and discriminator models over the layer vocabulary.

Models are plain layer stacks. Evaluation is a pure function of (weights,
inputs); the reverse pass replays the cached per-layer inputs/outputs of one
forward pass, so concurrent calls never share scratch state.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import numpy.typing as npt
from scipy.special import expit, softmax

from odx.errors import (
    ConditioningError,
    ConfigurationError,
    DimensionError,
    NumericError,
    ParameterError,
)
from odx.layers import Grads, LayerSpec, Tensor
from odx.priors import PriorSpec

OUTPUT_MAPS = ("tanh01", "identity")

# (layer inputs, layer outputs, class labels) of one forward pass
Cache = tuple[list[Tensor], list[Tensor], "npt.NDArray[np.int64] | None"]


def _run_layers(
    layers: list[LayerSpec], x: Tensor, y: npt.NDArray[np.int64] | None
) -> tuple[Tensor, Cache]:
    ins: list[Tensor] = []
    outs: list[Tensor] = []
    for layer in layers:
        ins.append(x)
        x = layer.forward(x, y)
        outs.append(x)
    return x, (ins, outs, y)


def _back_layers(
    layers: list[LayerSpec],
    cache: Cache,
    d: Tensor,
    need_grads: bool,
    prefix: str = "",
) -> tuple[Tensor, Grads]:
    ins, outs, y = cache
    grads: Grads = {}
    for i in reversed(range(len(layers))):
        d, g = layers[i].backward(ins[i], outs[i], d, y, need_grads=need_grads)
        for name, value in g.items():
            grads[f"{prefix}{i}.{name}"] = value
    return d, grads


def _chain_shape(layers: list[LayerSpec], shape: tuple[int, ...]) -> tuple[int, ...]:
    for i, layer in enumerate(layers):
        try:
            shape = layer.output_shape(shape)
        except DimensionError as e:
            raise DimensionError(f"layer {i} ({layer.kind}): {e}") from None
    return shape


def _check_finite(x: Tensor, what: str) -> Tensor:
    if not np.all(np.isfinite(x)):
        raise NumericError(f"{what} produced non-finite values")
    return x


def _labels(y: int | npt.ArrayLike | None, batch: int) -> npt.NDArray[np.int64] | None:
    if y is None:
        return None
    arr = np.asarray(y, dtype=np.int64).reshape(-1)
    if arr.size == 1 and batch > 1:
        arr = np.full(batch, int(arr[0]), dtype=np.int64)
    return arr


@dataclass
class GeneratorModel:
    """G: Z -> X as an ordered layer stack with its latent prior."""

    layers: list[LayerSpec]
    latent_dim: int
    prior: PriorSpec = field(default_factory=PriorSpec)
    output_shape: tuple[int, ...] = (3, 8, 8)
    class_count: int | None = None
    output_map: str = "tanh01"

    def __post_init__(self) -> None:
        self.output_shape = tuple(int(s) for s in self.output_shape)
        if self.latent_dim < 1:
            raise ConfigurationError("latent_dim must be >= 1")
        if self.output_map not in OUTPUT_MAPS:
            raise ConfigurationError(f"unknown output map: {self.output_map!r}")
        if not self.layers:
            raise ConfigurationError("a generator needs at least one layer")
        first = self.layers[0]
        if self.class_count:
            if first.kind != "concat_onehot" or first.class_count != self.class_count:
                raise ConfigurationError(
                    f"conditional generator must start with concat_onehot({self.class_count})"
                )
        elif any(layer.kind == "concat_onehot" for layer in self.layers):
            raise ConfigurationError("concat_onehot layer in an unconditional generator")
        if self.output_map == "tanh01" and self.layers[-1].kind != "tanh":
            raise ConfigurationError("output map (x+1)/2 requires a final tanh layer")
        final = _chain_shape(self.layers, (self.latent_dim,))
        if int(np.prod(final)) != int(np.prod(self.output_shape)):
            raise DimensionError(
                f"layer stack produces {final}, declared output shape is {self.output_shape}"
            )

    @property
    def conditional(self) -> bool:
        return bool(self.class_count)

    def _check_inputs(self, z: Tensor, y: npt.NDArray[np.int64] | None) -> None:
        if z.ndim != 2 or z.shape[1] != self.latent_dim:
            raise DimensionError(
                f"latent input must have length {self.latent_dim}, got shape {z.shape[1:]}"
            )
        if self.conditional:
            if y is None:
                raise ConditioningError("conditional generator needs a class y")
            if np.any(y < 0) or np.any(y >= self.class_count):
                raise ConditioningError(
                    f"class y out of range [0, {self.class_count}): {y.tolist()}"
                )
        elif y is not None:
            raise ConditioningError("unconditional generator does not take a class y")

    def forward_batch(
        self, z: Tensor, y: int | npt.ArrayLike | None = None
    ) -> tuple[Tensor, Cache]:
        z = np.asarray(z, dtype=np.float64)
        labels = _labels(y, z.shape[0] if z.ndim == 2 else 1)
        self._check_inputs(z, labels)
        h, cache = _run_layers(self.layers, z, labels)
        if self.output_map == "tanh01":
            h = (h + 1.0) / 2.0
        out = h.reshape((z.shape[0],) + self.output_shape)
        return _check_finite(out, "generator forward"), cache

    def backward_batch(
        self, cache: Cache, d_out: Tensor, need_grads: bool = True
    ) -> tuple[Tensor, Grads]:
        d = np.asarray(d_out, dtype=np.float64)
        last = cache[1][-1]
        if d.shape[1:] != self.output_shape:
            raise DimensionError(f"d_out must have shape {self.output_shape}, got {d.shape[1:]}")
        d = d.reshape(last.shape)
        if self.output_map == "tanh01":
            d = 0.5 * d
        dz, grads = _back_layers(self.layers, cache, d, need_grads)
        return _check_finite(dz, "generator backward"), grads

    def parameters(self) -> dict[str, Tensor]:
        """Trainable tensors by name; the arrays are the model's own."""
        return {
            f"{i}.{name}": layer.params[name]
            for i, layer in enumerate(self.layers)
            for name in layer.trainable
        }

    def quantized(self) -> GeneratorModel:
        """Copy with every tensor rounded onto the float32 grid."""
        return GeneratorModel(
            [layer.copy() for layer in self.layers],
            self.latent_dim,
            self.prior,
            self.output_shape,
            self.class_count,
            self.output_map,
        )


@dataclass
class DiscriminatorModel:
    """D: X -> [0, 1] with an optional auxiliary class head."""

    layers: list[LayerSpec]
    input_shape: tuple[int, ...]
    source_head: LayerSpec
    class_head: LayerSpec | None = None

    def __post_init__(self) -> None:
        self.input_shape = tuple(int(s) for s in self.input_shape)
        trunk = _chain_shape(self.layers, self.input_shape)
        if self.source_head.kind != "dense" or self.source_head.output_shape(trunk) != (1,):
            raise ConfigurationError("source head must be a dense layer with one output")
        if self.class_head is not None:
            if self.class_head.kind != "dense":
                raise ConfigurationError("class head must be a dense layer")
            self.class_head.output_shape(trunk)

    @property
    def class_count(self) -> int | None:
        return None if self.class_head is None else self.class_head.params["weight"].shape[0]

    def forward_logits(self, x: Tensor) -> tuple[Tensor, Tensor | None, tuple[Cache, Tensor]]:
        x = np.asarray(x, dtype=np.float64)
        if x.shape[1:] != self.input_shape:
            raise DimensionError(f"discriminator input must be {self.input_shape}, got {x.shape[1:]}")
        h, cache = _run_layers(self.layers, x, None)
        src = self.source_head.forward(h)[:, 0]
        cls = None if self.class_head is None else self.class_head.forward(h)
        return src, cls, (cache, h)

    def forward(self, x: Tensor) -> tuple[Tensor, Tensor | None]:
        """(D^source in [0,1], D^class distribution or None) per sample."""
        src, cls, _ = self.forward_logits(x)
        if cls is None:
            return expit(src), None
        return expit(src), softmax(cls, axis=1)

    def backward(
        self,
        cache: tuple[Cache, Tensor],
        d_source: Tensor,
        d_class: Tensor | None = None,
        need_grads: bool = True,
    ) -> tuple[Tensor, Grads]:
        """Gradients given d(loss)/d(logits) of each head."""
        cache, trunk_out = cache
        d_source = np.asarray(d_source, dtype=np.float64).reshape(-1, 1)
        d_h, g_src = self.source_head.backward(trunk_out, None, d_source, need_grads=need_grads)
        grads = {f"source.{k}": v for k, v in g_src.items()}
        if self.class_head is not None and d_class is not None:
            d_cls_h, g_cls = self.class_head.backward(
                trunk_out, None, np.asarray(d_class, dtype=np.float64), need_grads=need_grads
            )
            d_h = d_h + d_cls_h
            grads.update({f"class.{k}": v for k, v in g_cls.items()})
        dx, g_trunk = _back_layers(self.layers, cache, d_h, need_grads)
        grads.update(g_trunk)
        return dx, grads

    def parameters(self) -> dict[str, Tensor]:
        params = {
            f"{i}.{name}": layer.params[name]
            for i, layer in enumerate(self.layers)
            for name in layer.trainable
        }
        params.update({f"source.{k}": v for k, v in self.source_head.params.items()})
        if self.class_head is not None:
            params.update({f"class.{k}": v for k, v in self.class_head.params.items()})
        return params

    def quantized(self) -> DiscriminatorModel:
        """Copy with every tensor rounded onto the float32 grid."""
        return DiscriminatorModel(
            [layer.copy() for layer in self.layers],
            self.input_shape,
            self.source_head.copy(),
            None if self.class_head is None else self.class_head.copy(),
        )


# -- single-sample operations ----------------------------------------------


def forward(model: GeneratorModel, z: Tensor, y: int | None = None) -> Tensor:
    """G(z[, y]) as an image of model.output_shape."""
    z = np.asarray(z, dtype=np.float64).reshape(1, -1)
    out, _ = model.forward_batch(z, y)
    return out[0]


def backward_input(
    model: GeneratorModel, z: Tensor, y: int | None, d_out: Tensor
) -> Tensor:
    """d_out^T (dG/dz): gradient over the latent coordinates only."""
    z = np.asarray(z, dtype=np.float64).reshape(1, -1)
    _, cache = model.forward_batch(z, y)
    d = np.asarray(d_out, dtype=np.float64)
    if d.shape != model.output_shape:
        raise DimensionError(f"d_out must have shape {model.output_shape}, got {d.shape}")
    dz, _ = model.backward_batch(cache, d[None], need_grads=False)
    return dz[0, : model.latent_dim]


def backward_weights(
    model: GeneratorModel | DiscriminatorModel,
    inputs: Tensor,
    d_out: Tensor | tuple[Tensor, Tensor | None],
    y: npt.ArrayLike | None = None,
) -> Grads:
    """Per-weight gradients of the loss inducing d_out, summed over the batch.

    For a discriminator, d_out is d(loss)/d(source logit) or a pair
    (d_source_logits, d_class_logits).
    """
    if isinstance(model, GeneratorModel):
        _, cache = model.forward_batch(inputs, y)
        d = np.asarray(d_out, dtype=np.float64)
        if d.shape[0] != np.asarray(inputs).shape[0]:
            raise DimensionError("d_out batch size differs from the input batch")
        _, grads = model.backward_batch(cache, d)
        return grads
    _, _, cache = model.forward_logits(inputs)
    d_src, d_cls = d_out if isinstance(d_out, tuple) else (d_out, None)
    if np.asarray(d_src).reshape(-1).shape[0] != np.asarray(inputs).shape[0]:
        raise DimensionError("d_out batch size differs from the input batch")
    _, grads = model.backward(cache, d_src, d_cls)
    return grads


def finite_diff_check(
    model: GeneratorModel,
    z: Tensor,
    step: float,
    y: int | None = None,
    d_out: Tensor | None = None,
) -> float:
    """Max relative error of backward_input against central differences.

    The scalar probed is <d_out, G(z)>; d_out defaults to a fixed
    pseudo-random direction.
    """
    if not step > 0:
        raise ParameterError(f"finite-difference step must be > 0, got {step}")
    z = np.asarray(z, dtype=np.float64).ravel()
    if d_out is None:
        d_out = np.random.default_rng(0).standard_normal(model.output_shape)
    analytic = backward_input(model, z, y, d_out)
    worst = 0.0
    for j in range(z.size):
        zp, zm = z.copy(), z.copy()
        zp[j] += step
        zm[j] -= step
        fp = float(np.sum(d_out * forward(model, zp, y)))
        fm = float(np.sum(d_out * forward(model, zm, y)))
        central = (fp - fm) / (2.0 * step)
        worst = max(worst, abs(analytic[j] - central) / max(1e-12, abs(central)))
    return worst
