"""Layer objects with hand-written backward passes, composed into ``Net`` stacks.

Parameters live on the layers as float64 arrays; a ``Net`` exposes them as a
single ordered name -> array mapping (the serialization order).  Forward passes
save whatever the matching backward pass needs; ``backward`` must be called in
exact reverse order of ``forward``, which ``Net`` guarantees.
"""

from __future__ import annotations

import numpy as np

from . import ops
from .errors import DimensionError, ParameterError
from .ops import ConvSpec


def he_uniform(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    limit = np.sqrt(6.0 / fan_in)
    return rng.uniform(-limit, limit, size=shape)


class Layer:
    """Base layer: parameter dict, gradient dict, weight/bias distinction."""

    def __init__(self):
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}
        self.weight_names: set[str] = set()  # regularized params; biases excluded

    def init_params(self, rng: np.random.Generator):
        pass

    def zero_grad(self):
        self.grads = {k: np.zeros_like(v) for k, v in self.params.items()}

    def forward(self, x, mode="eval"):
        raise NotImplementedError

    def backward(self, grad_out):
        raise NotImplementedError


class Dense(Layer):
    """Fully connected layer on 1-D inputs: y = W.T @ x + b."""

    def __init__(self, in_dim: int, out_dim: int):
        super().__init__()
        self.in_dim, self.out_dim = in_dim, out_dim
        self.params = {"w": np.zeros((in_dim, out_dim)), "b": np.zeros(out_dim)}
        self.weight_names = {"w"}
        self.zero_grad()

    def init_params(self, rng):
        self.params["w"] = he_uniform(rng, (self.in_dim, self.out_dim), self.in_dim)
        self.params["b"] = np.zeros(self.out_dim)

    def forward(self, x, mode="eval"):
        if x.shape != (self.in_dim,):
            raise DimensionError(f"dense expects shape ({self.in_dim},), got {x.shape}")
        self._x = x
        return x @ self.params["w"] + self.params["b"]

    def backward(self, grad_out):
        self.grads["w"] += np.outer(self._x, grad_out)
        self.grads["b"] += grad_out
        return grad_out @ self.params["w"].T


class Conv2D(Layer):
    """Single-sample 2-D convolution over C x H x W."""

    def __init__(self, spec: ConvSpec):
        super().__init__()
        self.spec = spec
        wshape = (spec.out_channels, spec.in_channels, spec.kernel_h, spec.kernel_w)
        self.params = {"w": np.zeros(wshape), "b": np.zeros(spec.out_channels)}
        self.weight_names = {"w"}
        self.zero_grad()

    def init_params(self, rng):
        s = self.spec
        fan_in = s.in_channels * s.kernel_h * s.kernel_w
        self.params["w"] = he_uniform(rng, self.params["w"].shape, fan_in)
        self.params["b"] = np.zeros(s.out_channels)

    def forward(self, x, mode="eval"):
        self._x = x
        return ops.conv2d(x, self.params["w"], self.params["b"], self.spec)

    def backward(self, grad_out):
        gi, gw, gb = ops.conv2d_backward(grad_out, self._x, self.params["w"], self.spec)
        self.grads["w"] += gw
        self.grads["b"] += gb
        return gi


class Activation(Layer):
    def __init__(self, kind: str):
        super().__init__()
        if kind not in ops.ACTIVATION_KINDS:
            raise ParameterError(f"unknown activation {kind!r}")
        self.kind = kind

    def forward(self, x, mode="eval"):
        self._x = x
        self._y = ops.activation(x, self.kind)
        return self._y

    def backward(self, grad_out):
        return ops.activation_backward(grad_out, self._x, self._y, self.kind)


class Dropout(Layer):
    """Inverted dropout; the mask stream is owned by ``reseed`` for determinism."""

    def __init__(self, rate: float):
        super().__init__()
        if not 0.0 <= rate < 1.0:
            raise ParameterError(f"dropout rate must be in [0, 1), got {rate}")
        self.rate = rate
        self.rng = np.random.default_rng(0)

    def reseed(self, seed: int):
        self.rng = np.random.default_rng(seed)

    def forward(self, x, mode="eval"):
        if mode == "train" and self.rate > 0.0:
            self._mask = ops.dropout_mask(x.shape, self.rate, self.rng)
        else:
            self._mask = None
        return x if self._mask is None else x * self._mask

    def backward(self, grad_out):
        return grad_out if self._mask is None else grad_out * self._mask


class Flatten(Layer):
    def forward(self, x, mode="eval"):
        self._shape = x.shape
        return x.reshape(-1)

    def backward(self, grad_out):
        return grad_out.reshape(self._shape)


class GlobalAvgPool(Layer):
    """C x ... -> C per-channel mean."""

    def forward(self, x, mode="eval"):
        self._shape = x.shape
        return ops.global_avg_pool(x)

    def backward(self, grad_out):
        c = self._shape[0]
        n = int(np.prod(self._shape[1:]))
        return np.broadcast_to(grad_out.reshape((c,) + (1,) * (len(self._shape) - 1)),
                               self._shape) / n


class Conv2Plus1D(Layer):
    """Factorized space-time convolution on C x T x H x W.

    A per-frame 2-D spatial convolution (in -> mid channels), a ReLU, then a
    per-pixel 1-D temporal convolution (mid -> out channels).  mid == out, so
    a 3x3x3 pair with equal channels c stores 9c^2 + 3c^2 = 12c^2 weights
    versus 27c^2 for the unfactorized kernel.  Both factors use "same" padding.
    """

    def __init__(self, in_channels: int, out_channels: int,
                 spatial_kernel=(3, 3), temporal_kernel=3,
                 spatial_stride=1, temporal_stride=1):
        super().__init__()
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.mid_channels = out_channels
        self.spatial_kernel = tuple(spatial_kernel)
        self.temporal_kernel = temporal_kernel
        self.spatial_stride = spatial_stride
        self.temporal_stride = temporal_stride
        kh, kw = self.spatial_kernel
        self.spatial_spec = ConvSpec(kh, kw, spatial_stride, "same",
                                     in_channels, self.mid_channels)
        self.temporal_spec = ConvSpec(temporal_kernel, 1, 1, "same",
                                      self.mid_channels, out_channels)
        self.params = {
            "ws": np.zeros((self.mid_channels, in_channels, kh, kw)),
            "bs": np.zeros(self.mid_channels),
            "wt": np.zeros((out_channels, self.mid_channels, temporal_kernel, 1)),
            "bt": np.zeros(out_channels),
        }
        self.weight_names = {"ws", "wt"}
        self.zero_grad()

    def init_params(self, rng):
        kh, kw = self.spatial_kernel
        self.params["ws"] = he_uniform(rng, self.params["ws"].shape, self.in_channels * kh * kw)
        self.params["bs"] = np.zeros(self.mid_channels)
        self.params["wt"] = he_uniform(rng, self.params["wt"].shape,
                                       self.mid_channels * self.temporal_kernel)
        self.params["bt"] = np.zeros(self.out_channels)

    def forward(self, x, mode="eval"):
        if x.ndim != 4 or x.shape[0] != self.in_channels:
            raise DimensionError(
                f"expected ({self.in_channels}, T, H, W), got shape {x.shape}")
        self._x = x
        t = x.shape[1]
        mids = [ops.conv2d(x[:, f], self.params["ws"], self.params["bs"], self.spatial_spec)
                for f in range(t)]
        mid = np.stack(mids, axis=1)  # mid_channels x T x H' x W'
        self._mid = mid
        self._act = np.maximum(mid, 0.0)
        c, tt, hh, ww = self._act.shape
        flat = self._act.reshape(c, tt, hh * ww)
        self._flat = flat
        out = ops.conv2d(flat, self.params["wt"], self.params["bt"], self.temporal_spec,
                         stride_hw=(self.temporal_stride, 1))
        return out.reshape(out.shape[0], out.shape[1], hh, ww)

    def backward(self, grad_out):
        c, tt, hh, ww = self._act.shape
        g = grad_out.reshape(grad_out.shape[0], grad_out.shape[1], hh * ww)
        gflat, gwt, gbt = ops.conv2d_backward(g, self._flat, self.params["wt"],
                                              self.temporal_spec,
                                              stride_hw=(self.temporal_stride, 1))
        self.grads["wt"] += gwt
        self.grads["bt"] += gbt
        gmid = gflat.reshape(c, tt, hh, ww) * (self._mid > 0.0)
        gx = np.empty_like(self._x)
        for f in range(self._x.shape[1]):
            gi, gws, gbs = ops.conv2d_backward(gmid[:, f], self._x[:, f],
                                               self.params["ws"], self.spatial_spec)
            self.grads["ws"] += gws
            self.grads["bs"] += gbs
            gx[:, f] = gi
        return gx

    def factored_weight_count(self) -> int:
        return self.params["ws"].size + self.params["wt"].size

    def full3d_weight_count(self) -> int:
        kh, kw = self.spatial_kernel
        return self.temporal_kernel * kh * kw * self.in_channels * self.out_channels


class Residual2Plus1DBlock(Layer):
    """y = relu(conv2(relu(conv1(x))) + shortcut(x)) with (2+1)D convolutions.

    The shortcut is the identity when shape is preserved, otherwise a strided
    1x1x1 channel projection.
    """

    def __init__(self, in_channels: int, out_channels: int,
                 spatial_stride=1, temporal_stride=1):
        super().__init__()
        self.in_channels, self.out_channels = in_channels, out_channels
        self.spatial_stride, self.temporal_stride = spatial_stride, temporal_stride
        self.conv1 = Conv2Plus1D(in_channels, out_channels,
                                 spatial_stride=spatial_stride,
                                 temporal_stride=temporal_stride)
        self.conv2 = Conv2Plus1D(out_channels, out_channels)
        self.projecting = (in_channels != out_channels
                           or spatial_stride != 1 or temporal_stride != 1)
        self.params = {}
        for name, layer in (("c1", self.conv1), ("c2", self.conv2)):
            for k in layer.params:
                self.params[f"{name}.{k}"] = layer.params[k]
        if self.projecting:
            self.params["proj.w"] = np.zeros((out_channels, in_channels))
            self.params["proj.b"] = np.zeros(out_channels)
            self.weight_names.add("proj.w")
        self.weight_names |= {f"c1.{k}" for k in self.conv1.weight_names}
        self.weight_names |= {f"c2.{k}" for k in self.conv2.weight_names}
        self.zero_grad()

    def _sync_children(self):
        # children share storage with the flat dict; re-point after any rebind
        for name, layer in (("c1", self.conv1), ("c2", self.conv2)):
            for k in layer.params:
                layer.params[k] = self.params[f"{name}.{k}"]
                layer.grads[k] = self.grads[f"{name}.{k}"]

    def init_params(self, rng):
        self.conv1.init_params(rng)
        self.conv2.init_params(rng)
        for name, layer in (("c1", self.conv1), ("c2", self.conv2)):
            for k in layer.params:
                self.params[f"{name}.{k}"] = layer.params[k]
        if self.projecting:
            self.params["proj.w"] = he_uniform(rng, (self.out_channels, self.in_channels),
                                               self.in_channels)
            self.params["proj.b"] = np.zeros(self.out_channels)

    def zero_grad(self):
        super().zero_grad()
        self.conv1.zero_grad()
        self.conv2.zero_grad()
        self._sync_children()

    def _shortcut(self, x):
        if not self.projecting:
            return x
        xs = x[:, ::self.temporal_stride, ::self.spatial_stride, ::self.spatial_stride]
        self._xs = xs
        w, b = self.params["proj.w"], self.params["proj.b"]
        return np.tensordot(w, xs, axes=([1], [0])) + b[:, None, None, None]

    def forward(self, x, mode="eval"):
        self._sync_children()
        self._x = x
        h = self.conv1.forward(x, mode)
        self._h = h
        h = np.maximum(h, 0.0)
        h = self.conv2.forward(h, mode)
        s = self._shortcut(x)
        if h.shape != s.shape:
            raise DimensionError(f"residual branch {h.shape} vs shortcut {s.shape}")
        self._pre = h + s
        return np.maximum(self._pre, 0.0)

    def backward(self, grad_out):
        g = grad_out * (self._pre > 0.0)
        gb = self.conv2.backward(g)
        gb = gb * (self._h > 0.0)
        gx = self.conv1.backward(gb)
        if self.projecting:
            w = self.params["proj.w"]
            self.grads["proj.w"] += np.tensordot(g, self._xs, axes=([1, 2, 3], [1, 2, 3]))
            self.grads["proj.b"] += g.sum(axis=(1, 2, 3))
            gs = np.tensordot(w.T, g, axes=([1], [0]))
            gfull = np.zeros_like(self._x)
            gfull[:, ::self.temporal_stride, ::self.spatial_stride, ::self.spatial_stride] = gs
            gx = gx + gfull
        else:
            gx = gx + g
        return gx


class Net:
    """Ordered layer stack with a flat, ordered parameter namespace."""

    def __init__(self, layers: list[tuple[str, Layer]]):
        self.layers = layers

    @property
    def params(self) -> dict[str, np.ndarray]:
        out = {}
        for lname, layer in self.layers:
            for pname, arr in layer.params.items():
                out[f"{lname}/{pname}"] = arr
        return out

    @property
    def grads(self) -> dict[str, np.ndarray]:
        out = {}
        for lname, layer in self.layers:
            for pname, arr in layer.grads.items():
                out[f"{lname}/{pname}"] = arr
        return out

    @property
    def weight_names(self) -> set[str]:
        out = set()
        for lname, layer in self.layers:
            out |= {f"{lname}/{p}" for p in layer.weight_names}
        return out

    def set_param(self, name: str, value: np.ndarray):
        lname, pname = name.split("/", 1)
        for ln, layer in self.layers:
            if ln == lname:
                if pname not in layer.params:
                    raise KeyError(name)
                if layer.params[pname].shape != value.shape:
                    raise DimensionError(
                        f"param {name}: shape {value.shape} != {layer.params[pname].shape}")
                layer.params[pname][...] = value
                return
        raise KeyError(name)

    def init_params(self, seed: int):
        rng = np.random.default_rng(seed)
        for _, layer in self.layers:
            layer.init_params(rng)
            layer.zero_grad()

    def zero_grad(self):
        for _, layer in self.layers:
            layer.zero_grad()

    def jitter(self, seed: int, scale: float = 0.05):
        """Nudge every parameter off special points (zero biases put ReLU
        pre-activations exactly on the kink, which breaks finite differences)."""
        rng = np.random.default_rng(seed)
        for p in self.params.values():
            p += rng.normal(0.0, scale, p.shape)

    def reseed_dropout(self, seed: int):
        for i, (_, layer) in enumerate(self.layers):
            if isinstance(layer, Dropout):
                layer.reseed(seed + i)

    def forward(self, x, mode="eval"):
        for _, layer in self.layers:
            x = layer.forward(x, mode)
        return x

    def backward(self, grad_out):
        g = grad_out
        for _, layer in reversed(self.layers):
            g = layer.backward(g)
        return g

    def param_bytes(self) -> bytes:
        return b"".join(np.ascontiguousarray(v).tobytes() for v in self.params.values())
