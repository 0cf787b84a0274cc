"""Layer graph, the two reference architectures, and forward/backward plumbing.

A Network is an ordered list of layers operating on batches (N, H, W, C).
The final layer is always Dense(2) with softmax; backward() takes the
gradient at the pre-softmax logits (the fused softmax+crossentropy form),
which is also what the saliency computation feeds in.
"""

from dataclasses import dataclass, field

import numpy as np

from realbogus.errors import ConfigurationError, DimensionError
from realbogus.nn import ops

DROPOUT_RATE = 0.4


@dataclass
class LayerSpec:
    kind: str                      # Conv2D | MaxPool2D | Dropout | Flatten | Dense
    kernel_size: tuple = None      # Conv2D
    filters: int = None            # Conv2D
    units: int = None              # Dense
    rate: float = None             # Dropout
    activation: str = "none"       # relu | softmax | none


def glorot_uniform(shape, fan_in, fan_out, rng):
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape)


class Layer:
    """Base layer: params/grads are parallel lists, possibly empty."""

    def __init__(self, spec):
        self.spec = spec
        self.params = []
        self.grads = []
        self._cache = None

    def initialize(self, in_shape, rng):
        """Consume the input shape (H, W, C) or (D,), return the output shape."""
        raise NotImplementedError

    def forward(self, x, train, rng=None):
        raise NotImplementedError

    def backward(self, upstream):
        raise NotImplementedError


class Conv2D(Layer):
    def initialize(self, in_shape, rng):
        h, w, c = in_shape
        kh, kw = self.spec.kernel_size
        f = self.spec.filters
        if kh > h or kw > w:
            raise DimensionError(f"kernel {kh}x{kw} exceeds input {h}x{w}")
        fan_in, fan_out = kh * kw * c, kh * kw * f
        self.params = [glorot_uniform((kh, kw, c, f), fan_in, fan_out, rng),
                       np.zeros(f)]
        return (h - kh + 1, w - kw + 1, f)

    def forward(self, x, train, rng=None):
        z = ops.conv2d_forward(x, self.params[0], self.params[1])
        self._cache = (x, z)
        return ops.relu(z) if self.spec.activation == "relu" else z

    def backward(self, upstream, need_input_grad=True):
        x, z = self._cache
        if self.spec.activation == "relu":
            # upstream is owned by this call, so gate it in place
            np.multiply(upstream, z > 0, out=upstream)
        grad_x, gw, gb = ops.conv2d_backward(
            x, self.params[0], upstream, need_input_grad=need_input_grad)
        self.grads = [gw, gb]
        return grad_x


class MaxPool2D(Layer):
    def initialize(self, in_shape, rng):
        h, w, c = in_shape
        return (h // 2, w // 2, c)

    def forward(self, x, train, rng=None):
        out, self._cache = ops.maxpool_forward(x)
        return out

    def backward(self, upstream):
        return ops.maxpool_backward(self._cache, upstream)


class Dropout(Layer):
    def initialize(self, in_shape, rng):
        if not 0.0 <= self.spec.rate < 1.0:
            raise ConfigurationError(f"dropout rate {self.spec.rate} not in [0, 1)")
        return in_shape

    def forward(self, x, train, rng=None):
        out, self._cache = ops.dropout(x, self.spec.rate, train, rng)
        return out

    def backward(self, upstream):
        return ops.dropout_backward(self._cache, upstream)


class Flatten(Layer):
    def initialize(self, in_shape, rng):
        return (int(np.prod(in_shape)),)

    def forward(self, x, train, rng=None):
        self._cache = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, upstream):
        return upstream.reshape(self._cache)


class Dense(Layer):
    def initialize(self, in_shape, rng):
        (d,) = in_shape
        u = self.spec.units
        self.params = [glorot_uniform((d, u), d, u, rng), np.zeros(u)]
        return (u,)

    def forward(self, x, train, rng=None):
        z = ops.dense_forward(x, self.params[0], self.params[1])
        self._cache = (x, z)
        if self.spec.activation == "relu":
            return ops.relu(z)
        if self.spec.activation == "softmax":
            return ops.softmax(z)
        return z

    def backward(self, upstream):
        # For a softmax head the caller supplies the gradient at the logits
        # (fused with the crossentropy), so no jacobian is applied here.
        x, z = self._cache
        if self.spec.activation == "relu":
            upstream = ops.relu_backward(z, upstream)
        grad_x, gw, gb = ops.dense_backward(x, self.params[0], upstream)
        self.grads = [gw, gb]
        return grad_x


_LAYER_CLASSES = {
    "Conv2D": Conv2D,
    "MaxPool2D": MaxPool2D,
    "Dropout": Dropout,
    "Flatten": Flatten,
    "Dense": Dense,
}


class Network:
    """Ordered layer stack with an explicit train/eval mode."""

    def __init__(self, specs, input_shape, seed=0):
        self.input_shape = tuple(input_shape)
        self.dtype = np.float64
        self.mode = "train"
        self.layers = []
        self.layer_shapes = [self.input_shape]
        rng = np.random.default_rng(seed)
        shape = self.input_shape
        for spec in specs:
            layer = _LAYER_CLASSES[spec.kind](spec)
            shape = layer.initialize(shape, rng)
            self.layers.append(layer)
            self.layer_shapes.append(shape)

    @property
    def specs(self):
        return [layer.spec for layer in self.layers]

    def astype(self, dtype):
        """Switch compute precision (float32 trades accuracy for throughput)."""
        dtype = np.dtype(dtype)
        if dtype not in (np.float32, np.float64):
            raise ConfigurationError(f"unsupported dtype {dtype}")
        self.dtype = dtype.type
        for layer in self.layers:
            layer.params = [p.astype(dtype) for p in layer.params]
        return self

    def train_mode(self):
        self.mode = "train"
        return self

    def eval_mode(self):
        self.mode = "eval"
        return self

    def parameters(self):
        return [p for layer in self.layers for p in layer.params]

    def gradients(self):
        return [g for layer in self.layers for g in layer.grads]

    def forward(self, x, rng=None):
        x = np.asarray(x, dtype=self.dtype)
        squeeze = x.ndim == 3
        if squeeze:
            x = x[np.newaxis]
        if x.shape[1:] != self.input_shape:
            raise DimensionError(
                f"input shape {x.shape[1:]} != network input {self.input_shape}")
        train = self.mode == "train"
        if train and any(isinstance(l, Dropout) for l in self.layers) and rng is None:
            raise ConfigurationError("train-mode forward requires an rng for dropout")
        for layer in self.layers:
            x = layer.forward(x, train, rng)
        return x[0] if squeeze else x

    def backward(self, grad_logits, need_input_grad=True):
        """Backpropagate from the pre-softmax logits down to the input.

        With need_input_grad=False the gradient w.r.t. the network input is
        not computed (None is returned); parameter gradients are unaffected.
        This skips the most expensive part of the first convolution's
        backward pass, which only saliency analysis needs.
        """
        g = np.array(grad_logits, dtype=self.dtype)
        squeeze = g.ndim == 1
        if squeeze:
            g = g[np.newaxis]
        for i, layer in zip(range(len(self.layers) - 1, -1, -1), reversed(self.layers)):
            if i == 0 and isinstance(layer, Conv2D):
                g = layer.backward(g, need_input_grad=need_input_grad)
            else:
                g = layer.backward(g)
        if g is None:
            return None
        return g[0] if squeeze else g


def build_dia_architecture(seed=0):
    """Triplet-input model: 12 layers on 51x153x1."""
    specs = [
        LayerSpec("Conv2D", kernel_size=(5, 5), filters=16, activation="relu"),
        LayerSpec("MaxPool2D"),
        LayerSpec("Dropout", rate=DROPOUT_RATE),
        LayerSpec("Conv2D", kernel_size=(5, 5), filters=32, activation="relu"),
        LayerSpec("MaxPool2D"),
        LayerSpec("Dropout", rate=DROPOUT_RATE),
        LayerSpec("Conv2D", kernel_size=(5, 5), filters=64, activation="relu"),
        LayerSpec("MaxPool2D"),
        LayerSpec("Dropout", rate=DROPOUT_RATE),
        LayerSpec("Flatten"),
        LayerSpec("Dense", units=32, activation="relu"),
        LayerSpec("Dense", units=2, activation="softmax"),
    ]
    return Network(specs, (51, 153, 1), seed=seed)


def build_nodia_architecture(seed=0):
    """Pair-input model: 11 layers on 51x102x1, single-filter 7x7 first conv."""
    specs = [
        LayerSpec("Conv2D", kernel_size=(7, 7), filters=1, activation="relu"),
        LayerSpec("MaxPool2D"),
        LayerSpec("Conv2D", kernel_size=(3, 3), filters=16, activation="relu"),
        LayerSpec("MaxPool2D"),
        LayerSpec("Dropout", rate=DROPOUT_RATE),
        LayerSpec("Conv2D", kernel_size=(3, 3), filters=32, activation="relu"),
        LayerSpec("MaxPool2D"),
        LayerSpec("Dropout", rate=DROPOUT_RATE),
        LayerSpec("Flatten"),
        LayerSpec("Dense", units=32, activation="relu"),
        LayerSpec("Dense", units=2, activation="softmax"),
    ]
    return Network(specs, (51, 102, 1), seed=seed)


def build_architecture(variant, seed=0):
    if variant == "dia":
        return build_dia_architecture(seed=seed)
    if variant == "nodia":
        return build_nodia_architecture(seed=seed)
    raise ConfigurationError(f"unknown variant {variant!r}")


def parameter_count(network):
    return sum(p.size for p in network.parameters())


def predict(network, composites):
    """Eval-mode class probabilities for one composite or a batch."""
    if network.mode != "eval":
        raise ConfigurationError("predict requires the network in eval mode")
    return network.forward(composites)
