"""Dense feed-forward network: linear layers, ReLU, batch normalization,
and late-feature injection, with hand-written reverse-mode gradients.

The input matrix carries the base features first and the late-injected
columns last; late columns bypass the early layers and are concatenated to
the activations feeding the penultimate layer.  The final (head) layer is
always linear with no batch norm.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ACTIVATIONS = ("relu", "identity")


@dataclass(frozen=True)
class LayerSpec:
    in_dim: int
    out_dim: int
    activation: str = "relu"
    batch_norm: bool = False

    def __post_init__(self):
        if self.in_dim < 1 or self.out_dim < 1:
            raise ValueError("layer dimensions must be >= 1")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")


@dataclass(frozen=True)
class NetworkSpec:
    """Ordered layer specs plus the late-injection column count.

    ``late_features`` input columns skip the early layers and are
    concatenated immediately before the penultimate layer, whose in_dim
    must account for them.  The head (last layer) must be identity with
    no batch norm and out_dim equal to head_dim.
    """

    layers: tuple[LayerSpec, ...]
    late_features: int = 0
    head_dim: int = 4

    def __post_init__(self):
        if not self.layers:
            raise ValueError("network needs at least one layer")
        if self.late_features < 0:
            raise ValueError("late_features must be >= 0")
        if self.late_features > 0 and len(self.layers) < 2:
            raise ValueError("late-feature injection needs at least two layers")
        head = self.layers[-1]
        if head.activation != "identity" or head.batch_norm:
            raise ValueError("head layer must be identity without batch norm")
        if head.out_dim != self.head_dim:
            raise ValueError(
                f"head out_dim {head.out_dim} != head_dim {self.head_dim}"
            )
        penult = len(self.layers) - 2
        for i in range(1, len(self.layers)):
            expected = self.layers[i - 1].out_dim
            if i == penult:
                expected += self.late_features
            if self.layers[i].in_dim != expected:
                raise ValueError(
                    f"layer {i} expects in_dim {expected}, got {self.layers[i].in_dim}"
                )

    @property
    def base_features(self) -> int:
        first = self.layers[0].in_dim
        if len(self.layers) >= 2 and len(self.layers) - 2 == 0:
            first -= self.late_features
        return first

    @property
    def input_dim(self) -> int:
        return self.base_features + self.late_features


def dense_spec(in_features: int, hidden: list[int] | tuple[int, ...], head_dim: int,
               late_features: int = 0, batch_norm: bool = True) -> NetworkSpec:
    """Build the spec for a fully connected ReLU stack with a linear head."""
    base = in_features - late_features
    if base < 1:
        raise ValueError("at least one base (non-late) feature is required")
    dims = [base] + list(hidden) + [head_dim]
    n_layers = len(dims) - 1
    layers = []
    for i in range(n_layers):
        in_dim = dims[i]
        if i == n_layers - 2:
            in_dim += late_features
        is_head = i == n_layers - 1
        layers.append(
            LayerSpec(
                in_dim=in_dim,
                out_dim=dims[i + 1],
                activation="identity" if is_head else "relu",
                batch_norm=batch_norm and not is_head,
            )
        )
    return NetworkSpec(tuple(layers), late_features=late_features, head_dim=head_dim)


class BatchNorm:
    """Per-feature batch normalization with running statistics.

    Train mode normalizes with the batch mean and (biased) batch variance
    and updates the running statistics with momentum
    ``running = (1 - m) * running + m * batch`` (unbiased variance for the
    running update).  Eval mode normalizes with the running statistics.
    """

    def __init__(self, dim: int, momentum: float = 0.1, eps: float = 1e-5):
        self.dim = dim
        self.momentum = momentum
        self.eps = eps
        self.gamma = np.ones(dim)
        self.beta = np.zeros(dim)
        self.running_mean = np.zeros(dim)
        self.running_var = np.ones(dim)
        self._cache = None

    def forward(self, x: np.ndarray, train: bool) -> np.ndarray:
        if train:
            n = x.shape[0]
            mean = x.mean(axis=0)
            centered = x - mean
            var = np.mean(centered * centered, axis=0)
            inv_std = 1.0 / np.sqrt(var + self.eps)
            x_hat = centered * inv_std
            m = self.momentum
            self.running_mean = (1.0 - m) * self.running_mean + m * mean
            unbiased = var * n / max(n - 1, 1)
            self.running_var = (1.0 - m) * self.running_var + m * unbiased
            self._cache = (centered, inv_std, x_hat)
        else:
            x_hat = (x - self.running_mean) / np.sqrt(self.running_var + self.eps)
            self._cache = None
        return self.gamma * x_hat + self.beta

    def backward(self, dout: np.ndarray):
        if self._cache is None:
            raise RuntimeError("batch-norm backward without a cached train forward")
        centered, inv_std, x_hat = self._cache
        n = dout.shape[0]
        dgamma = np.sum(dout * x_hat, axis=0)
        dbeta = np.sum(dout, axis=0)
        dx_hat = dout * self.gamma
        # dx through mean and variance of the batch
        dvar = np.sum(dx_hat * centered, axis=0) * (-0.5) * inv_std ** 3
        dmean = -np.sum(dx_hat, axis=0) * inv_std
        dx = dx_hat * inv_std + (2.0 / n) * dvar * centered + dmean / n
        return dx, dgamma, dbeta


class Linear:
    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator):
        bound = np.sqrt(6.0 / in_dim)
        self.w = rng.uniform(-bound, bound, size=(in_dim, out_dim))
        self.b = np.zeros(out_dim)
        self._x = None

    def forward(self, x: np.ndarray, cache: bool) -> np.ndarray:
        self._x = x if cache else None
        return x @ self.w + self.b

    def backward(self, dout: np.ndarray):
        if self._x is None:
            raise RuntimeError("linear backward without a cached forward")
        dw = self._x.T @ dout
        db = np.sum(dout, axis=0)
        dx = dout @ self.w.T
        return dx, dw, db


class Network:
    """Feed-forward network assembled from a NetworkSpec.

    forward(X, train=True) caches activations for a following backward();
    forward in eval mode uses batch-norm running statistics and caches
    nothing.  Parameters are float64 throughout and initialization is
    deterministic for a fixed seed.
    """

    def __init__(self, spec: NetworkSpec, seed: int = 0):
        self.spec = spec
        rng = np.random.default_rng(seed)
        self.linears: list[Linear] = []
        self.norms: list[BatchNorm | None] = []
        for layer in spec.layers:
            self.linears.append(Linear(layer.in_dim, layer.out_dim, rng))
            self.norms.append(BatchNorm(layer.out_dim) if layer.batch_norm else None)
        self._relu_masks: list[np.ndarray | None] = [None] * len(spec.layers)
        self._trained_forward = False

    # -- parameter access ------------------------------------------------
    def parameters(self) -> list[np.ndarray]:
        params = []
        for lin, bn in zip(self.linears, self.norms):
            params.extend([lin.w, lin.b])
            if bn is not None:
                params.extend([bn.gamma, bn.beta])
        return params

    def get_state(self) -> list[np.ndarray]:
        """Copies of all learned parameters plus running statistics."""
        state = [p.copy() for p in self.parameters()]
        for bn in self.norms:
            if bn is not None:
                state.extend([bn.running_mean.copy(), bn.running_var.copy()])
        return state

    def set_state(self, state: list[np.ndarray]) -> None:
        params = self.parameters()
        for p, s in zip(params, state[: len(params)]):
            p[...] = s
        rest = state[len(params):]
        i = 0
        for bn in self.norms:
            if bn is not None:
                bn.running_mean[...] = rest[i]
                bn.running_var[...] = rest[i + 1]
                i += 2

    # -- forward / backward ----------------------------------------------
    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim != 2 or x.shape[1] != self.spec.input_dim:
            raise ValueError(
                f"expected input of shape (n, {self.spec.input_dim}), got {x.shape}"
            )
        late = self.spec.late_features
        base = self.spec.base_features
        h = x[:, :base]
        x_late = x[:, base:]
        penult = len(self.spec.layers) - 2
        for i, layer in enumerate(self.spec.layers):
            if i == penult and late > 0:
                h = np.concatenate([h, x_late], axis=1)
            z = self.linears[i].forward(h, cache=train)
            bn = self.norms[i]
            if bn is not None:
                z = bn.forward(z, train=train)
            if layer.activation == "relu":
                mask = z > 0
                h = z * mask
                self._relu_masks[i] = mask if train else None
            else:
                h = z
                self._relu_masks[i] = None
        self._trained_forward = train
        return h

    def backward(self, head_grad: np.ndarray) -> list[np.ndarray]:
        """Gradients for every parameter given d(loss)/d(head).

        Returns arrays aligned with parameters().  Requires a preceding
        train-mode forward on the same batch.
        """
        if not self._trained_forward:
            raise RuntimeError("backward requires a train-mode forward first")
        grads: dict[int, list[np.ndarray]] = {}
        d = np.asarray(head_grad, dtype=float)
        penult = len(self.spec.layers) - 2
        for i in range(len(self.spec.layers) - 1, -1, -1):
            layer = self.spec.layers[i]
            if layer.activation == "relu":
                d = d * self._relu_masks[i]
            bn = self.norms[i]
            if bn is not None:
                d, dgamma, dbeta = bn.backward(d)
            dx, dw, db = self.linears[i].backward(d)
            entry = [dw, db]
            if bn is not None:
                entry.extend([dgamma, dbeta])
            grads[i] = entry
            if i == penult and self.spec.late_features > 0:
                dx = dx[:, : -self.spec.late_features]
            d = dx
        flat: list[np.ndarray] = []
        for i in range(len(self.spec.layers)):
            flat.extend(grads[i])
        return flat
