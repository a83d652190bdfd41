"""Finite fully-connected networks: evaluation, gradients, and structural transforms.

Networks are stored bias-free: the input carries an explicit trailing ``1``
coordinate, so a depth-``L`` network is just a chain of ``L`` weight matrices
with the activation applied after every matrix except the last.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

__all__ = [
    "ActivationSpec",
    "BiasedNet",
    "NetParams",
    "UnsupportedActivationError",
    "WidthVector",
    "absorb_bias",
    "backprop",
    "forward",
    "forward_biased",
    "load_network",
    "max_nondecreasing_component",
    "network_from_json",
    "network_to_json",
    "normalize_activation",
    "save_network",
]

# Candidate probe points for constant-carrier units; the first one with a
# nonzero activation value is used.
_CARRIER_PROBES = (1.0, -1.0, 0.5, 2.0, -0.5, -2.0)


class UnsupportedActivationError(RuntimeError):
    """The requested operation needs a capability this activation lacks."""


@dataclass(frozen=True)
class ActivationSpec:
    """Scalar activation with a known Lipschitz constant.

    ``kind`` is one of ``relu``, ``identity``, ``leaky_relu`` or
    ``tabulated``.  Tabulated activations are piecewise-linear interpolants
    over a user grid (constant beyond the endpoints), with the Lipschitz
    constant taken as the maximum absolute segment slope.
    """

    kind: str
    lipschitz: float
    value_at_zero: float
    alpha: float = 0.0
    grid: tuple[tuple[float, ...], tuple[float, ...]] | None = None
    differentiable: bool = True

    def __post_init__(self) -> None:
        if self.lipschitz <= 0:
            raise ValueError("Lipschitz constant must be positive")

    @classmethod
    def relu(cls) -> "ActivationSpec":
        return cls("relu", 1.0, 0.0)

    @classmethod
    def identity(cls) -> "ActivationSpec":
        return cls("identity", 1.0, 0.0)

    @classmethod
    def leaky_relu(cls, alpha: float) -> "ActivationSpec":
        if alpha <= 0:
            raise ValueError("leaky slope must be positive")
        return cls("leaky_relu", max(1.0, alpha), 0.0, alpha=alpha)

    @classmethod
    def tabulated(
        cls,
        xs: Sequence[float],
        ys: Sequence[float],
        differentiable: bool = True,
    ) -> "ActivationSpec":
        xs = tuple(float(v) for v in xs)
        ys = tuple(float(v) for v in ys)
        if len(xs) < 2 or len(xs) != len(ys):
            raise ValueError("need matching grids with at least two knots")
        if any(b <= a for a, b in zip(xs, xs[1:])):
            raise ValueError("grid must be strictly increasing")
        slopes = np.diff(ys) / np.diff(xs)
        lip = float(np.max(np.abs(slopes)))
        if lip == 0.0:
            raise ValueError("constant table has zero Lipschitz constant")
        sigma0 = float(np.interp(0.0, xs, ys))
        return cls("tabulated", lip, sigma0, grid=(xs, ys), differentiable=differentiable)

    @property
    def normalized(self) -> bool:
        return self.value_at_zero == 0.0

    def __call__(self, x):
        x = np.asarray(x, dtype=np.float64)
        if self.kind == "relu":
            return np.maximum(x, 0.0)
        if self.kind == "identity":
            return x
        if self.kind == "leaky_relu":
            return np.where(x > 0, x, self.alpha * x)
        if self.kind == "tabulated":
            xs, ys = self.grid
            return np.interp(x, xs, ys)
        raise ValueError(f"unknown activation kind {self.kind!r}")

    def derivative(self, x):
        """Almost-everywhere derivative; at the relu kink the value is 0."""
        if not self.differentiable:
            raise UnsupportedActivationError(
                "tabulated activation was built without derivative support"
            )
        x = np.asarray(x, dtype=np.float64)
        if self.kind == "relu":
            return (x > 0).astype(np.float64)
        if self.kind == "identity":
            return np.ones_like(x)
        if self.kind == "leaky_relu":
            return np.where(x > 0, 1.0, self.alpha)
        if self.kind == "tabulated":
            xs, ys = self.grid
            xs_a = np.asarray(xs)
            slopes = np.diff(ys) / np.diff(xs_a)
            seg = np.clip(np.searchsorted(xs_a, x, side="right") - 1, 0, len(xs) - 2)
            out = slopes[seg]
            return np.where((x < xs[0]) | (x > xs[-1]), 0.0, out)
        raise ValueError(f"unknown activation kind {self.kind!r}")

    def shifted_to_zero(self) -> "ActivationSpec":
        """Return the same activation minus its value at zero."""
        if self.normalized:
            return self
        xs, ys = self.grid
        shifted = tuple(y - self.value_at_zero for y in ys)
        return ActivationSpec(
            "tabulated",
            self.lipschitz,
            0.0,
            grid=(xs, shifted),
            differentiable=self.differentiable,
        )

    def as_dict(self) -> dict:
        d = {"kind": self.kind, "L_sigma": self.lipschitz, "sigma0": self.value_at_zero}
        if self.kind == "leaky_relu":
            d["alpha"] = self.alpha
        if self.grid is not None:
            d["grid_x"] = list(self.grid[0])
            d["grid_y"] = list(self.grid[1])
            d["differentiable"] = self.differentiable
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ActivationSpec":
        kind = d["kind"]
        if kind == "relu":
            return cls.relu()
        if kind == "identity":
            return cls.identity()
        if kind == "leaky_relu":
            return cls.leaky_relu(d["alpha"])
        if kind == "tabulated":
            return cls.tabulated(d["grid_x"], d["grid_y"], d.get("differentiable", True))
        raise ValueError(f"unknown activation kind {kind!r}")


@dataclass(frozen=True)
class WidthVector:
    """Hidden-layer sizes of a network, with their max and min."""

    widths: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.widths) < 1:
            raise ValueError("need at least one hidden layer")
        if any(int(w) != w or w < 1 for w in self.widths):
            raise ValueError("widths must be integers >= 1")
        object.__setattr__(self, "widths", tuple(int(w) for w in self.widths))

    @classmethod
    def of(cls, ws) -> "WidthVector":
        if isinstance(ws, WidthVector):
            return ws
        if isinstance(ws, int):
            return cls((ws,))
        return cls(tuple(ws))

    @property
    def m(self) -> int:
        return max(self.widths)

    @property
    def b(self) -> int:
        return min(self.widths)

    def product(self) -> int:
        p = 1
        for w in self.widths:
            p *= w
        return p

    def __len__(self) -> int:
        return len(self.widths)

    def __iter__(self):
        return iter(self.widths)

    def __getitem__(self, i):
        return self.widths[i]


def _freeze(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, dtype=np.float64, order="C", copy=True)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class NetParams:
    """All weight matrices of a bias-absorbed network.

    ``layers[0]`` has shape ``(m1, d+1)``, middle matrices chain
    ``(m_l, m_{l-1})``, and the last entry is the output row ``(1, m_{L-1})``.
    Arrays are stored read-only; instances are safe to share.
    """

    layers: tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        if len(self.layers) < 2:
            raise ValueError("depth must be at least 2")
        frozen = tuple(_freeze(w) for w in self.layers)
        for w in frozen:
            if w.ndim != 2:
                raise ValueError("every layer must be a matrix")
            if not np.all(np.isfinite(w)):
                raise ValueError("weights must be finite")
        for lo, hi in zip(frozen, frozen[1:]):
            if hi.shape[1] != lo.shape[0]:
                raise ValueError(
                    f"shape chain broken: {hi.shape} cannot follow {lo.shape}"
                )
        if frozen[-1].shape[0] != 1:
            raise ValueError("output layer must be a single row")
        if frozen[0].shape[1] < 2:
            raise ValueError("first layer needs the bias column (d+1 >= 2)")
        object.__setattr__(self, "layers", frozen)

    @classmethod
    def from_arrays(cls, arrays: Sequence[np.ndarray]) -> "NetParams":
        return cls(tuple(np.asarray(a, dtype=np.float64) for a in arrays))

    @property
    def depth(self) -> int:
        return len(self.layers)

    @property
    def input_dim(self) -> int:
        return self.layers[0].shape[1] - 1

    @property
    def in_size(self) -> int:
        """Length of the vectors the network consumes (``d+1``)."""
        return self.layers[0].shape[1]

    @property
    def width_vector(self) -> WidthVector:
        return WidthVector(tuple(w.shape[0] for w in self.layers[:-1]))


def _as_layers(params) -> tuple[np.ndarray, ...]:
    if isinstance(params, NetParams):
        return params.layers
    return tuple(params)


def forward(params, act: ActivationSpec, inputs) -> np.ndarray:
    """Evaluate the network on a batch of ``(d+1)``-vectors.

    ``params`` may be a :class:`NetParams` or a raw sequence of layer
    matrices (fast path used inside optimization loops).
    """
    layers = _as_layers(params)
    x = np.asarray(inputs, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.shape[1] != layers[0].shape[1]:
        raise ValueError(
            f"inputs have {x.shape[1]} coordinates, first layer expects "
            f"{layers[0].shape[1]}"
        )
    h = x
    for w in layers[:-1]:
        h = act(h @ w.T)
    out = (h @ layers[-1].T).ravel()
    return out[0] if single else out


def backprop(params, act: ActivationSpec, inputs, upstream) -> list[np.ndarray]:
    """Gradient of ``sum_i upstream_i * f(x_i)`` with respect to every weight.

    Returns matrices shaped exactly like the network layers.  Requires an
    activation with an almost-everywhere derivative.
    """
    layers = _as_layers(params)
    x = np.asarray(inputs, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    u = np.asarray(upstream, dtype=np.float64).ravel()
    if u.shape[0] != x.shape[0]:
        raise ValueError("one upstream value per sample is required")

    hs = [x]
    zs = []
    h = x
    for w in layers[:-1]:
        z = h @ w.T
        zs.append(z)
        h = act(z)
        hs.append(h)

    depth = len(layers)
    grads: list[np.ndarray] = [np.empty(0)] * depth
    grads[-1] = (u @ hs[-1]).reshape(1, -1)
    delta = np.outer(u, layers[-1].ravel()) * act.derivative(zs[-1])
    for k in range(depth - 2, -1, -1):
        grads[k] = delta.T @ hs[k]
        if k > 0:
            delta = (delta @ layers[k]) * act.derivative(zs[k - 1])
    return grads


# ---------------------------------------------------------------------------
# Structural transforms
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BiasedNet:
    """Conventional network with per-layer bias vectors over raw ``d`` inputs."""

    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]
    output_bias: float = 0.0

    def __post_init__(self) -> None:
        ws = tuple(_freeze(w) for w in self.weights)
        bs = tuple(_freeze(np.atleast_1d(b)).ravel() for b in self.biases)
        if len(ws) < 2:
            raise ValueError("depth must be at least 2")
        if len(bs) != len(ws) - 1:
            raise ValueError("one bias vector per hidden layer is required")
        for w, b in zip(ws[:-1], bs):
            if b.shape[0] != w.shape[0]:
                raise ValueError("bias length must match layer width")
        object.__setattr__(self, "weights", ws)
        object.__setattr__(self, "biases", bs)

    @property
    def depth(self) -> int:
        return len(self.weights)

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[1]


def forward_biased(net: BiasedNet, act: ActivationSpec, x_raw) -> np.ndarray:
    """Evaluate a conventional biased network on raw ``d``-vectors."""
    x = np.asarray(x_raw, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    h = x
    for w, b in zip(net.weights[:-1], net.biases):
        h = act(h @ w.T + b)
    out = (h @ net.weights[-1].T).ravel() + net.output_bias
    return out[0] if single else out


def _carrier_input(act: ActivationSpec, prev_value: float) -> tuple[float, float]:
    """Incoming weight and resulting value for a constant-carrier unit."""
    for probe in _CARRIER_PROBES:
        val = float(act(probe))
        if val != 0.0:
            return probe / prev_value, val
    raise UnsupportedActivationError(
        "activation vanishes on all carrier probe points"
    )


def absorb_bias(net: BiasedNet, act: ActivationSpec) -> NetParams:
    """Rewrite a biased network over inputs ``(x, 1)`` with no bias vectors.

    First-layer biases move into the appended input coordinate.  Deeper
    biases ride on a pass-through unit appended to each layer that feeds
    one (value 1 for the relu family), so hidden layers ``1..L-2`` gain a
    unit, and the last hidden layer gains one only when there is an output
    bias.  Outputs agree with the original network on every ``x``.
    """
    depth = net.depth
    need_carrier = [l <= depth - 2 for l in range(1, depth)]
    if net.output_bias != 0.0:
        need_carrier[depth - 2] = True

    layers: list[np.ndarray] = []
    first = np.hstack([net.weights[0], net.biases[0][:, None]])
    carrier_val = None
    if need_carrier[0]:
        u, carrier_val = _carrier_input(act, 1.0)
        row = np.zeros((1, first.shape[1]))
        row[0, -1] = u
        first = np.vstack([first, row])
    layers.append(first)

    for l in range(1, depth - 1):
        w, b = net.weights[l], net.biases[l]
        prev_cols = layers[-1].shape[0]
        block = np.zeros((w.shape[0], prev_cols))
        block[:, : w.shape[1]] = w
        block[:, -1] = b / carrier_val
        if need_carrier[l]:
            u, carrier_val = _carrier_input(act, carrier_val)
            row = np.zeros((1, prev_cols))
            row[0, -1] = u
            block = np.vstack([block, row])
        layers.append(block)

    a = net.weights[-1]
    prev_cols = layers[-1].shape[0]
    out = np.zeros((1, prev_cols))
    out[0, : a.shape[1]] = a
    if net.output_bias != 0.0:
        out[0, -1] = net.output_bias / carrier_val
    layers.append(out)
    return NetParams(tuple(layers))


def normalize_activation(
    params: NetParams, act: ActivationSpec
) -> tuple[NetParams, ActivationSpec]:
    """Rewrite a network so its activation vanishes at zero.

    Uses the shifted activation plus one constant-carrier unit per hidden
    layer that re-injects the lost offset into the following layer.  A
    network whose activation already vanishes at zero is returned as is.
    """
    if act.normalized:
        return params, act
    s0 = act.value_at_zero
    act2 = act.shifted_to_zero()

    layers = params.layers
    new_layers: list[np.ndarray] = []

    u, carrier_val = _carrier_input(act2, 1.0)
    first = np.vstack([layers[0], np.zeros((1, layers[0].shape[1]))])
    first[-1, -1] = u
    new_layers.append(first)

    for w in layers[1:-1]:
        rows, cols = w.shape
        block = np.zeros((rows + 1, cols + 1))
        block[:rows, :cols] = w
        block[:rows, -1] = s0 * w.sum(axis=1) / carrier_val
        u, nxt = _carrier_input(act2, carrier_val)
        block[-1, -1] = u
        carrier_val = nxt
        new_layers.append(block)

    a = layers[-1]
    out = np.zeros((1, a.shape[1] + 1))
    out[0, : a.shape[1]] = a
    out[0, -1] = s0 * a.sum() / carrier_val
    new_layers.append(out)
    return NetParams(tuple(new_layers)), act2


def max_nondecreasing_component(widths) -> WidthVector:
    """Largest elementwise nondecreasing minorant of a width vector.

    Repeatedly locates the minimum of the remaining suffix (ties resolved
    toward the largest index), fills the prefix with it, and recurses on
    the rest.
    """
    wv = WidthVector.of(widths)
    ws = list(wv.widths)
    out: list[int] = []
    start = 0
    while start < len(ws):
        seg = ws[start:]
        mval = min(seg)
        idx = max(i for i, v in enumerate(seg) if v == mval)
        out.extend([mval] * (idx + 1))
        start += idx + 1
    return WidthVector(tuple(out))


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def network_to_json(params: NetParams, act: ActivationSpec) -> str:
    doc = {
        "depth": params.depth,
        "input_dim": params.input_dim,
        "widths": list(params.width_vector.widths),
        "activation": act.as_dict(),
        "layers": [w.tolist() for w in params.layers],
    }
    return json.dumps(doc, sort_keys=True)


def network_from_json(text: str) -> tuple[NetParams, ActivationSpec]:
    doc = json.loads(text)
    params = NetParams.from_arrays([np.array(w, dtype=np.float64) for w in doc["layers"]])
    act = ActivationSpec.from_dict(doc["activation"])
    if params.depth != doc["depth"] or params.input_dim != doc["input_dim"]:
        raise ValueError("serialized header disagrees with layer shapes")
    return params, act


def save_network(path, params: NetParams, act: ActivationSpec) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(network_to_json(params, act))
        fh.write("\n")


def load_network(path) -> tuple[NetParams, ActivationSpec]:
    with open(path) as fh:
        return network_from_json(fh.read())
