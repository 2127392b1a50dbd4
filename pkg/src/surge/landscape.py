"""Objective functions: analytic 1-d potentials, a tanh MLP, MSE and cross-entropy."""
from __future__ import annotations

import csv
import json
import struct
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import optimize

from .series_core import InvalidInputError


class ObjectiveFunction:
    """A differentiable objective L: R^dim -> R.

    ``batch`` evaluates many parameter vectors at once (rows of a 2-d
    array); it falls back to a python loop when no vectorised form is given.
    ``bounds`` optionally restricts the domain to a box; outside it the
    objective is +inf.
    """

    def __init__(self, dim: int, fn: Callable, grad: Callable, batch: Optional[Callable] = None,
                 bounds=None, name: str = "objective", batch_grad: Optional[Callable] = None):
        if dim < 1:
            raise InvalidInputError("dim must be positive")
        self.dim = int(dim)
        self._fn = fn
        self._grad = grad
        self._batch = batch
        self._batch_grad = batch_grad
        self.bounds = None if bounds is None else (np.asarray(bounds[0], float), np.asarray(bounds[1], float))
        self.name = name

    def __call__(self, theta) -> float:
        return self.value(theta)

    def value(self, theta) -> float:
        theta = np.asarray(theta, dtype=float)
        if self.bounds is not None and not _inside(theta, self.bounds):
            return np.inf
        return float(self._fn(theta))

    def grad(self, theta) -> np.ndarray:
        return np.asarray(self._grad(np.asarray(theta, dtype=float)), dtype=float).reshape(self.dim)

    def batch(self, thetas) -> np.ndarray:
        thetas = np.asarray(thetas, dtype=float).reshape(-1, self.dim)
        if self._batch is not None:
            out = np.asarray(self._batch(thetas), dtype=float)
        else:
            out = np.array([self._fn(t) for t in thetas], dtype=float)
        if self.bounds is not None:
            lo, hi = self.bounds
            inside = np.all((thetas >= lo) & (thetas <= hi), axis=1)
            out = np.where(inside, out, np.inf)
        return out


    def batch_grad(self, thetas) -> np.ndarray:
        """Gradients at many parameter vectors: (N, dim)."""
        thetas = np.asarray(thetas, dtype=float).reshape(-1, self.dim)
        if self._batch_grad is not None:
            return np.asarray(self._batch_grad(thetas), dtype=float).reshape(-1, self.dim)
        return np.array([self.grad(t) for t in thetas]).reshape(-1, self.dim)


def _inside(theta, bounds):
    lo, hi = bounds
    return bool(np.all(theta >= lo) and np.all(theta <= hi))


def check_gradient(objective: ObjectiveFunction, theta, rtol: float = 1e-4) -> float:
    """Relative error between the analytic gradient and central differences."""
    theta = np.asarray(theta, dtype=float)
    g = objective.grad(theta)
    fd = np.empty_like(theta)
    for i in range(theta.size):
        h = 1e-5 * (1.0 + abs(theta[i]))
        e = np.zeros_like(theta)
        e[i] = h
        fd[i] = (objective.value(theta + e) - objective.value(theta - e)) / (2 * h)
    scale = max(np.linalg.norm(fd), np.linalg.norm(g), 1e-8)
    return float(np.linalg.norm(g - fd) / scale)


# ----------------------------------------------------------------------------
# analytic potentials

TILT = 0.3
TILT_OFFSET = 1.0

_POTENTIALS = {
    # kind: (value, derivative) as polynomials in x, highest power first
    "quadratic": np.array([1.0, 0.0, 0.0]),
    "quartic": np.array([1.0, 0.0, 1.0, 0.0, 0.0]),
    "double_well": np.array([1.0, 0.0, -2.0, 0.0, 1.0]),
    "tilted_double_well": np.array([1.0, 0.0, -2.0, TILT, 1.0 + TILT_OFFSET]),
}


def analytic_potential(kind: str) -> ObjectiveFunction:
    """1-d polynomial potential with a closed-form gradient.

    quadratic x^2, quartic x^2 + x^4, double_well (x^2 - 1)^2 and
    tilted_double_well (x^2 - 1)^2 + 0.3 x + 1.
    """
    if kind not in _POTENTIALS:
        raise InvalidInputError(f"unknown potential {kind!r}")
    c = _POTENTIALS[kind]
    dc = np.polyder(c)
    obj = ObjectiveFunction(
        1,
        lambda th: np.polyval(c, th[0]),
        lambda th: np.array([np.polyval(dc, th[0])]),
        batch=lambda ths: np.polyval(c, ths[:, 0]),
        name=kind,
    )
    obj.kind = kind
    obj.poly = c
    return obj


def constant_objective(value: float, dim: int = 1, bounds=None) -> ObjectiveFunction:
    obj = ObjectiveFunction(
        dim,
        lambda th: value,
        lambda th: np.zeros(dim),
        batch=lambda ths: np.full(ths.shape[0], float(value)),
        bounds=bounds,
        name="constant",
    )
    obj.kind = "constant"
    return obj


def gaussian_objective(dim: int) -> ObjectiveFunction:
    """L(theta) = |theta|^2 / 2."""
    return ObjectiveFunction(
        dim,
        lambda th: 0.5 * th @ th,
        lambda th: th.copy(),
        batch=lambda ths: 0.5 * np.einsum("ij,ij->i", ths, ths),
        name="gaussian",
    )


def critical_points(potential: ObjectiveFunction) -> np.ndarray:
    """Real roots of the gradient of an analytic potential, ascending."""
    kind = getattr(potential, "kind", None)
    if kind not in _POTENTIALS:
        raise InvalidInputError("critical points are only available for analytic potentials")
    dc = np.polyder(potential.poly)
    approx = np.roots(dc)
    guesses = sorted(r.real for r in approx if abs(r.imag) < 1e-8)
    # bracketed refinement on the gradient
    xs = []
    for x0 in guesses:
        lo, hi = x0 - 1e-3, x0 + 1e-3
        flo, fhi = np.polyval(dc, lo), np.polyval(dc, hi)
        if flo * fhi < 0:
            x = optimize.brentq(lambda x: np.polyval(dc, x), lo, hi, xtol=1e-15, rtol=1e-15)
        else:
            x = x0
        if not xs or abs(x - xs[-1]) > 1e-9:
            xs.append(x)
    return np.array(xs)


def critical_values(potential: ObjectiveFunction) -> np.ndarray:
    """Sorted objective values at the critical points."""
    return np.sort(np.polyval(potential.poly, critical_points(potential)))


# ----------------------------------------------------------------------------
# data and models

@dataclass
class Dataset:
    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        if self.x.ndim == 1:
            self.x = self.x[:, None]
        self.y = np.asarray(self.y)
        if self.y.dtype.kind == "f" and self.y.ndim == 1:
            self.y = self.y[:, None]
        if len(self.x) != len(self.y):
            raise InvalidInputError("inputs and targets differ in length")
        if not np.all(np.isfinite(self.x)) or not np.all(np.isfinite(self.y)):
            raise InvalidInputError("dataset entries must be finite")

    @property
    def size(self) -> int:
        return len(self.x)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "y"])
            for xi, yi in zip(self.x[:, 0], self.y.reshape(len(self.y), -1)[:, 0]):
                w.writerow([format(xi, ".17g"), format(yi, ".17g")])

    @classmethod
    def from_csv(cls, path) -> "Dataset":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(data[:, 0], data[:, 1])


def target_function(x):
    x = np.asarray(x, dtype=float)
    return np.sin(2 * x) + 0.5 * np.cos(5 * x) + 0.3 * np.sin(10 * x) + 0.1 * x**2


def synthetic_1d_dataset(n_points: int = 64, x_range=(-2.0, 2.0), seed: int = 0) -> Dataset:
    if n_points < 2:
        raise InvalidInputError("need at least 2 points")
    rng = np.random.default_rng(seed)
    x = np.sort(rng.uniform(x_range[0], x_range[1], size=n_points))
    return Dataset(x, target_function(x))


class MLP:
    """Fully connected tanh network with a linear output layer.

    Parameters live in one flat vector, ordered layer by layer as
    (W row-major, b).  W for a layer has shape (n_out, n_in).
    """

    def __init__(self, layer_sizes):
        self.layer_sizes = tuple(int(n) for n in layer_sizes)
        if len(self.layer_sizes) < 2 or min(self.layer_sizes) < 1:
            raise InvalidInputError("need at least input and output sizes")
        self.shapes = [(o, i) for i, o in zip(self.layer_sizes[:-1], self.layer_sizes[1:])]
        self.n_params = sum(o * i + o for o, i in self.shapes)

    def init(self, seed: int = 0) -> np.ndarray:
        rng = np.random.default_rng(seed)
        parts = []
        for o, i in self.shapes:
            bound = 1.0 / np.sqrt(i)
            parts.append(rng.uniform(-bound, bound, size=o * i))
            parts.append(rng.uniform(-bound, bound, size=o))
        return np.concatenate(parts)

    def unflatten(self, params):
        params = np.asarray(params, dtype=float)
        if params.shape[-1] != self.n_params:
            raise InvalidInputError(f"expected {self.n_params} parameters, got {params.shape[-1]}")
        out, k = [], 0
        lead = params.shape[:-1]
        for o, i in self.shapes:
            W = params[..., k:k + o * i].reshape(*lead, o, i)
            k += o * i
            b = params[..., k:k + o]
            k += o
            out.append((W, b))
        return out

    def flatten(self, layers) -> np.ndarray:
        return np.concatenate([np.concatenate([W.ravel(), b.ravel()]) for W, b in layers])

    def forward(self, params, x):
        """Returns outputs (K, n_out) and the per-layer activations for backprop."""
        h = np.asarray(x, dtype=float)
        acts = [h]
        layers = self.unflatten(params)
        for idx, (W, b) in enumerate(layers):
            z = h @ W.T + b
            h = z if idx == len(layers) - 1 else np.tanh(z)
            acts.append(h)
        return h, acts

    def backward(self, params, acts, dout) -> np.ndarray:
        layers = self.unflatten(params)
        grads = [None] * len(layers)
        delta = dout
        for idx in range(len(layers) - 1, -1, -1):
            W, _ = layers[idx]
            grads[idx] = (delta.T @ acts[idx], delta.sum(axis=0))
            if idx > 0:
                delta = (delta @ W) * (1.0 - acts[idx] ** 2)
        return self.flatten(grads)

    def forward_batch(self, params_batch, x, return_acts: bool = False):
        """Outputs for many parameter vectors at once: (N, K, n_out)."""
        h = np.broadcast_to(np.asarray(x, dtype=float), (params_batch.shape[0],) + np.shape(x))
        acts = [h]
        layers = self.unflatten(params_batch)
        for idx, (W, b) in enumerate(layers):
            z = h @ np.swapaxes(W, 1, 2) + b[:, None, :]
            h = z if idx == len(layers) - 1 else np.tanh(z)
            acts.append(h)
        return (h, acts) if return_acts else h

    def backward_batch(self, params_batch, acts, dout) -> np.ndarray:
        """Per-vector gradients (N, n_params) given forward_batch activations."""
        layers = self.unflatten(params_batch)
        parts = [None] * len(layers)
        delta = dout
        for idx in range(len(layers) - 1, -1, -1):
            W, _ = layers[idx]
            n = delta.shape[0]
            parts[idx] = np.concatenate([(np.swapaxes(delta, 1, 2) @ acts[idx]).reshape(n, -1),
                                         delta.sum(axis=1)], axis=1)
            if idx > 0:
                delta = (delta @ W) * (1.0 - acts[idx] ** 2)
        return np.concatenate(parts, axis=1)


def save_params(path, params, layer_sizes):
    """Flat float64 vector preceded by a length-prefixed JSON shape header."""
    header = json.dumps({"layer_sizes": list(layer_sizes), "n_params": int(len(params)),
                         "dtype": "<f8"}).encode()
    with open(path, "wb") as fh:
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        fh.write(np.asarray(params, dtype="<f8").tobytes())


def load_params(path):
    with open(path, "rb") as fh:
        (n,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(n))
        params = np.frombuffer(fh.read(), dtype="<f8").copy()
    if params.size != header["n_params"]:
        raise InvalidInputError("parameter file is truncated")
    return params, tuple(header["layer_sizes"])


def mse_objective(model: MLP, data: Dataset) -> ObjectiveFunction:
    """L = 1/(2K) sum_k |f(x_k) - y_k|^2."""
    y = np.asarray(data.y, dtype=float)
    if y.ndim != 2 or y.shape[1] != model.layer_sizes[-1]:
        raise InvalidInputError("model output width does not match target dimension")
    if data.x.shape[1] != model.layer_sizes[0]:
        raise InvalidInputError("model input width does not match data")
    K = data.size

    def fn(p):
        out, _ = model.forward(p, data.x)
        return 0.5 * np.sum((out - y) ** 2) / K

    def grad(p):
        out, acts = model.forward(p, data.x)
        return model.backward(p, acts, (out - y) / K)

    def batch(ps):
        out = model.forward_batch(ps, data.x)
        return 0.5 * np.sum((out - y) ** 2, axis=(1, 2)) / K

    def batch_grad(ps):
        out, acts = model.forward_batch(ps, data.x, return_acts=True)
        return model.backward_batch(ps, acts, (out - y) / K)

    obj = ObjectiveFunction(model.n_params, fn, grad, batch=batch, name="mse", batch_grad=batch_grad)
    obj.model = model
    return obj


def _log_softmax(z):
    z = z - z.max(axis=-1, keepdims=True)
    return z - np.log(np.sum(np.exp(z), axis=-1, keepdims=True))


def cross_entropy_objective(model: MLP, data: Dataset) -> ObjectiveFunction:
    """L = -sum_i log softmax(f(x_i))[y_i] (summed, not averaged)."""
    labels = np.asarray(data.y).reshape(-1)
    if labels.dtype.kind == "f":
        if not np.all(labels == np.round(labels)):
            raise InvalidInputError("cross-entropy targets must be class indices")
        labels = labels.astype(int)
    n_classes = model.layer_sizes[-1]
    if labels.size and (labels.min() < 0 or labels.max() >= n_classes):
        raise InvalidInputError("class index out of range")
    if data.x.shape[1] != model.layer_sizes[0]:
        raise InvalidInputError("model input width does not match data")
    rows = np.arange(labels.size)

    def fn(p):
        out, _ = model.forward(p, data.x)
        return -np.sum(_log_softmax(out)[rows, labels])

    def grad(p):
        out, acts = model.forward(p, data.x)
        probs = np.exp(_log_softmax(out))
        probs[rows, labels] -= 1.0
        return model.backward(p, acts, probs)

    def batch(ps):
        out = model.forward_batch(ps, data.x)
        return -np.sum(_log_softmax(out)[:, rows, labels], axis=1)

    def batch_grad(ps):
        out, acts = model.forward_batch(ps, data.x, return_acts=True)
        probs = np.exp(_log_softmax(out))
        probs[:, rows, labels] -= 1.0
        return model.backward_batch(ps, acts, probs)

    obj = ObjectiveFunction(model.n_params, fn, grad, batch=batch, name="cross_entropy",
                            batch_grad=batch_grad)
    obj.model = model
    return obj
