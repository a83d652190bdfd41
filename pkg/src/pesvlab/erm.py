"""Synthetic regression data, loss models, and penalized subgradient training."""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

from . import norms
from .netcore import (
    ActivationSpec,
    NetParams,
    WidthVector,
    backprop,
    forward,
    network_to_json,
)

__all__ = [
    "Dataset",
    "DivergenceError",
    "LossSpec",
    "OptimizerConfig",
    "Penalty",
    "TeacherSpec",
    "TrainResult",
    "empirical_error",
    "generalization_error_mc",
    "init_params",
    "load_dataset",
    "objective",
    "sample_dataset",
    "save_dataset",
    "train",
]

_SQRT2 = math.sqrt(2.0)


class DivergenceError(RuntimeError):
    """Training hit a non-finite objective; carries the last finite iterate."""

    def __init__(self, message: str, last_finite: NetParams):
        super().__init__(message)
        self.last_finite = last_finite


@dataclass(frozen=True)
class LossSpec:
    """Per-sample loss with the regularity constants of the error analysis.

    ``L0`` bounds the joint Lipschitz constant of the loss in ``(f, y)``,
    ``L1y`` the one of its ``y``-derivative, ``B`` the second ``y``-derivative,
    and ``gamma`` the strong-convexity modulus in the prediction; all taken
    over the working range ``|f|, |y| <= range_bound``.  The loss vanishes on
    the diagonal (perfect prediction of a clean target costs zero).
    """

    kind: str
    L0: float
    L1y: float
    B: float
    gamma: float
    range_bound: float
    delta: float = 0.0

    @classmethod
    def mse(cls, range_bound: float) -> "LossSpec":
        """Half squared error.  On ``|f|,|y| <= R`` the joint gradient has
        norm at most ``2 sqrt(2) R``; the ``y``-derivative is ``sqrt(2)``-
        Lipschitz in the pair, its second derivative is 1, and the modulus of
        convexity in ``f`` is exactly 1."""
        if range_bound <= 0:
            raise ValueError("range bound must be positive")
        return cls("mse", 2.0 * _SQRT2 * range_bound, _SQRT2, 1.0, 1.0, range_bound)

    @classmethod
    def mse_for(
        cls, teacher: "TeacherSpec", sigma_eps: float, slack: float = 6.0
    ) -> "LossSpec":
        """Half squared error with the working range derived from the teacher:
        sup |f*| over the input ball plus a ``slack``-sigma noise cap."""
        lip = teacher.act.lipschitz ** (teacher.teacher.depth - 1)
        r0 = lip * _SQRT2 * teacher.nu_teacher + slack * sigma_eps
        return cls.mse(max(r0, 1e-12))

    @classmethod
    def huber(cls, delta: float, range_bound: float) -> "LossSpec":
        if delta <= 0 or range_bound <= 0:
            raise ValueError("delta and range bound must be positive")
        gamma = 1.0 if 2.0 * range_bound <= delta else 0.0
        return cls("huber", _SQRT2 * delta, _SQRT2, 1.0, gamma, range_bound, delta)

    @classmethod
    def logistic(cls, range_bound: float, grid: int = 401) -> "LossSpec":
        """Margin logistic loss normalized to vanish on the diagonal.

        Constants are estimated by a dense grid sup over predictors in
        ``[-R, R]`` and hard labels ``{-1, +1}``; no uniform convexity
        modulus exists for unconstrained labels, so the recorded ``gamma``
        is the working-set one.
        """
        if range_bound <= 0:
            raise ValueError("range bound must be positive")
        r = range_bound
        fs = np.linspace(-r, r, grid)
        ys = np.array([-1.0, 1.0])
        F, Y = np.meshgrid(fs, ys, indexing="ij")

        def s(x):
            return 1.0 / (1.0 + np.exp(-x))

        d_f = -Y * s(-Y * F)
        d_y = -F * s(-Y * F) + 2.0 * Y * s(-Y * Y)
        L0 = float(np.max(np.hypot(d_f, d_y))) * 1.01
        h = 1e-5
        dy_f = (-(Y) * s(-(Y) * (F + h)) + Y * s(-Y * (F - h))) / (2 * h)
        dy_y = (
            (-(F) * s(-(Y + h) * F) + 2.0 * (Y + h) * s(-((Y + h) ** 2)))
            - (-(F) * s(-(Y - h) * F) + 2.0 * (Y - h) * s(-((Y - h) ** 2)))
        ) / (2 * h)
        L1y = float(np.max(np.hypot(dy_f, dy_y))) * 1.01
        B = float(np.max(np.abs(dy_y))) * 1.01
        d2_ff = Y * Y * s(-Y * F) * s(Y * F)
        gamma = float(np.min(d2_ff))
        return cls("logistic", L0, L1y, B, gamma, range_bound)

    def value(self, f, y):
        f = np.asarray(f, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        if self.kind == "mse":
            return 0.5 * (f - y) ** 2
        if self.kind == "huber":
            u = f - y
            au = np.abs(u)
            return np.where(
                au <= self.delta, 0.5 * u * u, self.delta * (au - 0.5 * self.delta)
            )
        if self.kind == "logistic":
            return np.logaddexp(0.0, -y * f) - np.logaddexp(0.0, -y * y)
        raise ValueError(f"unknown loss kind {self.kind!r}")

    def dpred(self, f, y):
        """Derivative of the loss in the prediction."""
        f = np.asarray(f, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        if self.kind == "mse":
            return f - y
        if self.kind == "huber":
            return np.clip(f - y, -self.delta, self.delta)
        if self.kind == "logistic":
            return -y / (1.0 + np.exp(y * f))
        raise ValueError(f"unknown loss kind {self.kind!r}")


@dataclass(frozen=True)
class TeacherSpec:
    """Ground-truth network together with its path norm (the target-norm proxy)."""

    teacher: NetParams
    act: ActivationSpec
    nu_teacher: float

    def __post_init__(self) -> None:
        if self.nu_teacher != norms.pesv_norm(self.teacher):
            raise ValueError("stored teacher norm disagrees with the parameters")

    @classmethod
    def create(cls, params: NetParams, act: ActivationSpec) -> "TeacherSpec":
        return cls(params, act, norms.pesv_norm(params))


@dataclass(frozen=True)
class Dataset:
    """Training sample: inputs ``(x_i, 1)`` in the unit ball and noisy targets."""

    inputs: np.ndarray
    targets: np.ndarray
    noise_std: float
    seed: int

    def __post_init__(self) -> None:
        x = np.array(self.inputs, dtype=np.float64)
        y = np.array(self.targets, dtype=np.float64).ravel()
        if x.ndim != 2 or x.shape[0] != y.shape[0]:
            raise ValueError("inputs must be (n, d+1) with one target per row")
        x.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "inputs", x)
        object.__setattr__(self, "targets", y)

    @property
    def n(self) -> int:
        return self.inputs.shape[0]

    @property
    def input_dim(self) -> int:
        return self.inputs.shape[1] - 1


def _uniform_ball(rng: np.random.Generator, n: int, d: int) -> np.ndarray:
    g = rng.standard_normal((n, d))
    norms_g = np.linalg.norm(g, axis=1)
    norms_g[norms_g == 0.0] = 1.0
    radii = rng.random(n) ** (1.0 / d)
    return g * (radii / norms_g)[:, None]


def sample_dataset(
    teacher: TeacherSpec,
    n: int,
    sigma_eps: float,
    distribution: str = "uniform",
    seed: int = 0,
    inputs=None,
) -> Dataset:
    """Draw ``y_i = f*(x_i) + eps_i`` with ``x_i`` uniform in the unit ball
    (or user-given) and independent Gaussian noise; deterministic per seed."""
    if n < 1 or sigma_eps < 0:
        raise ValueError("need n >= 1 and sigma_eps >= 0")
    d = teacher.teacher.input_dim
    rng = np.random.default_rng(seed)
    if inputs is not None:
        x = np.asarray(inputs, dtype=np.float64)
        if x.shape != (n, d):
            raise ValueError("user inputs must be (n, d) raw coordinates")
        if np.any(np.linalg.norm(x, axis=1) > 1.0 + 1e-12):
            raise ValueError("user inputs must lie in the unit ball")
    elif distribution == "uniform":
        x = _uniform_ball(rng, n, d)
    else:
        raise ValueError(f"unknown distribution {distribution!r}")
    xt = np.hstack([x, np.ones((n, 1))])
    y = forward(teacher.teacher, teacher.act, xt)
    noise = sigma_eps * rng.standard_normal(n)
    return Dataset(inputs=xt, targets=y + noise, noise_std=sigma_eps, seed=seed)


def teacher_hash(teacher: TeacherSpec) -> str:
    return hashlib.sha256(
        network_to_json(teacher.teacher, teacher.act).encode()
    ).hexdigest()[:16]


def save_dataset(path, ds: Dataset, teacher_digest: str = "") -> None:
    d = ds.input_dim
    with open(path, "w", newline="\n") as fh:
        fh.write(
            f"# seed={ds.seed} sigma_eps={float(ds.noise_std)!r} "
            f"teacher={teacher_digest}\n"
        )
        cols = [f"x_{i + 1}" for i in range(d)] + ["bias", "y"]
        fh.write(",".join(cols) + "\n")
        for row, y in zip(ds.inputs, ds.targets):
            vals = [repr(float(v)) for v in row] + [repr(float(y))]
            fh.write(",".join(vals) + "\n")


def load_dataset(path) -> Dataset:
    seed, sigma = 0, 0.0
    rows = []
    with open(path) as fh:
        header = fh.readline()
        for part in header.lstrip("# ").split():
            if part.startswith("seed="):
                seed = int(part[5:])
            if part.startswith("sigma_eps="):
                sigma = float(part[10:])
        fh.readline()  # column names
        for line in fh:
            if line.strip():
                rows.append([float(v) for v in line.split(",")])
    arr = np.array(rows)
    return Dataset(inputs=arr[:, :-1], targets=arr[:, -1], noise_std=sigma, seed=seed)


@dataclass(frozen=True)
class Penalty:
    """Regularizer choice: path norm, weight decay, or mixed per-unit max."""

    kind: str
    p: float = 1.0
    q: float = 2.0

    def __post_init__(self) -> None:
        if self.kind not in ("pesv", "weight_decay", "mixed_max"):
            raise ValueError(f"unknown regularizer {self.kind!r}")

    @classmethod
    def parse(cls, text: str) -> "Penalty":
        text = text.strip()
        if text.startswith("mixed_max"):
            inner = text[len("mixed_max"):].strip("():").replace(":", ",")
            if inner:
                p, q = (float(v) for v in inner.split(","))
                return cls("mixed_max", p, q)
            return cls("mixed_max")
        return cls(text)

    def value(self, params) -> float:
        if self.kind == "pesv":
            return norms.pesv_norm(params)
        if self.kind == "weight_decay":
            return norms.weight_decay_norm(params)
        return norms.mixed_max_norm(params, self.p, self.q)

    def subgradient(self, params) -> list[np.ndarray]:
        if self.kind == "pesv":
            return norms.pesv_subgradient(params)
        if self.kind == "weight_decay":
            return norms.weight_decay_subgradient(params)
        return norms.mixed_max_subgradient(params, self.p, self.q)


def objective(params, dataset: Dataset, lam: float, loss: LossSpec, reg: Penalty, act: ActivationSpec) -> float:
    """Penalized empirical risk: mean per-sample loss plus ``lam`` times the
    regularizer (for half squared error this is ``(1/2n) sum (y - g)^2``)."""
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    preds = forward(params, act, dataset.inputs)
    return float(np.mean(loss.value(preds, dataset.targets))) + lam * reg.value(params)


@dataclass(frozen=True)
class OptimizerConfig:
    """Plain subgradient descent settings with an inverse-sqrt step schedule."""

    step_size: float = 0.1
    max_iters: int = 10_000
    tolerance: float = 0.0
    seed: int = 0
    schedule: str = "inv_sqrt"

    def __post_init__(self) -> None:
        if self.step_size <= 0 or self.max_iters < 1:
            raise ValueError("need positive step size and at least one iteration")
        if self.schedule not in ("inv_sqrt", "constant"):
            raise ValueError(f"unknown schedule {self.schedule!r}")


@dataclass(frozen=True)
class TrainResult:
    params: NetParams
    trace: np.ndarray  # columns: iteration, objective, empirical_mse, nu
    best_objective: float
    iterations: int
    converged: bool


def train(
    init: NetParams,
    dataset: Dataset,
    lam: float,
    loss: LossSpec,
    reg: Penalty,
    opt: OptimizerConfig,
    act: ActivationSpec,
) -> TrainResult:
    """Minimize the penalized empirical risk by subgradient descent.

    Records the objective every iteration and returns the best iterate seen
    (the subgradient method is not monotone).  The trace also carries the
    training mean squared residual and the path norm of the current iterate.
    A non-finite objective aborts with the last finite iterate attached.
    """
    x, y = dataset.inputs, dataset.targets
    n = dataset.n
    arrs = [np.array(w) for w in init.layers]
    best = [w.copy() for w in arrs]
    best_obj = math.inf
    rows = np.empty((opt.max_iters, 4))
    converged = False
    iters_run = 0

    for t in range(opt.max_iters):
        preds = forward(arrs, act, x)
        fit = float(np.mean(loss.value(preds, y)))
        nu = norms.pesv_norm(arrs)
        obj = fit + lam * reg.value(arrs)
        if not math.isfinite(obj):
            raise DivergenceError(
                f"objective became non-finite at iteration {t}",
                NetParams(tuple(best)),
            )
        mse_train = float(np.mean((preds - y) ** 2))
        rows[t] = (t, obj, mse_train, nu)
        iters_run = t + 1
        if obj < best_obj:
            best_obj = obj
            for b, w in zip(best, arrs):
                np.copyto(b, w)

        upstream = loss.dpred(preds, y) / n
        grads = backprop(arrs, act, x, upstream)
        if lam > 0.0:
            for g, r in zip(grads, reg.subgradient(arrs)):
                g += lam * r
        if opt.tolerance > 0.0:
            gnorm = math.sqrt(sum(float(np.sum(g * g)) for g in grads))
            tnorm = math.sqrt(sum(float(np.sum(w * w)) for w in arrs))
            if gnorm <= opt.tolerance * (1.0 + tnorm):
                converged = True
                break
        step = opt.step_size
        if opt.schedule == "inv_sqrt":
            step /= math.sqrt(t + 1.0)
        for w, g in zip(arrs, grads):
            w -= step * g

    return TrainResult(
        params=NetParams(tuple(best)),
        trace=rows[:iters_run].copy(),
        best_objective=best_obj,
        iterations=iters_run,
        converged=converged,
    )


def empirical_error(params, act: ActivationSpec, teacher: TeacherSpec, dataset: Dataset) -> float:
    """Mean squared deviation from the noiseless teacher on the training inputs."""
    g = forward(params, act, dataset.inputs)
    f_star = forward(teacher.teacher, teacher.act, dataset.inputs)
    return float(np.mean((g - f_star) ** 2))


def generalization_error_mc(
    params,
    act: ActivationSpec,
    teacher: TeacherSpec,
    n_test: int,
    seed: int = 0,
) -> tuple[float, float]:
    """Monte Carlo estimate of the population squared error against the
    teacher, with the standard error of the mean."""
    if n_test < 2:
        raise ValueError("need at least two test points")
    d = teacher.teacher.input_dim
    rng = np.random.default_rng(seed)
    x = _uniform_ball(rng, n_test, d)
    xt = np.hstack([x, np.ones((n_test, 1))])
    errs = (forward(params, act, xt) - forward(teacher.teacher, teacher.act, xt)) ** 2
    return float(errs.mean()), float(errs.std(ddof=1) / math.sqrt(n_test))


def init_params(widths, d: int, seed: int = 0) -> NetParams:
    """Uniform ``(-s, s)`` initialization with ``s = 1/sqrt(fan_in)`` per layer."""
    wv = WidthVector.of(widths)
    rng = np.random.default_rng(seed)
    shapes = [(wv[0], d + 1)]
    for lo, hi in zip(wv.widths, wv.widths[1:]):
        shapes.append((hi, lo))
    shapes.append((1, wv.widths[-1]))
    layers = []
    for rows, cols in shapes:
        s = 1.0 / math.sqrt(cols)
        layers.append(rng.uniform(-s, s, size=(rows, cols)))
    return NetParams(tuple(layers))
