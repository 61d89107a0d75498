"""Learning arithmetic for FedAvg on exact rationals.

Losses, their gradients, the client update, weighted server aggregation, the
finite-sum objective, DLG defense transforms and the discrete Laplace noise
mechanism. All arithmetic is on :class:`fractions.Fraction`; grid
quantization is the only rounding step.
"""

from __future__ import annotations

import enum
import math
from collections.abc import Mapping
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Union

from .core_model import ActorId, DataPoint, Dataset, ModelParam, as_fraction
from .errors import EmptyPartition, WeightMismatch


def vadd(a: ModelParam, b: ModelParam) -> ModelParam:
    return tuple(x + y for x, y in zip(a, b, strict=True))


def vsub(a: ModelParam, b: ModelParam) -> ModelParam:
    return tuple(x - y for x, y in zip(a, b, strict=True))


def vscale(s: Fraction, a: ModelParam) -> ModelParam:
    return tuple(s * x for x in a)


def dot(a, b) -> Fraction:
    return sum((x * y for x, y in zip(a, b, strict=True)), Fraction(0))


class LossModel(enum.Enum):
    """Per-example squared losses.

    ``MEAN_ESTIMATION`` has one parameter and loss ``(w - y)^2 / 2``.
    ``LINEAR_REGRESSION`` has ``1 + d_in`` parameters (bias first) and loss
    ``(<w, (1, x)> - y)^2 / 2``.
    """

    MEAN_ESTIMATION = "mean_estimation"
    LINEAR_REGRESSION = "linear_regression"

    def dim(self, d_in: int) -> int:
        return 1 if self is LossModel.MEAN_ESTIMATION else 1 + d_in

    def _residual(self, w: ModelParam, p: DataPoint) -> tuple[Fraction, tuple[Fraction, ...]]:
        if self is LossModel.MEAN_ESTIMATION:
            if len(w) != 1:
                raise ValueError(f"mean estimation needs d=1, got d={len(w)}")
            return w[0] - p.value, (Fraction(1),)
        aug = (Fraction(1),) + p.features
        if len(aug) != len(w):
            raise ValueError(f"parameter dimension {len(w)} does not match 1 + {len(p.features)} features")
        return dot(w, aug) - p.value, aug

    def loss(self, w: ModelParam, p: DataPoint) -> Fraction:
        r, _ = self._residual(w, p)
        return r * r / 2

    def gradient(self, w: ModelParam, p: DataPoint) -> ModelParam:
        r, aug = self._residual(w, p)
        return tuple(r * a for a in aug)


@dataclass(frozen=True)
class Grid:
    """Model parameters live on ``{k*q : lo <= k*q <= hi}`` per coordinate."""

    q: Fraction
    lo: Fraction
    hi: Fraction

    def __post_init__(self):
        for name in ("q", "lo", "hi"):
            object.__setattr__(self, name, as_fraction(getattr(self, name)))
        if self.q <= 0:
            raise ValueError("grid step must be positive")
        if not self.lo < self.hi:
            raise ValueError("grid needs lo < hi")
        if (self.lo / self.q).denominator != 1 or (self.hi / self.q).denominator != 1:
            raise ValueError("grid bounds must be integer multiples of the step")

    def round(self, x: Fraction) -> Fraction:
        # nearest multiple of q, ties away from zero
        m = x / self.q
        n = math.floor(abs(m) + Fraction(1, 2))
        return self.q * (n if m >= 0 else -n)

    def clamp(self, x: Fraction) -> Fraction:
        return min(max(x, self.lo), self.hi)

    def quantize(self, w: ModelParam) -> ModelParam:
        return tuple(self.clamp(self.round(x)) for x in w)

    def contains(self, w: ModelParam) -> bool:
        return all(self.lo <= x <= self.hi and (x / self.q).denominator == 1 for x in w)

    def points(self) -> list[Fraction]:
        lo, hi = int(self.lo / self.q), int(self.hi / self.q)
        return [k * self.q for k in range(lo, hi + 1)]


@dataclass(frozen=True)
class LearningConfig:
    eta: Fraction
    rounds: int = 1
    local_epochs: int = 1
    grid: Grid | None = None  # None selects exact mode

    def __post_init__(self):
        object.__setattr__(self, "eta", as_fraction(self.eta))
        if self.eta <= 0:
            raise ValueError("learning rate must be positive")
        if self.rounds < 0:
            raise ValueError("round bound must be nonnegative")
        if self.local_epochs < 1:
            raise ValueError("local_epochs must be >= 1")

    @property
    def exact(self) -> bool:
        return self.grid is None

    def quantize(self, w: ModelParam) -> ModelParam:
        return w if self.grid is None else self.grid.quantize(w)


@dataclass(frozen=True)
class DiscreteLaplace:
    """Per-coordinate additive noise ``k*q`` with ``Pr[k]`` proportional to ``t^|k|``.

    The support is truncated to ``-clamp_steps..clamp_steps`` and renormalized.
    """

    t: Fraction
    clamp_steps: int

    def __post_init__(self):
        object.__setattr__(self, "t", as_fraction(self.t))
        if not 0 < self.t < 1:
            raise ValueError("t must lie in (0, 1)")
        if self.clamp_steps < 0:
            raise ValueError("clamp_steps must be nonnegative")


NoiseMechanism = Union[DiscreteLaplace, None]


def noise_pmf(mech: DiscreteLaplace) -> dict[int, Fraction]:
    if mech is None:
        raise ValueError("no pmf for the noiseless mechanism")
    t, s = mech.t, mech.clamp_steps
    norm = (1 - t) / (1 + t - 2 * t ** (s + 1))
    return {k: t ** abs(k) * norm for k in range(-s, s + 1)}


# Defenses against gradient leakage.


@dataclass(frozen=True)
class Identity:
    def apply(self, w: ModelParam) -> ModelParam:
        return w


@dataclass(frozen=True)
class SparsifyTopK:
    """Keeps the ``k`` largest-magnitude coordinates, zeroing the rest.

    Ties are broken in favour of the lower coordinate index.
    """

    k: int

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be positive")

    def apply(self, w: ModelParam) -> ModelParam:
        order = sorted(range(len(w)), key=lambda i: (-abs(w[i]), i))
        keep = set(order[: self.k])
        return tuple(x if i in keep else Fraction(0) for i, x in enumerate(w))


@dataclass(frozen=True)
class PseudoGradient:
    """Releases the parameter after ``epochs`` local steps instead of one.

    ``epochs=None`` defers to ``LearningConfig.local_epochs``.
    """

    epochs: int | None = None

    def __post_init__(self):
        if self.epochs is not None and self.epochs < 1:
            raise ValueError("epochs must be positive")

    def apply(self, w: ModelParam) -> ModelParam:
        return w


DefenseTransform = Union[Identity, SparsifyTopK, PseudoGradient]


def avg_loss_gradient(model: LossModel, w: ModelParam, part: Dataset) -> ModelParam:
    if not part:
        raise EmptyPartition("cannot average the loss gradient over an empty partition")
    total = tuple(Fraction(0) for _ in w)
    for p in part:
        total = vadd(total, model.gradient(w, p))
    return vscale(Fraction(1, len(part)), total)


def client_update(
    model: LossModel,
    cfg: LearningConfig,
    w: ModelParam,
    part: Dataset,
    defense: DefenseTransform = Identity(),
) -> ModelParam:
    if isinstance(defense, PseudoGradient):
        epochs = defense.epochs if defense.epochs is not None else cfg.local_epochs
        for _ in range(epochs):
            w = vsub(w, vscale(cfg.eta, avg_loss_gradient(model, w, part)))
        return cfg.quantize(w)
    stepped = vsub(w, vscale(cfg.eta, avg_loss_gradient(model, w, part)))
    return cfg.quantize(defense.apply(stepped))


def server_eval(
    gradients: Mapping[ActorId, ModelParam],
    partitions: Mapping[ActorId, Dataset],
    n: int,
    grid: Grid | None = None,
) -> ModelParam:
    """FedAvg aggregation ``sum_k (n_k / n) * w_k``, quantized when a grid is given."""
    if set(gradients) != set(partitions) or not gradients:
        raise ValueError("gradient and partition maps need the same nonempty domain")
    if n <= 0 or n != sum(len(partitions[c]) for c in partitions):
        raise WeightMismatch(f"n={n} does not equal the summed partition sizes")
    clients = sorted(gradients)
    dim = len(gradients[clients[0]])
    acc = tuple(Fraction(0) for _ in range(dim))
    for c in clients:
        acc = vadd(acc, vscale(Fraction(len(partitions[c]), n), gradients[c]))
    return acc if grid is None else grid.quantize(acc)


def objective(model: LossModel, w: ModelParam, dataset: Dataset) -> Fraction:
    if not dataset:
        raise EmptyPartition("objective undefined on an empty dataset")
    return sum((model.loss(w, p) for p in dataset), Fraction(0)) / len(dataset)


def coerce_param(values: Any) -> ModelParam:
    return tuple(as_fraction(v) for v in values)
