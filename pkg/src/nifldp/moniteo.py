"""Satellite-swarm temperature case study.

Each satellite observes a longitude sector and holds a few (lat, lon,
temperature) readings, some of which sit at secret locations. A satellite may
drop a secret reading from its training partition; the pipeline measures how
far that omission is visible in the released global model.

Features are the normalized coordinates ``(lat/90, lon/180)``; the learning
target is the temperature in degrees Celsius, generated from a linear field
``base + a*lat + b*lon`` (lat/lon in degrees) plus a seeded perturbation.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .adversary import AdvantageReport, advantage, bayes_optimal, bound_chain
from .core_model import ActorId, DataPoint, Dataset, Eval, Get, as_fraction, initial_infrastructure
from .errors import NoSecretPoint, StateExplosion
from .kripke import (
    DEFAULT_STATE_CEILING,
    GradientOf,
    build_model,
    curmodpar,
    mc_terminal_distribution,
    terminal_distribution,
)
from .learning import DefenseTransform, DiscreteLaplace, Grid, Identity, LearningConfig, LossModel
from .privacy import EpsilonReport, NeighborRun, realized_epsilon, within_budget
from .transition import RoundRobin, System

log = logging.getLogger(__name__)

LAT_BAND = (-60, 60)


def default_learning() -> LearningConfig:
    return LearningConfig(eta=Fraction(1, 4), rounds=1, grid=Grid(Fraction(1, 4), Fraction(-1, 4), Fraction(1, 4)))


@dataclass(frozen=True)
class MoniteoConfig:
    n_satellites: int = 2
    points_per_satellite: int = 3
    field_coeffs: tuple[Fraction, Fraction, Fraction] = (Fraction(1, 2), Fraction(1, 100), Fraction(0))
    noise_amp: Fraction = Fraction(1, 4)
    secret_fraction: Fraction = Fraction(1, 3)
    seed: int = 7
    learning: LearningConfig = field(default_factory=default_learning)
    mechanism: DiscreteLaplace | None = DiscreteLaplace(Fraction(3, 4), 2)
    defense: DefenseTransform = Identity()
    epsilon_budget: float = 2.0
    target: ActorId | None = None
    state_ceiling: int = DEFAULT_STATE_CEILING
    mc_fallback: bool = True
    mc_samples: int = 100_000

    def __post_init__(self):
        object.__setattr__(self, "field_coeffs", tuple(as_fraction(c) for c in self.field_coeffs))
        object.__setattr__(self, "noise_amp", as_fraction(self.noise_amp))
        object.__setattr__(self, "secret_fraction", as_fraction(self.secret_fraction))
        if self.n_satellites < 1 or self.points_per_satellite < 1:
            raise ValueError("need at least one satellite with at least one point")
        if self.noise_amp < 0:
            raise ValueError("noise_amp must be nonnegative")
        if not 0 <= self.secret_fraction < 1:
            raise ValueError("secret_fraction must lie in [0, 1)")
        if len(self.field_coeffs) != 3:
            raise ValueError("field_coeffs is (base, a, b)")

    def system(self) -> System:
        return System(self.learning, LossModel.LINEAR_REGRESSION, self.defense, self.mechanism, RoundRobin())

    @property
    def dim(self) -> int:
        return 3


def satellite_ids(n: int) -> list[ActorId]:
    width = len(str(n - 1))
    return [f"sat{k:0{width}d}" for k in range(n)]


def generate_world(cfg: MoniteoConfig) -> dict[ActorId, Dataset]:
    """Deterministic synthetic readings per satellite.

    Satellite ``k`` covers the ``k``-th of ``n`` equal longitude sectors. Its
    ``j``-th point lies in the ``j``-th latitude band of ``LAT_BAND``, jittered
    to a whole degree within the band and sector. Perturbations are whole
    hundredths of a degree in ``[-noise_amp, noise_amp]``.
    """
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(cfg.seed & 0xFFFF_FFFF_FFFF_FFFF)))
    base, a, b = cfg.field_coeffs
    n, p = cfg.n_satellites, cfg.points_per_satellite
    sector = 360 // n
    band = (LAT_BAND[1] - LAT_BAND[0]) // p
    amp = math.floor(cfg.noise_amp * 100)
    n_secret = math.floor(cfg.secret_fraction * p + Fraction(1, 2))
    world = {}
    for k, sat in enumerate(satellite_ids(n)):
        pts = []
        secret_idx = set(rng.permutation(p)[:n_secret].tolist())
        for j in range(p):
            lat = LAT_BAND[0] + j * band + int(rng.integers(0, max(band, 1)))
            lon = -180 + k * sector + int(rng.integers(0, max(sector, 1)))
            pert = Fraction(int(rng.integers(-amp, amp + 1)), 100)
            value = base + a * lat + b * lon + pert
            pts.append(
                DataPoint(f"{sat}-p{j}", (Fraction(lat, 90), Fraction(lon, 180)), value, secret=j in secret_idx)
            )
        world[sat] = Dataset(frozenset(pts))
    return world


def neighbor_pair_omit_secret(
    world: dict[ActorId, Dataset], target: ActorId, system: System, initial_model=None
) -> NeighborRun:
    """``i1`` trains on the full world; ``i0`` drops the target's first secret point."""
    secrets = sorted(p.id for p in world[target].points if p.secret)
    if not secrets:
        raise NoSecretPoint(f"satellite {target} holds no secret point")
    d = 1 + (world[target].feature_dim() or 0)
    w0 = initial_model if initial_model is not None else [0] * d
    omitted = dict(world)
    omitted[target] = world[target].without(secrets[0])
    i0 = initial_infrastructure(omitted, w0, server="ground")
    i1 = initial_infrastructure(world, w0, server="ground")
    return NeighborRun(i0, i1, system)


def pick_target(cfg: MoniteoConfig, world: dict[ActorId, Dataset]) -> ActorId:
    if cfg.target is not None:
        return cfg.target
    for sat in sorted(world):
        if any(p.secret for p in world[sat].points):
            return sat
    raise NoSecretPoint("no satellite holds a secret point")


def clean_params_in_grid(cfg: MoniteoConfig, run: NeighborRun) -> bool:
    """Whether the noiseless trajectory stays inside the grid without clamping.

    Runs both datasets in exact mode and checks that the initial model and
    every released gradient and aggregate round into ``[lo, hi]``.
    """
    grid = cfg.learning.grid
    if grid is None:
        return True
    exact = System(
        LearningConfig(cfg.learning.eta, cfg.learning.rounds, cfg.learning.local_epochs, None),
        LossModel.LINEAR_REGRESSION,
        cfg.defense,
        None,
    )
    lo, hi = grid.lo - grid.q / 2, grid.hi + grid.q / 2
    for i in (run.i0, run.i1):
        vals = list(i.igra.curmodpar)
        for s in build_model(i, exact).states:
            ev = s.trace.events[0] if s.trace.events else None
            if isinstance(ev, Get):
                vals.extend(ev.grad)
            elif isinstance(ev, Eval):
                vals.extend(ev.newmodel)
        if any(not lo < x < hi for x in vals):
            return False
    return True


@dataclass
class MoniteoReport:
    epsilon: EpsilonReport
    advantage: AdvantageReport
    budget_ok: bool
    runtime_ms: int
    mode: str
    target: ActorId
    per_client: dict[ActorId, EpsilonReport]


def run_moniteo(cfg: MoniteoConfig) -> MoniteoReport:
    """Omit-a-secret measurement: realized epsilon and advantage of the released model.

    Exact enumeration when the state space fits under ``state_ceiling``;
    otherwise ``mc_samples`` sampled runs per dataset (seeded from
    ``cfg.seed``) unless the fallback is disabled.
    """
    start = time.perf_counter()
    world = generate_world(cfg)
    target = pick_target(cfg, world)
    run = neighbor_pair_omit_secret(world, target, cfg.system())
    if not clean_params_in_grid(cfg, run):
        raise ValueError("grid bounds do not contain the noiseless model parameters")
    try:
        m0 = build_model(run.i0, run.system, ceiling=cfg.state_ceiling)
        m1 = build_model(run.i1, run.system, ceiling=cfg.state_ceiling)
        d0, d1 = terminal_distribution(m0), terminal_distribution(m1)
        per_client = {
            c: realized_epsilon(terminal_distribution(m0, GradientOf(c)), terminal_distribution(m1, GradientOf(c)))
            for c in sorted(world)
        }
        mode = "exact"
    except StateExplosion:
        if not cfg.mc_fallback:
            raise
        log.warning("state ceiling %d exceeded; falling back to %d sampled runs", cfg.state_ceiling, cfg.mc_samples)
        d0 = mc_terminal_distribution(run.i0, run.system, cfg.mc_samples, cfg.seed, curmodpar)
        d1 = mc_terminal_distribution(run.i1, run.system, cfg.mc_samples, cfg.seed + 1, curmodpar)
        per_client = {}
        mode = "montecarlo"
    eps = realized_epsilon(d0, d1)
    if eps.finite:
        adv = bound_chain(d0, d1)
    else:
        adv = advantage(bayes_optimal(d0, d1), d0, d1)
    runtime_ms = int((time.perf_counter() - start) * 1000)
    return MoniteoReport(eps, adv, within_budget(eps.epsilon, cfg.epsilon_budget), runtime_ms, mode, target, per_client)
