"""Experiment configuration: one JSON document, versioned by ``schema_version``.

Top-level fields (numbers may be JSON numbers or exact strings like ``"1/4"``):

``schema_version``
    Must be 1.
``scenario``
    One of

    * ``{"kind": "custom", "server": str, "initial_model": [num, ...],
      "partitions": {client: [point, ...]}, "neighbor_partitions": {...}}``;
      a point is ``{"id", "features": [num], "value": num, "secret": bool}``.
      ``neighbor_partitions`` gives the second run (needed by epsilon,
      advantage and decompose).
    * ``{"kind": "moniteo", "n_satellites", "points_per_satellite",
      "field_coeffs": [base, a, b], "noise_amp", "secret_fraction", "seed",
      "target"}``; all optional, defaults are the desk-scale setup.
    * ``{"kind": "distributions", "d0": {outcome: prob}, "d1": {...}}`` or
      ``{"kind": "distributions", "tight_pair": ratio}``; outcome keys are
      comma-separated coordinates. Bypasses the FL system entirely.
``learning``
    ``{"loss": "mean_estimation" | "linear_regression", "eta", "rounds",
    "local_epochs", "grid": {"q", "lo", "hi"} | null}``; a null grid selects
    exact mode.
``mechanism``
    ``null`` or ``{"kind": "discrete_laplace", "t", "clamp_steps"}``.
``defense``
    ``{"kind": "identity"}``, ``{"kind": "sparsify_top_k", "k"}`` or
    ``{"kind": "pseudo_gradient", "epochs"}``.
``scheduler``
    ``"round_robin"`` (default) or ``{"kind": "round_robin", "order": [...]}``.
``epsilon_budget``, ``delta``
    Budget for the DP check; ``delta`` null for pure DP.
``mode``
    ``{"kind": "exact", "state_ceiling": 1000000}`` or
    ``{"kind": "montecarlo", "samples", "seed"}``.
``decomposition_mode``
    ``"one_client_differs"`` (default) or ``"all_clients_differ"``.
``challenge``
    ``{"trials": 10000, "seed": 0}`` for the guessing experiment.
``output_dir``
    Where reports go; the ``--out`` flag overrides it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any

from .adversary import tight_pair
from .core_model import Dataset, Infrastructure, as_fraction, initial_infrastructure
from .kripke import DEFAULT_STATE_CEILING, PathDistribution
from .learning import DiscreteLaplace, Grid, Identity, LearningConfig, LossModel, PseudoGradient, SparsifyTopK
from .moniteo import MoniteoConfig
from .privacy import DecompositionMode, NeighborRun
from .serialization import dataset_from_json, parse_outcome_key
from .transition import RoundRobin, System

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    scenario: str
    system: System
    epsilon_budget: float = 1.0
    delta: Fraction | None = None
    mode: str = "exact"
    samples: int = 0
    seed: int = 0
    state_ceiling: int = DEFAULT_STATE_CEILING
    output_dir: Path = Path("out")
    decomposition_mode: DecompositionMode = DecompositionMode.ONE_CLIENT_DIFFERS
    challenge_trials: int = 10_000
    challenge_seed: int = 0
    # custom
    server: str = "server"
    initial_model: tuple = ()
    partitions: dict[str, Dataset] = field(default_factory=dict)
    neighbor_partitions: dict[str, Dataset] | None = None
    # moniteo
    moniteo: MoniteoConfig | None = None
    # distributions
    d0: PathDistribution | None = None
    d1: PathDistribution | None = None

    def initial(self) -> Infrastructure:
        if self.scenario == "moniteo":
            return self.neighbor_run().i1
        if self.scenario != "custom":
            raise ConfigError(f"scenario {self.scenario!r} has no FL system to run")
        return initial_infrastructure(self.partitions, self.initial_model, server=self.server)

    def neighbor_run(self, *, require_neighbors: bool = True) -> NeighborRun:
        if self.scenario == "moniteo":
            from .moniteo import generate_world, neighbor_pair_omit_secret, pick_target

            world = generate_world(self.moniteo)
            return neighbor_pair_omit_secret(world, pick_target(self.moniteo, world), self.system)
        if self.scenario != "custom":
            raise ConfigError(f"scenario {self.scenario!r} has no FL system to run")
        if self.neighbor_partitions is None:
            raise ConfigError("scenario.neighbor_partitions is required for this command")
        i0 = initial_infrastructure(self.partitions, self.initial_model, server=self.server)
        i1 = initial_infrastructure(self.neighbor_partitions, self.initial_model, server=self.server)
        return NeighborRun(i0, i1, self.system, require_neighbors=require_neighbors)


def _get(obj: dict, key: str, default: Any = None, *, required: bool = False):
    if not isinstance(obj, dict):
        raise ConfigError(f"expected an object while reading {key!r}")
    if key not in obj:
        if required:
            raise ConfigError(f"missing required field {key!r}")
        return default
    return obj[key]


def _frac(x, name: str) -> Fraction:
    try:
        return as_fraction(x)
    except (TypeError, ValueError, ZeroDivisionError) as e:
        raise ConfigError(f"{name}: not a number: {x!r}") from e


def _int(x, name: str, *, minimum: int | None = None) -> int:
    if isinstance(x, bool) or not isinstance(x, int):
        raise ConfigError(f"{name}: expected an integer, got {x!r}")
    if minimum is not None and x < minimum:
        raise ConfigError(f"{name}: must be >= {minimum}")
    return x


def parse_learning(obj: dict) -> tuple[LearningConfig, LossModel]:
    try:
        loss = LossModel(_get(obj, "loss", "mean_estimation"))
    except ValueError as e:
        raise ConfigError(f"learning.loss: {e}") from e
    grid_obj = _get(obj, "grid")
    grid = None
    if grid_obj is not None:
        try:
            grid = Grid(
                _frac(_get(grid_obj, "q", required=True), "grid.q"),
                _frac(_get(grid_obj, "lo", required=True), "grid.lo"),
                _frac(_get(grid_obj, "hi", required=True), "grid.hi"),
            )
        except ValueError as e:
            raise ConfigError(f"learning.grid: {e}") from e
    try:
        cfg = LearningConfig(
            eta=_frac(_get(obj, "eta", 1), "learning.eta"),
            rounds=_int(_get(obj, "rounds", 1), "learning.rounds", minimum=0),
            local_epochs=_int(_get(obj, "local_epochs", 1), "learning.local_epochs", minimum=1),
            grid=grid,
        )
    except ValueError as e:
        raise ConfigError(f"learning: {e}") from e
    return cfg, loss


def parse_mechanism(obj) -> DiscreteLaplace | None:
    if obj is None:
        return None
    kind = _get(obj, "kind", required=True)
    if kind != "discrete_laplace":
        raise ConfigError(f"mechanism.kind: unknown mechanism {kind!r}")
    try:
        return DiscreteLaplace(
            _frac(_get(obj, "t", required=True), "mechanism.t"),
            _int(_get(obj, "clamp_steps", required=True), "mechanism.clamp_steps", minimum=0),
        )
    except ValueError as e:
        raise ConfigError(f"mechanism: {e}") from e


def parse_defense(obj):
    if obj is None:
        return Identity()
    kind = _get(obj, "kind", required=True)
    if kind == "identity":
        return Identity()
    if kind == "sparsify_top_k":
        return SparsifyTopK(_int(_get(obj, "k", required=True), "defense.k", minimum=1))
    if kind == "pseudo_gradient":
        epochs = _get(obj, "epochs")
        return PseudoGradient(None if epochs is None else _int(epochs, "defense.epochs", minimum=1))
    raise ConfigError(f"defense.kind: unknown defense {kind!r}")


def parse_scheduler(obj) -> RoundRobin:
    if obj is None or obj == "round_robin":
        return RoundRobin()
    if isinstance(obj, dict) and obj.get("kind") == "round_robin":
        order = _get(obj, "order")
        return RoundRobin(None if order is None else tuple(str(c) for c in order))
    raise ConfigError(f"scheduler: only round_robin is available for experiments, got {obj!r}")


def _parse_partitions(obj, name: str) -> dict[str, Dataset]:
    if not isinstance(obj, dict) or not obj:
        raise ConfigError(f"{name}: expected a nonempty object of client -> points")
    try:
        return {str(c): dataset_from_json(pts) for c, pts in obj.items()}
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"{name}: {e}") from e


def _parse_distribution(obj, name: str) -> PathDistribution:
    if not isinstance(obj, dict) or not obj:
        raise ConfigError(f"{name}: expected a nonempty outcome -> probability object")
    try:
        d = PathDistribution({parse_outcome_key(str(k)): as_fraction(v) for k, v in obj.items()})
    except (TypeError, ValueError, ZeroDivisionError) as e:
        raise ConfigError(f"{name}: {e}") from e
    if not d.is_normalized():
        raise ConfigError(f"{name}: probabilities must sum to 1")
    return d


def parse_config(doc: Any) -> ExperimentConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    version = _get(doc, "schema_version", required=True)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {version!r}; expected {SCHEMA_VERSION}")
    scenario = _get(doc, "scenario", required=True)
    kind = _get(scenario, "kind", required=True)

    learning, loss = parse_learning(_get(doc, "learning", {}))
    mech = parse_mechanism(_get(doc, "mechanism"))
    defense = parse_defense(_get(doc, "defense"))
    sched = parse_scheduler(_get(doc, "scheduler"))
    if kind == "moniteo":
        loss = LossModel.LINEAR_REGRESSION
    try:
        system = System(learning, loss, defense, mech, sched)
    except ValueError as e:
        raise ConfigError(str(e)) from e

    mode_obj = _get(doc, "mode", {"kind": "exact"})
    mode = _get(mode_obj, "kind", "exact")
    if mode not in ("exact", "montecarlo"):
        raise ConfigError(f"mode.kind: unknown mode {mode!r}")
    samples = seed = 0
    if mode == "montecarlo":
        samples = _int(_get(mode_obj, "samples", required=True), "mode.samples", minimum=1)
        seed = _int(_get(mode_obj, "seed", 0), "mode.seed")
    ceiling = _int(_get(mode_obj, "state_ceiling", DEFAULT_STATE_CEILING), "mode.state_ceiling", minimum=1)

    delta = _get(doc, "delta")
    challenge = _get(doc, "challenge", {})
    try:
        dmode = DecompositionMode(_get(doc, "decomposition_mode", "one_client_differs"))
    except ValueError as e:
        raise ConfigError(f"decomposition_mode: {e}") from e
    budget = _get(doc, "epsilon_budget", 1.0)
    if isinstance(budget, bool) or not isinstance(budget, (int, float)) or budget < 0:
        raise ConfigError("epsilon_budget must be a nonnegative number")

    cfg = ExperimentConfig(
        scenario=kind,
        system=system,
        epsilon_budget=float(budget),
        delta=None if delta is None else _frac(delta, "delta"),
        mode=mode,
        samples=samples,
        seed=seed,
        state_ceiling=ceiling,
        output_dir=Path(_get(doc, "output_dir", "out")),
        decomposition_mode=dmode,
        challenge_trials=_int(_get(challenge, "trials", 10_000), "challenge.trials", minimum=1),
        challenge_seed=_int(_get(challenge, "seed", 0), "challenge.seed"),
    )

    if kind == "custom":
        cfg.server = str(_get(scenario, "server", "server"))
        cfg.initial_model = tuple(
            _frac(x, "scenario.initial_model") for x in _get(scenario, "initial_model", required=True)
        )
        cfg.partitions = _parse_partitions(_get(scenario, "partitions", required=True), "scenario.partitions")
        nb = _get(scenario, "neighbor_partitions")
        if nb is not None:
            cfg.neighbor_partitions = _parse_partitions(nb, "scenario.neighbor_partitions")
    elif kind == "moniteo":
        try:
            defaults = MoniteoConfig()
            cfg.moniteo = MoniteoConfig(
                n_satellites=_int(_get(scenario, "n_satellites", defaults.n_satellites), "n_satellites", minimum=1),
                points_per_satellite=_int(
                    _get(scenario, "points_per_satellite", defaults.points_per_satellite),
                    "points_per_satellite",
                    minimum=1,
                ),
                field_coeffs=tuple(
                    _frac(c, "field_coeffs") for c in _get(scenario, "field_coeffs", defaults.field_coeffs)
                ),
                noise_amp=_frac(_get(scenario, "noise_amp", defaults.noise_amp), "noise_amp"),
                secret_fraction=_frac(_get(scenario, "secret_fraction", defaults.secret_fraction), "secret_fraction"),
                seed=_int(_get(scenario, "seed", defaults.seed), "seed"),
                learning=learning if "learning" in doc else defaults.learning,
                mechanism=mech if "mechanism" in doc else defaults.mechanism,
                defense=defense,
                epsilon_budget=cfg.epsilon_budget if "epsilon_budget" in doc else defaults.epsilon_budget,
                target=_get(scenario, "target"),
                state_ceiling=ceiling,
                mc_samples=samples or defaults.mc_samples,
            )
        except ValueError as e:
            raise ConfigError(f"scenario: {e}") from e
        cfg.system = cfg.moniteo.system()
        cfg.epsilon_budget = cfg.moniteo.epsilon_budget
    elif kind == "distributions":
        if "tight_pair" in scenario:
            ratio = _frac(scenario["tight_pair"], "scenario.tight_pair")
            if ratio <= 1:
                raise ConfigError("scenario.tight_pair: ratio must exceed 1")
            cfg.d0, cfg.d1 = tight_pair(ratio)
        else:
            cfg.d0 = _parse_distribution(_get(scenario, "d0", required=True), "scenario.d0")
            cfg.d1 = _parse_distribution(_get(scenario, "d1", required=True), "scenario.d1")
    else:
        raise ConfigError(f"scenario.kind: unknown scenario {kind!r}")
    return cfg


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as e:
        raise ConfigError(f"cannot read config: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"config is not valid JSON: {e}") from e
    return parse_config(doc)
