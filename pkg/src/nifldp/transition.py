"""The FL state-transition relation: put_part, get_grad and eval_server.

get_grad is the only probabilistic rule; with a noise mechanism it branches
once per distinct noisy gradient. A scheduler resolves the choice of which
client moves next so that a single run has a well-defined distribution.
"""

from __future__ import annotations

import itertools
from collections.abc import Mapping
from dataclasses import dataclass
from fractions import Fraction

from .core_model import ActorId, Dataset, Eval, FrozenMap, Get, Infrastructure, ModelParam, Put, Trace
from .errors import BadPartition, NotEnabled, NotInitial
from .learning import (
    DefenseTransform,
    DiscreteLaplace,
    Identity,
    LearningConfig,
    LossModel,
    client_update,
    noise_pmf,
    server_eval,
)


@dataclass(frozen=True)
class ProbStep:
    next: Infrastructure
    prob: Fraction
    event: object


@dataclass(frozen=True)
class RoundRobin:
    """Polls unready clients in a fixed order (sorted ids by default)."""

    order: tuple[ActorId, ...] | None = None


@dataclass(frozen=True)
class FullNondeterminism:
    """Every enabled get_grad fires as its own nondeterministic choice."""


Scheduler = RoundRobin | FullNondeterminism


@dataclass(frozen=True)
class System:
    """Everything besides the state that the transition relation needs."""

    cfg: LearningConfig
    model: LossModel = LossModel.MEAN_ESTIMATION
    defense: DefenseTransform = Identity()
    mech: DiscreteLaplace | None = None
    scheduler: Scheduler = RoundRobin()

    def __post_init__(self):
        if self.mech is not None and self.cfg.grid is None:
            raise ValueError("a noise mechanism needs a grid; exact mode is noiseless only")


def step_put_part(i: Infrastructure, parts: Mapping[ActorId, Dataset]) -> Infrastructure:
    g = i.igra
    if Trace() not in i.prot or i.has_put:
        raise NotInitial("a Put event has already occurred")
    if set(parts) != set(g.clients):
        raise BadPartition("partition domain must equal the client set")
    seen: set[str] = set()
    for c in sorted(parts):
        ids = parts[c].ids
        if seen & ids:
            raise BadPartition(f"partition of {c} overlaps another partition")
        seen |= ids
    union = frozenset().union(*(p.points for p in parts.values()))
    if union != g.dataset.points:
        raise BadPartition("partitions do not cover the dataset")
    parts = FrozenMap(parts)
    return i.extend(g.replace(partition=parts, ready=frozenset()), Put(parts))


def _noisy_outputs(clean: ModelParam, sys: System) -> dict[ModelParam, Fraction]:
    if sys.mech is None:
        return {clean: Fraction(1)}
    grid = sys.cfg.grid
    pmf = sorted(noise_pmf(sys.mech).items())
    out: dict[ModelParam, Fraction] = {}
    for combo in itertools.product(pmf, repeat=len(clean)):
        prob = Fraction(1)
        for _, pk in combo:
            prob *= pk
        w = tuple(grid.clamp(x + k * grid.q) for x, (k, _) in zip(clean, combo))
        out[w] = out.get(w, Fraction(0)) + prob
    return out


def step_get_grad(i: Infrastructure, c: ActorId, sys: System) -> list[ProbStep]:
    """Client ``c`` computes and releases its (noisy) local update.

    Noise vectors that clamp to the same released gradient are merged into one
    step whose probability is their summed mass.
    """
    g = i.igra
    if not i.has_put:
        raise NotEnabled("get_grad before put_part")
    if c not in g.clients:
        raise NotEnabled(f"{c} is not a client")
    if c in g.ready:
        raise NotEnabled(f"{c} already delivered its gradient this round")
    if not g.partition[c]:
        raise NotEnabled(f"{c} holds no data")
    clean = client_update(sys.model, sys.cfg, g.curmodpar, g.partition[c], sys.defense)
    steps = []
    for grad, prob in _noisy_outputs(clean, sys).items():
        g2 = g.replace(ready=g.ready | {c}, gradient=g.gradient.set(c, grad))
        ev = Get(c, grad)
        steps.append(ProbStep(i.extend(g2, ev), prob, ev))
    return steps


def step_eval_server(i: Infrastructure, sys: System | None = None) -> Infrastructure:
    g = i.igra
    if not g.clients or g.ready != g.clients:
        raise NotEnabled("eval_server needs every client ready")
    grid = sys.cfg.grid if sys is not None else None
    new = server_eval(dict(g.gradient), dict(g.partition), len(g.dataset), grid)
    return i.extend(g.replace(curmodpar=new, ready=frozenset()), Eval(new))


def is_terminal(i: Infrastructure, sys: System) -> bool:
    return i.has_put and i.rounds_done >= sys.cfg.rounds


def successors(i: Infrastructure, sys: System) -> list[ProbStep]:
    """Enabled rule applications under the scheduler.

    Empty exactly when the round budget is spent. The staged partition of
    the initial state is what put_part deploys.
    """
    g = i.igra
    if not i.has_put:
        nxt = step_put_part(i, g.partition)
        return [ProbStep(nxt, Fraction(1), nxt.trace.events[0])]
    if is_terminal(i, sys):
        return []
    if g.ready == g.clients:
        nxt = step_eval_server(i, sys)
        return [ProbStep(nxt, Fraction(1), nxt.trace.events[0])]
    if isinstance(sys.scheduler, FullNondeterminism):
        return [s for c in sorted(g.clients - g.ready) for s in step_get_grad(i, c, sys)]
    # clients missing from an explicit order follow in sorted order
    order = (sys.scheduler.order or ()) + tuple(sorted(g.clients))
    c = next(c for c in order if c in g.clients and c not in g.ready)
    return step_get_grad(i, c, sys)
