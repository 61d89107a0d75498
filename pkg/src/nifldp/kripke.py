"""Reachable-state models, path selection and exact path distributions.

A model is the reachable part of the transition relation from one initial
infrastructure. Every transition prepends one event to the current trace, so
the state graph is a DAG layered by trace length and breadth-first order is a
topological order. Probabilities of maximal paths are pushed forward along
that order in exact rational arithmetic.
"""

from __future__ import annotations

import logging
from collections import Counter
from collections.abc import Callable, Iterator
from dataclasses import dataclass, field
from fractions import Fraction

from .core_model import ActorId, Event, Infrastructure, ModelParam, validate_igraph
from .errors import NondeterministicModel, PreconditionViolation, StateExplosion
from .sampling import ExactSampler, block_rng, run_blocks
from .transition import System, successors

log = logging.getLogger(__name__)

DEFAULT_STATE_CEILING = 10**6

Observable = Callable[[Infrastructure], ModelParam]
Target = Callable[[Infrastructure], bool]


def curmodpar(s: Infrastructure) -> ModelParam:
    return s.igra.curmodpar


@dataclass(frozen=True)
class GradientOf:
    """Observable: the gradient a given client last released."""

    client: ActorId

    def __call__(self, s: Infrastructure) -> ModelParam:
        return s.igra.gradient[self.client]


@dataclass
class PathDistribution:
    """Distribution over observed outcomes with exact probabilities."""

    outcomes: dict[ModelParam, Fraction]
    trace_count: int = 0

    def __post_init__(self):
        if any(p < 0 for p in self.outcomes.values()):
            raise ValueError("negative probability")

    @classmethod
    def from_pmf(cls, pmf: dict, trace_count: int = 0) -> "PathDistribution":
        return cls({k: Fraction(v) for k, v in pmf.items() if v}, trace_count)

    def __getitem__(self, o) -> Fraction:
        return self.outcomes.get(o, Fraction(0))

    def __eq__(self, other) -> bool:
        if not isinstance(other, PathDistribution):
            return NotImplemented
        return {k: v for k, v in self.outcomes.items() if v} == {
            k: v for k, v in other.outcomes.items() if v
        }

    def support(self) -> set:
        return {o for o, p in self.outcomes.items() if p > 0}

    def total(self) -> Fraction:
        return sum(self.outcomes.values(), Fraction(0))

    def is_normalized(self) -> bool:
        return self.total() == 1

    def pushforward(self, fn: Callable) -> "PathDistribution":
        out: dict = {}
        for o, p in self.outcomes.items():
            k = fn(o)
            out[k] = out.get(k, Fraction(0)) + p
        return PathDistribution(out, self.trace_count)

    def tv(self, other: "PathDistribution") -> Fraction:
        keys = self.support() | other.support()
        return sum((abs(self[o] - other[o]) for o in keys), Fraction(0)) / 2


@dataclass
class KripkeModel:
    init: Infrastructure
    system: System
    states: list[Infrastructure] = field(default_factory=list)
    index: dict[Infrastructure, int] = field(default_factory=dict)
    edges: dict[int, list[tuple[int, Fraction, Event]]] = field(default_factory=dict)

    @property
    def terminals(self) -> list[int]:
        return [i for i in range(len(self.states)) if not self.edges[i]]

    def is_probabilistic(self) -> bool:
        return all(sum(p for _, p, _ in out) == 1 for out in self.edges.values() if out)

    def reach_probabilities(self) -> list[Fraction]:
        """Probability mass of paths from init reaching each state."""
        reach = [Fraction(0)] * len(self.states)
        reach[0] = Fraction(1)
        for i in range(len(self.states)):
            for j, p, _ in self.edges[i]:
                reach[j] += reach[i] * p
        return reach

    def path_counts(self) -> list[int]:
        counts = [0] * len(self.states)
        counts[0] = 1
        for i in range(len(self.states)):
            for j, _, _ in self.edges[i]:
                counts[j] += counts[i]
        return counts

    def max_depth(self) -> int:
        return max(len(s.trace) for s in self.states)


def build_model(i: Infrastructure, sys: System, *, ceiling: int = DEFAULT_STATE_CEILING) -> KripkeModel:
    problems = validate_igraph(i.igra)
    if problems:
        raise PreconditionViolation("initial graph is malformed: " + "; ".join(problems))
    m = KripkeModel(init=i, system=sys, states=[i], index={i: 0})
    frontier = 0
    while frontier < len(m.states):
        s = m.states[frontier]
        out: dict[int, list] = {}
        for step in successors(s, sys):
            j = m.index.get(step.next)
            if j is None:
                if len(m.states) >= ceiling:
                    raise StateExplosion(ceiling)
                j = len(m.states)
                m.states.append(step.next)
                m.index[step.next] = j
            if j in out:
                out[j][1] += step.prob
            else:
                out[j] = [j, step.prob, step.event]
        m.edges[frontier] = [tuple(e) for e in out.values()]
        frontier += 1
    log.debug("built model with %d states", len(m.states))
    return m


def _maximal_paths(m: KripkeModel) -> Iterator[tuple[int, ...]]:
    stack = [(0,)]
    while stack:
        path = stack.pop()
        out = m.edges[path[-1]]
        if not out:
            yield path
        for j, _, _ in reversed(out):
            stack.append(path + (j,))


def paths_into(m: KripkeModel, target: Target) -> set[tuple[Infrastructure, ...]]:
    """Maximal paths from init whose final state satisfies ``target``.

    Only the final state of a path is tested; a path passing through a target
    state earlier does not end there.
    """
    return {
        tuple(m.states[k] for k in path)
        for path in _maximal_paths(m)
        if target(m.states[path[-1]])
    }


def path_probability(m: KripkeModel, path: tuple[Infrastructure, ...]) -> Fraction:
    prob = Fraction(1)
    for a, b in zip(path, path[1:]):
        ia, ib = m.index[a], m.index[b]
        prob *= next(p for j, p, _ in m.edges[ia] if j == ib)
    return prob


def prob_into(m: KripkeModel, target: Target) -> Fraction:
    reach = m.reach_probabilities()
    return sum((reach[k] for k in m.terminals if target(m.states[k])), Fraction(0))


def terminal_distribution(m: KripkeModel, observable: Observable = curmodpar) -> PathDistribution:
    if not m.is_probabilistic():
        raise NondeterministicModel("scheduler leaves choices open; no single distribution")
    reach = m.reach_probabilities()
    counts = m.path_counts()
    out: dict[ModelParam, Fraction] = {}
    n_paths = 0
    for k in m.terminals:
        o = observable(m.states[k])
        out[o] = out.get(o, Fraction(0)) + reach[k]
        n_paths += counts[k]
    return PathDistribution(out, n_paths)


def exact_distribution(
    i: Infrastructure, sys: System, observable: Observable = curmodpar, *, ceiling: int = DEFAULT_STATE_CEILING
) -> PathDistribution:
    return terminal_distribution(build_model(i, sys, ceiling=ceiling), observable)


class RunSampler:
    """Samples runs of the transition system, memoizing per-state samplers."""

    def __init__(self, sys: System):
        self.sys = sys
        self._cache: dict[Infrastructure, ExactSampler | None] = {}

    def _sampler(self, s: Infrastructure) -> ExactSampler | None:
        if s not in self._cache:
            steps = successors(s, self.sys)
            if not steps:
                self._cache[s] = None
            else:
                if sum(st.prob for st in steps) != 1:
                    raise NondeterministicModel("cannot sample under a nondeterministic scheduler")
                self._cache[s] = ExactSampler([st.next for st in steps], [st.prob for st in steps])
        return self._cache[s]

    def run(self, i: Infrastructure, rng) -> Infrastructure:
        s = i
        while (sampler := self._sampler(s)) is not None:
            s = sampler.sample(rng)
        return s


def _mc_block(i, sys, observable, seed, n, block) -> Counter:
    walker = RunSampler(sys)
    rng = block_rng(seed, block)
    return Counter(observable(walker.run(i, rng)) for _ in range(n))


def mc_terminal_distribution(
    i: Infrastructure,
    sys: System,
    samples: int,
    seed: int,
    observable: Observable = curmodpar,
    *,
    workers: int | None = None,
) -> PathDistribution:
    """Empirical distribution of ``samples`` independently sampled runs.

    Bit-identical for equal ``(seed, i, sys)`` regardless of worker count;
    see :mod:`nifldp.sampling` for the seed derivation.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    total: Counter = Counter()
    for c in run_blocks(_mc_block, samples, i, sys, observable, seed, workers=workers):
        total.update(c)
    return PathDistribution({o: Fraction(n, samples) for o, n in total.items()}, samples)
