"""Realized differential-privacy factor between neighboring FL runs.

Epsilon is measured, never assumed: both runs are enumerated exactly and the
largest probability ratio over outcomes (or events, in the approximate mode)
is reported. Ratios are kept as exact rationals; logarithms are only taken
for reporting.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction

from .core_model import ActorId, Dataset, Infrastructure, neighbors_one
from .errors import PreconditionViolation
from .kripke import DEFAULT_STATE_CEILING, GradientOf, PathDistribution, build_model, curmodpar, terminal_distribution
from .transition import System

TOL = 1e-9


def log_ratio(p0: Fraction, p1: Fraction) -> float:
    """``ln(p0 / p1)`` without converting tiny rationals to float first."""
    if p0 == 0 and p1 == 0:
        return 0.0
    if p1 == 0:
        return math.inf
    if p0 == 0:
        return -math.inf
    return (math.log(p0.numerator) + math.log(p1.denominator)) - (
        math.log(p0.denominator) + math.log(p1.numerator)
    )


def log_fraction(x: Fraction) -> float:
    return math.log(x.numerator) - math.log(x.denominator)


@dataclass(frozen=True)
class OutcomeRatio:
    outcome: object
    p0: Fraction
    p1: Fraction
    log_ratio: float


@dataclass
class EpsilonReport:
    """Realized epsilon; ``exp_epsilon`` holds ``e^epsilon`` exactly when finite."""

    epsilon: float
    exp_epsilon: Fraction | None
    per_outcome: list[OutcomeRatio] = field(default_factory=list)
    delta: Fraction | None = None

    @property
    def finite(self) -> bool:
        return not math.isinf(self.epsilon)


def _sorted_support(d0: PathDistribution, d1: PathDistribution) -> list:
    return sorted(d0.support() | d1.support(), key=repr)


def _min_exp_epsilon(p: PathDistribution, q: PathDistribution, delta: Fraction, keys) -> Fraction | None:
    """Smallest ``x >= 1`` with ``p(E) <= x q(E) + delta`` for every event E.

    The worst event for a given ``x`` is a prefix of the outcomes sorted by
    decreasing likelihood ratio, so it suffices to constrain every prefix.
    Returns None when no finite ``x`` works.
    """

    def ratio_key(o):
        return (0, Fraction(0)) if q[o] == 0 else (1, -p[o] / q[o])

    x = Fraction(1)
    pe = qe = Fraction(0)
    for o in sorted(keys, key=ratio_key):
        pe += p[o]
        qe += q[o]
        if qe == 0:
            if pe > delta:
                return None
        else:
            x = max(x, (pe - delta) / qe)
    return x


def realized_epsilon(d0: PathDistribution, d1: PathDistribution, delta: Fraction | None = None) -> EpsilonReport:
    """Realized epsilon between two outcome distributions, symmetric in its arguments.

    Without ``delta``: the maximum absolute log-ratio over the union support,
    infinite if some outcome has positive mass on one side only. With
    ``delta``: the smallest epsilon such that both ``d0(E) <= e^eps d1(E) +
    delta`` and the swapped inequality hold for every event E.
    """
    keys = _sorted_support(d0, d1)
    per = [OutcomeRatio(o, d0[o], d1[o], log_ratio(d0[o], d1[o])) for o in keys]
    if delta is None:
        best: Fraction | None = Fraction(1)
        for r in per:
            if r.p0 == 0 or r.p1 == 0:
                best = None
                break
            best = max(best, r.p0 / r.p1, r.p1 / r.p0)
    else:
        delta = Fraction(delta)
        a = _min_exp_epsilon(d0, d1, delta, keys)
        b = _min_exp_epsilon(d1, d0, delta, keys)
        best = None if a is None or b is None else max(a, b)
    eps = math.inf if best is None else log_fraction(best)
    return EpsilonReport(epsilon=eps, exp_epsilon=best, per_outcome=per, delta=delta)


def event_dp_holds(d0: PathDistribution, d1: PathDistribution, exp_eps: Fraction, delta: Fraction = Fraction(0)) -> bool:
    """Brute force over every event of the union support, both directions."""
    keys = _sorted_support(d0, d1)
    m = len(keys)
    p0 = [d0[o] for o in keys]
    p1 = [d1[o] for o in keys]
    for mask in range(1 << m):
        a = sum((p0[i] for i in range(m) if mask >> i & 1), Fraction(0))
        b = sum((p1[i] for i in range(m) if mask >> i & 1), Fraction(0))
        if a > exp_eps * b + delta or b > exp_eps * a + delta:
            return False
    return True


@dataclass(frozen=True)
class NeighborRun:
    """Two initial infrastructures run under one shared system configuration.

    ``require_neighbors`` enforces that the global datasets differ in exactly
    one point; the all-clients decomposition mode turns it off because its
    datasets differ once per client.
    """

    i0: Infrastructure
    i1: Infrastructure
    system: System
    require_neighbors: bool = True

    def __post_init__(self):
        g0, g1 = self.i0.igra, self.i1.igra
        if g0.clients != g1.clients or g0.server != g1.server:
            raise PreconditionViolation("neighbor runs must share server and clients")
        if self.require_neighbors and not neighbors_one(g0.dataset, g1.dataset):
            raise PreconditionViolation("datasets are not neighbors (must differ in exactly one point)")


@dataclass
class DpCheck:
    holds: bool
    report: EpsilonReport


def within_budget(eps: float, budget: float) -> bool:
    return eps <= budget + TOL


def ni_fl_dp_check(
    run: NeighborRun,
    epsilon_budget: float,
    delta: Fraction | None = None,
    *,
    ceiling: int = DEFAULT_STATE_CEILING,
) -> DpCheck:
    d0 = terminal_distribution(build_model(run.i0, run.system, ceiling=ceiling), curmodpar)
    d1 = terminal_distribution(build_model(run.i1, run.system, ceiling=ceiling), curmodpar)
    report = realized_epsilon(d0, d1, delta)
    return DpCheck(within_budget(report.epsilon, epsilon_budget), report)


class DecompositionMode(enum.Enum):
    ONE_CLIENT_DIFFERS = "one_client_differs"
    ALL_CLIENTS_DIFFER = "all_clients_differ"


@dataclass
class DecompositionReport:
    mode: DecompositionMode
    per_client: dict[ActorId, EpsilonReport]
    global_report: EpsilonReport
    bound: float
    bound_holds: bool


def _check_partitions(run: NeighborRun, mode: DecompositionMode) -> None:
    p0, p1 = run.i0.igra.partition, run.i1.igra.partition
    differing = []
    for c in sorted(run.i0.igra.clients):
        a: Dataset = p0[c]
        b: Dataset = p1[c]
        if mode is DecompositionMode.ALL_CLIENTS_DIFFER:
            if not neighbors_one(a, b):
                raise PreconditionViolation(f"partitions of client {c} are not neighbors", client=c)
        elif a != b:
            if not neighbors_one(a, b):
                raise PreconditionViolation(f"partitions of client {c} differ in more than one point", client=c)
            differing.append(c)
    if mode is DecompositionMode.ONE_CLIENT_DIFFERS and len(differing) != 1:
        culprit = differing[1] if len(differing) > 1 else None
        raise PreconditionViolation(
            f"exactly one client's partition may differ, found {len(differing)}: {differing}", client=culprit
        )


def decomposition_check(
    run: NeighborRun, mode: DecompositionMode, *, ceiling: int = DEFAULT_STATE_CEILING
) -> DecompositionReport:
    """Per-client gradient epsilons against the global model epsilon.

    In one-client mode the global epsilon must not exceed the largest
    per-client epsilon; in all-clients mode it must not exceed their sum.
    """
    mode = DecompositionMode(mode)
    _check_partitions(run, mode)
    m0 = build_model(run.i0, run.system, ceiling=ceiling)
    m1 = build_model(run.i1, run.system, ceiling=ceiling)
    per_client = {
        c: realized_epsilon(terminal_distribution(m0, GradientOf(c)), terminal_distribution(m1, GradientOf(c)))
        for c in sorted(run.i0.igra.clients)
    }
    glob = realized_epsilon(terminal_distribution(m0, curmodpar), terminal_distribution(m1, curmodpar))
    eps = [r.epsilon for r in per_client.values()]
    bound = max(eps) if mode is DecompositionMode.ONE_CLIENT_DIFFERS else sum(eps)
    return DecompositionReport(mode, per_client, glob, bound, within_budget(glob.epsilon, bound))
