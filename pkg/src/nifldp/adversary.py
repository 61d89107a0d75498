"""Distinguishing advantage of adversaries against two outcome distributions.

Adversaries are deterministic, information-theoretic guessers: they see one
outcome and output a bit. Advantage is ``P_D1(A=1) - P_D0(A=1)``; the
uniform-prior success probability satisfies ``adv = 2 * success - 1``
exactly, which is checked on every report.
"""

from __future__ import annotations

import math
from collections.abc import Callable
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import InfiniteEpsilon
from .kripke import PathDistribution, RunSampler, curmodpar
from .privacy import EpsilonReport, NeighborRun, realized_epsilon
from .sampling import ExactSampler, block_rng, block_sizes, run_blocks

FLOAT_TOL = 1e-12


@dataclass(frozen=True)
class Adversary:
    decide: Callable[[object], int]
    description: str = "adversary"

    def __call__(self, outcome) -> int:
        b = self.decide(outcome)
        if b not in (0, 1):
            raise ValueError(f"adversary must output a bit, got {b!r}")
        return b

    def complement(self) -> "Adversary":
        return Adversary(_Flip(self.decide), f"not({self.description})")


# Picklable decision rules, so adversaries can cross process boundaries.


@dataclass(frozen=True)
class _Const:
    bit: int

    def __call__(self, o) -> int:
        return self.bit


@dataclass(frozen=True)
class _OneOn:
    ones: frozenset

    def __call__(self, o) -> int:
        return int(o in self.ones)


@dataclass(frozen=True)
class _Flip:
    inner: Callable

    def __call__(self, o) -> int:
        return 1 - self.inner(o)


def constant(bit: int) -> Adversary:
    return Adversary(_Const(bit), f"always {bit}")


def guess_one_on(outcomes) -> Adversary:
    chosen = frozenset(outcomes)
    return Adversary(_OneOn(chosen), f"1 on {len(chosen)} outcome(s)")


def tight_bound(exp_eps: Fraction | float) -> float:
    """``(e^eps - 1) / (e^eps + 1)``, the best advantage against pure eps-DP pairs."""
    x = float(exp_eps)
    return 1.0 if math.isinf(x) else (x - 1) / (x + 1)


def exp_bound(exp_eps: Fraction | float) -> float:
    """``1 - e^-eps``."""
    x = float(exp_eps)
    return 1.0 if math.isinf(x) else 1 - 1 / x


@dataclass
class AdvantageReport:
    advantage: Fraction
    success_prob: Fraction
    tv: Fraction
    eps_star: EpsilonReport
    tight_bound: float
    exp_bound: float
    description: str = ""

    @property
    def identity_holds(self) -> bool:
        return self.advantage == 2 * self.success_prob - 1


def _accept_mass(a: Adversary, d: PathDistribution, bit: int) -> Fraction:
    return sum((p for o, p in d.outcomes.items() if a(o) == bit), Fraction(0))


def advantage(
    a: Adversary, d0: PathDistribution, d1: PathDistribution, eps: EpsilonReport | None = None
) -> AdvantageReport:
    """Advantage of ``a``; pass ``eps`` to reuse one epsilon report across many adversaries."""
    adv = _accept_mass(a, d1, 1) - _accept_mass(a, d0, 1)
    success = (_accept_mass(a, d0, 0) + _accept_mass(a, d1, 1)) / 2
    if eps is None:
        eps = realized_epsilon(d0, d1)
    x = eps.exp_epsilon if eps.finite else math.inf
    report = AdvantageReport(adv, success, d0.tv(d1), eps, tight_bound(x), exp_bound(x), a.description)
    assert report.identity_holds, "advantage != 2*success - 1"
    return report


def bayes_optimal(d0: PathDistribution, d1: PathDistribution) -> Adversary:
    """Guesses 1 exactly where ``d1`` puts strictly more mass than ``d0``."""
    ones = frozenset(o for o in d0.support() | d1.support() if d1[o] > d0[o])
    return Adversary(_OneOn(ones), "bayes-optimal")


def bound_chain(d0: PathDistribution, d1: PathDistribution) -> AdvantageReport:
    """Bayes advantage with the bound chain ``TV <= tight <= 1 - e^-eps <= 1`` asserted.

    The first link is checked exactly in rationals; the others within 1e-12.
    """
    report = advantage(bayes_optimal(d0, d1), d0, d1)
    if not report.eps_star.finite:
        raise InfiniteEpsilon(report)
    x = report.eps_star.exp_epsilon
    assert report.advantage == report.tv
    assert report.tv <= (x - 1) / (x + 1), "TV exceeds the eps-DP tight bound"
    assert report.tight_bound <= report.exp_bound + FLOAT_TOL
    assert report.exp_bound <= 1 + FLOAT_TOL
    return report


def tight_pair(ratio) -> tuple[PathDistribution, PathDistribution]:
    """Two-outcome pair whose likelihood ratio is ``ratio`` on both outcomes."""
    r = Fraction(ratio)
    if r <= 1:
        raise ValueError("ratio must exceed 1")
    lo, hi = (Fraction(0),), (Fraction(1),)
    p = PathDistribution({lo: r / (1 + r), hi: 1 / (1 + r)})
    q = PathDistribution({lo: 1 / (1 + r), hi: r / (1 + r)})
    return p, q


def symmetric_on(a: Adversary, d0: PathDistribution, d1: PathDistribution) -> bool:
    """Whether ``P_D0(A=0) == P_D1(A=1)`` holds for this adversary."""
    return _accept_mass(a, d0, 0) == _accept_mass(a, d1, 1)


@dataclass
class ChallengeReport:
    trials: int
    successes: int
    success_prob: float
    advantage: float
    rows: list[tuple[int, int, int, float]]  # trial_block, successes, trials, advantage_estimate


def _challenge_block(i0, i1, sys, adversary, seed, n, block):
    walkers = (RunSampler(sys), RunSampler(sys))
    inits = (i0, i1)
    rng: np.random.Generator = block_rng(seed, block)
    wins = 0
    for _ in range(n):
        b = int(rng.integers(0, 2))
        out = curmodpar(walkers[b].run(inits[b], rng))
        wins += adversary(out) == b
    return wins


def challenge_experiment(
    run: NeighborRun, a: Adversary, trials: int, seed: int, *, workers: int | None = None
) -> ChallengeReport:
    """Monte Carlo guessing game: hidden bit b, one run on dataset b, adversary guesses.

    With more than one worker the adversary must be picklable (module-level
    decide function).
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    wins_per_block = run_blocks(_challenge_block, trials, run.i0, run.i1, run.system, a, seed, workers=workers)
    return _challenge_report(trials, wins_per_block)


def _distribution_block(d0, d1, adversary, seed, n, block):
    samplers = [ExactSampler(list(d.outcomes), list(d.outcomes.values())) for d in (d0, d1)]
    rng = block_rng(seed, block)
    wins = 0
    for _ in range(n):
        b = int(rng.integers(0, 2))
        wins += adversary(samplers[b].sample(rng)) == b
    return wins


def distribution_challenge(
    d0: PathDistribution, d1: PathDistribution, a: Adversary, trials: int, seed: int, *, workers: int | None = None
) -> ChallengeReport:
    """The guessing game played directly against two given distributions."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    wins_per_block = run_blocks(_distribution_block, trials, d0, d1, a, seed, workers=workers)
    return _challenge_report(trials, wins_per_block)


def _challenge_report(trials: int, wins_per_block: list[int]) -> ChallengeReport:
    rows = [(b, w, n, 2 * w / n - 1) for b, (w, n) in enumerate(zip(wins_per_block, block_sizes(trials)))]
    wins = sum(wins_per_block)
    success = wins / trials
    return ChallengeReport(trials, wins, success, 2 * success - 1, rows)
