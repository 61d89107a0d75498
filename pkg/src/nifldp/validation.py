"""Built-in oracle suite behind ``nifldp validate``.

Every check recomputes its quantity by an independent route (brute force,
direct summation, sampling) and compares it with the library's answer.
"""

from __future__ import annotations

import random
from collections.abc import Callable
from dataclasses import dataclass
from fractions import Fraction

from .adversary import Adversary, _OneOn, advantage, bayes_optimal, bound_chain, tight_bound
from .core_model import DataPoint, Dataset, initial_infrastructure
from .kripke import PathDistribution, exact_distribution, mc_terminal_distribution
from .learning import DiscreteLaplace, Grid, LearningConfig, LossModel, noise_pmf
from .privacy import event_dp_holds, realized_epsilon
from .transition import System

PmfFn = Callable[[DiscreteLaplace], dict[int, Fraction]]


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str


def random_pmf(rng: random.Random, m: int, *, allow_zero: bool = False) -> PathDistribution:
    lo = 0 if allow_zero else 1
    while True:
        w = [rng.randint(lo, 20) for _ in range(m)]
        if sum(w):
            break
    total = sum(w)
    return PathDistribution({k: Fraction(x, total) for k, x in enumerate(w) if x})


def pmf_pairs(seed: int, count: int, max_outcomes: int, *, allow_zero: bool = False):
    rng = random.Random(seed)
    for _ in range(count):
        m = rng.randint(1, max_outcomes)
        yield random_pmf(rng, m, allow_zero=allow_zero), random_pmf(rng, m, allow_zero=allow_zero), m


def _masses(a: Adversary, d: PathDistribution) -> tuple[Fraction, Fraction]:
    one = sum((p for o, p in d.outcomes.items() if a(o) == 1), Fraction(0))
    return d.total() - one, one


def identity_sweep(seed: int = 1, pairs: int = 1000, adversaries: int = 50, max_outcomes: int = 8) -> CheckResult:
    """``adv == 2 * success - 1`` from a direct uniform-prior success count."""
    rng = random.Random(seed + 1)
    bad = 0
    for d0, d1, m in pmf_pairs(seed, pairs, max_outcomes, allow_zero=True):
        eps = realized_epsilon(d0, d1)
        for _ in range(adversaries):
            ones = frozenset(k for k in range(m) if rng.random() < 0.5)
            a = Adversary(_OneOn(ones))
            r = advantage(a, d0, d1, eps)
            zero0, _ = _masses(a, d0)
            _, one1 = _masses(a, d1)
            if r.advantage != 2 * ((zero0 + one1) / 2) - 1:
                bad += 1
    return CheckResult("advantage_identity", bad == 0, f"{pairs * adversaries} adversaries, {bad} mismatches")


def brute_force_optimality(seed: int = 2, pairs: int = 200, max_outcomes: int = 12) -> CheckResult:
    """Maximum advantage over all 2^m adversaries equals TV and the Bayes rule attains it."""
    bad = 0
    for d0, d1, m in pmf_pairs(seed, pairs, max_outcomes):
        keys = range(m)
        diffs = [d1[o] - d0[o] for o in keys]
        best = max(sum(diffs[i] for i in range(m) if mask >> i & 1) for mask in range(1 << m))
        tv = d0.tv(d1)
        if best != tv or advantage(bayes_optimal(d0, d1), d0, d1).advantage != tv:
            bad += 1
    return CheckResult("bayes_optimal_equals_tv", bad == 0, f"{pairs} pairs, {bad} mismatches")


def bound_chain_check(seed: int = 2, pairs: int = 200, max_outcomes: int = 12) -> CheckResult:
    bad = 0
    for d0, d1, _ in pmf_pairs(seed, pairs, max_outcomes):
        try:
            bound_chain(d0, d1)
        except AssertionError:
            bad += 1
    return CheckResult("bound_chain", bad == 0, f"{pairs} pairs, {bad} violations")


def mediant_check(pmf_fn: PmfFn = noise_pmf) -> CheckResult:
    """Event-wise DP at the singleton epsilon, over the noise outputs of two neighbors.

    Two clean values one grid step apart get the noise added and are clamped
    to ``[1 - S, S - 1]``, so both supports are that whole range. Also requires each output distribution to be normalized; an
    unnormalized pmf is not a distribution and fails the check.
    """
    failures = []
    for t, s in ((Fraction(1, 2), 1), (Fraction(1, 2), 2), (Fraction(2, 3), 3), (Fraction(3, 4), 5)):
        mech = DiscreteLaplace(t, s)
        pmf = pmf_fn(mech)
        out0: dict = {}
        out1: dict = {}
        for k, p in pmf.items():
            for out, v in ((out0, k), (out1, k + 1)):
                o = (Fraction(max(1 - s, min(s - 1, v))),)
                out[o] = out.get(o, Fraction(0)) + p
        d0, d1 = PathDistribution(out0), PathDistribution(out1)
        if not (d0.is_normalized() and d1.is_normalized()):
            failures.append(f"t={t} S={s}: noise pmf sums to {d0.total()}")
            continue
        eps = realized_epsilon(d0, d1)
        if not eps.finite or not event_dp_holds(d0, d1, eps.exp_epsilon):
            failures.append(f"t={t} S={s}: event inequality fails")
            continue
        # the singleton epsilon is also the smallest one that works on events
        if eps.exp_epsilon > 1 and event_dp_holds(d0, d1, eps.exp_epsilon * Fraction(999_999, 1_000_000)):
            failures.append(f"t={t} S={s}: singleton epsilon not tight")
    return CheckResult("mediant_event_dp", not failures, "; ".join(failures) or "4 mechanisms")


def acceptance_system() -> System:
    cfg = LearningConfig(eta=Fraction(1), rounds=1, grid=Grid(Fraction(1), Fraction(-10), Fraction(10)))
    return System(cfg, LossModel.MEAN_ESTIMATION, mech=DiscreteLaplace(Fraction(1, 2), 1))


def acceptance_partitions() -> dict[str, Dataset]:
    """Two clients with two one-dimensional readings each."""
    return {
        "c1": Dataset.of(DataPoint("a1", (), Fraction(1)), DataPoint("a2", (), Fraction(3))),
        "c2": Dataset.of(DataPoint("b1", (), Fraction(2)), DataPoint("b2", (), Fraction(4))),
    }


def mc_vs_exact(samples: int = 100_000, seed: int = 2024, tol: float = 0.012) -> CheckResult:
    i = initial_infrastructure(acceptance_partitions(), [0])
    sys = acceptance_system()
    exact = exact_distribution(i, sys)
    emp = mc_terminal_distribution(i, sys, samples, seed)
    tv = float(exact.tv(emp))
    return CheckResult("mc_vs_exact", tv <= tol, f"TV={tv:.5f} over {samples} samples (tol {tol})")


def tight_pair_check() -> CheckResult:
    from .adversary import tight_pair

    bad = []
    for r in (Fraction(3, 2), Fraction(2), Fraction(3), Fraction(10)):
        d0, d1 = tight_pair(r)
        rep = bound_chain(d0, d1)
        if rep.eps_star.exp_epsilon != r or abs(float(rep.tv) - tight_bound(r)) > 1e-12:
            bad.append(str(r))
    return CheckResult("tight_pair_equality", not bad, "R in {3/2, 2, 3, 10}" + (f"; failed {bad}" if bad else ""))


def perturbed_pmf(mech: DiscreteLaplace) -> dict[int, Fraction]:
    """Fault hook: the true pmf with extra mass on the centre outcome."""
    pmf = dict(noise_pmf(mech))
    pmf[0] += Fraction(1, 100)
    return pmf


def run_suite(*, fault: str | None = None) -> list[CheckResult]:
    pmf_fn = perturbed_pmf if fault == "perturb-pmf" else noise_pmf
    return [
        identity_sweep(),
        brute_force_optimality(),
        bound_chain_check(),
        tight_pair_check(),
        mediant_check(pmf_fn),
        mc_vs_exact(),
    ]
