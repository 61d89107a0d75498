import math
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from nifldp.adversary import (
    Adversary,
    advantage,
    bayes_optimal,
    bound_chain,
    challenge_experiment,
    constant,
    distribution_challenge,
    guess_one_on,
    exp_bound,
    symmetric_on,
    tight_bound,
    tight_pair,
)
from nifldp.core_model import initial_infrastructure
from nifldp.errors import InfiniteEpsilon
from nifldp.kripke import PathDistribution
from nifldp.privacy import NeighborRun

from conftest import ds, noisy_system, pt

weights = st.lists(st.integers(1, 9), min_size=2, max_size=6)


def normalize(ws):
    total = sum(ws)
    return PathDistribution({k: Fraction(w, total) for k, w in enumerate(ws)})


def test_constant_adversaries_have_no_advantage():
    d0, d1 = tight_pair(3)
    assert advantage(constant(0), d0, d1).advantage == 0
    assert advantage(constant(1), d0, d1).advantage == 0


def test_output_must_be_a_bit():
    with pytest.raises(ValueError):
        Adversary(lambda o: 2)(0)


@given(weights, st.data())
def test_advantage_identity(ws, data):
    d0 = normalize(ws)
    d1 = normalize(list(reversed(ws)))
    ones = data.draw(st.sets(st.sampled_from(range(len(ws)))))
    r = advantage(guess_one_on(ones), d0, d1)
    assert r.identity_holds
    assert r.advantage == 2 * r.success_prob - 1


@given(weights, weights)
def test_complement_negates_advantage(a, b):
    n = min(len(a), len(b))
    d0, d1 = normalize(a[:n]), normalize(b[:n])
    adv = guess_one_on({0})
    assert advantage(adv.complement(), d0, d1).advantage == -advantage(adv, d0, d1).advantage


@given(weights, weights)
def test_bayes_attains_tv(a, b):
    n = min(len(a), len(b))
    d0, d1 = normalize(a[:n]), normalize(b[:n])
    assert advantage(bayes_optimal(d0, d1), d0, d1).advantage == d0.tv(d1)


@given(weights, weights)
def test_bound_chain_holds(a, b):
    n = min(len(a), len(b))
    d0, d1 = normalize(a[:n]), normalize(b[:n])
    r = bound_chain(d0, d1)
    x = r.eps_star.exp_epsilon
    assert r.tv <= (x - 1) / (x + 1)
    assert r.tight_bound <= r.exp_bound + 1e-12


@pytest.mark.parametrize("ratio", [Fraction(3, 2), 2, 3, 10])
def test_tight_pair_is_tight(ratio):
    d0, d1 = tight_pair(ratio)
    r = bound_chain(d0, d1)
    assert r.eps_star.exp_epsilon == ratio
    assert r.eps_star.epsilon == pytest.approx(math.log(ratio), abs=1e-12)
    assert float(r.tv) == pytest.approx(tight_bound(ratio), abs=1e-12)


def test_tight_pair_three():
    r = bound_chain(*tight_pair(3))
    assert r.tv == Fraction(1, 2)
    assert r.tight_bound == pytest.approx(0.5)
    assert r.exp_bound == pytest.approx(2 / 3)


def test_infinite_epsilon_has_no_chain():
    d0 = PathDistribution({0: Fraction(1)})
    d1 = PathDistribution({1: Fraction(1)})
    with pytest.raises(InfiniteEpsilon) as e:
        bound_chain(d0, d1)
    assert e.value.report.advantage == 1


def test_bounds_at_infinity():
    assert tight_bound(math.inf) == 1.0 and exp_bound(math.inf) == 1.0


def test_symmetric_on_tight_pair():
    d0, d1 = tight_pair(2)
    assert symmetric_on(bayes_optimal(d0, d1), d0, d1)


class TestChallenge:
    def test_distribution_game_estimates_tv(self):
        d0, d1 = tight_pair(3)
        c = distribution_challenge(d0, d1, bayes_optimal(d0, d1), 40_000, seed=1)
        assert c.advantage == pytest.approx(0.5, abs=0.03)
        assert sum(r[2] for r in c.rows) == 40_000

    def test_fl_game_is_deterministic(self):
        parts = {"a": ds(pt("a1", 0), pt("a2", 0)), "b": ds(pt("b1", 1))}
        i0 = initial_infrastructure(parts, [0])
        i1 = initial_infrastructure({**parts, "a": ds(pt("a1", 0), pt("a2", 2))}, [0])
        run = NeighborRun(i0, i1, noisy_system(s=2, lo=-1, hi=1))
        adv = guess_one_on({(Fraction(1),)})
        a = challenge_experiment(run, adv, 3000, seed=4)
        b = challenge_experiment(run, adv, 3000, seed=4)
        assert a == b
        assert 0 <= a.success_prob <= 1
