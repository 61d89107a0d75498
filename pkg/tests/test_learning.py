from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from nifldp.errors import EmptyPartition, WeightMismatch
from nifldp.learning import (
    DiscreteLaplace,
    Grid,
    Identity,
    LearningConfig,
    LossModel,
    PseudoGradient,
    SparsifyTopK,
    avg_loss_gradient,
    client_update,
    noise_pmf,
    objective,
    server_eval,
)

from conftest import ds, pt

fracs = st.fractions(min_value=-20, max_value=20, max_denominator=12)


class TestGrid:
    g = Grid(Fraction(1, 4), Fraction(-1), Fraction(1))

    def test_round_half_away_from_zero(self):
        assert self.g.round(Fraction(1, 8)) == Fraction(1, 4)
        assert self.g.round(Fraction(-1, 8)) == Fraction(-1, 4)
        assert self.g.round(Fraction(1, 9)) == 0

    def test_quantize_clamps(self):
        assert self.g.quantize((Fraction(7),)) == (Fraction(1),)
        assert self.g.quantize((Fraction(-7),)) == (Fraction(-1),)

    def test_bounds_must_be_multiples(self):
        with pytest.raises(ValueError):
            Grid(Fraction(1, 3), Fraction(0), Fraction(1, 2))

    @given(fracs)
    def test_quantize_lands_on_grid(self, x):
        assert self.g.contains(self.g.quantize((x,)))

    @given(fracs)
    def test_quantize_idempotent(self, x):
        once = self.g.quantize((x,))
        assert self.g.quantize(once) == once


class TestNoise:
    @pytest.mark.parametrize("t,s", [("1/2", 1), ("1/2", 2), ("2/3", 3), ("3/4", 0)])
    def test_pmf_normalized(self, t, s):
        pmf = noise_pmf(DiscreteLaplace(Fraction(t), s))
        assert sum(pmf.values()) == 1
        assert set(pmf) == set(range(-s, s + 1))

    def test_pmf_half_one_step(self):
        # t^|k| over {-1,0,1} is {1/2, 1, 1/2}, total 2
        assert noise_pmf(DiscreteLaplace(Fraction(1, 2), 1)) == {-1: Fraction(1, 4), 0: Fraction(1, 2), 1: Fraction(1, 4)}

    def test_geometric_ratio(self):
        pmf = noise_pmf(DiscreteLaplace(Fraction(2, 3), 4))
        for k in range(0, 4):
            assert pmf[k + 1] / pmf[k] == Fraction(2, 3)

    def test_bad_t(self):
        with pytest.raises(ValueError):
            DiscreteLaplace(Fraction(1), 2)


class TestLoss:
    def test_mean_gradient(self):
        assert LossModel.MEAN_ESTIMATION.gradient((Fraction(2),), pt("a", 5)) == (Fraction(-3),)

    def test_regression_bias_first(self):
        g = LossModel.LINEAR_REGRESSION.gradient((Fraction(1), Fraction(1)), pt("a", 5, 2))
        # residual 1 + 2 - 5 = -2
        assert g == (Fraction(-2), Fraction(-4))

    @given(st.tuples(fracs, fracs, fracs), fracs, fracs, fracs)
    def test_regression_gradient_matches_central_difference(self, w, x1, x2, y):
        # the loss is quadratic, so a central difference is exact
        p = pt("a", y, x1, x2)
        model = LossModel.LINEAR_REGRESSION
        h = Fraction(1, 1000)
        g = model.gradient(w, p)
        for i in range(3):
            up = tuple(c + h if j == i else c for j, c in enumerate(w))
            dn = tuple(c - h if j == i else c for j, c in enumerate(w))
            assert (model.loss(up, p) - model.loss(dn, p)) / (2 * h) == g[i]

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            LossModel.MEAN_ESTIMATION.gradient((Fraction(0), Fraction(0)), pt("a", 1))

    def test_empty_partition(self):
        with pytest.raises(EmptyPartition):
            avg_loss_gradient(LossModel.MEAN_ESTIMATION, (Fraction(0),), ds())


class TestServerEval:
    def test_weighted_average(self):
        parts = {"a": ds(pt("p", 0)), "b": ds(pt("q", 0), pt("r", 0), pt("s", 0))}
        out = server_eval({"a": (Fraction(2),), "b": (Fraction(6),)}, parts, 4)
        assert out == (Fraction(5),)

    def test_single_client_unchanged(self):
        parts = {"a": ds(pt("p", 0), pt("q", 0))}
        assert server_eval({"a": (Fraction(7, 3),)}, parts, 2) == (Fraction(7, 3),)

    def test_weight_mismatch(self):
        parts = {"a": ds(pt("p", 0))}
        with pytest.raises(WeightMismatch):
            server_eval({"a": (Fraction(1),)}, parts, 3)


@given(st.lists(fracs, min_size=1, max_size=4), st.lists(fracs, min_size=1, max_size=4))
def test_fedavg_one_step_is_global_mean(xs, ys):
    # eta = 1 from w = 0 lands each client on its own mean
    cfg = LearningConfig(eta=Fraction(1))
    parts = {
        "a": ds(*(pt(f"a{k}", v) for k, v in enumerate(xs))),
        "b": ds(*(pt(f"b{k}", v) for k, v in enumerate(ys))),
    }
    grads = {c: client_update(LossModel.MEAN_ESTIMATION, cfg, (Fraction(0),), p) for c, p in parts.items()}
    n = len(xs) + len(ys)
    assert server_eval(grads, parts, n) == (sum(xs + ys, Fraction(0)) / n,)


@given(st.lists(fracs, min_size=1, max_size=4), st.lists(fracs, min_size=1, max_size=4), fracs)
def test_objective_decomposes_by_weight(xs, ys, w):
    model = LossModel.MEAN_ESTIMATION
    a = ds(*(pt(f"a{k}", v) for k, v in enumerate(xs)))
    b = ds(*(pt(f"b{k}", v) for k, v in enumerate(ys)))
    n = len(xs) + len(ys)
    whole = objective(model, (w,), a.union(b))
    assert whole == Fraction(len(xs), n) * objective(model, (w,), a) + Fraction(len(ys), n) * objective(model, (w,), b)


class TestDefenses:
    cfg = LearningConfig(eta=Fraction(1, 2), local_epochs=3)
    part = ds(pt("a", 1, 1, 0), pt("b", 3, 0, 1))
    w = (Fraction(0), Fraction(0), Fraction(0))

    def test_pseudo_gradient_one_epoch_is_identity(self):
        one = PseudoGradient(epochs=1)
        model = LossModel.LINEAR_REGRESSION
        assert client_update(model, self.cfg, self.w, self.part, one) == client_update(
            model, self.cfg, self.w, self.part, Identity()
        )

    def test_pseudo_gradient_uses_config_epochs(self):
        model = LossModel.LINEAR_REGRESSION
        assert client_update(model, self.cfg, self.w, self.part, PseudoGradient()) == client_update(
            model, self.cfg, self.w, self.part, PseudoGradient(3)
        )

    def test_top_k(self):
        v = (Fraction(1), Fraction(-3), Fraction(2))
        assert SparsifyTopK(2).apply(v) == (Fraction(0), Fraction(-3), Fraction(2))

    def test_top_k_ties_keep_lower_index(self):
        v = (Fraction(2), Fraction(-2), Fraction(2))
        assert SparsifyTopK(1).apply(v) == (Fraction(2), Fraction(0), Fraction(0))

    @given(st.lists(fracs, min_size=1, max_size=6), st.integers(1, 6))
    def test_top_k_keeps_at_most_k(self, v, k):
        out = SparsifyTopK(k).apply(tuple(v))
        assert sum(x != 0 for x in out) <= k
        assert all(o in (0, x) for o, x in zip(out, v))


def test_config_rejects_nonpositive_eta():
    with pytest.raises(ValueError):
        LearningConfig(eta=Fraction(0))
