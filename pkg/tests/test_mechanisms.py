import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from privfunnel.errors import AlphabetTooLarge, InvalidDistribution
from privfunnel.mechanisms import (Channel, PrivacyReport, blind_channel, cr_channel, cr_lip,
                                   cr_sample, cr_sample_batch, cr_utility, grr, ldp_of,
                                   lip_grr, lip_of, oue_channel, oue_lip, oue_utility,
                                   output_given_secret, protocol_utility, solve_alpha,
                                   utility)
from privfunnel.prob import (JointDistribution, entropy, mutual_information, pushforward,
                             sample_jeffreys)

from conftest import LN2, LN3
from strategies import alphas, channels, joints


def brute_oue_mi(alpha, px):
    """I(X;Y) of unary encoding by listing every bit vector."""
    a = len(px)
    keep, flip = 0.5, math.exp(-alpha) / (1 + math.exp(-alpha))
    total = 0.0
    rows = []
    for mask in range(2 ** a):
        row = []
        for x in range(a):
            pr = 1.0
            for k in range(a):
                on = (mask >> k) & 1
                p1 = keep if k == x else flip
                pr *= p1 if on else 1 - p1
            row.append(pr)
        rows.append(row)
    Q = np.array(rows)
    py = Q @ px
    for y in range(len(Q)):
        for x in range(a):
            if Q[y, x] > 0:
                total += px[x] * Q[y, x] * math.log(Q[y, x] / py[y])
    return total


class TestChannel:
    def test_validation(self):
        with pytest.raises(InvalidDistribution):
            Channel(np.array([[0.5, 0.5], [0.6, 0.5]]))
        with pytest.raises(InvalidDistribution):
            Channel(np.array([[1.2, 1.0], [-0.2, 0.0]]))

    def test_canonical_drops_zero_rows_and_sorts(self):
        Q = Channel(np.array([[0.0, 0.0], [0.3, 1.0], [0.7, 0.0]]))
        C = Q.canonical()
        assert C.b == 2
        np.testing.assert_allclose(C.Q, [[0.3, 1.0], [0.7, 0.0]])

    def test_round_trip(self):
        Q = grr(1.3, 4)
        R = Channel.from_dict(json.loads(json.dumps(Q.to_dict())))
        np.testing.assert_array_equal(Q.Q, R.Q)


class TestLDP:
    def test_constant_channel(self, correlated):
        assert ldp_of(np.ones((1, 2)), correlated).value == 0.0

    def test_identity_on_equal_binary_is_infinite(self, equal_binary):
        rep = ldp_of(np.eye(2), equal_binary)
        assert math.isinf(rep.value)
        assert (0, 0, 1) in rep.witnesses

    def test_grr_on_correlated(self, correlated):
        # P(Y|S) = [[.65, .35], [.35, .65]]
        pys = output_given_secret(grr(LN3, 2), correlated)
        np.testing.assert_allclose(pys, [[0.65, 0.35], [0.35, 0.65]], atol=1e-15)
        assert ldp_of(grr(LN3, 2), correlated).value == pytest.approx(math.log(13 / 7),
                                                                     abs=1e-12)

    def test_unreachable_outputs_ignored(self, correlated):
        Q = np.array([[0.5, 0.5], [0.5, 0.5], [0.0, 0.0]])
        assert ldp_of(Q, correlated).value == 0.0
        assert lip_of(Q, correlated).value == 0.0


class TestLIP:
    def test_constant_and_independent(self, correlated, independent):
        assert lip_of(np.ones((1, 2)), correlated).value == 0.0
        assert lip_of(np.eye(2), independent).value == 0.0

    def test_grr_on_equal_binary(self, equal_binary):
        assert lip_of(grr(LN3, 2), equal_binary).value == pytest.approx(LN2, abs=1e-12)

    def test_report_json(self, equal_binary):
        d = ldp_of(np.eye(2), equal_binary).to_dict()
        assert d["measured"] == "inf"
        json.dumps(d)
        assert PrivacyReport("LIP", 0.3, []).satisfies(0.3)
        assert not PrivacyReport("LIP", 0.3 + 1e-6, []).satisfies(0.3)

    @given(joints(), st.data())
    def test_lemma_orderings(self, j, data):
        Q = data.draw(channels(j.a))
        lip = lip_of(Q, j).value
        ldp = ldp_of(Q, j).value
        assert lip <= ldp + 1e-9
        if math.isfinite(ldp):
            assert ldp <= 2 * lip + 1e-9
        p_ys, _ = pushforward(Q, j)
        assert mutual_information(p_ys) <= lip + 1e-9


class TestGRR:
    def test_channels(self):
        np.testing.assert_allclose(grr(0.0, 4).Q, np.full((4, 4), 0.25))
        np.testing.assert_allclose(grr(50.0, 2).Q, np.eye(2), atol=1e-20)
        np.testing.assert_allclose(grr(LN3, 2).Q, [[0.75, 0.25], [0.25, 0.75]])
        np.testing.assert_array_equal(grr(math.inf, 3).Q, np.eye(3))

    def test_closed_form_examples(self, equal_binary, independent):
        assert lip_grr(0.0, equal_binary) == 0.0
        assert lip_grr(3.0, independent) == pytest.approx(0.0, abs=1e-15)
        assert lip_grr(LN3, equal_binary) == pytest.approx(LN2, abs=1e-12)
        assert math.isinf(lip_grr(math.inf, equal_binary))

    @given(joints(), alphas)
    def test_closed_form_matches_generic(self, j, alpha):
        assert abs(lip_grr(alpha, j) - lip_of(grr(alpha, j.a), j).value) <= 1e-10


class TestOUE:
    def test_independent_leaks_nothing(self, independent):
        assert oue_lip(2.0, independent) == pytest.approx(0.0, abs=1e-15)

    def test_binary_example(self):
        px = np.array([0.5, 0.5])
        j = JointDistribution(np.full((2, 2), 0.25))
        brute = brute_oue_mi(LN3, px)
        assert brute == pytest.approx(0.065406, abs=1e-6)
        assert oue_utility(LN3, j) == pytest.approx(brute, abs=1e-12)

    @pytest.mark.parametrize("seed", range(5))
    def test_utility_matches_enumeration(self, seed):
        j = sample_jeffreys(2, 4, seed=seed)
        for alpha in [0.0, 0.4, 1.7, 6.0]:
            assert oue_utility(alpha, j) == pytest.approx(brute_oue_mi(alpha, j.p_x),
                                                          abs=1e-12)

    @given(joints(a=st.integers(2, 5)), alphas)
    def test_closed_form_matches_dense(self, j, alpha):
        Q = oue_channel(alpha, j.a)
        assert abs(oue_lip(alpha, j) - lip_of(Q, j).value) <= 1e-10
        assert abs(oue_utility(alpha, j) - utility(Q, j)) <= 1e-10

    def test_large_alpha_limit(self):
        for a in range(2, 9):
            j = sample_jeffreys(2, a, seed=a)
            assert oue_utility(30.0, j) / entropy(j.p_x) == pytest.approx(0.5, abs=0.01)
            assert oue_utility(math.inf, j) == pytest.approx(entropy(j.p_x) / 2)

    def test_alphabet_cap(self):
        j = JointDistribution(np.full((1, 21), 1 / 21))
        with pytest.raises(AlphabetTooLarge):
            oue_lip(1.0, j)


class TestConditionalReporting:
    def test_large_alpha_releases_x(self, correlated):
        rng = np.random.default_rng(0)
        assert all(cr_sample(50.0, correlated, (s, x), rng) == x
                   for s in range(2) for x in range(2) for _ in range(50))
        assert cr_utility(50.0, correlated) == pytest.approx(entropy(correlated.p_x), abs=1e-9)

    def test_single_secret_releases_x(self):
        j = JointDistribution(np.array([[0.3, 0.7]]))
        assert cr_sample(0.0, j, (0, 1), 1) == 1
        np.testing.assert_array_equal(cr_sample_batch(0.0, j, [0, 0], [1, 0], 1), [1, 0])

    def test_zero_alpha_hides_secret(self, correlated):
        law = cr_channel(0.0, correlated)
        np.testing.assert_allclose(law.p_y_given_s[:, 0], law.p_y_given_s[:, 1])
        assert cr_lip(0.0, correlated) == 0.0

    def test_independent_prior(self, independent):
        law = cr_channel(1.2, independent)
        np.testing.assert_allclose(law.p_y_given_s, np.full((2, 2), 0.5))
        assert cr_lip(1.2, independent) == pytest.approx(0.0, abs=1e-15)
        # c = 2, alpha = 0: keep X w.p. 1/2, otherwise a fresh draw from p_X
        mix = 0.5 * np.eye(2) + 0.5 * np.outer(independent.p_x, np.ones(2))
        assert cr_utility(0.0, independent) == pytest.approx(
            mutual_information(mix * independent.p_x), abs=1e-14)

    def test_equal_binary_examples(self, equal_binary):
        law = cr_channel(LN3, equal_binary)
        np.testing.assert_allclose(law.p_y_given_s, [[0.75, 0.25], [0.25, 0.75]])
        assert cr_lip(LN3, equal_binary) == pytest.approx(LN2, abs=1e-12)
        assert cr_utility(LN3, equal_binary) == pytest.approx(
            LN2 - entropy([0.25, 0.75]), abs=1e-12)

    @given(joints(c=st.integers(1, 4)), alphas)
    def test_rows_sum_to_one(self, j, alpha):
        law = cr_channel(alpha, j)
        np.testing.assert_allclose(law.p_y_given_s.sum(axis=0), 1.0, atol=1e-12)
        np.testing.assert_allclose(law.channel.Q.sum(axis=0), 1.0, atol=1e-12)
        np.testing.assert_allclose(law.p_y, law.p_y_given_s @ j.p_s, atol=1e-12)
        np.testing.assert_allclose(blind_channel(law.channel, j).sum(axis=0), 1.0,
                                   atol=1e-12)

    @given(joints(c=st.integers(2, 4)), alphas)
    def test_leakage_bounded_by_alpha(self, j, alpha):
        law = cr_channel(alpha, j)
        assert cr_lip(alpha, j) <= alpha + 1e-12
        assert abs(cr_lip(alpha, j) - lip_of(law.channel, j).value) <= 1e-10
        assert ldp_of(law.channel, j).value <= alpha + 1e-9

    def test_sampler_agrees_with_law(self):
        j = sample_jeffreys(3, 4, seed=8)
        rng = np.random.default_rng(8)
        n = 20_000
        for s in range(3):
            x = rng.choice(4, size=n, p=j.p_x_given_s[s])
            y = cr_sample_batch(1.0, j, np.full(n, s), x, rng)
            freq = np.bincount(y, minlength=4) / n
            expect = cr_channel(1.0, j).p_y_given_s[:, s]
            sd = np.sqrt(expect * (1 - expect) / n)
            assert np.all(np.abs(freq - expect) <= 4 * sd)


class TestCalibration:
    @pytest.mark.parametrize("name", ["grr", "oue", "cr"])
    def test_zero_target(self, name, correlated):
        assert solve_alpha(0.0, name, correlated) == 0.0

    @pytest.mark.parametrize("name", ["grr", "oue", "cr"])
    def test_independent_prior_needs_no_noise(self, name, independent):
        assert math.isinf(solve_alpha(1.0, name, independent))
        assert protocol_utility(name, math.inf, independent) == pytest.approx(
            {"oue": 0.5}.get(name, 1.0) * LN2, abs=1e-12)

    def test_grr_inversion(self, equal_binary):
        assert solve_alpha(LN2, "grr", equal_binary) == pytest.approx(LN3, abs=1e-9)

    def test_rejects_negative_target(self, correlated):
        with pytest.raises(ValueError):
            solve_alpha(-0.1, "cr", correlated)

    @pytest.mark.parametrize("seed", range(8))
    def test_hits_target(self, seed):
        j = sample_jeffreys(3, 4, seed=seed)
        for name, fn in [("grr", lip_grr), ("oue", oue_lip), ("cr", cr_lip)]:
            for eps in [0.2, 0.9]:
                alpha = solve_alpha(eps, name, j)
                if math.isfinite(alpha):
                    assert fn(alpha, j) <= eps + 1e-12
                    assert fn(alpha, j) == pytest.approx(eps, abs=1e-9)

    @pytest.mark.parametrize("seed", range(100))
    def test_leakage_monotone_on_grid(self, seed):
        j = sample_jeffreys(2 + seed % 3, 2 + seed % 4, seed=seed)
        grid = np.arange(0.0, 10.01, 0.1)
        for fn in (lip_grr, oue_lip, cr_lip):
            vals = np.array([fn(al, j) for al in grid])
            assert np.all(np.diff(vals) >= -1e-12)
