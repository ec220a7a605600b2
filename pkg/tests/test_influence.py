import math

import numpy as np
import pytest

from amilab.exceptions import ConfigurationError, InfluenceInputError, IntegrityError
from amilab.influence.distance import (
    DISCRETE_BOUNDS,
    discrete_distances,
    distance,
    mixture_distances,
    within_bounds,
)
from amilab.influence.information import (
    decompose_mi,
    direct_mutual_information,
    entropy_kl_identity,
    validate_joint,
)
from amilab.influence.reward import (
    InfluencePieces,
    ami_influence_reward,
    influence_term,
    mix_reward,
    variant_reward,
)
from amilab.influence.toy import copy_model_joint, export_toy_csv, toy_curves, toy_example
from amilab.nn.distributions import Categorical, DiagGaussian
from amilab.schemas.attack import AttackMethod, DistanceMetric


def random_joint(rng, rows=3, cols=4):
    joint = rng.random((rows, cols))
    return joint / joint.sum()


class TestInformation:
    def test_entropy_plus_kl_is_log_cardinality(self, rng):
        for _ in range(1000):
            n = int(rng.integers(2, 11))
            h, kl = entropy_kl_identity(rng.dirichlet(np.ones(n)))
            assert abs(h + kl - math.log(n)) < 1e-10

    def test_identity_with_zero_probabilities(self):
        h, kl = entropy_kl_identity(Categorical(np.array([1.0, 0.0, 0.0])))
        assert h == 0.0
        assert kl == pytest.approx(math.log(3))

    def test_decomposition_matches_direct_mutual_information(self, rng):
        for _ in range(1000):
            joint = random_joint(rng, *rng.integers(2, 11, size=2))
            d = decompose_mi(joint)
            assert d.mutual_information == pytest.approx(direct_mutual_information(joint), abs=1e-9)
            assert d.mutual_information >= -1e-10
            assert d.mutual_information == pytest.approx(d.minority_term + d.majority_term)
            assert d.majority_term <= 0.0

    def test_independent_joint_has_zero_information(self):
        joint = np.outer([0.3, 0.7], [0.2, 0.5, 0.3])
        assert decompose_mi(joint).mutual_information == pytest.approx(0.0, abs=1e-12)

    @pytest.mark.parametrize(
        "joint",
        [np.array([[0.5, 0.6]]), np.array([[-0.1, 1.1]]), np.array([0.5, 0.5]), np.array([[np.nan, 1.0]])],
    )
    def test_invalid_joint_tables(self, joint):
        with pytest.raises(InfluenceInputError):
            validate_joint(joint)


class TestToyExample:
    def test_minority_term_is_flat(self):
        curves = toy_curves()
        np.testing.assert_allclose(curves["minority"], 0.500402, atol=1e-6)

    def test_half_copy_carries_no_information(self):
        assert toy_example(0.5).mutual_information == pytest.approx(0.0, abs=1e-12)

    def test_full_copy_information_equals_minority_term(self):
        d = toy_example(1.0)
        assert d.majority_term == pytest.approx(0.0, abs=1e-12)
        assert d.mutual_information == pytest.approx(d.minority_term)

    def test_victim_marginal_is_preserved(self):
        for p in (0.0, 0.3, 1.0):
            np.testing.assert_allclose(copy_model_joint(p).sum(axis=0), [0.2, 0.8])

    def test_out_of_range_probability(self):
        with pytest.raises(ConfigurationError):
            copy_model_joint(1.5)

    def test_csv_export(self, tmp_path):
        path = export_toy_csv(tmp_path / "toy.csv")
        lines = path.read_text().splitlines()
        assert lines[0] == "p,mi,majority,minority"
        assert len(lines) == 12


class TestDistances:
    def test_discrete_metric_values(self):
        probs = np.array([[[0.5, 0.5, 0.0]]])
        targets = np.array([[0]])
        assert discrete_distances(probs, targets, DistanceMetric.L1)[0, 0] == pytest.approx(-1.0)
        assert discrete_distances(probs, targets, DistanceMetric.L2)[0, 0] == pytest.approx(-math.sqrt(0.5))
        assert discrete_distances(probs, targets, DistanceMetric.LINF)[0, 0] == pytest.approx(-0.5)
        assert discrete_distances(probs, targets, DistanceMetric.PROB)[0, 0] == pytest.approx(0.5)
        assert discrete_distances(probs, targets, DistanceMetric.CE)[0, 0] == pytest.approx(math.log(0.5))

    def test_exact_match_is_the_maximum(self):
        probs = np.array([[[0.0, 1.0, 0.0]]])
        for metric in (DistanceMetric.L1, DistanceMetric.L2, DistanceMetric.LINF, DistanceMetric.CE):
            assert discrete_distances(probs, np.array([[1]]), metric)[0, 0] == pytest.approx(0.0)
        assert discrete_distances(probs, np.array([[1]]), DistanceMetric.PROB)[0, 0] == pytest.approx(1.0)

    def test_zero_probability_target_gives_negative_infinity(self):
        value = discrete_distances(np.array([[[1.0, 0.0]]]), np.array([[1]]), DistanceMetric.CE)[0, 0]
        assert value == -np.inf

    def test_random_distributions_stay_in_bounds(self, rng):
        probs = rng.dirichlet(np.ones(5), size=(40, 3))
        targets = rng.integers(0, 5, size=(40, 3))
        for metric in DISCRETE_BOUNDS:
            values = discrete_distances(probs, targets, metric)
            assert within_bounds(values, metric, discrete=True)

    def test_continuous_metrics(self):
        expected = DiagGaussian(np.array([0.0, 1.0]), np.array([0.0, 0.0]))
        assert distance(expected, [1.0, 1.0], DistanceMetric.L1_MEAN) == pytest.approx(-1.0)
        log_density = -math.log(2 * math.pi) - 0.5
        assert distance(expected, [1.0, 1.0], DistanceMetric.CE) == pytest.approx(log_density)
        assert distance(expected, [1.0, 1.0], DistanceMetric.PROB) == pytest.approx(math.exp(log_density))

    def test_metric_not_defined_for_space(self):
        with pytest.raises(ConfigurationError):
            distance(Categorical(np.array([0.5, 0.5])), 0, DistanceMetric.L1_MEAN)
        with pytest.raises(ConfigurationError):
            distance(DiagGaussian(np.zeros(2), np.zeros(2)), [0.0, 0.0], DistanceMetric.L2)

    def test_single_component_mixture_matches_gaussian(self, rng):
        means = rng.standard_normal((4, 2, 1, 3))
        log_std = rng.uniform(-1, 0, size=(2, 3))
        targets = rng.standard_normal((4, 2, 3))
        mixture = mixture_distances(means, log_std, targets, DistanceMetric.CE)
        for b in range(4):
            for i in range(2):
                single = distance(DiagGaussian(means[b, i, 0], log_std[i]), targets[b, i], DistanceMetric.CE)
                assert mixture[b, i] == pytest.approx(single)


class TestInfluenceReward:
    def test_influence_is_sum_over_victims(self):
        expected = [Categorical(np.array([0.5, 0.5])), Categorical(np.array([1.0, 0.0]))]
        record = ami_influence_reward(expected, [0, 0], DistanceMetric.L1)
        assert record.distances == pytest.approx([-1.0, 0.0])
        assert record.total == pytest.approx(-1.0)

    def test_missing_victim_entry_is_rejected(self):
        expected = [Categorical(np.array([0.5, 0.5])), None]
        with pytest.raises(IntegrityError):
            ami_influence_reward(expected, [0, 1], DistanceMetric.L1)
        with pytest.raises(IntegrityError):
            ami_influence_reward(expected[:1], [0], DistanceMetric.L1, n_victims=2)

    def test_variant_terms(self):
        pieces = InfluencePieces(
            distance_sum=np.array([-1.0, -0.5]),
            majority=np.array([-0.2, -0.1]),
            untargeted=np.array([-0.3, 0.0]),
            mutual_information=np.array([0.4, 0.2]),
        )
        np.testing.assert_allclose(influence_term(AttackMethod.AMI, pieces), [-1.0, -0.5])
        np.testing.assert_allclose(influence_term(AttackMethod.AMI_BILATERAL, pieces), [-1.2, -0.6])
        np.testing.assert_allclose(influence_term(AttackMethod.AMI_UNTARGETED, pieces), [-0.3, 0.0])
        np.testing.assert_allclose(influence_term(AttackMethod.MI_BASELINE, pieces), [0.4, 0.2])
        np.testing.assert_array_equal(influence_term(AttackMethod.ADV_POLICY, pieces), [0.0, 0.0])

    def test_reward_composition(self):
        pieces = InfluencePieces(distance_sum=np.array([-1.0, -0.5]))
        r_adv = np.array([2.0, 3.0])
        np.testing.assert_allclose(variant_reward(AttackMethod.AMI, r_adv, pieces, 0.1), [1.9, 2.95])
        np.testing.assert_array_equal(variant_reward(AttackMethod.AMI, r_adv, pieces, 0.0), r_adv)
        np.testing.assert_array_equal(variant_reward(AttackMethod.ADV_POLICY, r_adv, pieces, 0.1), r_adv)
        np.testing.assert_allclose(mix_reward(r_adv, np.ones(2), 0.5), [2.5, 3.5])

    def test_transform_applies_to_the_influence_only(self):
        pieces = InfluencePieces(distance_sum=np.array([-1.0, np.nan]))
        r_adv = np.array([2.0, 3.0])
        shaped = variant_reward(AttackMethod.AMI, r_adv, pieces, 0.5, transform=lambda raw: np.nan_to_num(raw) * 2.0)
        np.testing.assert_allclose(shaped, [1.0, 3.0])
        untouched = variant_reward(AttackMethod.ADV_POLICY, r_adv, pieces, 0.5, transform=lambda raw: raw + 1.0)
        np.testing.assert_array_equal(untouched, r_adv)

    def test_missing_piece_for_method(self):
        with pytest.raises(IntegrityError):
            influence_term(AttackMethod.AMI_BILATERAL, InfluencePieces(distance_sum=np.zeros(2)))

    def test_shape_mismatch_with_rewards(self):
        with pytest.raises(IntegrityError):
            variant_reward(AttackMethod.AMI, np.zeros(3), InfluencePieces(distance_sum=np.zeros(2)), 0.1)
