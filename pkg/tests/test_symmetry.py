import itertools
import json
import math

import numpy as np
import pytest

from netsym.errors import ShapeMismatchError
from netsym.netcore import Architecture, NetworkParams, build_network, forward
from netsym.symmetry import (
    LayerPermutationSet,
    apply_permutation,
    compose,
    count_equivalent_optima,
    functional_equivalence,
    identity_permutation,
    invert,
    load_permutation,
    permutation_from_doc,
    permutation_to_doc,
    random_permutation,
    save_permutation,
)

from conftest import assert_params_equal


class TestApplyPermutation:
    def test_identity_is_noop(self, small_net):
        pi = identity_permutation(small_net.architecture)
        assert_params_equal(apply_permutation(small_net, pi), small_net)

    def test_hand_swap(self):
        # swapping the two hidden nodes permutes W1 columns and W2 rows
        arch = Architecture((2, 2, 1))
        p = NetworkParams(
            arch, [np.array([[1.0, 2.0], [3.0, 4.0]]), np.array([[5.0], [6.0]])], "tanh"
        )
        swapped = apply_permutation(p, LayerPermutationSet((np.array([1, 0]),)))
        np.testing.assert_array_equal(swapped.weights[0], [[2.0, 1.0], [4.0, 3.0]])
        np.testing.assert_array_equal(swapped.weights[1], [[6.0], [5.0]])

    def test_inverse_round_trip(self):
        p = build_network(Architecture((3, 5, 4, 2)), 0.5, seed=3)
        pi = random_permutation(p.architecture, seed=8)
        back = apply_permutation(apply_permutation(p, pi), invert(pi))
        assert_params_equal(back, p)

    def test_size_mismatch(self, small_net):
        with pytest.raises(ShapeMismatchError):
            apply_permutation(small_net, LayerPermutationSet((np.array([1, 0]),)))

    def test_group_action_composition(self):
        p = build_network(Architecture((2, 4, 3, 1)), 0.5, seed=1)
        for seed in range(5):
            pi = random_permutation(p.architecture, seed=seed)
            rho = random_permutation(p.architecture, seed=seed + 100)
            step_by_step = apply_permutation(apply_permutation(p, pi), rho)
            combined = apply_permutation(p, compose(pi, rho))
            assert_params_equal(step_by_step, combined)

    def test_invariant_function(self):
        # outputs agree to 1e-10 relative; reassociation is the only source
        rng = np.random.default_rng(0)
        for seed in range(10):
            p = build_network(Architecture((4, 8, 8, 3)), 0.5, seed=seed)
            pi = random_permutation(p.architecture, seed=seed + 50)
            q = apply_permutation(p, pi)
            for _ in range(4):
                x = rng.standard_normal(4)
                y1, y2 = forward(p, x), forward(q, x)
                bound = 1e-10 * (1.0 + float(np.max(np.abs(y1))))
                assert float(np.max(np.abs(y1 - y2))) <= bound


class TestRandomPermutation:
    def test_width_one_is_identity(self):
        pi = random_permutation(Architecture((5, 1, 5)), seed=3)
        assert pi.is_identity()

    def test_deterministic(self):
        a = random_permutation(Architecture((2, 6, 4, 2)), seed=11)
        b = random_permutation(Architecture((2, 6, 4, 2)), seed=11)
        for x, y in zip(a.perms, b.perms):
            np.testing.assert_array_equal(x, y)

    def test_uniform_over_s3(self):
        # 6000 draws: each of the 6 permutations lands within 1/6 +- 0.02
        arch = Architecture((2, 3, 2))
        counts = {p: 0 for p in itertools.permutations(range(3))}
        for seed in range(6000):
            pi = random_permutation(arch, seed=seed)
            counts[tuple(int(i) for i in pi.perms[0])] += 1
        for c in counts.values():
            assert abs(c / 6000 - 1 / 6) <= 0.02


class TestCountEquivalentOptima:
    def test_single_hidden_layer(self):
        assert count_equivalent_optima(Architecture((2, 3, 2))) == 6

    def test_trivial_hidden_widths(self):
        assert count_equivalent_optima(Architecture((4, 1, 1, 1, 3))) == 1

    def test_multiplicative_over_layers(self):
        a = count_equivalent_optima(Architecture((2, 5, 2)))
        b = count_equivalent_optima(Architecture((2, 7, 2)))
        ab = count_equivalent_optima(Architecture((2, 5, 7, 2)))
        assert ab == a * b

    def test_big_integer_exact(self):
        n = count_equivalent_optima(Architecture((1, 120, 80, 10, 1)))
        assert n == math.factorial(120) * math.factorial(80) * math.factorial(10)


class TestFunctionalEquivalence:
    def test_permuted_network_is_equivalent(self, small_net):
        pi = random_permutation(small_net.architecture, seed=4)
        report = functional_equivalence(
            small_net, apply_permutation(small_net, pi), probes=32, tol=1e-10, seed=0
        )
        assert report.equivalent

    def test_shifted_weight_is_not(self, small_net):
        ws = [w.copy() for w in small_net.weights]
        ws[0][0, 0] += 1.0
        other = NetworkParams(small_net.architecture, ws, small_net.activation)
        report = functional_equivalence(small_net, other, probes=32, tol=1e-10, seed=0)
        assert not report.equivalent
        assert report.max_deviation > report.threshold

    def test_reflexive(self, small_net):
        report = functional_equivalence(small_net, small_net, probes=8, tol=1e-12, seed=1)
        assert report.equivalent
        assert report.max_deviation == 0.0

    def test_architecture_mismatch(self, small_net):
        other = build_network(Architecture((2, 4, 1)), 0.5, seed=0)
        with pytest.raises(ShapeMismatchError):
            functional_equivalence(small_net, other, probes=4, tol=1e-8, seed=0)


class TestPermutationJson:
    def test_one_based_round_trip(self, tmp_path):
        pi = LayerPermutationSet((np.array([2, 0, 1]), np.array([1, 0])))
        doc = permutation_to_doc(pi)
        assert doc == {"perms": [[3, 1, 2], [2, 1]]}
        back = permutation_from_doc(json.loads(json.dumps(doc)))
        for a, b in zip(back.perms, pi.perms):
            np.testing.assert_array_equal(a, b)
        path = tmp_path / "perm.json"
        save_permutation(pi, path)
        loaded = load_permutation(path)
        for a, b in zip(loaded.perms, pi.perms):
            np.testing.assert_array_equal(a, b)

    def test_invalid_permutation_rejected(self):
        with pytest.raises(ValueError):
            LayerPermutationSet((np.array([0, 0, 2]),))
