import math

import numpy as np
import pytest

from netsym.errors import FitError, ShapeMismatchError
from netsym.orthopoly import (
    CHEBYSHEV,
    LAGUERRE,
    LEGENDRE,
    PolyFamily,
    PolytronLayer,
    family,
    fit_polytron,
    inner_product,
    parseval_residual,
    poly_eval,
    poly_eval_all,
    poly_grad,
    polytron_forward,
    polytron_forward_batch,
    polytron_from_doc,
    polytron_gradient,
    polytron_loss,
    polytron_to_doc,
    quadrature,
)
from netsym.prepruning import BinaryMask

# Hand-expanded classical Laguerre polynomials, the recurrence oracle.
LAGUERRE_CLOSED = [
    lambda x: np.ones_like(x),
    lambda x: 1.0 - x,
    lambda x: 1.0 - 2.0 * x + x ** 2 / 2.0,
    lambda x: 1.0 - 3.0 * x + 1.5 * x ** 2 - x ** 3 / 6.0,
    lambda x: 1.0 - 4.0 * x + 3.0 * x ** 2 - (2.0 / 3.0) * x ** 3 + x ** 4 / 24.0,
    lambda x: (
        1.0 - 5.0 * x + 5.0 * x ** 2 - (5.0 / 3.0) * x ** 3
        + (5.0 / 24.0) * x ** 4 - x ** 5 / 120.0
    ),
]


def exp_half_coefficient(i: int) -> float:
    """Projection of exp(-x/2) on L_i: integral exp(-3x/2) L_i(x) dx = (2/3)(1/3)^i."""
    return (2.0 / 3.0) * (1.0 / 3.0) ** i


class TestFamilies:
    def test_lookup(self):
        assert family("laguerre") is LAGUERRE
        with pytest.raises(ValueError):
            family("hermite")

    def test_domain_pinned_to_classical(self):
        with pytest.raises(ValueError):
            PolyFamily("laguerre", (-1.0, 1.0))

    def test_weights(self):
        assert LAGUERRE.weight(0.0) == 1.0
        assert LAGUERRE.weight(1.0) == pytest.approx(math.exp(-1.0))
        assert LEGENDRE.weight(0.3) == 1.0
        assert CHEBYSHEV.weight(0.0) == 1.0


class TestLaguerreEvaluation:
    def test_first_values(self):
        assert poly_eval(LAGUERRE, 0, 17.3) == 1.0
        assert poly_eval(LAGUERRE, 1, 2.0) == -1.0

    def test_l2_closed_form_points(self):
        for x, want in [(0.0, 1.0), (1.0, -0.5), (3.0, -0.5)]:
            assert poly_eval(LAGUERRE, 2, x) == pytest.approx(want, abs=1e-15)

    def test_all_ones_at_zero(self):
        vals = poly_eval_all(LAGUERRE, 12, 0.0)
        np.testing.assert_allclose(vals, np.ones(13), rtol=0, atol=1e-14)

    def test_recurrence_matches_closed_forms(self):
        xs = np.linspace(0.0, 10.0, 100)
        vals = poly_eval_all(LAGUERRE, 5, xs)
        for i, closed in enumerate(LAGUERRE_CLOSED):
            assert np.max(np.abs(vals[i] - closed(xs))) <= 1e-9


class TestLaguerreGradient:
    def test_constant_is_flat(self):
        assert poly_grad(LAGUERRE, 0, 3.7) == 0.0

    def test_linear_is_minus_one(self):
        for x in (0.0, 0.5, 4.0):
            assert poly_grad(LAGUERRE, 1, x) == -1.0

    def test_degree_two_at_one(self):
        # L2'(x) = -2 + x, so L2'(1) = -1; the ratio form gives the same
        assert poly_grad(LAGUERRE, 2, 1.0) == pytest.approx(-1.0, abs=1e-14)

    def test_zero_branch_returns_analytic_limit(self):
        for i in range(1, 9):
            assert poly_grad(LAGUERRE, i, 1e-12) == -float(i)

    @pytest.mark.parametrize("i", range(1, 9))
    def test_matches_central_differences(self, i):
        h = 1e-6
        for x in (0.3, 1.7, 5.0, 9.2):
            fd = (poly_eval(LAGUERRE, i, x + h) - poly_eval(LAGUERRE, i, x - h)) / (2 * h)
            assert poly_grad(LAGUERRE, i, x) == pytest.approx(fd, rel=1e-6)


class TestOtherFamilies:
    @pytest.mark.parametrize("fam", [LEGENDRE, CHEBYSHEV])
    def test_orthonormal(self, fam):
        for i in range(5):
            for j in range(5):
                ip = inner_product(
                    lambda x, i=i: poly_eval(fam, i, x),
                    lambda x, j=j: poly_eval(fam, j, x),
                    fam,
                    nodes=16,
                )
                assert ip == pytest.approx(1.0 if i == j else 0.0, abs=1e-10)

    @pytest.mark.parametrize("fam", [LEGENDRE, CHEBYSHEV])
    @pytest.mark.parametrize("i", [1, 2, 5])
    def test_gradient_matches_differences(self, fam, i):
        h = 1e-6
        for x in (-0.7, -0.2, 0.4, 0.8):
            fd = (poly_eval(fam, i, x + h) - poly_eval(fam, i, x - h)) / (2 * h)
            assert poly_grad(fam, i, x) == pytest.approx(fd, rel=1e-5)

    def test_legendre_endpoint_limits(self):
        # normalized P_i'(1) = sqrt((2i+1)/2) * i(i+1)/2
        for i in (1, 2, 4):
            want = math.sqrt((2 * i + 1) / 2.0) * i * (i + 1) / 2.0
            assert poly_grad(LEGENDRE, i, 1.0) == pytest.approx(want, rel=1e-12)
            assert poly_grad(LEGENDRE, i, -1.0) == pytest.approx(
                (-1.0) ** (i + 1) * want, rel=1e-12
            )


class TestInnerProduct:
    def test_orthogonality_l2_l3(self):
        ip = inner_product(
            lambda x: poly_eval(LAGUERRE, 2, x), lambda x: poly_eval(LAGUERRE, 3, x),
            LAGUERRE, nodes=8,
        )
        assert abs(ip) <= 1e-10

    def test_unit_norm_l0(self):
        ip = inner_product(lambda x: 1.0, lambda x: 1.0, LAGUERRE, nodes=8)
        assert ip == pytest.approx(1.0, abs=1e-12)

    def test_hand_gamma_integral(self):
        # integral x (1 - x) e^-x dx = Gamma(2) - Gamma(3) = -1
        ip = inner_product(lambda x: x, lambda x: poly_eval(LAGUERRE, 1, x), LAGUERRE, nodes=8)
        assert ip == pytest.approx(-1.0, abs=1e-10)

    def test_orthonormality_table(self):
        # |<L_i, L_j> - delta_ij| <= 1e-8 for i, j <= 8
        nodes = 16
        for i in range(9):
            for j in range(9):
                ip = inner_product(
                    lambda x, i=i: poly_eval(LAGUERRE, i, x),
                    lambda x, j=j: poly_eval(LAGUERRE, j, x),
                    LAGUERRE, nodes=nodes,
                )
                assert abs(ip - (1.0 if i == j else 0.0)) <= 1e-8

    def test_non_finite_integrand(self):
        with pytest.raises(ValueError):
            inner_product(lambda x: float("nan"), lambda x: 1.0, LAGUERRE, nodes=4)


class TestPolytronForward:
    def test_zero_coefficients(self):
        layer = PolytronLayer(LAGUERRE, 3, np.zeros((4, 2)))
        np.testing.assert_array_equal(polytron_forward(layer, 1.3), np.zeros(2))

    def test_constant_unit(self):
        layer = PolytronLayer(LAGUERRE, 4, np.array([[1.0], [0], [0], [0], [0]]))
        for x in (0.0, 2.5, 8.0):
            assert polytron_forward(layer, x)[0] == 1.0

    def test_hand_combination_is_x(self):
        # 1*L0 - 1*L1 = 1 - (1 - x) = x
        layer = PolytronLayer(LAGUERRE, 2, np.array([[1.0], [-1.0], [0.0]]))
        for x in (0.5, 2.0):
            assert polytron_forward(layer, x)[0] == pytest.approx(x, abs=1e-15)

    def test_batch_shape(self):
        layer = PolytronLayer(LAGUERRE, 2, np.ones((3, 4)))
        assert polytron_forward_batch(layer, [0.1, 0.2]).shape == (2, 4)


class TestPolytronGradient:
    def test_perfect_fit_zero_gradient(self):
        layer = PolytronLayer(LAGUERRE, 3, np.array([[0.5], [1.0], [-0.2], [0.1]]))
        xs = [0.2, 1.0, 3.0, 5.5]
        batch = [(x, polytron_forward(layer, x)) for x in xs]
        grad = polytron_gradient(layer, batch)
        np.testing.assert_allclose(grad, 0.0, atol=1e-12)

    def test_single_point_at_origin(self):
        # residual 1, phi_k(0) = 1, Psi(0) = 1: gradient -1 everywhere
        layer = PolytronLayer(LAGUERRE, 5, np.zeros((6, 1)))
        grad = polytron_gradient(layer, [(0.0, 1.0)])
        np.testing.assert_allclose(grad, -np.ones((6, 1)), rtol=0, atol=0)

    @pytest.mark.parametrize("seed", range(10))
    def test_matches_finite_differences(self, seed):
        rng = np.random.default_rng(seed)
        coeffs = rng.standard_normal((5, 2))
        layer = PolytronLayer(LAGUERRE, 4, coeffs)
        batch = [(float(x), rng.standard_normal(2)) for x in rng.uniform(0.0, 6.0, 16)]
        grad = polytron_gradient(layer, batch)
        h = 1e-6
        for idx in np.ndindex(coeffs.shape):
            cp, cm = coeffs.copy(), coeffs.copy()
            cp[idx] += h
            cm[idx] -= h
            fd = (
                polytron_loss(PolytronLayer(LAGUERRE, 4, cp), batch)
                - polytron_loss(PolytronLayer(LAGUERRE, 4, cm), batch)
            ) / (2 * h)
            assert grad[idx] == pytest.approx(fd, rel=1e-6, abs=1e-10)

    def test_masked_coefficients_get_zero_gradient(self):
        bits = np.array([[1], [0], [1]], dtype=np.int8)
        coeffs = np.array([[0.3], [0.0], [-0.2]])
        layer = PolytronLayer(LAGUERRE, 2, coeffs, BinaryMask(bits, 0.3))
        grad = polytron_gradient(layer, [(1.0, 5.0), (2.0, -1.0)])
        assert grad[1, 0] == 0.0


class TestFitPolytron:
    def _exact_samples(self, coeffs, xs):
        layer = PolytronLayer(LAGUERRE, len(coeffs) - 1, np.array(coeffs)[:, None])
        return [(float(x), polytron_forward(layer, x)) for x in xs]

    def test_in_basis_recovery(self):
        xs = np.linspace(0.1, 6.0, 20)
        samples = self._exact_samples([0.7, -0.3, 0.25], xs)
        layer, trace = fit_polytron(samples, LAGUERRE, 2, mode="normal")
        np.testing.assert_allclose(layer.coeffs[:, 0], [0.7, -0.3, 0.25], atol=1e-8)
        assert trace[-1] <= 1e-16

    def test_extra_coefficients_vanish(self):
        xs = np.linspace(0.1, 6.0, 30)
        samples = self._exact_samples([0.7, -0.3, 0.25], xs)
        layer, _ = fit_polytron(samples, LAGUERRE, 5, mode="normal")
        np.testing.assert_allclose(layer.coeffs[3:, 0], 0.0, atol=1e-8)

    def test_interpolation_from_minimal_points(self):
        # degree+1 distinct points pin an in-basis target exactly
        xs = [0.5, 1.5, 3.0]
        samples = self._exact_samples([0.2, 0.4, -0.6], xs)
        layer, _ = fit_polytron(samples, LAGUERRE, 2, mode="normal")
        np.testing.assert_allclose(layer.coeffs[:, 0], [0.2, 0.4, -0.6], atol=1e-9)

    def test_rank_deficiency_rejected(self):
        samples = self._exact_samples([0.2, 0.4, -0.6], [0.5, 0.5, 0.5, 0.5])
        with pytest.raises(FitError):
            fit_polytron(samples, LAGUERRE, 2, mode="normal")

    def test_residual_strictly_decreasing_for_exp(self):
        xs, _ = quadrature(LAGUERRE, 200)
        samples = [(float(x), math.exp(-x / 2.0)) for x in xs]
        residuals = [
            fit_polytron(samples, LAGUERRE, n, mode="normal")[1][-1] for n in range(9)
        ]
        for lo, hi in zip(residuals[1:], residuals[:-1]):
            assert lo < hi

    def test_fit_matches_coefficient_oracle(self):
        xs, _ = quadrature(LAGUERRE, 200)
        samples = [(float(x), math.exp(-x / 2.0)) for x in xs]
        layer, _ = fit_polytron(samples, LAGUERRE, 6, mode="normal")
        want = [exp_half_coefficient(i) for i in range(7)]
        np.testing.assert_allclose(layer.coeffs[:, 0], want, atol=1e-6)

    def test_gradient_mode_approaches_projection(self):
        xs = np.linspace(0.1, 8.0, 64)
        samples = [(float(x), math.exp(-x / 2.0)) for x in xs]
        exact, _ = fit_polytron(samples, LAGUERRE, 4, mode="normal")
        approx, trace = fit_polytron(
            samples, LAGUERRE, 4, mode="gradient", lr=0.05, steps=4000
        )
        assert np.max(np.abs(approx.coeffs - exact.coeffs)) < 1e-4
        assert trace[-1] < trace[0]

    def test_nesting_property(self):
        xs = np.linspace(0.05, 9.0, 80)
        samples = [(float(x), math.exp(-x / 2.0)) for x in xs]
        res = [fit_polytron(samples, LAGUERRE, n, mode="normal")[1][-1] for n in range(7)]
        for n in range(6):
            assert res[n + 1] <= res[n] + 1e-12

    def test_projection_local_optimality(self):
        xs = np.linspace(0.1, 7.0, 40)
        samples = [(float(x), math.exp(-x / 2.0)) for x in xs]
        layer, (residual,) = fit_polytron(samples, LAGUERRE, 3, mode="normal")
        rng = np.random.default_rng(17)
        phi_t = poly_eval_all(LAGUERRE, 3, xs).T
        w = LAGUERRE.weight(xs)
        ys = np.array([[y] for _, y in samples])
        for _ in range(100):
            perturbed = layer.coeffs + rng.standard_normal(layer.coeffs.shape) * 1e-3
            r = ys - phi_t @ perturbed
            assert float(np.mean(w * (r ** 2).sum(axis=1))) >= residual


class TestParsevalResidual:
    def test_in_span_target_vanishes(self):
        layer, _ = fit_polytron(
            [(float(x), 1.0 - 2.0 * x + x ** 2 / 2.0) for x in np.linspace(0.1, 8.0, 20)],
            LAGUERRE, 2, mode="normal",
        )
        report = parseval_residual(layer, lambda x: 1.0 - 2.0 * x + x ** 2 / 2.0, nodes=16)
        assert report.residual <= 1e-10

    def test_zero_coefficients_give_f_norm(self):
        layer = PolytronLayer(LAGUERRE, 4, np.zeros((5, 1)))
        report = parseval_residual(layer, lambda x: math.exp(-x / 2.0), nodes=64)
        assert report.residual == pytest.approx(report.f_norm_sq, rel=1e-12)
        assert report.f_norm_sq == pytest.approx(0.5, abs=1e-10)

    def test_tail_sum_oracle(self):
        # projection to N=4: residual equals the tail sum over i > 4
        coeffs = np.array([[exp_half_coefficient(i)] for i in range(5)])
        layer = PolytronLayer(LAGUERRE, 4, coeffs)
        report = parseval_residual(layer, lambda x: math.exp(-x / 2.0), nodes=64)
        tail = 0.5 * (1.0 / 9.0) ** 5
        assert report.residual == pytest.approx(tail, abs=1e-8)
        assert report.ratio == pytest.approx(tail / 0.5, rel=1e-4)


class TestPolytronJson:
    def test_round_trip_with_mask(self, tmp_path):
        bits = np.array([[1, 0], [1, 1], [0, 1]], dtype=np.int8)
        coeffs = np.array([[0.5, 0.0], [1.5, -2.0], [0.0, 0.25]])
        layer = PolytronLayer(LAGUERRE, 2, coeffs, BinaryMask(bits, 0.3))
        doc = polytron_to_doc(layer)
        again = polytron_from_doc(doc)
        np.testing.assert_array_equal(again.coeffs, layer.coeffs)
        np.testing.assert_array_equal(again.mask.bits, bits)
        assert again.family.family_id == "laguerre"

    def test_masked_nonzero_rejected(self):
        bits = np.array([[0], [1]], dtype=np.int8)
        with pytest.raises(ValueError):
            PolytronLayer(LAGUERRE, 1, np.array([[1.0], [2.0]]), BinaryMask(bits, 0.5))

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatchError):
            PolytronLayer(LAGUERRE, 3, np.zeros((3, 1)))
