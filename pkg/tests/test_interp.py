import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from funnelopt.errors import DegenerateBox, IllConditioned
from funnelopt.interp import (LagrangeBasis, ModelVariant, SampleSet, SurrogateModel,
                              build_initial_sample_set, build_models, lambda_poisedness,
                              monomials, n_quadratic, p_max_for, quadratic_parts,
                              repair_sample_set, update_interpolation_set)

INTERPOLATING = [ModelVariant.SUBBASIS, ModelVariant.MIN_L2, ModelVariant.MIN_FROBENIUS]


def random_set(rng, n, p, radius=1.0):
    center = rng.normal(size=n)
    d = rng.normal(size=(p - 1, n))
    d *= radius * rng.uniform(0.2, 1.0, size=(p - 1, 1)) / np.linalg.norm(d, axis=1, keepdims=True)
    return np.vstack([center, center + d]), center


def random_quadratic(rng, n, linear=False):
    g = rng.normal(size=n)
    H = np.zeros((n, n)) if linear else rng.normal(size=(n, n))
    H = 0.5 * (H + H.T)
    c = rng.normal()
    return lambda X: c + X @ g + 0.5 * np.einsum("ij,jk,ik->i", X, H, X)


class TestBasics:
    def test_sizes(self):
        assert n_quadratic(2) == 6
        assert p_max_for(3, ModelVariant.MIN_L2) == 10
        assert p_max_for(3, ModelVariant.REGRESSION) == 20

    def test_monomials_order(self):
        row = monomials(np.array([[2.0, 3.0]]))[0]
        np.testing.assert_allclose(row, [1, 2, 3, 2, 4.5, 6])

    def test_surrogate_matches_taylor_form(self):
        rng = np.random.default_rng(0)
        g, H = rng.normal(size=3), np.eye(3)
        m = SurrogateModel.from_taylor(np.zeros(3), 1.5, g, H)
        x = rng.normal(size=3)
        assert m.value(x) == pytest.approx(1.5 + g @ x + 0.5 * x @ x)
        np.testing.assert_allclose(m.gradient(x), g + x)

    def test_quadratic_parts_recovers_gradient_and_hessian(self):
        rng = np.random.default_rng(1)
        n = 3
        Y, c = random_set(rng, n, n_quadratic(n))
        fun = random_quadratic(rng, n)
        basis = LagrangeBasis(Y, c, ModelVariant.MIN_L2)
        G, H = quadratic_parts(basis.coefficients(fun(Y))[:, None], n, basis.scale)
        eps = 1e-6
        fd = np.array([(fun((c + eps * e)[None])[0] - fun((c - eps * e)[None])[0]) / (2 * eps)
                       for e in np.eye(n)])
        np.testing.assert_allclose(G[0], fd, atol=1e-6)
        assert np.allclose(H[0], H[0].T)

    def test_too_few_points(self):
        with pytest.raises(IllConditioned):
            LagrangeBasis(np.zeros((2, 2)), np.zeros(2))

    def test_duplicate_points_rejected(self):
        Y = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 0.0]])
        with pytest.raises(IllConditioned):
            LagrangeBasis(Y, Y[0])


class TestLagrangeProperties:
    @pytest.mark.parametrize("variant", list(ModelVariant)[:3])
    @pytest.mark.parametrize("n", [1, 2, 3, 5])
    def test_delta_property(self, variant, n):
        rng = np.random.default_rng(10 * n + variant)
        for _ in range(25):
            p = int(rng.integers(n + 1, n_quadratic(n) + 1))
            Y, c = random_set(rng, n, p)
            basis = LagrangeBasis(Y, c, variant)
            np.testing.assert_allclose(basis.values_at(Y), np.eye(p), atol=1e-8)

    @pytest.mark.parametrize("variant", list(ModelVariant))
    @pytest.mark.parametrize("n", [1, 2, 3, 5])
    def test_reproduces_linear_on_simplex(self, variant, n):
        rng = np.random.default_rng(n)
        Y, c = random_set(rng, n, n + 1)
        fun = random_quadratic(rng, n, linear=True)
        m = LagrangeBasis(Y, c, variant).model(fun(Y))
        X = c + rng.normal(size=(20, n))
        np.testing.assert_allclose(m.value(X), fun(X), atol=1e-8 * (1 + np.abs(fun(X)).max()))

    @pytest.mark.parametrize("variant", list(ModelVariant))
    @pytest.mark.parametrize("n", [1, 2, 3, 5])
    def test_reproduces_quadratic_on_full_set(self, variant, n):
        rng = np.random.default_rng(100 + n)
        Y, c = random_set(rng, n, n_quadratic(n))
        fun = random_quadratic(rng, n)
        m = LagrangeBasis(Y, c, variant).model(fun(Y))
        X = c + rng.normal(size=(20, n))
        np.testing.assert_allclose(m.value(X), fun(X), atol=1e-8 * (1 + np.abs(fun(X)).max()))

    @pytest.mark.parametrize("n", [2, 3, 5])
    def test_min_frobenius_reproduces_linear_at_any_size(self, n):
        rng = np.random.default_rng(7 + n)
        fun = random_quadratic(rng, n, linear=True)
        for p in range(n + 2, n_quadratic(n)):
            Y, c = random_set(rng, n, p)
            m = LagrangeBasis(Y, c, ModelVariant.MIN_FROBENIUS).model(fun(Y))
            np.testing.assert_allclose(m.H, 0.0, atol=1e-8)
            np.testing.assert_allclose(m.value(Y), fun(Y), atol=1e-9)

    @pytest.mark.parametrize("variant", INTERPOLATING)
    def test_interpolation_residuals(self, variant):
        rng = np.random.default_rng(int(variant))
        for n in (1, 2, 3, 5):
            for _ in range(25):
                p = int(rng.integers(n + 1, n_quadratic(n) + 1))
                Y, c = random_set(rng, n, p)
                vals = rng.normal(scale=10.0 ** rng.integers(-3, 4), size=p)
                m = LagrangeBasis(Y, c, variant).model(vals)
                assert np.all(np.abs(m.value(Y) - vals) <= 1e-10 * (1 + np.abs(vals)))

    def test_regression_is_least_squares(self):
        rng = np.random.default_rng(3)
        n = 2
        Y, c = random_set(rng, n, 2 * n_quadratic(n))
        vals = rng.normal(size=Y.shape[0])
        m = LagrangeBasis(Y, c, ModelVariant.REGRESSION).model(vals)
        M = monomials(Y - c)
        ref = np.linalg.lstsq(M, vals, rcond=None)[0]
        np.testing.assert_allclose(m.value(Y), M @ ref, atol=1e-9)

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 4))
    def test_delta_property_hypothesis(self, seed, n):
        rng = np.random.default_rng(seed)
        p = int(rng.integers(n + 1, n_quadratic(n) + 1))
        Y, c = random_set(rng, n, p)
        try:
            basis = LagrangeBasis(Y, c, ModelVariant.MIN_L2)
        except IllConditioned:
            return
        np.testing.assert_allclose(basis.values_at(Y), np.eye(p), atol=1e-8)


class TestSampleSets:
    @pytest.mark.parametrize("degree,size", [("plin", 4), ("pdiag", 7), ("pquad", 10)])
    def test_initial_set_size_and_box(self, degree, size):
        x0 = np.array([0.0, 0.5, 1.0])
        lx, ux = np.zeros(3), np.ones(3)
        Y = build_initial_sample_set(x0, 0.3, "simplex", degree, lx, ux)
        assert Y.size == size
        np.testing.assert_array_equal(Y.x_k, x0)
        assert np.all(Y.points >= lx) and np.all(Y.points <= ux)
        assert np.all(np.linalg.norm(Y.points - x0, axis=1) <= 0.3 + 1e-12)
        LagrangeBasis(Y.points, x0)

    def test_random_mode_is_seeded(self):
        a = build_initial_sample_set(np.zeros(2), 1.0, "random", rng=np.random.default_rng(4))
        b = build_initial_sample_set(np.zeros(2), 1.0, "random", rng=np.random.default_rng(4))
        np.testing.assert_array_equal(a.points, b.points)

    def test_degenerate_box(self):
        with pytest.raises(DegenerateBox):
            build_initial_sample_set(np.zeros(2), 1.0, lx=np.zeros(2), ux=np.array([0.0, 1.0]))

    def test_repair_poised_set_is_unchanged(self):
        Y = build_initial_sample_set(np.zeros(2), 1.0)
        Y2, nrep = repair_sample_set(Y, np.zeros(2), 1.0)
        assert nrep == 0
        assert Y2.same_as(Y)

    def test_repair_improves_bad_geometry(self):
        pts = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1e-7]])
        Y = SampleSet(pts, np.zeros((3, 1)))
        calls = []

        def evaluate(y):
            calls.append(y)
            return np.zeros(1)

        Y2, nrep = repair_sample_set(Y, np.zeros(2), 1.0, 100.0, evaluate)
        assert nrep >= 1 and len(calls) == nrep
        np.testing.assert_array_equal(Y2.x_k, [0.0, 0.0])
        assert lambda_poisedness(Y2, np.zeros(2), 1.0) <= 100.0

    def test_update_appends_below_p_max(self):
        Y = build_initial_sample_set(np.zeros(2), 1.0)
        Y2, changed, idx = update_interpolation_set(Y, np.array([0.3, 0.4]), delta=1.0)
        assert changed and idx == Y.size and Y2.size == Y.size + 1

    def test_update_never_removes_current(self):
        rng = np.random.default_rng(5)
        Y, c = random_set(rng, 2, 6)
        S = SampleSet(Y, current=0)
        for _ in range(20):
            S, _, _ = update_interpolation_set(S, rng.normal(size=2), delta=1.0, criterion=True)
            np.testing.assert_array_equal(S.x_k, c)

    def test_build_models_multi_column(self):
        rng = np.random.default_rng(6)
        Y, c = random_set(rng, 2, 6)
        vals = np.column_stack([Y[:, 0] ** 2, Y[:, 1]])
        f, z = build_models(SampleSet(Y, vals))
        np.testing.assert_allclose(f.value(Y), vals[:, 0], atol=1e-10)
        np.testing.assert_allclose(z.gradient(), [0.0, 1.0], atol=1e-10)
