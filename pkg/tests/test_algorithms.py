import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stochopt.algorithms import APGD, FISTA, GD, ISTA, PD3O, PDHG, PGD, ConstantMomentum, NesterovMomentum
from stochopt.errors import CallbackError, CapabilityError, ConfigurationError
from stochopt.estimators import FullGradientFunction, SGFunction
from stochopt.functions import (IndicatorBox, KullbackLeibler, L1Norm, LeastSquares, MixedL21Norm,
                                ScaledFunction, ZeroFunction, fgp_tv)
from stochopt.operators import GradientOperator, IdentityOperator, MatrixOperator
from stochopt.sampling import Sampler
from stochopt.tuning import IdentityPreconditioner


def _half_square(b=0.0, n=1):
    # 0.5 * ||x - b||^2
    return LeastSquares(IdentityOperator((n,)), np.full(n, b, dtype=float))


def _trace(alg, iterations):
    out = []
    for _ in range(iterations):
        alg.step()
        out.append(alg.x.copy())
    return np.array(out)


def test_gd_newton_step_on_quadratic():
    alg = GD(_half_square(), initial=[1.0], step_size=1.0)
    alg.run(1)
    assert alg.x.tolist() == [0.0]


def test_identity_preconditioner_is_transparent():
    rng = np.random.default_rng(0)
    f = LeastSquares(MatrixOperator(rng.normal(size=(6, 4))), rng.normal(size=6))
    a = _trace(GD(f, initial=np.ones(4)), 20)
    b = _trace(GD(f, initial=np.ones(4), preconditioner=IdentityPreconditioner()), 20)
    np.testing.assert_array_equal(a, b)


def test_gd_with_single_member_sg_matches_gd():
    rng = np.random.default_rng(1)
    f = LeastSquares(MatrixOperator(rng.normal(size=(6, 4))), rng.normal(size=6))
    a = _trace(GD(f, initial=np.zeros(4), step_size=0.05), 30)
    b = _trace(GD(SGFunction([f], Sampler.sequential(1)), initial=np.zeros(4), step_size=0.05), 30)
    np.testing.assert_array_equal(a, b)


def test_pgd_with_zero_g_is_gd():
    rng = np.random.default_rng(2)
    f = LeastSquares(MatrixOperator(rng.normal(size=(5, 3))), rng.normal(size=5))
    np.testing.assert_array_equal(_trace(PGD(f, initial=np.ones(3)), 15), _trace(GD(f, initial=np.ones(3)), 15))
    assert ISTA is PGD and FISTA is APGD


def test_projected_gradient_example():
    alg = PGD(_half_square(-1.0), IndicatorBox(lower=0), initial=[0.0], step_size=1.0)
    alg.run(1)
    assert alg.x.tolist() == [0.0]


def test_missing_step_size():
    f = KullbackLeibler(np.ones(3), eta=1.0)
    with pytest.raises(ConfigurationError, match="step"):
        PGD(f, initial=np.ones(3))
    PGD(f, initial=np.ones(3), step_size=0.1).run(2)


def test_capability_checks():
    with pytest.raises(CapabilityError):
        PGD(L1Norm(), initial=np.ones(2))
    with pytest.raises(CapabilityError):
        PGD(_half_square(n=2), KullbackLeibler(np.ones(2)), initial=np.ones(2))
    with pytest.raises(CapabilityError):
        PDHG(ZeroFunction(), KullbackLeibler(np.ones(2)), IdentityOperator((2,)), initial=np.ones(2))
    with pytest.raises(ConfigurationError, match="initial"):
        PGD(LeastSquares(b=np.ones(2)))


def test_nesterov_momentum_values():
    m = NesterovMomentum()
    assert m(None) == 0.0
    assert m.t == pytest.approx((1 + math.sqrt(5)) / 2)
    beta1 = m(None)
    assert m.t == pytest.approx(2.1935, abs=5e-5)
    assert beta1 == pytest.approx(0.2817, abs=1e-4)


def test_zero_momentum_apgd_is_pgd():
    rng = np.random.default_rng(3)
    f = LeastSquares(MatrixOperator(rng.normal(size=(8, 5))), rng.normal(size=8))
    g = 0.3 * L1Norm()
    a = _trace(APGD(f, g, initial=np.zeros(5), momentum=0.0), 25)
    b = _trace(APGD(f, g, initial=np.zeros(5), momentum=lambda alg: 0.0), 25)
    c = _trace(PGD(f, g, initial=np.zeros(5)), 25)
    np.testing.assert_array_equal(a, c)
    np.testing.assert_array_equal(b, c)
    assert isinstance(APGD(f, g, initial=np.zeros(5), momentum=0.5).momentum, ConstantMomentum)


def test_pd3o_hand_trace():
    # independent transcription with f = x^2/2, g = 0, h = |.|, K = 1
    tau = sigma = 0.5
    x, y, grad = 1.0, 0.0, 1.0
    expected = []
    for _ in range(3):
        x_new = x - tau * grad - tau * y
        grad_new = x_new
        x_bar = 2 * x_new - x + tau * (grad - grad_new)
        y = min(1.0, max(-1.0, y + sigma * x_bar))
        x, grad = x_new, grad_new
        expected.append((x, y))
    alg = PD3O(_half_square(), None, L1Norm(), IdentityOperator((1,)), initial=[1.0], gamma=tau, delta=sigma)
    got = []
    for _ in range(3):
        alg.step()
        got.append((alg.x[0], alg.y[0]))
    np.testing.assert_allclose(got, expected, rtol=0, atol=1e-15)


def test_pd3o_one_gradient_per_iteration():
    f = FullGradientFunction([_half_square(n=3)])
    alg = PD3O(f, None, L1Norm(), IdentityOperator((3,)), initial=np.ones(3), gamma=0.5, delta=0.5)
    alg.run(10)
    assert f.work.full_gradient_evals == 11


def test_pd3o_without_g_and_h_is_gd():
    rng = np.random.default_rng(4)
    f = LeastSquares(MatrixOperator(rng.normal(size=(6, 4))), rng.normal(size=6))
    K = MatrixOperator(rng.normal(size=(3, 4)))
    pd = PD3O(f, ZeroFunction(), ZeroFunction(), K, initial=np.ones(4), gamma=0.05, delta=1.0)
    a = _trace(pd, 30)
    assert np.all(pd.y == 0)
    np.testing.assert_array_equal(a, _trace(GD(f, initial=np.ones(4), step_size=0.05), 30))


def _tv_denoising(seed=0, n=8):
    rng = np.random.default_rng(seed)
    z = np.kron(rng.uniform(size=(2, 2)), np.ones((n // 2, n // 2))).ravel() + 0.1 * rng.normal(size=n * n)
    return z, GradientOperator((n, n))


def test_pd3o_with_zero_f_tracks_pdhg():
    z, D = _tv_denoising()
    g, h = LeastSquares(b=z), ScaledFunction(MixedL21Norm(2), 0.2)
    tau = 1.0 / D.norm()
    sigma = 1.0 / (tau * D.norm() ** 2)
    pd3o = PD3O(ZeroFunction(), g, h, D, initial=np.zeros(z.size), gamma=tau, delta=sigma)
    pdhg = PDHG(g, h, D, initial=np.zeros(z.size), tau=tau, sigma=sigma)
    for _ in range(100):
        pd3o.step()
        pdhg.step()
        assert np.max(np.abs(pd3o.x - pdhg.x)) <= 1e-12
        assert np.max(np.abs(pd3o.y - pdhg.y)) <= 1e-12


def test_pdhg_zero_h_is_prox_iteration():
    z = np.array([1.0, -2.0, 3.0])
    g = L1Norm()
    alg = PDHG(g, ZeroFunction(), MatrixOperator(np.ones((2, 3))), initial=z, tau=0.5, sigma=0.1)
    x = z.copy()
    for _ in range(4):
        alg.step()
        x = g.proximal(x, 0.5)
        np.testing.assert_array_equal(alg.x, x)
        assert np.all(alg.y == 0)


def test_pdhg_rof_matches_fgp():
    rng = np.random.default_rng(7)
    z = rng.uniform(size=16)
    alpha = 0.15
    D = GradientOperator((4, 4))
    alg = PDHG(LeastSquares(b=z), alpha * MixedL21Norm(2), D, initial=z)
    alg.run(5000)
    ref = fgp_tv(z, (4, 4), alpha, iterations=5000)
    assert np.max(np.abs(alg.x - ref)) <= 1e-5


def test_default_steps_and_warnings():
    D = GradientOperator((4, 4))
    f = _half_square(n=16)
    with pytest.warns(RuntimeWarning, match="exceeds 1"):
        alg = PD3O(f, None, MixedL21Norm(2), D)
    assert alg.gamma == pytest.approx(0.99 * 2)
    assert alg.delta == pytest.approx(1 / D.norm() ** 2)
    pdhg = PDHG(None, MixedL21Norm(2), D)
    assert pdhg.tau == pytest.approx(1 / D.norm()) and pdhg.sigma == pytest.approx(1 / D.norm())
    with pytest.warns(RuntimeWarning):
        PDHG(None, MixedL21Norm(2), D, tau=1.0, sigma=1.0)
    with pytest.raises(ConfigurationError):
        PD3O(ZeroFunction(), None, MixedL21Norm(2), D)


def test_run_zero_iterations():
    alg = GD(_half_square(2.0, 3), initial=np.ones(3), step_size=1.0)
    alg.run(0)
    np.testing.assert_array_equal(alg.x, np.ones(3))
    assert [k for k, _, _ in alg.loss] == [0]


def test_gd_reaches_minimiser_in_one_step():
    b = np.array([1.0, -2.0, 0.5])
    alg = GD(LeastSquares(IdentityOperator((3,)), b), initial=np.zeros(3), step_size=1.0)
    alg.run(3)
    np.testing.assert_array_equal(alg.x, b)
    vals = alg.objective_values
    assert vals[0] > vals[1] == 0.0


def test_objective_interval_and_csv(tmp_path):
    alg = GD(_half_square(1.0, 2), initial=np.zeros(2), step_size=0.5, update_objective_interval=3)
    alg.run(7)
    assert [k for k, _, _ in alg.loss] == [0, 3, 6]
    alg.save_objective(tmp_path / "obj.csv")
    rows = list(csv.reader(open(tmp_path / "obj.csv")))
    assert rows[0] == ["iteration", "data_passes", "objective"]
    assert [float(r[2]) for r in rows[1:]] == alg.objective_values
    with pytest.raises(ConfigurationError):
        GD(_half_square(), initial=[0.0], update_objective_interval=0)


def test_callback_errors_carry_iteration():
    def boom(alg):
        if alg.iteration == 4:
            raise ValueError("stop")
    alg = GD(_half_square(), initial=[1.0], step_size=0.5)
    with pytest.raises(CallbackError) as info:
        alg.run(10, callbacks=[boom])
    assert info.value.iteration == 4
    assert isinstance(info.value.__cause__, ValueError)


def test_callbacks_see_each_iteration():
    seen = []
    GD(_half_square(), initial=[1.0], step_size=0.5).run(5, callbacks=[lambda a: seen.append(a.iteration)])
    assert seen == [1, 2, 3, 4, 5]


def test_full_sum_pgd_matches_single_member_sg():
    rng = np.random.default_rng(5)
    f = LeastSquares(MatrixOperator(rng.normal(size=(9, 4))), rng.normal(size=9))
    g = 0.1 * L1Norm()
    a = _trace(PGD(FullGradientFunction([f]), g, initial=np.zeros(4)), 40)
    b = _trace(PGD(SGFunction([f], Sampler.sequential(1)), g, initial=np.zeros(4), step_size=1 / f.L), 40)
    np.testing.assert_array_equal(a, b)


def test_data_passes_of_deterministic_runs():
    alg = GD(_half_square(n=2), initial=np.ones(2), step_size=0.5)
    alg.run(4)
    assert alg.data_passes == 4
    est = SGFunction([_half_square(n=2)] * 4, Sampler.sequential(4))
    alg = GD(est, initial=np.ones(2), step_size=0.1)
    alg.run(6)
    assert float(alg.data_passes) == 1.5


def test_initial_size_inferred_from_operator():
    f = LeastSquares(MatrixOperator(np.ones((3, 5))), np.ones(3))
    assert PGD(f).x.shape == (5,)
    assert PDHG(None, L1Norm(), MatrixOperator(np.ones((2, 7)))).x.shape == (7,)


@given(seed=st.integers(0, 2**31 - 1), lam=st.floats(0.0, 2.0))
@settings(max_examples=40, deadline=None)
def test_pgd_descent_with_step_one_over_l(seed, lam):
    rng = np.random.default_rng(seed)
    f = LeastSquares(MatrixOperator(rng.normal(size=(7, 5))), rng.normal(size=7))
    alg = PGD(f, lam * L1Norm(), initial=rng.normal(size=5))
    alg.run(30)
    vals = np.array(alg.objective_values)
    assert np.all(np.diff(vals) <= 1e-12 * np.abs(vals[:-1]) + 1e-12)
