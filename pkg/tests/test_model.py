import numpy as np
import pytest

from tensorclust.linalg import qr_orthonormalize
from tensorclust.model import (
    FactorModel,
    FitState,
    Hyperparams,
    fit,
    init_state,
    objective,
    update_anomaly,
    update_core,
    update_factor,
    update_z,
)
from tensorclust.tensor_ops import frobenius_norm_sq, l1_norm, mode_product, unfold


def small_hyper(**kw):
    base = dict(lambda_z=1.0, lambda_a=1.0, lambda_e=1.0, p2=2, p3=2)
    base.update(kw)
    return Hyperparams(**base)


def random_state(rng, n=5, i2=6, i3=4, p2=2, p3=2):
    u2 = qr_orthonormalize(rng.standard_normal((i2, p2)))
    u3 = qr_orthonormalize(rng.standard_normal((i3, p3)))
    return FitState(
        model=FactorModel(core=rng.standard_normal((n, p2, p3)), u2=u2, u3=u3),
        anomaly=rng.standard_normal((n, i2, i3)),
        z=rng.standard_normal((n, n)),
    )


def naive_objective(x, s, h):
    """Term-by-term recomputation with explicit loops."""
    n = x.shape[0]
    total = 0.0
    for i in range(n):
        for j in range(n):
            total += 0.5 * s.z[i, j] ** 2
    cz = np.zeros_like(s.model.core)
    for i in range(n):
        for j in range(n):
            cz[i] += s.z[i, j] * s.model.core[j]
    total += 0.5 * h.lambda_z * np.sum((s.model.core - cz) ** 2)
    total += h.lambda_a * np.sum(np.abs(s.anomaly))
    recon = np.einsum("apq,bp,cq->abc", s.model.core, s.model.u2, s.model.u3)
    total += 0.5 * h.lambda_e * np.sum((x - s.anomaly - recon) ** 2)
    return total


class TestObjective:
    def test_all_zero(self):
        n, i2, i3 = 3, 4, 5
        s = FitState(
            model=FactorModel(core=np.zeros((n, 2, 2)), u2=np.eye(i2)[:, :2], u3=np.eye(i3)[:, :2]),
            anomaly=np.zeros((n, i2, i3)),
            z=np.zeros((n, n)),
        )
        assert objective(np.zeros((n, i2, i3)), s, small_hyper()) == 0.0

    def test_identity_z_gives_ridge_term_only(self):
        rng = np.random.default_rng(0)
        s = random_state(rng)
        s.z = np.eye(5)
        s.anomaly = np.zeros_like(s.anomaly)
        x = s.model.reconstruct()
        # self-expression term vanishes, reconstruction term vanishes, ||I||^2/2 = N/2
        assert np.isclose(objective(x, s, small_hyper()), 5 / 2.0)

    def test_matches_naive_loops(self):
        rng = np.random.default_rng(1)
        s = random_state(rng)
        x = rng.standard_normal((5, 6, 4))
        h = small_hyper(lambda_z=0.7, lambda_a=0.3, lambda_e=2.1)
        assert np.isclose(objective(x, s, h), naive_objective(x, s, h), rtol=1e-12)


class TestInit:
    def test_zero_anomaly_identity_z(self):
        rng = np.random.default_rng(2)
        x = rng.standard_normal((5, 6, 4))
        s = init_state(x, small_hyper())
        assert l1_norm(s.anomaly) == 0.0
        assert np.array_equal(s.z, np.eye(5))

    def test_exact_tucker_data_reconstructed(self):
        rng = np.random.default_rng(3)
        core = rng.standard_normal((5, 2, 3))
        u2 = qr_orthonormalize(rng.standard_normal((7, 2)))
        u3 = qr_orthonormalize(rng.standard_normal((6, 3)))
        x = mode_product(mode_product(core, u2, 2), u3, 3)
        s = init_state(x, small_hyper(p2=2, p3=3))
        err = frobenius_norm_sq(x - s.model.reconstruct())
        assert err <= 1e-12 * frobenius_norm_sq(x)

    def test_full_rank_exact(self):
        rng = np.random.default_rng(4)
        x = rng.standard_normal((4, 5, 3))
        s = init_state(x, small_hyper(p2=5, p3=3))
        err = frobenius_norm_sq(x - s.model.reconstruct())
        assert err <= 1e-12 * frobenius_norm_sq(x)

    def test_rank_out_of_bounds(self):
        rng = np.random.default_rng(5)
        x = rng.standard_normal((4, 5, 3))
        with pytest.raises(ValueError):
            init_state(x, small_hyper(p2=6, p3=2))
        with pytest.raises(ValueError):
            Hyperparams(lambda_z=1, lambda_a=1, lambda_e=1, p2=0, p3=2)


def fd_gradient(f, x0, step=1e-6):
    g = np.zeros_like(x0)
    flat = x0.ravel()
    gf = g.ravel()
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        up = f(x0)
        flat[i] = orig - step
        down = f(x0)
        flat[i] = orig
        gf[i] = (up - down) / (2 * step)
    return g


class TestUpdateZ:
    def test_zero_core(self):
        z = update_z(np.zeros((4, 2, 2)), small_hyper())
        assert np.allclose(z, 0.0)

    def test_identity_unfolding(self):
        from tensorclust.tensor_ops import fold

        # core whose mode-1 unfolding is the 4x4 identity
        core = fold(np.eye(4), 1, (4, 2, 2))
        lam = 0.7
        z = update_z(core, small_hyper(lambda_z=lam))
        assert np.allclose(z, lam / (1 + lam) * np.eye(4), atol=1e-12)

    def test_finite_difference_gradient_zero(self):
        rng = np.random.default_rng(6)
        core = rng.standard_normal((5, 2, 2))
        h = small_hyper(lambda_z=1.0)
        zstar = update_z(core, h)
        c1 = unfold(core, 1)

        def f(z):
            return 0.5 * np.sum(z * z) + 0.5 * h.lambda_z * np.sum((c1 - z @ c1) ** 2)

        g = fd_gradient(f, zstar.copy())
        assert np.max(np.abs(g)) <= 1e-5


class TestUpdateAnomaly:
    def test_scalar_shrinkage_values(self):
        # residual entry 3.0 with threshold 1.0 -> 2.0; -0.3 with 0.5 -> 0.0
        x = np.zeros((1, 1, 2))
        x[0, 0, 0] = 3.0
        x[0, 0, 1] = -0.3
        model = FactorModel(core=np.zeros((1, 1, 1)), u2=np.zeros((1, 1)), u3=np.zeros((2, 1)))
        a = update_anomaly(x, model, small_hyper(lambda_a=1.0, lambda_e=1.0, p2=1, p3=1))
        assert a[0, 0, 0] == 2.0 and a[0, 0, 1] == 0.0
        a = update_anomaly(x, model, small_hyper(lambda_a=0.5, lambda_e=1.0, p2=1, p3=1))
        assert a[0, 0, 1] == 0.0

    def test_disabled_returns_zero(self):
        rng = np.random.default_rng(7)
        s = random_state(rng)
        x = rng.standard_normal((5, 6, 4))
        a = update_anomaly(x, s.model, small_hyper(anomaly_enabled=False))
        assert np.array_equal(a, np.zeros_like(x))

    def test_beats_random_perturbations(self):
        rng = np.random.default_rng(8)
        s = random_state(rng)
        x = rng.standard_normal((5, 6, 4))
        h = small_hyper(lambda_a=0.4, lambda_e=1.3)
        astar = update_anomaly(x, s.model, h)
        resid = x - s.model.reconstruct()

        def subobj(a):
            return h.lambda_a * np.sum(np.abs(a)) + 0.5 * h.lambda_e * np.sum((resid - a) ** 2)

        best = subobj(astar)
        for _ in range(1000):
            delta = rng.standard_normal(astar.shape) * rng.choice([0.01, 0.1, 1.0])
            assert subobj(astar + delta) >= best - 1e-12

    def test_entrywise_grid_minimization(self):
        rng = np.random.default_rng(9)
        h = small_hyper(lambda_a=0.8, lambda_e=2.0, p2=1, p3=1)
        model = FactorModel(core=np.zeros((1, 1, 1)), u2=np.zeros((3, 1)), u3=np.zeros((4, 1)))
        x = rng.standard_normal((1, 3, 4)) * 2
        astar = update_anomaly(x, model, h)
        for idx in np.ndindex(x.shape):
            r = x[idx]
            grid = np.linspace(r - 2.5, r + 2.5, 20001)
            vals = h.lambda_a * np.abs(grid) + 0.5 * h.lambda_e * (r - grid) ** 2
            assert abs(grid[np.argmin(vals)] - astar[idx]) < 5e-4

    def test_support_only_above_threshold(self):
        rng = np.random.default_rng(10)
        s = random_state(rng)
        x = rng.standard_normal((5, 6, 4)) * 3
        h = small_hyper(lambda_a=1.0, lambda_e=1.0)
        astar = update_anomaly(x, s.model, h)
        resid = x - s.model.reconstruct()
        nz = astar != 0
        assert np.all(np.abs(resid[nz]) > h.lambda_a / h.lambda_e)


class TestUpdateCore:
    def test_identity_z_reduces_to_projection(self):
        rng = np.random.default_rng(11)
        s = random_state(rng)
        x = rng.standard_normal((5, 6, 4))
        a = rng.standard_normal((5, 6, 4)) * 0.1
        h = small_hyper(lambda_z=3.7, lambda_e=0.9)
        core = update_core(x, a, np.eye(5), s.model.u2, s.model.u3, h)
        expected = mode_product(mode_product(x - a, s.model.u2.T, 2), s.model.u3.T, 3)
        assert np.allclose(core, expected, atol=1e-10)

    def test_recovers_constructed_truth(self):
        rng = np.random.default_rng(12)
        core0 = rng.standard_normal((5, 2, 3))
        u2 = qr_orthonormalize(rng.standard_normal((7, 2)))
        u3 = qr_orthonormalize(rng.standard_normal((6, 3)))
        x = mode_product(mode_product(core0, u2, 2), u3, 3)
        core = update_core(x, np.zeros_like(x), np.eye(5), u2, u3, small_hyper(p2=2, p3=3))
        assert np.max(np.abs(core - core0)) <= 1e-8

    def test_finite_difference_gradient_zero(self):
        rng = np.random.default_rng(13)
        s = random_state(rng)
        x = rng.standard_normal((5, 6, 4))
        a = rng.standard_normal((5, 6, 4)) * 0.2
        z = rng.standard_normal((5, 5)) * 0.3
        h = small_hyper(lambda_z=0.8, lambda_e=1.7)
        cstar = update_core(x, a, z, s.model.u2, s.model.u3, h)

        def f(core):
            se = core - mode_product(core, z, 1)
            resid = x - a - mode_product(mode_product(core, s.model.u2, 2), s.model.u3, 3)
            return 0.5 * h.lambda_z * np.sum(se**2) + 0.5 * h.lambda_e * np.sum(resid**2)

        g = fd_gradient(f, cstar.copy())
        assert np.max(np.abs(g)) <= 1e-5


def random_orthonormal(rng, m, n):
    return np.linalg.qr(rng.standard_normal((m, n)))[0]


class TestUpdateFactor:
    def test_positive_diagonal_q_gives_leading_identity(self):
        rng = np.random.default_rng(14)
        n, i2, p2, i3 = 3, 4, 2, 3
        # core with orthonormal mode-2 unfolding rows makes Q equal the mixing matrix
        c2 = np.linalg.qr(rng.standard_normal((n * i3, p2)))[0].T
        from tensorclust.tensor_ops import fold

        core = fold(c2, 2, (n, p2, i3))
        dmat = np.zeros((i2, p2))
        dmat[0, 0], dmat[1, 1] = 2.0, 1.0
        x = fold(dmat @ c2, 2, (n, i2, i3))
        u2 = update_factor(x, np.zeros_like(x), core, np.eye(i3), 2)
        assert np.allclose(u2, np.eye(i2)[:, :p2], atol=1e-10)

    def test_orthonormal_q_returned_unchanged(self):
        rng = np.random.default_rng(15)
        n, i2, p2, i3 = 3, 5, 2, 3
        c2 = np.linalg.qr(rng.standard_normal((n * i3, p2)))[0].T
        from tensorclust.tensor_ops import fold

        core = fold(c2, 2, (n, p2, i3))
        q0 = random_orthonormal(rng, i2, p2)
        x = fold(q0 @ c2, 2, (n, i2, i3))
        u2 = update_factor(x, np.zeros_like(x), core, np.eye(i3), 2)
        assert np.allclose(u2, q0, atol=1e-10)

    @pytest.mark.parametrize("mode", [2, 3])
    def test_beats_random_orthonormal_candidates(self, mode):
        rng = np.random.default_rng(16 + mode)
        n, i2, i3, p2, p3 = 4, 6, 5, 2, 2
        x = rng.standard_normal((n, i2, i3))
        a = rng.standard_normal((n, i2, i3)) * 0.1
        core = rng.standard_normal((n, p2, p3))
        u2 = random_orthonormal(rng, i2, p2)
        u3 = random_orthonormal(rng, i3, p3)
        if mode == 2:
            ustar = update_factor(x, a, core, u3, 2)
            err_star = frobenius_norm_sq(x - a - mode_product(mode_product(core, ustar, 2), u3, 3))
            for _ in range(500):
                cand = random_orthonormal(rng, i2, p2)
                err = frobenius_norm_sq(x - a - mode_product(mode_product(core, cand, 2), u3, 3))
                assert err >= err_star - 1e-10
        else:
            ustar = update_factor(x, a, core, u2, 3)
            err_star = frobenius_norm_sq(x - a - mode_product(mode_product(core, u2, 2), ustar, 3))
            for _ in range(500):
                cand = random_orthonormal(rng, i3, p3)
                err = frobenius_norm_sq(x - a - mode_product(mode_product(core, u2, 2), cand, 3))
                assert err >= err_star - 1e-10

    def test_result_is_orthonormal(self):
        rng = np.random.default_rng(18)
        x = rng.standard_normal((4, 6, 5))
        core = rng.standard_normal((4, 3, 2))
        u3 = random_orthonormal(rng, 5, 2)
        u2 = update_factor(x, np.zeros_like(x), core, u3, 2)
        assert np.max(np.abs(u2.T @ u2 - np.eye(3))) <= 1e-10


def make_single_cluster_tucker(rng, n=10, i2=12, i3=11, p2=3, p3=3):
    core = rng.standard_normal((n, p2, p3))
    u2 = qr_orthonormalize(rng.standard_normal((i2, p2)))
    u3 = qr_orthonormalize(rng.standard_normal((i3, p3)))
    return mode_product(mode_product(core, u2, 2), u3, 3)


class TestFit:
    def test_noiseless_tucker_monotone_and_reconstructs(self):
        rng = np.random.default_rng(19)
        x = make_single_cluster_tucker(rng)
        h = Hyperparams(lambda_z=1e-8, lambda_a=1.0, lambda_e=1.0, p2=3, p3=3)
        st = fit(x, h)
        trace = np.array(st.objective_trace)
        assert np.all(np.diff(trace) <= 1e-9)
        resid = frobenius_norm_sq(x - st.anomaly - st.model.reconstruct())
        assert resid <= (1e-6) ** 2 * frobenius_norm_sq(x) * 1e6  # relative norm <= 1e-6
        assert np.sqrt(resid / frobenius_norm_sq(x)) <= 1e-6

    def test_anomaly_disabled_identical_trajectory(self):
        rng = np.random.default_rng(20)
        x = make_single_cluster_tucker(rng)
        h_on = Hyperparams(lambda_z=1e-8, lambda_a=1.0, lambda_e=1.0, p2=3, p3=3)
        h_off = Hyperparams(
            lambda_z=1e-8, lambda_a=1.0, lambda_e=1.0, p2=3, p3=3, anomaly_enabled=False
        )
        st_on = fit(x, h_on)
        st_off = fit(x, h_off)
        assert l1_norm(st_off.anomaly) == 0.0
        assert l1_norm(st_on.anomaly) == 0.0
        assert np.allclose(st_on.objective_trace, st_off.objective_trace, rtol=1e-12)

    def test_objective_monotone_on_random_instances(self):
        rng = np.random.default_rng(21)
        for trial in range(10):
            x = rng.standard_normal((6, 7, 5)) + rng.choice([0.0, 3.0]) * (
                rng.random((6, 7, 5)) < 0.1
            )
            h = Hyperparams(
                lambda_z=10 ** rng.uniform(-3, 1),
                lambda_a=10 ** rng.uniform(-2, 1),
                lambda_e=10 ** rng.uniform(-1, 1),
                p2=int(rng.integers(1, 5)),
                p3=int(rng.integers(1, 4)),
                max_sweeps=15,
            )
            st = fit(x, h)
            trace = np.array(st.objective_trace)
            assert np.all(np.diff(trace) <= 1e-9), f"trial {trial} not monotone"

    def test_factor_orthonormality_after_every_sweep(self):
        rng = np.random.default_rng(22)
        x = rng.standard_normal((6, 7, 5))
        h = Hyperparams(lambda_z=0.1, lambda_a=0.5, lambda_e=1.0, p2=3, p3=2)
        st = init_state(x, h)
        for _ in range(8):
            st.z = update_z(st.model.core, h)
            st.anomaly = update_anomaly(x, st.model, h)
            st.model.core = update_core(x, st.anomaly, st.z, st.model.u2, st.model.u3, h)
            st.model.u2 = update_factor(x, st.anomaly, st.model.core, st.model.u3, 2)
            st.model.u3 = update_factor(x, st.anomaly, st.model.core, st.model.u2, 3)
            assert np.max(np.abs(st.model.u2.T @ st.model.u2 - np.eye(h.p2))) <= 1e-8
            assert np.max(np.abs(st.model.u3.T @ st.model.u3 - np.eye(h.p3))) <= 1e-8

    def test_converged_flag_and_sweep_budget(self):
        rng = np.random.default_rng(23)
        x = make_single_cluster_tucker(rng)
        h = Hyperparams(lambda_z=1e-8, lambda_a=1.0, lambda_e=1.0, p2=3, p3=3, max_sweeps=200)
        st = fit(x, h)
        assert st.converged and st.sweeps_run < 200
        h2 = Hyperparams(lambda_z=1e-8, lambda_a=1.0, lambda_e=1.0, p2=3, p3=3, max_sweeps=1)
        st2 = fit(x, h2)
        assert st2.sweeps_run == 1

    def test_paper_regime_clusters_perfectly(self):
        from tensorclust.clustering import affinity_from_z, clustering_accuracy, spectral_cluster
        from tensorclust.simulate import SimConfig, generate

        data = generate(SimConfig(anomaly_intensity=8.0, anomaly_ratio=0.2, seed=0))
        h = Hyperparams(lambda_z=1e-3, lambda_a=2.0, lambda_e=1.0, p2=15, p3=15)
        st = fit(data.x, h)
        res = spectral_cluster(affinity_from_z(st.z), 3, seed=0)
        assert clustering_accuracy(res.labels, data.truth_labels) == 1.0
