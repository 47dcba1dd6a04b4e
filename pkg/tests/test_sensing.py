import numpy as np
import pytest

from lowrank_phases import kernels, sensing


def sym(rng, n):
    z = rng.standard_normal((n, n))
    return (z + z.T) / 2


class TestGenerate:
    def test_matrices_exactly_symmetric(self):
        op = sensing.gen_gaussian_operator(2, 1, seed=3)
        a = op.matrices[0]
        assert np.array_equal(a, a.T)

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            sensing.gen_gaussian_operator(0, 5, seed=0)
        with pytest.raises(ValueError):
            sensing.gen_gaussian_operator(5, 0, seed=0)

    def test_deterministic_for_fixed_seed(self):
        a = sensing.gen_gaussian_operator(6, 9, seed=42)
        b = sensing.gen_gaussian_operator(6, 9, seed=42)
        assert np.array_equal(a.matrices, b.matrices)

    def test_measurement_moments(self, rng):
        # per-measurement statistic <A_i, Z>: mean 0, variance ||Z||_F^2
        n, m = 8, 4096
        op = sensing.gen_gaussian_operator(n, m, seed=7)
        Z = sym(rng, n)
        vals = np.array([np.sum(op.matrices[i] * Z) for i in range(m)])
        zf2 = np.linalg.norm(Z) ** 2
        assert abs(vals.mean()) <= 3.0 * np.sqrt(zf2) / np.sqrt(m)
        assert abs(vals.var() - zf2) <= 0.10 * zf2

    def test_footnote_convention_scales(self):
        op = sensing.gen_gaussian_operator(20, 400, seed=5, convention="footnote")
        offdiag = np.concatenate([m[np.triu_indices(20, 1)] for m in op.matrices])
        diag = np.concatenate([np.diag(m) for m in op.matrices])
        assert abs(offdiag.var() - 1.0) < 0.05
        assert abs(diag.var() - 0.5) < 0.05
        for a in op.matrices[:5]:
            assert np.array_equal(a, a.T)


class TestApply:
    def test_zero_matrix(self, small_instance):
        op = small_instance.op
        assert np.array_equal(sensing.apply_operator(op, np.zeros((8, 8))), np.zeros(op.m))

    def test_hand_computed_single_measurement(self):
        op = sensing.gen_gaussian_operator(2, 1, seed=0)
        mats = np.array([[[0.0, 1.0], [1.0, 0.0]]])
        mats.setflags(write=False)
        op = sensing.SensingOperator(n=2, m=1, matrices=mats, seed=0)
        y = sensing.apply_operator(op, np.array([[1.0, 2.0], [2.0, 1.0]]))
        assert y == pytest.approx([4.0])

    def test_linearity(self, small_instance, rng):
        op = small_instance.op
        z1, z2 = sym(rng, 8), sym(rng, 8)
        a, b = rng.standard_normal(2)
        lhs = sensing.apply_operator(op, a * z1 + b * z2)
        rhs = a * sensing.apply_operator(op, z1) + b * sensing.apply_operator(op, z2)
        assert np.linalg.norm(lhs - rhs) <= 1e-10 * np.linalg.norm(rhs)

    def test_rejects_asymmetric(self, small_instance, rng):
        z = rng.standard_normal((8, 8))
        with pytest.raises(ValueError, match="symmetric"):
            sensing.apply_operator(small_instance.op, z)

    def test_rejects_dimension_mismatch(self, small_instance):
        with pytest.raises(ValueError):
            sensing.apply_operator(small_instance.op, np.eye(5))


class TestAdjoint:
    def test_zero_vector(self, small_instance):
        out = sensing.apply_adjoint(small_instance.op, np.zeros(small_instance.op.m))
        assert np.array_equal(out, np.zeros((8, 8)))

    def test_hand_computed(self):
        mats = np.array([[[0.0, 1.0], [1.0, 0.0]]])
        mats.setflags(write=False)
        op = sensing.SensingOperator(n=2, m=1, matrices=mats, seed=0)
        out = sensing.apply_adjoint(op, np.array([2.0]))
        assert np.array_equal(out, np.array([[0.0, 2.0], [2.0, 0.0]]))

    def test_adjoint_identity(self, rng):
        # <forward(Z), y> == <Z, adjoint(y)> on random pairs
        op = sensing.gen_gaussian_operator(5, 7, seed=8)
        for _ in range(20):
            Z = sym(rng, 5)
            y = rng.standard_normal(7)
            lhs = sensing.apply_operator(op, Z) @ y
            rhs = np.sum(Z * sensing.apply_adjoint(op, y))
            assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(rhs))

    def test_linearity(self, small_instance, rng):
        op = small_instance.op
        y1, y2 = rng.standard_normal(op.m), rng.standard_normal(op.m)
        a, b = rng.standard_normal(2)
        lhs = sensing.apply_adjoint(op, a * y1 + b * y2)
        rhs = a * sensing.apply_adjoint(op, y1) + b * sensing.apply_adjoint(op, y2)
        assert np.linalg.norm(lhs - rhs) <= 1e-10 * np.linalg.norm(rhs)

    def test_rejects_length_mismatch(self, small_instance):
        with pytest.raises(ValueError):
            sensing.apply_adjoint(small_instance.op, np.zeros(3))


class TestUnbiasedness:
    def test_normal_map_is_identity_in_expectation(self, rng):
        # mean of adjoint(forward(Z)) over fresh ensembles approaches Z
        n, trials = 6, 2000
        Z = sym(rng, n)
        acc = np.zeros((n, n))
        acc2 = np.zeros((n, n))
        for k in range(trials):
            op = sensing.gen_gaussian_operator(n, 2, seed=10_000 + k)
            out = sensing.apply_normal(op, Z)
            acc += out
            acc2 += out**2
        mean = acc / trials
        se = np.sqrt((acc2 / trials - mean**2) / trials)
        assert np.all(np.abs(mean - Z) <= 5.0 * se + 1e-12)


class TestRipEstimate:
    def test_nonnegative_and_deterministic(self, small_instance):
        est1 = sensing.estimate_rip(small_instance.op, rank=2, trials=1, seed=5)
        est2 = sensing.estimate_rip(small_instance.op, rank=2, trials=1, seed=5)
        assert est1.delta_lower >= 0
        assert est1.delta_lower == est2.delta_lower

    def test_concentrates_at_large_m(self):
        op = sensing.gen_gaussian_operator(20, 4000, seed=31)
        est = sensing.estimate_rip(op, rank=2, trials=200, seed=32)
        assert est.delta_lower <= 0.5

    def test_sample_rank_and_norm(self):
        for rank in (1, 2, 3, 5):
            Z = sensing.draw_rip_sample(12, rank, (0, 1))
            assert np.linalg.norm(Z) == pytest.approx(1.0)
            assert np.linalg.matrix_rank(Z) <= rank

    def test_worst_seed_reproduces_maximizer(self, small_instance):
        op = small_instance.op
        est = sensing.estimate_rip(op, rank=2, trials=25, seed=77)
        Z = sensing.draw_rip_sample(op.n, 2, est.worst_case_sample_seed)
        val = sensing.apply_operator(op, Z)
        assert abs(val @ val - 1.0) == pytest.approx(est.delta_lower)

    def test_rejects_bad_rank(self, small_instance):
        with pytest.raises(ValueError):
            sensing.estimate_rip(small_instance.op, rank=9, trials=1, seed=0)

    def test_json_round_trip(self, small_instance):
        import json

        est = sensing.estimate_rip(small_instance.op, rank=2, trials=3, seed=1)
        data = json.loads(est.to_json())
        assert set(data) == {"rank", "trials", "delta_lower", "seed"}


class TestSpectralDeviation:
    def test_zero_input(self, small_instance):
        assert sensing.spectral_deviation(small_instance.op, np.zeros((8, 8))) == 0.0

    def test_small_for_rank_one_at_large_m(self, rng):
        op = sensing.gen_gaussian_operator(20, 8000, seed=55)
        v = rng.standard_normal(20)
        Z = np.outer(v, v)
        Z /= np.linalg.norm(Z)
        assert sensing.spectral_deviation(op, Z) <= 0.5

    def test_residual_symmetry_and_nonnegativity(self, small_instance, rng):
        Z = sym(rng, 8)
        resid = Z - sensing.apply_normal(small_instance.op, Z)
        assert np.allclose(resid, resid.T, atol=1e-12)
        assert sensing.spectral_deviation(small_instance.op, Z) >= 0


class TestBackends:
    def test_backends_agree(self, rng):
        if not kernels.HAVE_NUMBA:
            pytest.skip("numba unavailable")
        op = sensing.gen_gaussian_operator(10, 50, seed=9)
        Z = sym(rng, 10)
        y = rng.standard_normal(50)
        prev = kernels.get_backend()
        try:
            kernels.set_backend("numba")
            f_nb = sensing.apply_operator(op, Z)
            a_nb = sensing.apply_adjoint(op, y)
            kernels.set_backend("numpy")
            f_np = sensing.apply_operator(op, Z)
            a_np = sensing.apply_adjoint(op, y)
        finally:
            kernels.set_backend(prev)
        assert np.allclose(f_nb, f_np, rtol=1e-12, atol=1e-14)
        assert np.allclose(a_nb, a_np, rtol=1e-12, atol=1e-14)

    def test_env_flag_selects_numpy(self):
        import os
        import subprocess
        import sys

        env = dict(os.environ, LOWRANK_PHASES_BACKEND="numpy")
        out = subprocess.run(
            [sys.executable, "-c", "import lowrank_phases as lp; print(lp.get_backend())"],
            capture_output=True,
            text=True,
            env=env,
        )
        assert out.stdout.strip() == "numpy"

    def test_set_backend_rejects_unknown(self):
        with pytest.raises(ValueError):
            kernels.set_backend("gpu")
