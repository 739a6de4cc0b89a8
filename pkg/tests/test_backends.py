"""Numba and numpy kernel implementations must agree."""

import os
import subprocess
import sys

import numpy as np
import pytest
from numpy.testing import assert_allclose

from crossdyn import _kernels

needs_numba = pytest.mark.skipif(
    not _kernels.NUMBA_AVAILABLE, reason="numba not installed"
)


@needs_numba
class TestKernelAgreement:
    def test_gauss_kernel_sums(self, rng):
        queries = rng.uniform(-5, 5, 300)
        samples = rng.standard_normal(800)
        h = 0.3
        m_a, s0_a, s1_a = _kernels.gauss_kernel_sums_numba(queries, samples, h)
        m_b, s0_b, s1_b = _kernels.gauss_kernel_sums_numpy(queries, samples, h)
        assert_allclose(m_a, m_b, rtol=1e-12)
        assert_allclose(s0_a, s0_b, rtol=1e-9)
        assert_allclose(s1_a, s1_b, rtol=1e-9, atol=1e-12)

    def test_em_path_table(self, rng):
        # Mean-reverting drift keeps the path inside the table.
        nodes = np.linspace(-2.0, 2.0, 512)
        drift = -nodes + 0.1 * rng.standard_normal(512)
        noise = rng.standard_normal(5000)
        args = (0.3, drift, -2.0, (512 - 1) / 4.0, 0.01, 0.05, noise)
        assert_allclose(
            _kernels.em_path_table_numba(*args),
            _kernels.em_path_table_numpy(*args),
            rtol=1e-12,
        )

    def test_em_path_exact(self, rng):
        samples = rng.standard_normal(60)
        noise = rng.standard_normal(400)
        args = (0.1, samples, 0.4, 0.01, 0.03, noise)
        assert_allclose(
            _kernels.em_path_exact_numba(*args),
            _kernels.em_path_exact_numpy(*args),
            rtol=1e-8,
            atol=1e-10,
        )

    def test_power_iteration(self, rng):
        n = 80
        w = rng.random((n, n)) + 1e-3
        w /= w.sum(axis=1, keepdims=True)
        from scipy.sparse import csr_matrix

        wt = csr_matrix(w.T)
        start = np.full(n, 1.0 / n)
        args = (
            wt.indptr.astype(np.int64),
            wt.indices.astype(np.int64),
            wt.data.astype(np.float64),
            start,
            1e-12,
            100_000,
        )
        pi_a, it_a, diff_a = _kernels.power_iteration_numba(*args)
        pi_b, it_b, diff_b = _kernels.power_iteration_numpy(*args)
        assert_allclose(pi_a, pi_b, atol=1e-10)
        assert diff_a <= 1e-12 and diff_b <= 1e-12


class TestBackendSelection:
    def probe(self, backend):
        env = dict(os.environ, CROSSDYN_BACKEND=backend)
        return subprocess.run(
            [sys.executable, "-c",
             "from crossdyn import _kernels; print(_kernels.USING_NUMBA)"],
            capture_output=True, text=True, env=env,
        )

    def test_numpy_flag_disables_numba(self):
        out = self.probe("numpy")
        assert out.returncode == 0
        assert out.stdout.strip() == "False"

    @needs_numba
    def test_auto_prefers_numba(self):
        out = self.probe("auto")
        assert out.returncode == 0
        assert out.stdout.strip() == "True"

    def test_bad_flag_fails_loudly(self):
        out = self.probe("cython")
        assert out.returncode != 0
        assert "CROSSDYN_BACKEND" in out.stderr
