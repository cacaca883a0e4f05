"""Compiled kernels must agree with the numpy reference implementations."""

import numpy as np
import pytest

from tempseg._kernels import _ref

try:
    from tempseg._kernels import _core
except ImportError:
    _core = None

needs_core = pytest.mark.skipif(_core is None,
                                reason="compiled extension not built")


@needs_core
class TestBackendEquivalence:
    @pytest.mark.parametrize("T,cin,cout,r,dilation", [
        (1, 1, 1, 1, 1),
        (7, 2, 3, 3, 1),
        (33, 8, 8, 3, 4),
        (50, 4, 6, 5, 2),
        (16, 3, 3, 3, 16),  # dilation larger than the sequence
    ])
    def test_conv_forward(self, rng, T, cin, cout, r, dilation):
        x = rng.normal(size=(T, cin))
        w = rng.normal(size=(cout, cin, r))
        b = rng.normal(size=cout)
        y_ref = _ref.conv1d_forward(x, w, b, dilation)
        y_core = _core.conv1d_forward(x, w, b, dilation)
        np.testing.assert_allclose(y_core, y_ref, rtol=1e-12, atol=1e-12)

    @pytest.mark.parametrize("T,cin,cout,r,dilation", [
        (7, 2, 3, 3, 1),
        (33, 8, 8, 3, 4),
        (50, 4, 6, 5, 2),
    ])
    def test_conv_backward(self, rng, T, cin, cout, r, dilation):
        x = rng.normal(size=(T, cin))
        w = rng.normal(size=(cout, cin, r))
        gy = rng.normal(size=(T, cout))
        ref = _ref.conv1d_backward(x, w, gy, dilation)
        core = _core.conv1d_backward(x, w, gy, dilation)
        for a, b in zip(core, ref):
            np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)

    def test_viterbi_bitwise_identical(self, rng):
        for _ in range(200):
            T = int(rng.integers(1, 40))
            k = int(rng.integers(1, min(T, 6) + 1))
            grid = rng.normal(size=(T, k))
            p_ref, s_ref = _ref.viterbi_path(grid)
            p_core, s_core = _core.viterbi_path(grid)
            np.testing.assert_array_equal(p_core, p_ref)
            assert s_core == s_ref  # same arithmetic order: exact

    def test_viterbi_with_ties(self):
        p_ref, s_ref = _ref.viterbi_path(np.zeros((8, 3)))
        p_core, s_core = _core.viterbi_path(np.zeros((8, 3)))
        np.testing.assert_array_equal(p_core, p_ref)
        assert s_core == s_ref


class TestBackendSelection:
    def test_backend_reported(self):
        import tempseg
        assert tempseg.backend() in ("compiled", "python")

    def test_pure_python_override(self):
        import subprocess
        import sys
        out = subprocess.run(
            [sys.executable, "-c",
             "import tempseg; print(tempseg.backend())"],
            env={"TEMPSEG_PURE_PYTHON": "1", "PATH": "/usr/bin:/bin"},
            capture_output=True, text=True)
        assert out.stdout.strip() == "python"
