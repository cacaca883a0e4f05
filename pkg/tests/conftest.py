"""Shared oracles and helpers.

The gradient oracle is central finite differences, kept independent of the
autodiff path it checks.
"""

import numpy as np
import pytest


def numeric_gradient(f, tensors, eps=1e-5):
    """Central finite-difference gradient of scalar f() w.r.t. each tensor.

    f re-evaluates the forward pass from the tensors' current .data; the
    entries are perturbed in place and restored.
    """
    grads = []
    for t in tensors:
        g = np.zeros_like(t.data)
        flat = t.data.ravel()
        gf = g.ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            fp = f()
            flat[i] = orig - eps
            fm = f()
            flat[i] = orig
            gf[i] = (fp - fm) / (2.0 * eps)
        grads.append(g)
    return grads


def max_rel_error(analytic, numeric):
    """max over tensors of ||a - n||_inf / max(1, ||n||_inf)."""
    worst = 0.0
    for a, n in zip(analytic, numeric):
        if a.size == 0:
            continue
        denom = max(1.0, float(np.max(np.abs(n))))
        worst = max(worst, float(np.max(np.abs(a - n))) / denom)
    return worst


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
