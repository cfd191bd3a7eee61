"""Shared test helpers: central finite-difference gradient oracle."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from tidylearn.autodiff import Tensor

FD_STEP = 1e-5
REL_TOL = 1e-4


def numeric_grad(f: Callable[[], Tensor], param: Tensor, step: float = FD_STEP) -> np.ndarray:
    """Central finite differences of the scalar f() w.r.t. every entry of param.

    Independent of the reverse-mode path: only re-evaluates the forward
    function with perturbed parameter entries.
    """
    flat = param.data.reshape(-1)
    grad = np.zeros_like(flat)
    for i in range(flat.size):
        keep = flat[i]
        flat[i] = keep + step
        up = float(f().data)
        flat[i] = keep - step
        down = float(f().data)
        flat[i] = keep
        grad[i] = (up - down) / (2.0 * step)
    return grad.reshape(param.data.shape)


def assert_grads_match(f: Callable[[], Tensor], params: Sequence[Tensor],
                       rel_tol: float = REL_TOL, step: float = FD_STEP) -> None:
    """Run backward once and compare every parameter gradient to the FD oracle."""
    for p in params:
        p.grad = None
    out = f()
    out.backward()
    for k, p in enumerate(params):
        assert p.grad is not None, f"param {k} received no gradient"
        fd = numeric_grad(f, p, step=step)
        np.testing.assert_allclose(
            p.grad, fd, rtol=rel_tol, atol=1e-8,
            err_msg=f"analytic/finite-difference mismatch on param {k}")
