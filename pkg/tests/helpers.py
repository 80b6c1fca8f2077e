"""Shared test oracles: finite differences and gradient comparison."""

from __future__ import annotations

import numpy as np

from libs_kd import tensor as T
from libs_kd.tensor import Tensor


def numeric_grad(build_loss, leaf: Tensor, h: float = 1e-3) -> np.ndarray:
    """Central-difference gradient of a rebuildable scalar loss w.r.t. leaf.

    ``build_loss`` must reconstruct the graph from the leaves' current data
    each call; the leaf is perturbed in place one element at a time. The
    perturbed evaluations run without graph construction.
    """
    grad = np.zeros_like(leaf.data, dtype=np.float64)
    flat = leaf.data.reshape(-1)
    gflat = grad.reshape(-1)
    with T.no_grad():
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            hi = build_loss().item()
            flat[i] = orig - h
            lo = build_loss().item()
            flat[i] = orig
            gflat[i] = (hi - lo) / (2.0 * h)
    return grad


def rel_err(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Max elementwise relative error, floored at 1 to absorb near-zero grads."""
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(1.0, np.maximum(np.abs(a), np.abs(n)))
    return float(np.max(np.abs(a - n) / denom)) if a.size else 0.0


def check_grads(build_loss, leaves: dict[str, Tensor], tol: float = 1e-4,
                h: float = 1e-3) -> None:
    """Assert analytic gradients match central differences for every leaf."""
    for leaf in leaves.values():
        leaf.grad = None  # drop any stale gradient from an earlier backward
    loss = build_loss()
    loss.backward()
    analytic = {name: (leaf.grad.copy() if leaf.grad is not None
                       else np.zeros_like(leaf.data))
                for name, leaf in leaves.items()}
    for name, leaf in leaves.items():
        numeric = numeric_grad(build_loss, leaf, h)
        err = rel_err(analytic[name], numeric)
        assert err < tol, f"gradient mismatch for {name}: rel err {err:.3e}"
