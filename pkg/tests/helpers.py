"""Finite-difference oracles shared by the test modules.

These recompute loss/network values through the plain forward path while
perturbing one parameter entry at a time; they never touch the adjoint code
they are checking.
"""

import numpy as np


def central_diff_params(build_scalar, arrays, h=1e-5):
    """Central finite differences of build_scalar() w.r.t. every array entry.

    build_scalar: () -> float, re-evaluating the computation from scratch.
    arrays: {slot: ndarray} mutated in place entry by entry.
    Returns {slot: gradient array}.
    """
    out = {}
    for slot, arr in arrays.items():
        flat = arr.reshape(-1)
        g = np.empty_like(flat)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            fp = build_scalar()
            flat[i] = orig - h
            fm = build_scalar()
            flat[i] = orig
            g[i] = (fp - fm) / (2.0 * h)
        out[slot] = g.reshape(arr.shape)
    return out


def rel_err(a, b, floor=1e-8):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    scale = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return np.max(np.abs(a - b) / scale)


def grad_check(build_node, arrays, h=1e-5, floor=1e-8, refine_above=5e-6):
    """Worst relative mismatch between tape gradients and central differences.

    Entries where the plain step-h difference disagrees beyond `refine_above`
    are re-measured with Richardson extrapolation (steps h and h/2): the
    plain oracle is truncation-limited near 1e-5 for stiff parameters and
    must outresolve the tolerance it checks.
    """
    from pwpinn import tape as tp

    node = build_node()
    grads = tp.backward(node.tape, node)
    value = lambda: float(build_node().value)
    fd = central_diff_params(value, arrays, h=h)
    worst = 0.0
    for slot, arr in arrays.items():
        g = np.asarray(grads[slot]).reshape(-1)
        f = fd[slot].reshape(-1)
        flat = arr.reshape(-1)
        for i in range(flat.size):
            r = rel_err(g[i], f[i], floor=floor)
            if r > refine_above:
                orig = flat[i]
                flat[i] = orig + h / 2
                fp = value()
                flat[i] = orig - h / 2
                fm = value()
                flat[i] = orig
                d_half = (fp - fm) / h
                refined = (4.0 * d_half - f[i]) / 3.0
                r = rel_err(g[i], refined, floor=floor)
            worst = max(worst, r)
    return worst


def fd_value_derivs(value_fn, x, h1=1e-5, h2=2e-3):
    """First and diagonal second input-derivatives of value_fn at x by FD.

    Central first difference at step h1. Second differences use steps h2 and
    h2/2 with Richardson extrapolation: plain second differences at tiny
    steps are rounding-dominated, at large steps truncation-dominated.
    """
    x = np.asarray(x, dtype=float)
    d = x.size
    d1 = np.empty(d)
    d2 = np.empty(d)
    f0 = value_fn(x)

    def second(h, e):
        return (value_fn(x + h * e) - 2 * f0 + value_fn(x - h * e)) / h**2

    for j in range(d):
        e = np.zeros(d)
        e[j] = 1.0
        d1[j] = (value_fn(x + h1 * e) - value_fn(x - h1 * e)) / (2 * h1)
        d2[j] = (4.0 * second(h2 / 2, e) - second(h2, e)) / 3.0
    return d1, d2
