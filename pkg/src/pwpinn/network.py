"""Feed-forward tanh approximator with analytic input-derivative propagation.

The same affine+tanh sweep that produces the network value also carries, per
input coordinate, the first and (diagonal) second derivatives of every hidden
activation with respect to that coordinate. Chain rule per layer, with
sigma' = 1 - tanh^2 and sigma'' = -2 tanh (1 - tanh^2):

    z   = W h + b          z'  = W h'           z''  = W h''
    h+  = tanh(z)          h+' = sigma'(z) z'   h+'' = sigma'(z) z'' + sigma''(z) z'^2

Every intermediate is recorded on the tape, so u, u_x, u_xx, ... are all
parameter-differentiable scalars and can enter losses directly. Inputs are
affinely normalized into [-1, 1]^d before layer 0; the returned derivatives
are chain-ruled back to physical units via the stored per-coordinate scales.
"""

from dataclasses import dataclass, field

import numpy as np

from . import tape as tp
from .errors import ConfigurationError, UnsupportedOrderError


@dataclass
class NetworkParams:
    """Per-layer weights/biases plus the fixed input featurization.

    weights[i] has shape (M_i, M_{i-1}); biases[i] has shape (M_i,).
    Normalized input = (x - in_shift) * in_scale, per coordinate. With
    `fourier_k` > 0 the normalized coordinates are lifted to
    [x_j, sin(pi m x_j), cos(pi m x_j), m = 1..K] before layer 0; each
    feature depends on a single coordinate, so diagonal second derivatives
    stay diagonal through the lift.
    """

    weights: list
    biases: list
    in_shift: np.ndarray
    in_scale: np.ndarray
    fourier_k: object = 0      # int, or one count per coordinate

    @property
    def widths(self):
        return [self.in_dim] + [w.shape[0] for w in self.weights]

    @property
    def in_dim(self):
        return self.in_shift.shape[0]

    def k_per_coord(self):
        if np.ndim(self.fourier_k) == 0:
            return [int(self.fourier_k)] * self.in_dim
        ks = [int(k) for k in self.fourier_k]
        if len(ks) != self.in_dim:
            raise ConfigurationError("need one fourier count per coordinate")
        return ks

    @property
    def feature_dim(self):
        return sum(1 + 2 * k for k in self.k_per_coord())

    @property
    def out_dim(self):
        return self.weights[-1].shape[0]

    def copy(self):
        k = self.fourier_k if np.ndim(self.fourier_k) == 0 else list(self.fourier_k)
        return NetworkParams([w.copy() for w in self.weights],
                             [b.copy() for b in self.biases],
                             self.in_shift.copy(), self.in_scale.copy(), k)

    def slots(self):
        out = {}
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            out[f"W{i}"] = w
            out[f"B{i}"] = b
        return out

    def check(self):
        if self.weights[0].shape[1] != self.feature_dim:
            raise ConfigurationError(
                f"layer 0 expects {self.weights[0].shape[1]} inputs, "
                f"featurization produces {self.feature_dim}")
        for i in range(1, len(self.weights)):
            if self.weights[i].shape[1] != self.weights[i - 1].shape[0]:
                raise ConfigurationError(f"layer {i} width mismatch")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if b.shape != (w.shape[0],):
                raise ConfigurationError(f"layer {i} bias shape {b.shape} mismatch")
        if self.in_scale.shape != (self.in_dim,):
            raise ConfigurationError("normalization map does not match input dimension")

    def featurize(self, xn):
        """Features and their first/second x_j-derivatives (normalized units).

        Returns (phi, dphi, d2phi): phi is (N, F); dphi[j], d2phi[j] are
        (N, F) arrays that are nonzero only in the block fed by coordinate j.
        """
        n, d = xn.shape
        ks = self.k_per_coord()
        phi = np.zeros((n, self.feature_dim))
        dphi = [np.zeros((n, self.feature_dim)) for _ in range(d)]
        d2phi = [np.zeros((n, self.feature_dim)) for _ in range(d)]
        base = 0
        for j in range(d):
            phi[:, base] = xn[:, j]
            dphi[j][:, base] = 1.0
            for m in range(1, ks[j] + 1):
                wm = np.pi * m
                s, c = np.sin(wm * xn[:, j]), np.cos(wm * xn[:, j])
                phi[:, base + 2 * m - 1] = s
                phi[:, base + 2 * m] = c
                dphi[j][:, base + 2 * m - 1] = wm * c
                dphi[j][:, base + 2 * m] = -wm * s
                d2phi[j][:, base + 2 * m - 1] = -wm * wm * s
                d2phi[j][:, base + 2 * m] = -wm * wm * c
            base += 1 + 2 * ks[j]
        return phi, dphi, d2phi


def identity_box(dim):
    """Normalization that leaves inputs untouched."""
    return np.zeros(dim), np.ones(dim)


def box_normalization(lo, hi):
    """Affine map sending the physical box [lo, hi]^d onto [-1, 1]^d."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if np.any(hi <= lo):
        raise ConfigurationError("domain box must have positive extent")
    return (lo + hi) / 2.0, 2.0 / (hi - lo)


def init_params(widths, seed=0, box=None, fourier_k=0):
    """Xavier-uniform initialization; `box` is (lo, hi) arrays or None for identity.

    widths[0] is the coordinate dimension; `fourier_k` (an int, or one count
    per coordinate) sizes the first weight matrix for the lifted features.
    """
    if len(widths) < 2:
        raise ConfigurationError("need at least input and output widths")
    rng = np.random.default_rng(seed)
    d = widths[0]
    ks = [int(fourier_k)] * d if np.ndim(fourier_k) == 0 else [int(k) for k in fourier_k]
    if len(ks) != d:
        raise ConfigurationError("need one fourier count per coordinate")
    feature_dim = sum(1 + 2 * k for k in ks)
    layer_widths = [feature_dim] + list(widths[1:])
    weights, biases = [], []
    for m_in, m_out in zip(layer_widths[:-1], layer_widths[1:]):
        bound = np.sqrt(6.0 / (m_in + m_out))
        weights.append(rng.uniform(-bound, bound, size=(m_out, m_in)))
        biases.append(np.zeros(m_out))
    if box is None:
        shift, scl = identity_box(d)
    else:
        shift, scl = box_normalization(*box)
    return NetworkParams(weights, biases, shift, scl, fourier_k=fourier_k)


def linear_params(coeffs, bias, box=None):
    """A no-hidden-layer network u = coeffs . x + bias (in physical units)."""
    coeffs = np.asarray(coeffs, dtype=float)
    d = coeffs.size
    if box is None:
        shift, scl = identity_box(d)
    else:
        shift, scl = box_normalization(*box)
    # undo the normalization inside the weights so physical slopes equal coeffs
    w = (coeffs / scl).reshape(1, d)
    b = np.array([bias + float(np.dot(coeffs, shift))])
    return NetworkParams([w], [b], shift, scl)


@dataclass
class ExtendedEval:
    """Network value with requested input-derivatives, all as tape nodes.

    d_in[j] is du/dx_j; d2_in[j] is d2u/dx_j^2 (None where not requested).
    For multi-output networks the nodes hold (n_out,) vectors; batched
    evaluation (see `forward_extended_batch`) holds (N,) or (N, n_out).
    """

    value: object
    d_in: list = field(default_factory=list)
    d2_in: list = field(default_factory=list)


def bind_params(t, params):
    """Parameter leaves for `params` on tape `t`, memoized per (tape, object)."""
    cache = t.bind(params)
    if "leaves" not in cache:
        cache["leaves"] = {slot: t.leaf(arr, slot=slot) for slot, arr in params.slots().items()}
    return cache["leaves"]


def forward_extended_batch(params, points, order=2, second_coords=None, t=None):
    """Evaluate the network and its input-derivatives on an (N, d) point batch.

    order 0: value only; 1: + first derivatives; 2: + diagonal second
    derivatives for the coordinates in `second_coords` (default: all).
    Returns an ExtendedEval whose nodes have shape (N,) (single output) or
    (N, n_out).
    """
    params.check()
    points = np.atleast_2d(np.asarray(points, dtype=float))
    d = params.in_dim
    if points.shape[1] != d:
        raise ConfigurationError(f"points have dimension {points.shape[1]}, network expects {d}")
    if order > 2:
        raise UnsupportedOrderError(f"derivative order {order} not supported (max 2)")
    if order < 0:
        raise UnsupportedOrderError("derivative order must be nonnegative")
    if second_coords is None:
        second_coords = tuple(range(d)) if order >= 2 else ()
    if order < 2:
        second_coords = ()

    if t is None:
        t = tp.Tape()
    leaves = bind_params(t, params)
    n = points.shape[0]
    n_layers = len(params.weights)

    xn = (points - params.in_shift) * params.in_scale  # constant (N, d)
    if np.any(np.asarray(params.fourier_k) > 0):
        h, hd, hdd = params.featurize(xn)
        hdd = [hdd[j] if j in second_coords else None for j in range(d)]
    else:
        h = xn
        hd = [np.tile(np.eye(d)[j], (n, 1)) for j in range(d)]
        hdd = [None] * d         # affine in the raw coordinates

    want_first = order >= 1
    if not want_first:
        hd = [None] * d
        hdd = [None] * d

    for i in range(n_layers):
        w = leaves[f"W{i}"]
        b = leaves[f"B{i}"]
        z = tp.affine(h, w, b)
        zd, zdd = [None] * d, [None] * d
        if want_first:
            for j in range(d):
                if hd[j] is not None:
                    zd[j] = tp.linmap(hd[j], w)
                if hdd[j] is not None:
                    zdd[j] = tp.linmap(hdd[j], w)

        if i == n_layers - 1:    # linear output layer
            h, hd, hdd = z, zd, zdd
            break

        th = tp.tanh(z)
        sq = tp.square(th)
        s1 = tp.sub_from_const(1.0, sq)          # sigma'
        s2 = None
        new_hd, new_hdd = [None] * d, [None] * d
        for j in range(d):
            if zd[j] is not None:
                new_hd[j] = tp.mul(s1, zd[j])
            if j in second_coords and zd[j] is not None:
                if s2 is None:
                    s2 = tp.scale(tp.mul(th, s1), -2.0)   # sigma''
                curv = tp.mul(s2, tp.square(zd[j]))
                if zdd[j] is None:
                    new_hdd[j] = curv
                else:
                    new_hdd[j] = tp.add(tp.mul(s1, zdd[j]), curv)
        h, hd, hdd = th, new_hd, new_hdd

    def to_physical(node, j, power):
        if node is None:
            return None
        return tp.scale(node, params.in_scale[j] ** power)

    value = h
    d_in = [to_physical(hd[j], j, 1) for j in range(d)]
    d2_in = []
    for j in range(d):
        if j in second_coords:
            node = hdd[j]
            if node is None:  # identically zero second derivative (no hidden layer)
                node = tp.scale(value, 0.0)
            d2_in.append(to_physical(node, j, 2))
        else:
            d2_in.append(None)

    if params.out_dim == 1:
        squeeze = lambda nd: None if nd is None else tp.column(nd, 0)
        value = squeeze(value)
        d_in = [squeeze(x) for x in d_in]
        d2_in = [squeeze(x) for x in d2_in]
    return ExtendedEval(value=value, d_in=d_in, d2_in=d2_in)


def forward_extended(params, point, order=2, second_coords=None, t=None):
    """Single-point evaluation; nodes are scalars (or (n_out,) vectors)."""
    point = np.asarray(point, dtype=float).reshape(1, -1)
    ev = forward_extended_batch(params, point, order=order,
                                second_coords=second_coords, t=t)

    if params.out_dim == 1:
        scalar = lambda nd: None if nd is None else tp.total(nd)   # (1,) -> scalar
        return ExtendedEval(value=scalar(ev.value),
                            d_in=[scalar(x) for x in ev.d_in],
                            d2_in=[scalar(x) for x in ev.d2_in])
    row = lambda nd: None if nd is None else _row0(nd)             # (1, k) -> (k,)
    return ExtendedEval(value=row(ev.value),
                        d_in=[row(x) for x in ev.d_in],
                        d2_in=[row(x) for x in ev.d2_in])


def _row0(a):
    return a.tape._record(a.value[0].copy(), (a,),
                          vjp=lambda g: (g[None, :].copy(),),
                          fwd=lambda v: v[0].copy())


def eval_values(params, points, chunk=20000):
    """Plain forward values as an ndarray (no tape); chunked for large grids."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    outs = []
    for lo in range(0, points.shape[0], chunk):
        xn = (points[lo:lo + chunk] - params.in_shift) * params.in_scale
        if np.any(np.asarray(params.fourier_k) > 0):
            h = params.featurize(xn)[0]
        else:
            h = xn
        for i, (w, b) in enumerate(zip(params.weights, params.biases)):
            h = h @ w.T + b
            if i < len(params.weights) - 1:
                h = np.tanh(h)
        outs.append(h)
    out = np.vstack(outs)
    return out[:, 0] if params.out_dim == 1 else out
