"""Reverse-mode autodiff over numpy arrays on an explicit tape.

Nodes hold whole arrays (a batch of points is one node), so a loss evaluation
records a few hundred nodes regardless of batch size and the heavy lifting
stays inside numpy. Each node keeps a forward closure for replay and a
vector-Jacobian closure for the backward sweep. Creation order is topological
order, so the backward sweep is a single reverse pass that touches each node
exactly once.

Parameters enter a computation as leaf nodes bound to a slot name; `backward`
returns a gradient per slot, zero-filled for slots the root never touched.
"""

import numpy as np

from .errors import UsageError


class Node:
    __slots__ = ("tape", "index", "value", "parents", "vjp", "fwd", "slot")

    def __init__(self, tape, index, value, parents, vjp, fwd, slot=None):
        self.tape = tape
        self.index = index
        self.value = value
        self.parents = parents
        self.vjp = vjp
        self.fwd = fwd
        self.slot = slot

    def __repr__(self):
        shape = np.shape(self.value)
        tag = f" slot={self.slot}" if self.slot else ""
        return f"<Node #{self.index} shape={shape}{tag}>"


class Tape:
    """Single-writer record of one forward computation."""

    def __init__(self):
        self.nodes = []
        self._bindings = {}

    def _record(self, value, parents=(), vjp=None, fwd=None, slot=None):
        node = Node(self, len(self.nodes), value, parents, vjp, fwd, slot)
        self.nodes.append(node)
        return node

    def leaf(self, value, slot=None):
        """Record a differentiable leaf. `slot` names a trainable parameter."""
        return self._record(np.asarray(value, dtype=float), slot=slot)

    def bind(self, obj):
        """Memoized per-object node cache (parameter leaves, shared subgraphs)."""
        key = id(obj)
        cache = self._bindings.get(key)
        if cache is None:
            cache = {}
            self._bindings[key] = cache
        return cache

    def parameter_slots(self):
        return {n.slot: n for n in self.nodes if n.slot is not None}

    def replay(self, root):
        """Recompute every node up to `root` from the leaves; returns the value.

        Identical numpy call sequence, so the result is bit-for-bit equal to
        the recorded one.
        """
        if root.tape is not self:
            raise UsageError("root node does not belong to this tape")
        vals = [None] * (root.index + 1)
        for node in self.nodes[: root.index + 1]:
            if node.fwd is None:
                vals[node.index] = node.value
            else:
                vals[node.index] = node.fwd(*(vals[p.index] for p in node.parents))
        return vals[root.index]


def backward(tape, root):
    """Adjoints of a scalar `root` with respect to every parameter leaf.

    Returns {slot: gradient array}; slots never reached by the sweep get
    zeros. Accumulation is non-inplace so vjp outputs may alias upstream
    adjoints safely.
    """
    if not isinstance(root, Node) or root.tape is not tape:
        raise UsageError("backward root was not produced on this tape")
    if np.ndim(root.value) != 0:
        raise UsageError(f"backward root must be scalar, got shape {np.shape(root.value)}")

    adj = [None] * (root.index + 1)
    adj[root.index] = np.float64(1.0)
    for i in range(root.index, -1, -1):
        a = adj[i]
        if a is None:
            continue
        node = tape.nodes[i]
        if node.vjp is None:
            continue
        for parent, g in zip(node.parents, node.vjp(a)):
            j = parent.index
            if adj[j] is None:
                adj[j] = g
            else:
                adj[j] = adj[j] + g

    grads = {}
    for slot, node in tape.parameter_slots().items():
        g = adj[node.index] if node.index <= root.index else None
        if g is None:
            g = np.zeros_like(node.value)
        grads[slot] = np.asarray(g, dtype=float)
    return grads


def _tape_of(*nodes):
    tape = None
    for n in nodes:
        if isinstance(n, Node):
            if tape is None:
                tape = n.tape
            elif n.tape is not tape:
                raise UsageError("operands recorded on different tapes")
    if tape is None:
        raise UsageError("operation needs at least one Node operand")
    return tape


# ---------------------------------------------------------------------------
# primitive operations
# ---------------------------------------------------------------------------

def add(a, b):
    t = _tape_of(a, b)
    return t._record(a.value + b.value, (a, b),
                     vjp=lambda g: (g, g),
                     fwd=lambda va, vb: va + vb)


def addn(*terms):
    """Sum of any number of same-shape nodes (one node instead of a chain)."""
    t = _tape_of(*terms)
    val = terms[0].value
    for x in terms[1:]:
        val = val + x.value

    def fwd(*vs):
        out = vs[0]
        for v in vs[1:]:
            out = out + v
        return out

    return t._record(val, tuple(terms),
                     vjp=lambda g: (g,) * len(terms),
                     fwd=fwd)


def sub(a, b):
    t = _tape_of(a, b)
    return t._record(a.value - b.value, (a, b),
                     vjp=lambda g: (g, -g),
                     fwd=lambda va, vb: va - vb)


def neg(a):
    return a.tape._record(-a.value, (a,),
                          vjp=lambda g: (-g,),
                          fwd=lambda v: -v)


def mul(a, b):
    t = _tape_of(a, b)
    return t._record(a.value * b.value, (a, b),
                     vjp=lambda g: (g * b.value, g * a.value),
                     fwd=lambda va, vb: va * vb)


def square(a):
    return a.tape._record(a.value * a.value, (a,),
                          vjp=lambda g: (2.0 * a.value * g,),
                          fwd=lambda v: v * v)


def scale(a, c):
    c = float(c)
    return a.tape._record(a.value * c, (a,),
                          vjp=lambda g: (g * c,),
                          fwd=lambda v: v * c)


def add_const(a, c):
    return a.tape._record(a.value + c, (a,),
                          vjp=lambda g: (g,),
                          fwd=lambda v: v + c)


def sub_from_const(c, a):
    return a.tape._record(c - a.value, (a,),
                          vjp=lambda g: (-g,),
                          fwd=lambda v: c - v)


def tanh(a):
    out_val = np.tanh(a.value)
    return a.tape._record(out_val, (a,),
                          vjp=lambda g: (g * (1.0 - out_val * out_val),),
                          fwd=np.tanh)


def relu(a):
    """max(a, 0) with gradient 0 at a == 0 (subgradient convention)."""
    mask = a.value > 0.0
    return a.tape._record(np.where(mask, a.value, 0.0), (a,),
                          vjp=lambda g: (g * mask,),
                          fwd=lambda v: np.where(v > 0.0, v, 0.0))


def affine(h, w, b):
    """h @ w.T + b for h (N, M_in), w (M_out, M_in), b (M_out,).

    `h` may be a plain ndarray (network inputs) or a Node.
    """
    if isinstance(h, Node):
        t = _tape_of(h, w, b)
        val = h.value @ w.value.T + b.value
        return t._record(val, (h, w, b),
                         vjp=lambda g: (g @ w.value, g.T @ h.value, g.sum(axis=0)),
                         fwd=lambda vh, vw, vb: vh @ vw.T + vb)
    hc = np.asarray(h, dtype=float)
    t = _tape_of(w, b)
    return t._record(hc @ w.value.T + b.value, (w, b),
                     vjp=lambda g: (g.T @ hc, g.sum(axis=0)),
                     fwd=lambda vw, vb: hc @ vw.T + vb)


def linmap(h, w):
    """h @ w.T without bias (derivative tracks through an affine layer)."""
    if isinstance(h, Node):
        t = _tape_of(h, w)
        return t._record(h.value @ w.value.T, (h, w),
                         vjp=lambda g: (g @ w.value, g.T @ h.value),
                         fwd=lambda vh, vw: vh @ vw.T)
    hc = np.asarray(h, dtype=float)
    return w.tape._record(hc @ w.value.T, (w,),
                          vjp=lambda g: (g.T @ hc,),
                          fwd=lambda vw: hc @ vw.T)


def column(a, j):
    """Column j of an (N, K) node as an (N,) node."""

    def vjp(g):
        out = np.zeros_like(a.value)
        out[:, j] = g
        return (out,)

    return a.tape._record(a.value[:, j].copy(), (a,), vjp=vjp,
                          fwd=lambda v: v[:, j].copy())


def const_matmul(m, a):
    """m @ a for a constant matrix m (N, M) and node vector a (M,)."""
    mc = np.asarray(m, dtype=float)
    return a.tape._record(mc @ a.value, (a,),
                          vjp=lambda g: (mc.T @ g,),
                          fwd=lambda v: mc @ v)


def add_scalar(vec, s):
    """Broadcast-add a scalar node onto a vector node."""
    t = _tape_of(vec, s)
    return t._record(vec.value + s.value, (vec, s),
                     vjp=lambda g: (g, np.sum(g)),
                     fwd=lambda vv, vs: vv + vs)


def dot_const(a, c):
    """sum_i c_i * a_i -> scalar node, c constant."""
    cc = np.asarray(c, dtype=float)
    return a.tape._record(np.float64(cc @ a.value), (a,),
                          vjp=lambda g: (g * cc,),
                          fwd=lambda v: np.float64(cc @ v))


def total(a):
    return a.tape._record(np.float64(np.sum(a.value)), (a,),
                          vjp=lambda g: (np.full_like(a.value, g),),
                          fwd=lambda v: np.float64(np.sum(v)))


def mean(a):
    n = float(np.size(a.value))
    return a.tape._record(np.float64(np.sum(a.value) / n), (a,),
                          vjp=lambda g: (np.full_like(a.value, g / n),),
                          fwd=lambda v: np.float64(np.sum(v) / n))


def mean_sq_diff(a, target):
    """mean((a - target)^2) against a constant target array."""
    tc = np.asarray(target, dtype=float)
    n = float(np.size(a.value))
    diff = a.value - tc
    return a.tape._record(np.float64(np.sum(diff * diff) / n), (a,),
                          vjp=lambda g: ((2.0 * g / n) * (a.value - tc),),
                          fwd=lambda v: np.float64(np.sum((v - tc) * (v - tc)) / n))


def weighted_sum(nodes, weights):
    """sum_i weights_i * nodes_i for scalar nodes with constant weights."""
    ws = [float(w) for w in weights]
    t = _tape_of(*nodes)
    val = np.float64(sum(w * n.value for w, n in zip(ws, nodes)))

    def fwd(*vs):
        return np.float64(sum(w * v for w, v in zip(ws, vs)))

    return t._record(val, tuple(nodes),
                     vjp=lambda g: tuple(g * w for w in ws),
                     fwd=fwd)
