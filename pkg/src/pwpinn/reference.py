"""Crank-Nicolson reference solver and training-data samplers.

Solves u_t + u_x = lam(t) u_xx + s(x, t) on an interval with Dirichlet walls,
trapezoidal in time and centered in space, the coefficient frozen at its
segment value within each step. Time steps must align with the coefficient
breakpoints so no step straddles a jump. The sampler turns a solved grid into
spatial-slab training batches, each spanning the full time axis.
"""

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_banded

from .errors import ConfigurationError
from .pde import TrainingBatch


@dataclass
class GridSpec:
    x_lo: float = -1.0
    x_hi: float = 1.0
    nx: int = 401
    horizon: float = 1.0
    nt: int = 600
    lambda_segments: list = field(default_factory=lambda: [(0.0, 0.5)])

    def __post_init__(self):
        if self.nx < 3 or self.nt < 2:
            raise ConfigurationError("need nx >= 3 and nt >= 2")
        if self.x_hi <= self.x_lo or self.horizon <= 0:
            raise ConfigurationError("domain extents must be positive")
        segs = sorted((float(s), float(v)) for s, v in self.lambda_segments)
        if not segs or segs[0][0] != 0.0:
            raise ConfigurationError("lambda segments must start at t = 0")
        starts = [s for s, _ in segs]
        if len(set(starts)) != len(starts) or any(s >= self.horizon for s in starts[1:]):
            raise ConfigurationError("segment starts must be distinct and inside [0, T)")
        self.lambda_segments = segs

    def lambda_of(self, t):
        val = self.lambda_segments[0][1]
        for s, v in self.lambda_segments:
            if t >= s - 1e-12 * max(1.0, self.horizon):
                val = v
        return val

    @property
    def xs(self):
        return np.linspace(self.x_lo, self.x_hi, self.nx)

    @property
    def ts(self):
        return np.linspace(0.0, self.horizon, self.nt + 1)


@dataclass
class ReferenceSolution:
    u: np.ndarray          # (nt + 1, nx)
    xs: np.ndarray
    ts: np.ndarray
    spec: GridSpec

    def interp(self, x, t):
        """Bilinear interpolation of the grid solution at arbitrary points."""
        x = np.asarray(x, dtype=float)
        t = np.asarray(t, dtype=float)
        ix = np.clip(np.searchsorted(self.xs, x, side="right") - 1, 0, len(self.xs) - 2)
        it = np.clip(np.searchsorted(self.ts, t, side="right") - 1, 0, len(self.ts) - 2)
        hx = self.xs[ix + 1] - self.xs[ix]
        ht = self.ts[it + 1] - self.ts[it]
        ax = (x - self.xs[ix]) / hx
        at = (t - self.ts[it]) / ht
        u00 = self.u[it, ix]
        u01 = self.u[it, ix + 1]
        u10 = self.u[it + 1, ix]
        u11 = self.u[it + 1, ix + 1]
        return ((1 - at) * ((1 - ax) * u00 + ax * u01)
                + at * ((1 - ax) * u10 + ax * u11))

    def grid_points(self):
        tt, xx = np.meshgrid(self.ts, self.xs, indexing="ij")
        return np.column_stack([xx.ravel(), tt.ravel()])


def default_initial(x):
    """The jump-coefficient experiment initial profile -sin(pi x)."""
    return -np.sin(np.pi * x)


def solve_advection_diffusion(spec, initial=None, source=None):
    """Crank-Nicolson solve of u_t + u_x = lam(t) u_xx + source, u = 0 on walls.

    `initial` is a callable u0(x) (default -sin(pi x)); `source` a callable
    s(x, t) or None. Raises ConfigurationError for non-parabolic lambda or
    when a segment breakpoint does not land on the time grid.
    """
    if any(v <= 0 for _, v in spec.lambda_segments):
        raise ConfigurationError("lambda values must be positive (parabolic problem)")
    dt = spec.horizon / spec.nt
    for s, _ in spec.lambda_segments[1:]:
        steps = s / dt
        if abs(steps - round(steps)) > 1e-9 * spec.nt:
            raise ConfigurationError(
                f"segment boundary t={s} not representable with nt={spec.nt}")

    xs, ts = spec.xs, spec.ts
    h = xs[1] - xs[0]
    n_int = spec.nx - 2
    u = np.zeros((spec.nt + 1, spec.nx))
    init = default_initial if initial is None else initial
    u[0] = init(xs)
    u[0, 0] = 0.0
    u[0, -1] = 0.0

    for n in range(spec.nt):
        lam = spec.lambda_of(ts[n])   # frozen over [t_n, t_{n+1}]
        lower = -1.0 / (2 * h) - lam / h**2
        diag = 2.0 * lam / h**2
        upper = 1.0 / (2 * h) - lam / h**2

        ab = np.zeros((3, n_int))
        ab[0, 1:] = (dt / 2) * upper
        ab[1, :] = 1.0 + (dt / 2) * diag
        ab[2, :-1] = (dt / 2) * lower

        rhs = u[n, 1:-1] * (1.0 - (dt / 2) * diag)
        rhs[:-1] -= (dt / 2) * upper * u[n, 2:-1]
        rhs[1:] -= (dt / 2) * lower * u[n, 1:-2]
        if source is not None:
            rhs += (dt / 2) * (source(xs[1:-1], ts[n]) + source(xs[1:-1], ts[n + 1]))
        u[n + 1, 1:-1] = solve_banded((1, 1), ab, rhs)
    return ReferenceSolution(u=u, xs=xs, ts=ts, spec=spec)


def sample_training_data(sol, n_interior, n_boundary, n_initial, n_batches, seed):
    """Spatial-slab batches from a solved grid; deterministic in `seed`.

    The x axis is split into `n_batches` contiguous slabs. Each batch gets
    `n_interior` interior points uniform in its slab across all of (0, T]
    (values bilinearly interpolated), `n_boundary` wall points split between
    the two walls, and `n_initial` points on the t = 0 line inside the slab.
    """
    if min(n_interior, n_boundary, n_initial) < 1 or n_batches < 1:
        raise ConfigurationError("all point counts and n_batches must be >= 1")
    spec = sol.spec
    edges = np.linspace(spec.x_lo, spec.x_hi, n_batches + 1)
    hx = sol.xs[1] - sol.xs[0]
    if (edges[1] - edges[0]) < 2 * hx:
        raise ConfigurationError("slab too narrow to contain grid columns")
    rng = np.random.default_rng(seed)
    t_tiny = spec.horizon * 1e-12

    batches = []
    for k in range(n_batches):
        lo, hi = float(edges[k]), float(edges[k + 1])
        xi = rng.uniform(lo, hi, size=n_interior)
        ti = rng.uniform(t_tiny, spec.horizon, size=n_interior)
        ui = sol.interp(xi, ti)

        nb_lo = n_boundary - n_boundary // 2
        tb = rng.uniform(t_tiny, spec.horizon, size=n_boundary)
        xb = np.concatenate([np.full(nb_lo, spec.x_lo),
                             np.full(n_boundary // 2, spec.x_hi)])
        ub = sol.interp(xb, tb)

        x0 = rng.uniform(lo, hi, size=n_initial)
        u0 = sol.interp(x0, np.zeros(n_initial))

        batches.append(TrainingBatch(
            interior_x=np.column_stack([xi, ti]), interior_u=ui,
            boundary_x=np.column_stack([xb, tb]), boundary_u=ub,
            initial_x=np.column_stack([x0, np.zeros(n_initial)]), initial_u=u0,
            index=k + 1, slab=(lo, hi)))
    return batches


# ---------------------------------------------------------------------------
# CSV interfaces
# ---------------------------------------------------------------------------

def save_solution_csv(sol, path):
    """Full grid dump with header t,x,u, one row per grid point."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "x", "u"])
        for i, t in enumerate(sol.ts):
            for j, x in enumerate(sol.xs):
                w.writerow([repr(float(t)), repr(float(x)), repr(float(sol.u[i, j]))])


def load_solution_csv(path, spec=None):
    """Rebuild a ReferenceSolution from a t,x,u grid dump."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ["t", "x", "u"]:
        raise ConfigurationError(f"{path}: expected header t,x,u")
    data = np.array([[float(a), float(b), float(c)] for a, b, c in rows[1:]])
    ts = np.unique(data[:, 0])
    xs = np.unique(data[:, 1])
    if len(ts) * len(xs) != len(data):
        raise ConfigurationError(f"{path}: rows do not form a complete t-x grid")
    order = np.lexsort((data[:, 1], data[:, 0]))
    u = data[order, 2].reshape(len(ts), len(xs))
    if spec is None:
        spec = GridSpec(x_lo=float(xs[0]), x_hi=float(xs[-1]), nx=len(xs),
                        horizon=float(ts[-1]), nt=len(ts) - 1,
                        lambda_segments=[(0.0, 1.0)])
    return ReferenceSolution(u=u, xs=xs, ts=ts, spec=spec)


def load_ns_data_csv(path):
    """External flow data with header t,x,y,u,v,p; returns (points, targets).

    Points are (x, y, t) rows matching the NS residual input layout; targets
    are (u, v, p) rows.
    """
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ["t", "x", "y", "u", "v", "p"]:
        raise ConfigurationError(f"{path}: expected header t,x,y,u,v,p")
    data = np.array([[float(v) for v in row] for row in rows[1:]])
    points = data[:, [1, 2, 0]]
    targets = data[:, 3:6]
    return points, targets
