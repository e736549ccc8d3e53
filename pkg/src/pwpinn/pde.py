"""PDE residual specifications and the fitting / structure losses.

Two residual variants are supported:

  advection_diffusion_1d : f = u_t + u_x - lam(t) u_xx, inputs (x, t)
  navier_stokes_2d       : f_u = u_t + u u_x + v u_y + p_x - lam(t)(u_xx + u_yy)
                           f_v = v_t + u v_x + v v_y + p_y - lam(t)(v_xx + v_yy)
                           inputs (x, y, t), outputs (u, v, p)

The fitting loss averages squared misfits on boundary and initial points; the
structure loss averages the squared residual over interior collocation
points. An optional interior data misfit extends the fitting loss for online
training, where the weight update is driven by the batch data itself.
"""

from dataclasses import dataclass, field

import numpy as np

from . import network as net
from . import tape as tp
from . import track as tr
from .errors import ConfigurationError, DomainError, UsageError

AD1D = "advection_diffusion_1d"
NS2D = "navier_stokes_2d"


@dataclass
class PdeResidualSpec:
    variant: str = AD1D

    def __post_init__(self):
        if self.variant not in (AD1D, NS2D):
            raise ConfigurationError(f"unknown residual variant {self.variant!r}")

    @property
    def in_dim(self):
        return 2 if self.variant == AD1D else 3

    @property
    def out_dim(self):
        return 1 if self.variant == AD1D else 3

    @property
    def time_coord(self):
        """Index of the time coordinate in the input layout."""
        return 1 if self.variant == AD1D else 2

    @property
    def second_coords(self):
        """Coordinates whose diagonal second derivatives the residual needs."""
        return (0,) if self.variant == AD1D else (0, 1)


@dataclass
class TrainingBatch:
    """Spatial-slab batch carrying the full time extent of its points.

    interior_x: (N, d) coordinates with observed values interior_u (N,) or
    (N, n_out); boundary / initial likewise. `index` is the batch number,
    `slab` the (x_lo, x_hi) interval the interior points live in.
    """

    interior_x: np.ndarray
    interior_u: np.ndarray
    boundary_x: np.ndarray
    boundary_u: np.ndarray
    initial_x: np.ndarray
    initial_u: np.ndarray
    index: int = 0
    slab: tuple = (0.0, 1.0)

    @property
    def n_interior(self):
        return len(self.interior_x)

    def restrict_time(self, t_lo, t_hi, time_coord=1, closed_right=False):
        """Sub-batch with points whose time lies in [t_lo, t_hi) (or closed)."""

        def cut(x, u):
            if len(x) == 0:
                return x, u
            t = x[:, time_coord]
            m = (t >= t_lo) & ((t <= t_hi) if closed_right else (t < t_hi))
            return x[m], u[m]

        ix, iu = cut(self.interior_x, self.interior_u)
        bx, bu = cut(self.boundary_x, self.boundary_u)
        if t_lo <= 0.0:
            nx, nu = self.initial_x, self.initial_u
        else:
            nx, nu = self.initial_x[:0], self.initial_u[:0]
        return TrainingBatch(ix, iu, bx, bu, nx, nu, self.index, self.slab)


def _check_domain(params, points):
    lo = params.in_shift - 1.0 / params.in_scale
    hi = params.in_shift + 1.0 / params.in_scale
    pts = np.atleast_2d(points)
    slack = 1e-9 * np.maximum(1.0, np.abs(hi - lo))
    if np.any(pts < lo - slack) or np.any(pts > hi + slack):
        raise DomainError("point outside the model domain box")


def residual_from_eval(ev, lam, spec):
    """Residual node(s) from an already-evaluated network and lambda node."""
    if spec.variant == AD1D:
        # f = u_t + u_x - lam * u_xx
        lam_uxx = tp.mul(lam, ev.d2_in[0])
        return tp.sub(tp.add(ev.d_in[spec.time_coord], ev.d_in[0]), lam_uxx)

    u = tp.column(ev.value, 0)
    v = tp.column(ev.value, 1)
    ux, vx, px = (tp.column(ev.d_in[0], k) for k in range(3))
    uy, vy, py = (tp.column(ev.d_in[1], k) for k in range(3))
    ut, vt = tp.column(ev.d_in[2], 0), tp.column(ev.d_in[2], 1)
    uxx, vxx = tp.column(ev.d2_in[0], 0), tp.column(ev.d2_in[0], 1)
    uyy, vyy = tp.column(ev.d2_in[1], 0), tp.column(ev.d2_in[1], 1)

    f_u = tp.sub(tp.addn(ut, tp.mul(u, ux), tp.mul(v, uy), px),
                 tp.mul(lam, tp.add(uxx, uyy)))
    f_v = tp.sub(tp.addn(vt, tp.mul(u, vx), tp.mul(v, vy), py),
                 tp.mul(lam, tp.add(vxx, vyy)))
    return [f_u, f_v]


def residual_batch(params, track, spec, points, tape=None):
    """Residual node(s) over an (N, d) batch: one (N,) node for AD-1D, a list
    [f_u, f_v] for NS-2D. Differentiable through the network and the track."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[1] != spec.in_dim:
        raise ConfigurationError(f"{spec.variant} expects {spec.in_dim}-d points")
    if params.out_dim != spec.out_dim:
        raise ConfigurationError(f"{spec.variant} needs a {spec.out_dim}-output network")
    _check_domain(params, points)
    t = tape if tape is not None else tp.Tape()
    lam = tr.lambda_at(track, points[:, spec.time_coord], tape=t)
    ev = net.forward_extended_batch(params, points, order=2,
                                    second_coords=spec.second_coords, t=t)
    return residual_from_eval(ev, lam, spec)


def residual_f(params, track, spec, point, tape=None):
    """Single-point residual as scalar node(s); see `residual_batch`."""
    point = np.asarray(point, dtype=float).reshape(1, -1)
    res = residual_batch(params, track, spec, point, tape=tape)
    if isinstance(res, list):
        return [tp.total(r) for r in res]
    return tp.total(res)


def _misfit_terms(params, xs, targets, t):
    pred = net.forward_extended_batch(params, xs, order=0, t=t).value
    targets = np.asarray(targets, dtype=float)
    if pred.value.ndim == 1:
        return tp.mean_sq_diff(pred, targets.reshape(-1))
    # multi-output: mean over points of the summed squared component misfits
    sq = tp.mean_sq_diff(pred, targets.reshape(pred.value.shape))
    return tp.scale(sq, pred.value.shape[1])  # per-entry mean -> per-point sum


def loss_fitting(params, batch, tape=None, include_interior=False):
    """Mean squared boundary misfit + mean squared initial misfit.

    With `include_interior`, the mean squared misfit on observed interior
    points is added (the reading used during online training).
    """
    has_b = len(batch.boundary_x) > 0
    has_0 = len(batch.initial_x) > 0
    has_i = include_interior and batch.n_interior > 0
    if not (has_b or has_0 or has_i):
        raise UsageError("fitting loss needs boundary, initial, or interior points")
    t = tape if tape is not None else tp.Tape()
    terms = []
    if has_b:
        terms.append(_misfit_terms(params, batch.boundary_x, batch.boundary_u, t))
    if has_0:
        terms.append(_misfit_terms(params, batch.initial_x, batch.initial_u, t))
    if has_i:
        terms.append(_misfit_terms(params, batch.interior_x, batch.interior_u, t))
    return terms[0] if len(terms) == 1 else tp.addn(*terms)


def loss_structure(params, track, spec, batch, tape=None):
    """Mean squared PDE residual over the batch interior points."""
    if batch.n_interior == 0:
        raise UsageError("structure loss needs at least one interior point")
    t = tape if tape is not None else tp.Tape()
    res = residual_batch(params, track, spec, batch.interior_x, tape=t)
    if isinstance(res, list):
        return tp.addn(*[tp.mean(tp.square(r)) for r in res])
    return tp.mean(tp.square(res))
