"""Joint training of the network and the coefficient track with online
re-weighting, plus per-segment refitting and evaluation.

One sweep over the spatial batches per epoch: batch k is first used to
optimize the weighted loss under the previous weights, then its freshly
evaluated fitting/structure losses -- together with the pre-update TV value,
which lags one batch -- drive the closed-form weight update. The TV channel
entering the weighted objective is rescaled (config `tv_scale`) so the three
channels stay commensurable; the raw edge-weighted TV sum is what
`track.tv_value()` reports.
"""

import json
import time
import warnings
from dataclasses import dataclass, field, asdict

import numpy as np

from . import network as net
from . import pde
from . import simplex as sx
from . import tape as tp
from . import track as tr
from .errors import ConfigurationError, DivergenceError, UsageError
from .reference import GridSpec, sample_training_data, solve_advection_diffusion

ETA_TESTED_RANGE = (1e-6, 1e-3)

# Scale of the TV channel inside the weighted objective. Calibrated so the
# coefficient track, not the network, absorbs the temporal structure: the
# per-jump TV toll must sit below the network's cost of bending around the
# data (~1e-4 at these widths); the raw TV sum at near-equal weights prices
# the track out entirely and the estimate collapses to a constant. An
# optional upward continuation across epochs is available (tv_scale_final).
DEFAULT_TV_SCALE = 2e-4
DEFAULT_TV_SCALE_FINAL = None   # no continuation by default


@dataclass
class OptimizerSettings:
    steps: int = 150              # adam steps per batch visit
    step_size: float = 1e-3
    decay_every: int = 10 ** 9    # adam restarts each visit; no decay within
    decay_factor: float = 0.5
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    revive_every: int = 75
    revive_value: float = 1e-8
    track_lr_scale: float = 0.3   # coefficient track moves slower than the net
    pretrain_steps: int = 2500    # data-only warmup before the online loop
    pretrain_lbfgs_iters: int = 1200   # quasi-Newton polish of the warmup fit
    lbfgs_iters: int = 100        # quasi-Newton polish after the adam steps


@dataclass
class TrainConfig:
    problem: str = pde.AD1D
    grid: GridSpec = field(default_factory=GridSpec)
    data_path: str = None
    hidden_layers: int = 4
    hidden_width: int = 20
    fourier_k: object = (8, 8)        # sinusoidal lift per coordinate
    n_knots: int = 33
    lambda0_init: float = 0.3
    tv_scale: float = None            # None -> DEFAULT_TV_SCALE
    tv_scale_final: float = None      # None -> DEFAULT_TV_SCALE_FINAL; the
                                      # channel scale anneals geometrically
                                      # from tv_scale to this across epochs
    ushape_delta: bool = False
    eta: float = 1e-4
    w0: tuple = (1 / 3, 1 / 3, 1 / 3)
    n_batches: int = 3
    epochs: int = 12
    n_interior: int = 2000
    n_boundary: int = 150
    n_initial: int = 150
    optimizer: OptimizerSettings = field(default_factory=OptimizerSettings)
    refit_steps: int = 200
    refit_lbfgs_iters: int = 1500
    extraction_threshold: float = None   # None -> 5% of track range (floored)
    dead_band: float = None
    refit: bool = True
    include_interior_misfit: bool = True
    fixed_weights: tuple = None          # disables online updates (baseline mode)
    seed: int = 0

    def __post_init__(self):
        lo, hi = ETA_TESTED_RANGE
        if not (lo <= self.eta <= hi):
            warnings.warn(
                f"learning rate outside tested range [{lo:g},{hi:g}]: eta={self.eta:g}",
                stacklevel=2)
        w0 = np.asarray(self.w0, dtype=float)
        if w0.shape != (3,) or np.any(w0 < 0) or abs(w0.sum() - 1.0) > 1e-9:
            raise ConfigurationError(f"w0 must be 3 nonnegative weights summing to 1, got {self.w0}")
        if self.n_batches < 1 or self.epochs < 1:
            raise ConfigurationError("need n_batches >= 1 and epochs >= 1")

    @property
    def tv_channel_scale(self):
        if self.tv_scale is not None:
            return float(self.tv_scale)
        return DEFAULT_TV_SCALE

    def tv_scale_at(self, epoch):
        """Optional geometric continuation of the TV channel scale."""
        s0 = self.tv_channel_scale
        s1 = (self.tv_scale_final if self.tv_scale_final is not None
              else DEFAULT_TV_SCALE_FINAL)
        if s1 is None or self.epochs <= 1 or s1 <= 0 or s0 <= 0:
            return s0
        frac = epoch / (self.epochs - 1)
        return float(s0 * (float(s1) / s0) ** frac)

    def network_widths(self):
        spec = pde.PdeResidualSpec(self.problem)
        return [spec.in_dim] + [self.hidden_width] * self.hidden_layers + [spec.out_dim]


@dataclass
class SegmentFit:
    t_lo: float
    t_hi: float
    lam_hat: float          # None when the segment had no data
    n_interior: int
    params: object = None


@dataclass
class RunReport:
    config: dict
    knot_times: list
    lambda_values: list
    changepoints: list
    threshold: float
    segments: list
    weight_history: list
    gamma_history: list
    loss_history: list
    regret: float = None
    regret_bound: float = None
    regret_star: float = None
    regret_bound_star: float = None
    G: float = None
    B: int = 0
    solution_mse: float = None
    solution_mse_refit: float = None
    wall_clock_seconds: float = 0.0

    def to_json(self, **kw):
        return json.dumps(asdict(self), indent=2, **kw)


# ---------------------------------------------------------------------------
# inner optimizer
# ---------------------------------------------------------------------------

class Adam:
    """Adaptive-moment updates applied in place to a dict of slot arrays."""

    def __init__(self, arrays, settings, lr_scale=None):
        self.arrays = arrays
        self.s = settings
        self.lr_scale = lr_scale or {}
        self.m = {k: np.zeros_like(v) for k, v in arrays.items()}
        self.v = {k: np.zeros_like(v) for k, v in arrays.items()}
        self.t = 0

    def lr(self):
        if self.s.decay_every <= 0:
            return self.s.step_size
        return self.s.step_size * self.s.decay_factor ** (self.t // self.s.decay_every)

    def step(self, grads):
        self.t += 1
        lr = self.lr()
        b1, b2, eps = self.s.beta1, self.s.beta2, self.s.eps
        c1 = 1.0 - b1 ** self.t
        c2 = 1.0 - b2 ** self.t
        for k, arr in self.arrays.items():
            g = grads[k]
            self.m[k] = b1 * self.m[k] + (1 - b1) * g
            self.v[k] = b2 * self.v[k] + (1 - b2) * g * g
            step_k = lr * self.lr_scale.get(k, 1.0)
            arr[...] -= step_k * (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + eps)

    def reset_entries(self, slot, mask):
        self.m[slot][mask] = 0.0
        self.v[slot][mask] = 0.0


def _pack(arrays, order):
    return np.concatenate([np.asarray(arrays[k], dtype=float).ravel() for k in order])


def _unpack(x, arrays, order):
    pos = 0
    for k in order:
        arr = arrays[k]
        n = arr.size
        arr[...] = x[pos:pos + n].reshape(arr.shape)
        pos += n


def lbfgs_minimize(build_loss, arrays, maxiter):
    """Full-batch quasi-Newton polish; `build_loss` returns a fresh root node.

    Parameters are updated in place. Returns the final loss value. Adam
    handles the rough early landscape; this handles the ill-conditioned tail
    where first-order steps stall.
    """
    from scipy.optimize import minimize

    order = sorted(arrays)
    x0 = _pack(arrays, order)
    state = {"best": None, "best_x": x0.copy()}

    def fun(x):
        _unpack(x, arrays, order)
        node = build_loss()
        val = float(node.value)
        grads = tp.backward(node.tape, node)
        g = np.concatenate([grads[k].ravel() for k in order])
        if not (np.isfinite(val) and np.all(np.isfinite(g))):
            return 1e30, np.zeros_like(g)
        if state["best"] is None or val < state["best"]:
            state["best"] = val
            state["best_x"] = x.copy()
        return val, g

    res = minimize(fun, x0, jac=True, method="L-BFGS-B",
                   options={"maxiter": maxiter, "maxcor": 50,
                            "ftol": 1e-18, "gtol": 1e-14})
    # keep the best point seen rather than the last line-search iterate
    _unpack(state["best_x"], arrays, order)
    return state["best"] if state["best"] is not None else float(res.fun)


def _combined_losses(params, track, spec, batch, tape, include_interior):
    """(L_f, L_s, V_raw) nodes sharing one interior forward pass."""
    ev = net.forward_extended_batch(params, batch.interior_x, order=2,
                                    second_coords=spec.second_coords, t=tape)
    lam = tr.lambda_at(track, batch.interior_x[:, spec.time_coord], tape=tape)
    res = pde.residual_from_eval(ev, lam, spec)
    if isinstance(res, list):
        ls = tp.addn(*[tp.mean(tp.square(r)) for r in res])
    else:
        ls = tp.mean(tp.square(res))

    terms = []
    if len(batch.boundary_x):
        terms.append(pde._misfit_terms(params, batch.boundary_x, batch.boundary_u, tape))
    if len(batch.initial_x):
        terms.append(pde._misfit_terms(params, batch.initial_x, batch.initial_u, tape))
    if include_interior:
        if ev.value.value.ndim == 1:
            terms.append(tp.mean_sq_diff(ev.value, np.asarray(batch.interior_u).reshape(-1)))
        else:
            sq = tp.mean_sq_diff(ev.value, np.asarray(batch.interior_u).reshape(ev.value.value.shape))
            terms.append(tp.scale(sq, ev.value.value.shape[1]))
    if not terms:
        raise UsageError("no data points available for the fitting loss")
    lf = terms[0] if len(terms) == 1 else tp.addn(*terms)
    v = tr.tv_penalty(track, tape=tape)
    return lf, ls, v


def inner_optimize(params, track, batch, weights, settings, spec=None,
                   tv_scale=1.0, include_interior=True, optimize_track=True):
    """Fixed number of Adam steps on the weighted loss; updates in place.

    `weights` are the three fixed channel weights (w1, w2, w3) for this
    visit; the TV channel is multiplied by `tv_scale`. Raw track increments
    below the revival floor are periodically reset to it (with their moments
    cleared) so the ReLU clamp cannot permanently silence a knot. Returns a
    dict with the final losses and step diagnostics.
    """
    spec = spec or pde.PdeResidualSpec(pde.AD1D)
    arrays = dict(params.slots())
    lr_scale = {}
    if optimize_track:
        arrays.update(track.slots())
        lr_scale = {slot: settings.track_lr_scale for slot in track.slots()}
    adam = Adam(arrays, settings, lr_scale=lr_scale)
    w1, w2, w3 = (float(w) for w in np.asarray(weights, dtype=float))
    diag = {"bad_steps": 0, "loss_first": None, "loss_last": None, "loss_every": []}

    for step in range(settings.steps):
        if (optimize_track and track.n_knots and settings.revive_every
                and step % settings.revive_every == 0):
            for slot, raw in (("INC_UP", track.raw_up), ("INC_DN", track.raw_dn)):
                dead = raw < settings.revive_value
                if dead.any():
                    raw[dead] = settings.revive_value
                    adam.reset_entries(slot, dead)

        t = tp.Tape()
        lf, ls, v = _combined_losses(params, track, spec, batch, t, include_interior)
        total = tp.weighted_sum([lf, ls, v], [w1, w2, w3 * tv_scale])
        if not np.isfinite(total.value):
            raise DivergenceError(f"loss became non-finite at inner step {step}")
        if diag["loss_first"] is None:
            diag["loss_first"] = float(total.value)
        if step % 100 == 0:
            diag["loss_every"].append(float(total.value))
        grads = tp.backward(t, total)
        if not all(np.all(np.isfinite(g)) for g in grads.values()):
            diag["bad_steps"] += 1   # abort this step, keep parameters
            adam.t += 1
            continue
        adam.step(grads)
        diag["loss_last"] = float(total.value)

    if settings.steps == 0:
        t = tp.Tape()
        lf, ls, v = _combined_losses(params, track, spec, batch, t, include_interior)
        diag["loss_first"] = diag["loss_last"] = float(
            tp.weighted_sum([lf, ls, v], [w1, w2, w3 * tv_scale]).value)

    if settings.lbfgs_iters > 0:
        arrays2 = dict(params.slots())
        if optimize_track:
            arrays2.update(track.slots())

        def build():
            t2 = tp.Tape()
            lf2, ls2, v2 = _combined_losses(params, track, spec, batch, t2,
                                            include_interior)
            return tp.weighted_sum([lf2, ls2, v2], [w1, w2, w3 * tv_scale])

        diag["loss_last"] = lbfgs_minimize(build, arrays2, settings.lbfgs_iters)
        t = tp.Tape()
        lf, ls, v = _combined_losses(params, track, spec, batch, t, include_interior)
    diag["final"] = (float(lf.value), float(ls.value), float(v.value))
    return diag


def batch_losses(params, track, batch, spec, include_interior=True):
    """Plain-float (L_f, L_s) on a batch at the current parameters."""
    t = tp.Tape()
    lf, ls, _ = _combined_losses(params, track, spec, batch, t, include_interior)
    return float(lf.value), float(ls.value)


# ---------------------------------------------------------------------------
# the online training loop
# ---------------------------------------------------------------------------

def make_batches(config):
    """Reference solve + sampling per the config grid (synthetic data path)."""
    sol = solve_advection_diffusion(config.grid)
    batches = sample_training_data(sol, config.n_interior, config.n_boundary,
                                   config.n_initial, config.n_batches,
                                   seed=config.seed)
    return sol, batches


def pretrain(params, batches, settings, steps=None, include_interior=True, log=None):
    """Data-only warmup: fit the pooled observations before the online loop.

    Adam roughs in the fit, a quasi-Newton polish takes it near the
    architecture's interpolation floor, so the first joint visits see honest
    derivatives instead of a random network.
    """
    steps = settings.pretrain_steps if steps is None else steps
    if steps <= 0:
        return
    pooled = merge_batches(batches)
    adam = Adam(dict(params.slots()),
                OptimizerSettings(steps=steps, step_size=2e-3,
                                  decay_every=max(1, steps // 2),
                                  decay_factor=settings.decay_factor))
    for step in range(steps):
        t = tp.Tape()
        lf = pde.loss_fitting(params, pooled, tape=t,
                              include_interior=include_interior)
        if not np.isfinite(lf.value):
            raise DivergenceError(f"pretraining loss non-finite at step {step}")
        adam.step(tp.backward(t, lf))
    last = float(lf.value)
    if settings.pretrain_lbfgs_iters > 0:
        def build():
            t = tp.Tape()
            return pde.loss_fitting(params, pooled, tape=t,
                                     include_interior=include_interior)
        last = lbfgs_minimize(build, dict(params.slots()),
                              settings.pretrain_lbfgs_iters)
    if log:
        log(f"pretrain: {steps} adam + {settings.pretrain_lbfgs_iters} lbfgs, "
            f"fitting loss {last:.3e}")


def train(config, batches, reference=None, log=None):
    """Run the weight-update training algorithm over spatial batches.

    Per epoch, for k = 1..B: optimize the weighted loss on batch k under the
    previous weights, then update the weights from batch k's fresh losses and
    the lagged TV channel. Afterwards extract changepoints, optionally refit
    the segments, and assemble a RunReport.
    """
    if not batches:
        raise ConfigurationError("need at least one training batch")
    if config.problem != pde.AD1D:
        raise ConfigurationError(
            "the training loop generates and fits 1d advection-diffusion data; "
            "the navier_stokes_2d residual is exercised through the pde module")
    start = time.perf_counter()
    spec = pde.PdeResidualSpec(config.problem)
    rng_box = (np.array([config.grid.x_lo, 0.0]),
               np.array([config.grid.x_hi, config.grid.horizon]))
    params = net.init_params(config.network_widths(), seed=config.seed, box=rng_box,
                             fourier_k=config.fourier_k)
    track = tr.uniform_track(config.n_knots, horizon=config.grid.horizon,
                             lam0=config.lambda0_init,
                             raw_init=config.optimizer.revive_value,
                             ushape=config.ushape_delta)

    adaptive = config.fixed_weights is None
    w = np.asarray(config.w0 if adaptive else config.fixed_weights, dtype=float)
    record = sx.RegretRecord(eta=config.eta)

    pretrain(params, batches, config.optimizer,
             include_interior=config.include_interior_misfit, log=log)

    update_index = 0
    for epoch in range(config.epochs):
        tv_scale = config.tv_scale_at(epoch)
        for k, batch in enumerate(batches, start=1):
            checkpoint = (params.copy(), track.copy())
            tv_prev = track.tv_value() * tv_scale   # V of the previous batch's track
            try:
                diag = inner_optimize(params, track, batch, w, config.optimizer,
                                      spec=spec, tv_scale=tv_scale,
                                      include_interior=config.include_interior_misfit)
            except DivergenceError as err:
                err.checkpoint = checkpoint
                raise
            lf_k, ls_k = batch_losses(params, track, batch, spec,
                                      config.include_interior_misfit)
            if not (np.isfinite(lf_k) and np.isfinite(ls_k)):
                raise DivergenceError(
                    f"losses non-finite after epoch {epoch + 1} batch {k}",
                    checkpoint=checkpoint)
            update_index += 1
            if adaptive:
                lv = sx.LossVector(lf_k, ls_k, tv_prev, batch=update_index)
                sw = sx.update_weights(lv, config.eta)
                record.append(lv, sw)
                w = sw.w
            if log:
                log(f"epoch {epoch + 1} batch {k}: L_f={lf_k:.3e} L_s={ls_k:.3e} "
                    f"V={tv_prev:.3e} w=({w[0]:.4f},{w[1]:.4f},{w[2]:.4f}) "
                    f"inner {diag['loss_first']:.3e}->{diag['loss_last']:.3e}")

    threshold = config.extraction_threshold
    if threshold is None:
        threshold = tr.default_threshold(track)
    changepoints = tr.extract_changepoints(track, threshold, config.dead_band)

    segments = []
    if config.refit:
        segments = refit_segments(config, batches, changepoints,
                                  base_params=params, track=track)

    regret_info = {}
    if adaptive and len(record):
        regret_info = sx.check_regret(record)

    mse = mse_refit = None
    if reference is not None:
        metrics = evaluate(params, reference, segments=segments or None)
        mse = metrics["solution_mse"]
        mse_refit = metrics.get("solution_mse_refit")

    report = RunReport(
        config=_config_echo(config),
        knot_times=[0.0] + [float(t) for t in track.knots],
        lambda_values=[float(v) for v in track.values()],
        changepoints=[list(cp) for cp in changepoints],
        threshold=float(threshold),
        segments=[{"t_lo": s.t_lo, "t_hi": s.t_hi, "lambda_hat": s.lam_hat,
                   "n_interior": s.n_interior} for s in segments],
        weight_history=[[float(x) for x in sw.w] for sw in record.weights],
        gamma_history=[float(sw.gamma) for sw in record.weights],
        loss_history=[[lv.L_f, lv.L_s, lv.V_lambda] for lv in record.losses],
        regret=regret_info.get("regret"),
        regret_bound=regret_info.get("bound"),
        regret_star=regret_info.get("regret_star"),
        regret_bound_star=regret_info.get("bound_star"),
        G=regret_info.get("G"),
        B=len(record),
        solution_mse=mse,
        solution_mse_refit=mse_refit,
        wall_clock_seconds=time.perf_counter() - start,
    )
    return report, params, track, record, segments


def _config_echo(config):
    echo = asdict(config)
    echo["grid"]["lambda_segments"] = [list(s) for s in config.grid.lambda_segments]
    echo["tv_channel_scale"] = config.tv_channel_scale
    return echo


def merge_batches(batches):
    """Single batch with all points pooled (refit ignores the slab partition)."""
    cat = lambda parts: np.concatenate([p for p in parts], axis=0)
    return pde.TrainingBatch(
        interior_x=cat([b.interior_x for b in batches]),
        interior_u=cat([b.interior_u for b in batches]),
        boundary_x=cat([b.boundary_x for b in batches]),
        boundary_u=cat([b.boundary_u for b in batches]),
        initial_x=cat([b.initial_x for b in batches]),
        initial_u=cat([b.initial_u for b in batches]),
        index=0, slab=(min(b.slab[0] for b in batches), max(b.slab[1] for b in batches)))


def refit_segments(config, batches, changepoints, base_params=None, track=None):
    """Constant-coefficient standard-PINN refit on each detected interval.

    Equal fixed weights on the fitting and structure losses, no TV term; the
    per-interval scalar coefficient is a zero-knot track seeded from the
    joint track's average on the interval (when available). Segments without
    interior data are reported unfittable (lam_hat None).
    """
    spec = pde.PdeResidualSpec(config.problem)
    horizon = config.grid.horizon
    times = [0.0] + sorted(float(cp[0]) for cp in changepoints) + [horizon]
    if any(t <= 0 or t >= horizon for t in times[1:-1]):
        raise ConfigurationError("changepoints must lie strictly inside (0, T)")
    pooled = merge_batches(batches)
    settings = OptimizerSettings(
        steps=config.refit_steps,
        step_size=config.optimizer.step_size,
        decay_every=max(1, config.refit_steps // 2),
        decay_factor=config.optimizer.decay_factor,
        revive_every=0,
        lbfgs_iters=config.refit_lbfgs_iters,
        track_lr_scale=1.0)   # a single scalar coefficient moves at full speed

    fits = []
    for i, (lo, hi) in enumerate(zip(times[:-1], times[1:])):
        sub = pooled.restrict_time(lo, hi, time_coord=spec.time_coord,
                                   closed_right=(i == len(times) - 2))
        if sub.n_interior == 0:
            fits.append(SegmentFit(lo, hi, None, 0))
            continue
        if base_params is not None:
            seg_params = base_params.copy()
        else:
            seg_params = net.init_params(config.network_widths(),
                                         seed=config.seed + 101 + i,
                                         box=(np.array([config.grid.x_lo, 0.0]),
                                              np.array([config.grid.x_hi, horizon])),
                                         fourier_k=config.fourier_k)
        if track is not None:
            mid = np.clip((lo + hi) / 2.0, 0.0, horizon)
            lam_init = float(track.value_at(mid))
        else:
            lam_init = config.lambda0_init
        seg_track = tr.LambdaTrack(np.array([]), np.asarray(lam_init),
                                   np.array([]), np.array([]), horizon)
        inner_optimize(seg_params, seg_track, sub, (0.5, 0.5, 0.0), settings,
                       spec=spec, tv_scale=0.0,
                       include_interior=config.include_interior_misfit)
        fits.append(SegmentFit(lo, hi, float(seg_track.lam0), sub.n_interior,
                               params=seg_params))
    return fits


# ---------------------------------------------------------------------------
# evaluation and persistence
# ---------------------------------------------------------------------------

def stitched_values(segments, sol, fallback=None):
    """Solution values over the reference grid from the per-segment networks,
    each covering its own time interval; `fallback` fills unfittable gaps."""
    out = np.full_like(sol.u, np.nan)
    for i, seg in enumerate(segments):
        closed = i == len(segments) - 1
        mask = (sol.ts >= seg.t_lo) & ((sol.ts <= seg.t_hi) if closed
                                       else (sol.ts < seg.t_hi))
        if not np.any(mask):
            continue
        if seg.params is None:
            if fallback is None:
                continue
            use = fallback
        else:
            use = seg.params
        tt, xx = np.meshgrid(sol.ts[mask], sol.xs, indexing="ij")
        pts = np.column_stack([xx.ravel(), tt.ravel()])
        out[mask] = net.eval_values(use, pts).reshape(mask.sum(), len(sol.xs))
    if fallback is not None and np.any(np.isnan(out)):
        hole = np.isnan(out[:, 0])
        tt, xx = np.meshgrid(sol.ts[hole], sol.xs, indexing="ij")
        pts = np.column_stack([xx.ravel(), tt.ravel()])
        out[hole] = net.eval_values(fallback, pts).reshape(hole.sum(), len(sol.xs))
    return out


def evaluate(params, sol, track=None, changepoints=None, segments=None,
             true_segments=None):
    """Grid MSE against the reference, plus coefficient/changepoint errors
    when the ground truth segments are supplied. With refit `segments`, the
    stitched per-segment networks are scored as well (the refined solution)."""
    pred = net.eval_values(params, sol.grid_points())
    err2 = (pred - sol.u.ravel()) ** 2
    metrics = {"solution_mse": float(err2.mean())}
    if segments and any(s.params is not None for s in segments):
        stitched = stitched_values(segments, sol, fallback=params)
        metrics["solution_mse_refit"] = float(np.mean((stitched - sol.u) ** 2))

    if true_segments is not None:
        true_times = [float(s) for s, _ in true_segments[1:]]
        if changepoints is not None:
            det = [cp[0] for cp in changepoints]
            metrics["changepoint_count"] = len(det)
            metrics["changepoint_errors"] = [
                float(min((abs(d - t) for d in det), default=np.inf)) for t in true_times]
        lam_err = []
        starts = [s for s, _ in true_segments] + [sol.spec.horizon]
        for (s, v), e in zip(true_segments, starts[1:]):
            mid = (s + e) / 2.0
            est = None
            if segments:
                for seg in segments:
                    if seg.t_lo <= mid < seg.t_hi and seg.lam_hat is not None:
                        est = seg.lam_hat
                if est is None and segments[-1].lam_hat is not None and mid >= segments[-1].t_lo:
                    est = segments[-1].lam_hat
            if est is None and track is not None:
                est = float(track.value_at(mid))
            lam_err.append(None if est is None else float(abs(est - v)))
        metrics["lambda_abs_errors"] = lam_err
    return metrics


def squared_error_grid(params, sol):
    """(t, x, |u_NN - u|^2) rows over the reference grid."""
    pred = net.eval_values(params, sol.grid_points())
    err2 = (pred - sol.u.ravel()) ** 2
    tt, xx = np.meshgrid(sol.ts, sol.xs, indexing="ij")
    return np.column_stack([tt.ravel(), xx.ravel(), err2])


def save_model(path, params, track):
    payload = {f"net_{k}": v for k, v in params.slots().items()}
    payload["in_shift"] = params.in_shift
    payload["in_scale"] = params.in_scale
    payload["fourier_k"] = np.asarray(params.k_per_coord())
    payload["n_layers"] = np.array(len(params.weights))
    payload["track_knots"] = track.knots
    payload["track_lam0"] = track.lam0
    payload["track_up"] = track.raw_up
    payload["track_dn"] = track.raw_dn
    payload["track_horizon"] = np.array(track.horizon)
    payload["track_ushape"] = np.array(track.ushape)
    np.savez(path, **payload)


def load_model(path):
    data = np.load(path)
    n = int(data["n_layers"])
    params = net.NetworkParams(
        weights=[data[f"net_W{i}"] for i in range(n)],
        biases=[data[f"net_B{i}"] for i in range(n)],
        in_shift=data["in_shift"], in_scale=data["in_scale"],
        fourier_k=([int(k) for k in data["fourier_k"]] if "fourier_k" in data else 0))
    track = tr.LambdaTrack(data["track_knots"], data["track_lam0"],
                           data["track_up"], data["track_dn"],
                           horizon=float(data["track_horizon"]),
                           ushape=bool(data["track_ushape"]))
    return params, track
