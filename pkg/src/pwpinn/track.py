"""Piecewise-constant coefficient track with an edge-weighted TV penalty.

The track is a base value plus, at each time knot, a pair of raw increments
(up, down). Effective increments are the ReLU-clamped raws, so the coefficient

    lam(t) = lam0 + sum_{knots <= t} (max(up_i, 0) - max(dn_i, 0))

is right-continuous piecewise-constant, and the penalty

    tv = sum_i delta(t_i) * (max(up_i, 0) + max(dn_i, 0))

is differentiable in the raw parameters everywhere except the clamp corner,
where the subgradient 0 is used. delta(t) = sqrt(T / (T - t)) grows toward
the end of the horizon; the symmetric variant adding sqrt(T / t) is available
behind the `ushape` flag.
"""

import csv
from dataclasses import dataclass, field

import numpy as np

from . import tape as tp
from .errors import ConfigurationError, DomainError, UsageError


@dataclass
class LambdaTrack:
    knots: np.ndarray                 # strictly increasing, inside (0, T)
    lam0: np.ndarray                  # 0-d array, base value on [0, t^1)
    raw_up: np.ndarray                # raw up-increments, one per knot
    raw_dn: np.ndarray                # raw down-increments, one per knot
    horizon: float = 1.0
    ushape: bool = False

    def __post_init__(self):
        self.knots = np.asarray(self.knots, dtype=float)
        self.lam0 = np.asarray(self.lam0, dtype=float).reshape(())
        self.raw_up = np.asarray(self.raw_up, dtype=float)
        self.raw_dn = np.asarray(self.raw_dn, dtype=float)
        if self.knots.size:
            if np.any(np.diff(self.knots) <= 0):
                raise ConfigurationError("knot times must be strictly increasing")
            if self.knots[0] <= 0 or self.knots[-1] >= self.horizon:
                raise ConfigurationError("knot times must lie strictly inside (0, T)")
        if self.raw_up.shape != self.knots.shape or self.raw_dn.shape != self.knots.shape:
            raise ConfigurationError("one (up, dn) raw increment pair per knot required")

    # -- plain (ndarray) views ------------------------------------------------
    @property
    def n_knots(self):
        return self.knots.size

    def effective_increments(self):
        return np.maximum(self.raw_up, 0.0), np.maximum(self.raw_dn, 0.0)

    def jumps(self):
        up, dn = self.effective_increments()
        return up - dn

    def values(self):
        """Track value on each piece: [lam0, lam(t^1), ..., lam(t^M)]."""
        return float(self.lam0) + np.concatenate([[0.0], np.cumsum(self.jumps())])

    def value_at(self, t):
        """Plain float evaluation (vectorized over t)."""
        t = np.asarray(t, dtype=float)
        if np.any(t < 0.0) or np.any(t > self.horizon):
            raise DomainError("time outside [0, T]")
        idx = np.searchsorted(self.knots, t, side="right")
        return self.values()[idx]

    def edge_weights(self):
        return edge_weight(self.knots, self.horizon, self.ushape)

    def tv_value(self):
        up, dn = self.effective_increments()
        if self.n_knots == 0:
            return 0.0
        return float(np.sum(self.edge_weights() * (up + dn)))

    def slots(self):
        return {"LAM0": self.lam0, "INC_UP": self.raw_up, "INC_DN": self.raw_dn}

    def copy(self):
        return LambdaTrack(self.knots.copy(), self.lam0.copy(),
                           self.raw_up.copy(), self.raw_dn.copy(),
                           self.horizon, self.ushape)


def edge_weight(t, horizon, ushape=False):
    """Penalty weight delta(t); finite on [0, T), >= 1, increasing toward T."""
    t = np.asarray(t, dtype=float)
    if np.any(t >= horizon):
        raise DomainError("edge weight undefined at or beyond the horizon")
    w = np.sqrt(horizon / (horizon - t))
    if ushape:
        w = w + np.sqrt(horizon / np.maximum(t, np.finfo(float).tiny))
    return w


def uniform_track(n_knots, horizon=1.0, lam0=0.0, raw_init=0.0, ushape=False):
    """Track with `n_knots` uniform knots strictly inside (0, T)."""
    knots = np.arange(1, n_knots + 1) / (n_knots + 1) * horizon
    return LambdaTrack(knots, np.asarray(float(lam0)),
                       np.full(n_knots, float(raw_init)),
                       np.full(n_knots, float(raw_init)),
                       horizon, ushape)


def track_from_segments(segments, horizon=1.0, ushape=False):
    """Exact track for piecewise values [(start_time, value), ...], start 0 first."""
    segments = sorted(segments, key=lambda s: s[0])
    if not segments or segments[0][0] != 0.0:
        raise ConfigurationError("segments must start at t = 0")
    starts = np.array([s for s, _ in segments], dtype=float)
    vals = np.array([v for _, v in segments], dtype=float)
    knots = starts[1:]
    jumps = np.diff(vals)
    return LambdaTrack(knots, np.asarray(vals[0]),
                       np.maximum(jumps, 0.0), np.maximum(-jumps, 0.0),
                       horizon, ushape)


# ---------------------------------------------------------------------------
# tape-node operations
# ---------------------------------------------------------------------------

def _bound_nodes(t, track):
    cache = t.bind(track)
    if "relu_up" not in cache:
        leaves = {slot: t.leaf(arr, slot=slot) for slot, arr in track.slots().items()}
        cache["leaves"] = leaves
        if track.n_knots:
            cache["relu_up"] = tp.relu(leaves["INC_UP"])
            cache["relu_dn"] = tp.relu(leaves["INC_DN"])
            cache["jumps"] = tp.sub(cache["relu_up"], cache["relu_dn"])
        else:
            cache["relu_up"] = cache["relu_dn"] = cache["jumps"] = None
    return cache


def lambda_at(track, t, tape=None):
    """Track value at time(s) t as a tape node ((N,) for vector t, scalar else).

    Differentiable in lam0 and in every raw increment whose knot is <= t,
    with the ReLU subgradient convention at the clamp.
    """
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(t_arr < 0.0) or np.any(t_arr > track.horizon):
        raise DomainError(f"time outside [0, {track.horizon}]")
    tape_ = tape if tape is not None else tp.Tape()
    cache = _bound_nodes(tape_, track)
    lam0 = cache["leaves"]["LAM0"]
    if track.n_knots == 0:
        out = tape_._record(np.full(t_arr.shape, float(lam0.value)), (lam0,),
                            vjp=lambda g: (np.sum(g),),
                            fwd=lambda v: np.full(t_arr.shape, float(v)))
    else:
        ind = (track.knots[None, :] <= t_arr[:, None]).astype(float)
        contrib = tp.const_matmul(ind, cache["jumps"])
        out = tp.add_scalar(contrib, lam0)
    if np.ndim(t) == 0:
        return tp.total(out)
    return out


def tv_penalty(track, tape=None):
    """Edge-weighted total variation sum(delta(t_i) (up_i + dn_i)) as a scalar node."""
    tape_ = tape if tape is not None else tp.Tape()
    cache = _bound_nodes(tape_, track)
    if track.n_knots == 0:
        # constant zero that still touches the leaves so gradients exist
        return tp.scale(tp.total(cache["leaves"]["LAM0"]), 0.0)
    both = tp.add(cache["relu_up"], cache["relu_dn"])
    return tp.dot_const(both, track.edge_weights())


# ---------------------------------------------------------------------------
# changepoint extraction and serialization
# ---------------------------------------------------------------------------

def extract_changepoints(track, threshold, dead_band=None):
    """Knots whose net jump exceeds `threshold`, merged within a dead band.

    Candidates closer than `dead_band` (default: two knot spacings) are
    clustered; the knot with the largest |jump| represents the cluster and the
    reported (left, right) values span the whole cluster. Returns a list of
    (time, left_value, right_value).
    """
    if threshold <= 0:
        raise UsageError("extraction threshold must be positive")
    if track.n_knots == 0:
        return []
    jumps = track.jumps()
    values = track.values()
    idx = np.flatnonzero(np.abs(jumps) > threshold)
    if idx.size == 0:
        return []
    if dead_band is None:
        # merge neighbours only on dense knot grids, where one physical jump
        # can smear across adjacent knots; sparse knots are distinct by intent
        spacings = np.diff(np.concatenate([[0.0], track.knots, [track.horizon]]))
        med = float(np.median(spacings))
        dead_band = 2.0 * med if med <= track.horizon / 20.0 else 0.0

    clusters = [[idx[0]]]
    for i in idx[1:]:
        if track.knots[i] - track.knots[clusters[-1][-1]] <= dead_band:
            clusters[-1].append(i)
        else:
            clusters.append([i])

    out = []
    for cl in clusters:
        best = max(cl, key=lambda i: abs(jumps[i]))
        left = values[cl[0]]           # value on the piece before the first member
        right = values[cl[-1] + 1]     # value after the last member
        out.append((float(track.knots[best]), float(left), float(right)))
    return out


def default_threshold(track, rel=0.05, floor=0.025):
    """Scale-relative extraction threshold: rel * range of the track values."""
    vals = track.values()
    return max(rel * float(vals.max() - vals.min()), floor)


def save_track_csv(track, path):
    """CSV with columns (knot_time, lambda_right_value); first row is t = 0."""
    values = track.values()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["knot_time", "lambda_right_value"])
        w.writerow([0.0, repr(float(values[0]))])
        for t, v in zip(track.knots, values[1:]):
            w.writerow([repr(float(t)), repr(float(v))])


def load_track_csv(path, horizon=1.0, ushape=False):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ["knot_time", "lambda_right_value"]:
        raise ConfigurationError(f"{path}: expected header knot_time,lambda_right_value")
    segs = [(float(t), float(v)) for t, v in rows[1:]]
    return track_from_segments(segs, horizon=horizon, ushape=ushape)
