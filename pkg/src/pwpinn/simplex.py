"""Online re-weighting of the three loss channels on the probability simplex.

The update minimizes  <losses, w> + (1/eta) w . log w  over the open simplex,
whose closed form is the normalized exponential

    w_i = exp(-eta L_i - (1 - eta gamma)),
    gamma = (1/eta) (1 - log sum_j exp(-eta L_j)),

i.e. a softmax of the negatively scaled losses. gamma is the Lagrange
multiplier that pins the weights to the simplex and is kept for diagnostics.
Regret of the adaptive weights against the best fixed weight vector in
hindsight is bounded by log(3)/eta + eta B G^2 when every loss vector has
l1 norm below G; with eta = sqrt(log 3)/(G sqrt(B)) the bound becomes
2 G sqrt(B log 3).
"""

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, UsageError

N_TERMS = 3
_TINY = 1e-300  # positivity floor after softmax underflow


@dataclass
class LossVector:
    L_f: float
    L_s: float
    V_lambda: float
    batch: int = 0

    def __post_init__(self):
        vals = self.as_array()
        if not np.all(np.isfinite(vals)):
            raise UsageError(f"loss vector has non-finite entries: {vals}")
        if np.any(vals < 0):
            raise UsageError(f"loss vector has negative entries: {vals}")

    def as_array(self):
        return np.array([self.L_f, self.L_s, self.V_lambda], dtype=float)

    @property
    def l1(self):
        return float(np.sum(np.abs(self.as_array())))


@dataclass
class SimplexWeights:
    w: np.ndarray
    eta: float
    gamma: float

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=float)
        if self.w.shape != (N_TERMS,):
            raise UsageError(f"expected {N_TERMS} weights, got shape {self.w.shape}")
        if np.any(self.w <= 0) or abs(self.w.sum() - 1.0) > 1e-12:
            raise UsageError(f"weights not in the open simplex: {self.w}")


def total_loss(losses, weights):
    """Weighted combination [L_f, L_s, V].w (plain float)."""
    return float(losses.as_array() @ weights.w)


def update_weights(losses, eta, prev=None):
    """Closed-form entropy-regularized update; `prev` is accepted for API
    stability but the linear loss makes the solution depend on `losses` only.

    Overflow-safe via max-subtraction; softmax outputs that underflow to zero
    are floored at a subnormal-adjacent constant so the open-simplex invariant
    survives loss magnitudes up to ~1e8 at eta up to 1.
    """
    if eta <= 0:
        raise UsageError(f"learning rate must be positive, got {eta}")
    ell = losses.as_array()
    if not np.all(np.isfinite(ell)):
        raise UsageError(f"cannot update weights from non-finite losses {ell}")
    z = -eta * ell
    zmax = z.max()
    ez = np.exp(z - zmax)
    denom = ez.sum()
    w = ez / denom
    w = np.maximum(w, _TINY)
    # gamma solving eq. of the simplex constraint: eta*gamma = 1 - logsumexp(z)
    log_norm = zmax + np.log(denom)
    gamma = (1.0 - log_norm) / eta
    return SimplexWeights(w=w, eta=eta, gamma=gamma)


def weights_from_gamma(losses, eta, gamma):
    """Direct substitution w_i = exp(-eta L_i - (1 - eta gamma))."""
    return np.exp(-eta * losses.as_array() - (1.0 - eta * gamma))


def uniform_weights(eta):
    """The starting point w = (1/3, 1/3, 1/3), with its consistent gamma."""
    return update_weights(LossVector(0.0, 0.0, 0.0, batch=0), eta)


@dataclass
class RegretRecord:
    """Per-update histories of the loss vectors and the chosen weights."""

    losses: list = field(default_factory=list)
    weights: list = field(default_factory=list)
    eta: float = 1e-4

    def append(self, losses, weights):
        self.losses.append(losses)
        self.weights.append(weights)

    def __len__(self):
        if len(self.losses) != len(self.weights):
            raise UsageError("loss and weight histories out of sync")
        return len(self.losses)

    @property
    def G(self):
        """Largest l1 norm among the recorded loss vectors."""
        if not self.losses:
            return 0.0
        return max(lv.l1 for lv in self.losses)

    def loss_matrix(self):
        return np.array([lv.as_array() for lv in self.losses])


def best_fixed_weights(record):
    """Best fixed simplex point in hindsight.

    The loss is linear in w, so the infimum over the simplex is attained at a
    vertex: the channel with the smallest cumulative loss.
    """
    if len(record) < 1:
        raise UsageError("need at least one recorded batch")
    cum = record.loss_matrix().sum(axis=0)
    j = int(np.argmin(cum))
    vertex = np.zeros(N_TERMS)
    vertex[j] = 1.0
    return vertex, float(cum[j])


def regret(record):
    """Cumulative adaptive loss minus the best fixed-weight cumulative loss."""
    if len(record) < 1:
        raise UsageError("need at least one recorded batch")
    mat = record.loss_matrix()
    wmat = np.array([sw.w for sw in record.weights])
    adaptive = float(np.sum(mat * wmat))
    _, best = best_fixed_weights(record)
    return adaptive - best


def regret_bound(eta, B, G):
    """log(3)/eta + eta B G^2."""
    if eta <= 0 or B < 1 or G <= 0:
        raise UsageError(f"invalid bound arguments eta={eta}, B={B}, G={G}")
    return np.log(3.0) / eta + eta * B * G * G


def optimal_eta(B, G):
    """Learning rate equalizing both bound terms: sqrt(log 3) / (G sqrt(B))."""
    return np.sqrt(np.log(3.0)) / (G * np.sqrt(B))


def replay_updates(loss_vectors, eta):
    """Run the weight update over a fixed loss stream; returns a RegretRecord."""
    rec = RegretRecord(eta=eta)
    for lv in loss_vectors:
        rec.append(lv, update_weights(lv, eta))
    return rec


def check_regret(record, eta=None):
    """Bound checks for a recorded run.

    Returns a dict with the realized regret, the bound at the recorded eta,
    and the regret/bound pair for a replay at the horizon-optimal eta.
    """
    eta = record.eta if eta is None else eta
    B = len(record)
    G = record.G
    realized = regret(record)
    bound = regret_bound(eta, B, G)
    eta_star = optimal_eta(B, G) if G > 0 else None
    if eta_star is not None:
        rec_star = replay_updates(record.losses, eta_star)
        regret_star = regret(rec_star)
        bound_star = 2.0 * G * np.sqrt(B * np.log(3.0))
    else:
        regret_star, bound_star = 0.0, 0.0
    return {
        "B": B,
        "G": G,
        "eta": eta,
        "regret": realized,
        "bound": bound,
        "passed": realized <= bound,
        "eta_star": eta_star,
        "regret_star": regret_star,
        "bound_star": bound_star,
        "passed_star": regret_star <= bound_star,
    }


def save_record_csv(record, path):
    with open(path, "w", newline="") as fh:
        fh.write(f"# eta={float(record.eta)!r}\n")
        w = csv.writer(fh)
        w.writerow(["batch", "L_f", "L_s", "V_lambda", "w1", "w2", "w3", "gamma"])
        for lv, sw in zip(record.losses, record.weights):
            row = [lv.L_f, lv.L_s, lv.V_lambda, sw.w[0], sw.w[1], sw.w[2], sw.gamma]
            w.writerow([int(lv.batch)] + [repr(float(x)) for x in row])


def load_record_csv(path):
    eta = None
    rows = []
    with open(path, newline="") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                if "eta=" in line:
                    eta = float(line.split("eta=")[1])
                continue
            rows.append(line.split(","))
    header = ["batch", "L_f", "L_s", "V_lambda", "w1", "w2", "w3", "gamma"]
    if not rows or rows[0] != header:
        raise ConfigurationError(f"{path}: expected header {','.join(header)}")
    rec = RegretRecord(eta=1e-4 if eta is None else eta)
    for r in rows[1:]:
        if len(r) != 8:
            raise ConfigurationError(f"{path}: bad row {r}")
        lv = LossVector(float(r[1]), float(r[2]), float(r[3]), batch=int(r[0]))
        sw = SimplexWeights(np.array([float(r[4]), float(r[5]), float(r[6])]),
                            eta=rec.eta, gamma=float(r[7]))
        rec.append(lv, sw)
    return rec
