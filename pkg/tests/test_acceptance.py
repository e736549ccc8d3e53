"""Acceptance criteria gate.

Each test prints one PASS/FAIL line (run with `pytest -s` to see them live).
The two training runs are session-cached fixtures; everything else is fast.
"""

import time

import numpy as np
import pytest

import pwpinn as pw
from pwpinn import tape as tp

from helpers import fd_value_derivs, grad_check, rel_err

TRUE_SEGMENTS = [(0.0, 0.5), (1 / 3, 0.05), (2 / 3, 1.0)]
TRUE_TIMES = (1 / 3, 2 / 3)
TRUE_VALUES = (0.5, 0.05, 1.0)


def report_line(name, passed, detail):
    flag = "PASS" if passed else "FAIL"
    print(f"[{flag}] {name}: {detail}")
    assert passed, f"{name}: {detail}"


# ---------------------------------------------------------------------------
# training-run fixtures (the expensive part, shared by several criteria)
# ---------------------------------------------------------------------------

@pytest.fixture(scope="session")
def changepoint_run():
    config = pw.TrainConfig(grid=pw.GridSpec(lambda_segments=TRUE_SEGMENTS), seed=0)
    sol, batches = pw.make_batches(config)
    report, params, track, record, segments = pw.train(config, batches,
                                                       reference=sol)
    return dict(config=config, sol=sol, report=report, params=params,
                track=track, record=record, segments=segments)


@pytest.fixture(scope="session")
def constant_run():
    config = pw.TrainConfig(grid=pw.GridSpec(lambda_segments=[(0.0, 0.5)]), seed=0)
    sol, batches = pw.make_batches(config)
    report, params, track, record, segments = pw.train(config, batches,
                                                       reference=sol)
    return dict(config=config, sol=sol, report=report, params=params,
                track=track, record=record, segments=segments)


# ---------------------------------------------------------------------------
# fast criteria first
# ---------------------------------------------------------------------------

def test_weight_update_oracle():
    # closed form vs brute-force grid minimization of the regularized
    # objective over the simplex (grid step 1e-3), 100 random loss vectors
    rng = np.random.default_rng(12)
    step = 1e-3
    w1 = np.arange(step, 1.0, step)
    worst_w = 0.0
    worst_gamma = 0.0
    for _ in range(100):
        lv = pw.LossVector(*rng.uniform(0.0, 5.0, 3))
        eta = 10 ** rng.uniform(-2, 0.3)
        sw = pw.update_weights(lv, eta)
        ell = lv.as_array()
        best, best_val = None, np.inf
        for a in w1:
            b = np.arange(step, 1.0 - a, step)
            if not len(b):
                continue
            c = 1.0 - a - b
            m = c > 0
            b, c = b[m], c[m]
            w = np.column_stack([np.full_like(b, a), b, c])
            vals = w @ ell + np.sum(w * np.log(w), axis=1) / eta
            i = int(np.argmin(vals))
            if vals[i] < best_val:
                best_val, best = vals[i], w[i]
        worst_w = max(worst_w, float(np.max(np.abs(sw.w - best))))
        rebuilt = pw.weights_from_gamma(lv, eta, sw.gamma)
        worst_gamma = max(worst_gamma, float(np.max(np.abs(rebuilt - sw.w))))
    report_line("weight-update oracle",
                worst_w < 2e-3 and worst_gamma < 1e-12,
                f"max |w - grid| = {worst_w:.2e} (tol 2e-3), "
                f"max gamma reconstruction = {worst_gamma:.2e} (tol 1e-12)")


def test_differentiation_oracle():
    # 200 randomized small-network cases: parameter gradients and input
    # derivatives against central finite differences, relative error < 1e-5
    rng = np.random.default_rng(5)
    start = time.perf_counter()
    worst = 0.0
    for case in range(200):
        ns = rng.integers(0, 3)
        if case % 4 == 3:
            widths = [3] + [int(rng.integers(3, 7))] * ns + [3]
            spec = pw.PdeResidualSpec(pw.NS2D)
            pts = rng.uniform(-0.8, 0.8, (3, 3))
            us = rng.normal(0, 0.5, (3, 3))
        else:
            widths = [2] + [int(rng.integers(3, 7))] * ns + [1]
            spec = pw.PdeResidualSpec(pw.AD1D)
            pts = np.column_stack([rng.uniform(-0.8, 0.8, 3),
                                   rng.uniform(0.05, 0.95, 3)])
            us = rng.normal(0, 0.5, 3)
        fourier_k = int(rng.integers(0, 3))
        p = pw.init_params(widths, seed=int(rng.integers(1e6)), fourier_k=fourier_k,
                           box=(np.full(widths[0], -1.0), np.full(widths[0], 1.0)))
        if widths[0] == 3:
            p.in_shift[2], p.in_scale[2] = 0.5, 2.0   # time axis [0, 1]
            pts[:, 2] = rng.uniform(0.05, 0.95, 3)
        else:
            p.in_shift[1], p.in_scale[1] = 0.5, 2.0
        trk = pw.uniform_track(int(rng.integers(1, 5)), lam0=rng.uniform(0.1, 0.8),
                               raw_init=0.05)
        batch = pw.TrainingBatch(pts, us, pts[:1], us[:1],
                                 np.zeros((0, widths[0])),
                                 np.zeros((0,) if widths[-1] == 1 else (0, 3)))

        def build():
            t = tp.Tape()
            lf = pw.loss_fitting(p, batch, tape=t, include_interior=True)
            ls = pw.loss_structure(p, trk, spec, batch, tape=t)
            v = pw.tv_penalty(trk, tape=t)
            return tp.weighted_sum([lf, ls, v], [0.4, 0.4, 0.2])

        arrays = {**p.slots(), **trk.slots()}
        worst = max(worst, grad_check(build, arrays, floor=1e-6))

        # input-derivative check on the network value; the floor guards the
        # relative error against exact zeros (fd noise ~1e-10 on a linear net)
        x0 = pts[0].copy()
        ev = pw.forward_extended(p, x0, order=2)
        if widths[-1] == 1:
            val = lambda xx: float(pw.eval_values(p, xx.reshape(1, -1))[0])
            d1, d2 = fd_value_derivs(val, x0)
            for j in range(widths[0]):
                worst = max(worst, rel_err(ev.d_in[j].value, d1[j], floor=1e-3))
                worst = max(worst, rel_err(ev.d2_in[j].value, d2[j], floor=1e-3))
    elapsed = time.perf_counter() - start
    report_line("differentiation oracle",
                worst < 1e-5 and elapsed < 60.0,
                f"200 cases, worst rel err = {worst:.2e} (tol 1e-5), "
                f"runtime {elapsed:.1f}s (limit 60s)")


def test_solver_order_mms():
    lam = 0.4

    def exact(x, t):
        return np.exp(-t) * np.sin(np.pi * x)

    def source(x, t):
        return (-exact(x, t) + np.pi * np.exp(-t) * np.cos(np.pi * x)
                + lam * np.pi ** 2 * exact(x, t))

    errs = []
    for nx, nt in [(51, 60), (101, 120), (201, 240), (401, 480)]:
        spec = pw.GridSpec(nx=nx, nt=nt, lambda_segments=[(0.0, lam)])
        sol = pw.solve_advection_diffusion(
            spec, initial=lambda x: np.sin(np.pi * x), source=source)
        tt, xx = np.meshgrid(sol.ts, sol.xs, indexing="ij")
        errs.append(float(np.max(np.abs(sol.u - exact(xx, tt)))))
    ratios = [errs[i] / errs[i + 1] for i in range(3)]
    ok = all(3.5 <= r <= 4.5 for r in ratios)
    report_line("solver order (mms)", ok,
                f"errors {['%.2e' % e for e in errs]}, "
                f"ratios {['%.2f' % r for r in ratios]} (need [3.5, 4.5])")


def test_regret_bound_on_random_streams():
    rng = np.random.default_rng(2024)
    n_streams = 25
    failures = []
    for s in range(n_streams):
        B = int(rng.integers(20, 150))
        scale = 10 ** rng.uniform(-2, 1)
        eta = 10 ** rng.uniform(-6, -3)
        losses = [pw.LossVector(*(scale * rng.uniform(0, 1, 3)), batch=k + 1)
                  for k in range(B)]
        rec = pw.replay_updates(losses, eta)
        info = pw.check_regret(rec)
        if not (info["passed"] and info["passed_star"]):
            failures.append((s, info))
    report_line("regret bound (random streams)", not failures,
                f"{n_streams} streams at recorded eta and replayed eta*; "
                f"failures: {len(failures)}")


def test_ns_variant_substitute():
    # the flow experiment itself needs an external dataset; the residual
    # variant must evaluate and pass the differentiation oracle on synthetic
    # smooth fields
    rng = np.random.default_rng(77)
    p = pw.init_params([3, 8, 8, 3], seed=4,
                       box=(np.array([-1.0, -1.0, 0.0]), np.array([1.0, 1.0, 2.0])))
    trk = pw.uniform_track(5, horizon=2.0, lam0=0.35, raw_init=0.04)
    spec = pw.PdeResidualSpec(pw.NS2D)
    pts = np.column_stack([rng.uniform(-0.9, 0.9, 10), rng.uniform(-0.9, 0.9, 10),
                           rng.uniform(0.05, 1.95, 10)])
    batch = pw.TrainingBatch(pts, rng.normal(0, 0.4, (10, 3)),
                             pts[:3], rng.normal(0, 0.4, (3, 3)),
                             np.zeros((0, 3)), np.zeros((0, 3)))
    fs = pw.residual_f(p, trk, spec, pts[0])
    finite = np.isfinite(fs[0].value) and np.isfinite(fs[1].value)

    def build():
        t = tp.Tape()
        lf = pw.loss_fitting(p, batch, tape=t, include_interior=True)
        ls = pw.loss_structure(p, trk, spec, batch, tape=t)
        return tp.weighted_sum([lf, ls], [0.5, 0.5])

    worst = grad_check(build, {**p.slots(), **trk.slots()})
    report_line("flow-residual substitute", finite and worst < 1e-5,
                f"residuals finite: {finite}, gradient oracle {worst:.2e} (tol 1e-5)")


# ---------------------------------------------------------------------------
# criteria on the changepoint run
# ---------------------------------------------------------------------------

def test_changepoint_recovery(changepoint_run):
    report = changepoint_run["report"]
    cps = report.changepoints
    times = sorted(cp[0] for cp in cps)
    ok = (len(cps) == 2
          and abs(times[0] - TRUE_TIMES[0]) <= 0.05
          and abs(times[1] - TRUE_TIMES[1]) <= 0.05
          and report.wall_clock_seconds <= 1800)
    report_line("changepoint recovery", ok,
                f"detected {[round(t, 4) for t in times]} vs true "
                f"{[round(t, 4) for t in TRUE_TIMES]} (tol 0.05), "
                f"wall {report.wall_clock_seconds:.0f}s (limit 1800s)")


def test_parameter_recovery(changepoint_run):
    segments = changepoint_run["segments"]
    ok = len(segments) == 3
    detail = []
    if ok:
        for seg, truth in zip(segments, TRUE_VALUES):
            err = abs(seg.lam_hat - truth) if seg.lam_hat is not None else np.inf
            detail.append(f"{seg.lam_hat:.4f} vs {truth} (err {err:.3f})")
            ok = ok and err <= 0.05
    report_line("parameter recovery", ok,
                "; ".join(detail) if detail else f"{len(segments)} segments != 3")


def test_weight_convergence(changepoint_run):
    w = np.array(changepoint_run["report"].weight_history)
    final_epoch = w[-changepoint_run["config"].n_batches:]
    spread = float(final_epoch[-1].max() - final_epoch[-1].min())
    report_line("weight convergence", spread < 0.15,
                f"final weights {np.round(final_epoch[-1], 5)}, "
                f"spread {spread:.2e} (tol 0.15)")


def test_solution_accuracy(changepoint_run):
    report = changepoint_run["report"]
    mse = report.solution_mse_refit
    if mse is None:
        mse = report.solution_mse
    report_line("solution accuracy", mse < 1e-3,
                f"grid mse {mse:.2e} (joint-model {report.solution_mse:.2e}; "
                f"tol 1e-3)")


def test_regret_bound_on_recorded_runs(changepoint_run, constant_run):
    ok = True
    details = []
    for name, run in [("changepoint", changepoint_run), ("constant", constant_run)]:
        info = pw.check_regret(run["record"])
        ok = ok and info["passed"] and info["passed_star"]
        details.append(
            f"{name}: regret {info['regret']:.4g} <= {info['bound']:.4g} "
            f"and replay@eta* {info['regret_star']:.4g} <= {info['bound_star']:.4g}")
    report_line("regret bound (recorded runs)", ok, "; ".join(details))


def test_reversion_on_constant_data(constant_run):
    report = constant_run["report"]
    cps = report.changepoints
    segments = constant_run["segments"]
    lam_global = segments[0].lam_hat if segments else None
    ok = (len(cps) == 0 and len(segments) == 1 and lam_global is not None
          and abs(lam_global - 0.5) <= 0.05)
    report_line("reversion on constant data", ok,
                f"changepoints {cps}, global lambda {lam_global} "
                f"(true 0.5, tol 0.05)")
