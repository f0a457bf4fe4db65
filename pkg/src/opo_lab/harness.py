"""Experiment suites and their CSV / manifest outputs.

Data files never contain timestamps; re-running a suite with the same
arguments reproduces every CSV byte for byte. The run timestamp lives in
the manifest only.
"""

from __future__ import annotations

import datetime as _dt
import logging
import math
import os
import tempfile
from pathlib import Path

import numpy as np

from .core import RunMetrics
from .dynamics import (
    hessian_probe,
    log_approx_error_check,
    measure_contraction_rate,
    param_grad_check,
    recursion_residual,
    saturation_profile,
    v_space_descent,
)
from .geometry import tv_chi2_bound_gap
from .objectives import lagrange_dual_solve, opo_closed_form
from .sampling import alpha_weights
from .trainer import Algo, TrainConfig, run_training

log = logging.getLogger(__name__)

METRIC_COLUMNS = RunMetrics.FIELDS
PLOT_METRICS = ("mean_reward", "grad_norm", "entropy", "chi2_to_ref", "kl_to_ref", "tv_to_ref", "loss")


class SuiteFailure(AssertionError):
    pass


def _check(cond, msg):
    if not cond:
        raise SuiteFailure(msg)


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_csv(path, header, rows) -> Path:
    """Write atomically: temp file in the same directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [",".join(header)]
    lines += [",".join(_fmt(x) for x in row) for row in rows]
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    with os.fdopen(fd, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")
    os.replace(tmp, path)
    return path


def write_manifest(out_dir, suite: str, config: dict, artifacts, status: str = "ok") -> Path:
    out_dir = Path(out_dir)
    lines = [
        f"suite = {suite}",
        f"status = {status}",
        f"created = {_dt.datetime.now(_dt.timezone.utc).isoformat(timespec='seconds')}",
    ]
    lines += [f"config.{k} = {_fmt(v)}" for k, v in sorted(config.items())]
    lines += [f"artifact = {Path(a).relative_to(out_dir).as_posix()}" for a in artifacts]
    path = out_dir / "manifest"
    out_dir.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n")
    return path


def read_csv(path):
    """Return (header, rows of floats where parseable)."""
    text = Path(path).read_text().splitlines()
    header = text[0].split(",")
    rows = []
    for line in text[1:]:
        row = []
        for cell in line.split(","):
            try:
                row.append(float(cell))
            except ValueError:
                row.append(cell)
        rows.append(row)
    return header, rows


# -- dynamics ------------------------------------------------------------------

def run_dynamics_suite(out_dir, mu=1.0, eta=0.5, alpha=0.6, beta=1.0, seed=0, size=6, steps=10):
    """Contraction trace, constant-curvature probe and saturation table."""
    rng = np.random.default_rng(seed)
    out_dir = Path(out_dir)
    ref = rng.dirichlet(np.ones(size)) * 0.9 + 0.1 / size
    t = np.exp(rng.normal(0, 0.3, size))
    adv = rng.normal(0, 1, size)
    omega = alpha_weights(adv, t - 1.0, alpha).omega
    v0 = rng.normal(0, 1, size)

    trace = v_space_descent(v0, omega, mu, eta, steps, ref=ref)
    resid = recursion_residual(trace)
    _check(resid < 1e-12, f"linear recursion residual {resid:.3e} exceeds 1e-12")
    rate = measure_contraction_rate(trace)
    _check(abs(rate - trace.theoretical_rate) < 1e-9,
           f"measured rate {rate!r} != |1 - eta mu| = {trace.theoretical_rate!r}")
    rows = [(k, d, (trace.rate_estimates[k - 1] if k else float("nan")), trace.theoretical_rate)
            for k, d in enumerate(trace.distances)]
    artifacts = [write_csv(out_dir / "contraction_trace.csv",
                           ("step", "distance", "rate", "theoretical_rate"), rows)]

    points = [rng.normal(0, 1, size) for _ in range(3)]
    hrows = []
    estimates = {}
    for a in (0.0, 0.3, 0.6, 1.0):
        w = alpha_weights(adv, t - 1.0, a).omega
        probe = hessian_probe(w, ref, mu, points)
        estimates[a] = probe.estimates
        _check(probe.max_diag_error < 1e-6, f"Hessian diagonal off mu by {probe.max_diag_error:.3e}")
        _check(probe.max_offdiag < 1e-8, f"Hessian off-diagonal {probe.max_offdiag:.3e}")
        for i, H in enumerate(probe.estimates):
            off = H - np.diag(np.diag(H))
            hrows.append((a, i, float(np.max(np.abs(np.diag(H) - mu))), float(np.max(np.abs(off)))))
    base = estimates[0.0]
    cross = max(float(np.max(np.abs(Ha - Hb))) for a in estimates for Ha, Hb in zip(estimates[a], base))
    _check(cross < 1e-6, f"Hessian differs across alpha by {cross:.3e}")
    artifacts.append(write_csv(out_dir / "hessian_probe.csv",
                               ("alpha", "probe", "max_diag_error", "max_offdiag"), hrows))

    margins = np.linspace(-20, 20, 401)
    offsets = np.linspace(0, 20, 401)
    prof = saturation_profile(beta, mu, margins, offsets)
    _check(abs(prof["dpo_max"] - beta / 4) < 1e-9, "DPO gradient maximum is not beta/4")
    _check(np.array_equal(prof["opo_grad"], mu * offsets), "OPO force is not mu * |v - v*|")
    srows = zip(prof["margin"], prof["dpo_grad"], prof["dpo_curvature"], prof["offset"], prof["opo_grad"])
    artifacts.append(write_csv(out_dir / "saturation_profile.csv",
                               ("margin", "dpo_grad", "dpo_curvature", "offset", "opo_grad"), srows))
    return artifacts


# -- bounds --------------------------------------------------------------------

def random_policy(rng, size, concentration=1.0):
    p = rng.dirichlet(np.full(size, concentration))
    p = np.maximum(p, 1e-12)
    return p / p.sum()


def log_approx_trials(trials, rng):
    rows = []
    for k in range(trials):
        size = int(rng.integers(1, 17))
        dinf = float(rng.uniform(0, 0.99))
        d = rng.uniform(-1, 1, size)
        d = d / np.max(np.abs(d)) * dinf
        rep = log_approx_error_check(d)
        rows.append((k, size, rep.delta_inf, float(rep.ratio_error.max()), rep.ratio_bound,
                     float(rep.square_error.max()), rep.square_bound))
    return rows


def tv_chi2_trials(trials, rng):
    rows = []
    for k in range(trials):
        size = int(rng.integers(2, 17))
        conc = float(rng.choice([0.2, 1.0, 5.0]))
        p, q = random_policy(rng, size, conc), random_policy(rng, size, conc)
        gap = tv_chi2_bound_gap(p, q)
        rows.append((k, size, gap))
    return rows


def dual_trials(trials, rng, n_random=10_000):
    rows = []
    for k in range(trials):
        size = int(rng.integers(2, 6))
        ref = random_policy(rng, size) * 0.9 + 0.1 / size
        omega = rng.normal(0, 1, size)
        eps = float(rng.uniform(0.01, 2.0))
        v, mu = lagrange_dual_solve(omega, ref, eps)
        constraint = abs(float(np.sum(ref * v.v**2)) - eps)
        closed = float(np.max(np.abs(v.v - opo_closed_form(omega, mu).v)))
        # random feasible points: directions scaled inside the radius
        z = rng.normal(0, 1, (n_random, size))
        norms = np.sqrt((z**2 * ref).sum(axis=1))
        radius = np.sqrt(eps) * rng.uniform(0, 1, n_random) ** (1 / size)
        cand = z / norms[:, None] * radius[:, None]
        best = float(np.max(cand @ (ref * omega)))
        opt = float(np.sum(ref * omega * v.v))
        rows.append((k, size, eps, mu, constraint, closed, best - opt))
    return rows


def run_bounds_suite(out_dir, trials=1000, seed=42):
    rng = np.random.default_rng(seed)
    out_dir = Path(out_dir)
    la = log_approx_trials(trials, rng)
    tv = tv_chi2_trials(trials, rng)
    du = dual_trials(max(1, trials // 5), rng)
    _check(all(r[3] <= r[4] and r[5] <= r[6] for r in la), "log-ratio bound violated")
    _check(all(r[2] >= -1e-12 for r in tv), "TV <= sqrt(chi2) bound violated")
    _check(all(r[4] < 1e-10 and r[5] < 1e-12 and r[6] <= 1e-9 for r in du), "dual equivalence failed")
    return [
        write_csv(out_dir / "log_approx_bounds.csv",
                  ("trial", "size", "delta_inf", "ratio_error", "ratio_bound", "square_error", "square_bound"), la),
        write_csv(out_dir / "tv_chi2_bounds.csv", ("trial", "size", "gap"), tv),
        write_csv(out_dir / "dual_equivalence.csv",
                  ("trial", "size", "epsilon", "mu", "constraint_residual", "closed_form_diff",
                   "best_random_minus_opt"), du),
    ]


def run_param_grad_trials(trials, rng):
    rows = []
    for k in range(trials):
        size = int(rng.integers(4, 17))
        rep = param_grad_check(rng.normal(0, 1, size), random_policy(rng, size) * 0.9 + 0.1 / size,
                               rng.normal(0, 1, size), float(rng.uniform(0.1, 3.0)))
        rows.append((k, size, rep.max_rel_discrepancy))
    return rows


# -- training ------------------------------------------------------------------

def metrics_rows(metrics):
    return [m.as_row() for m in metrics]


def run_train_suite(out_dir, env, cfg: TrainConfig):
    res = run_training(env, cfg)
    _check(len(res.metrics) == cfg.steps, "metrics length differs from steps")
    size = len(res.final_policy)
    for m in res.metrics:
        _check(all(math.isfinite(x) for x in m.as_row()), f"non-finite metric at step {m.step}")
        _check(-1e-12 <= m.entropy <= math.log(size) + 1e-12, f"entropy out of range at step {m.step}")
        _check(m.chi2_to_ref >= 0 and 0 <= m.tv_to_ref <= 1, f"divergence out of range at step {m.step}")
    path = write_csv(Path(out_dir) / "metrics.csv", METRIC_COLUMNS, metrics_rows(res.metrics))
    return res, [path]


def window(n_steps: int, frac: float = 0.2) -> int:
    return max(1, math.ceil(n_steps * frac))


def summarize(res) -> dict:
    g = np.array([m.grad_norm for m in res.metrics])
    r = np.array([m.mean_reward for m in res.metrics])
    w = window(len(g))
    return {
        "mean_reward_final20": float(r[-w:].mean()),
        "grad_norm_final20": float(g[-w:].mean()),
        "entropy_final": res.metrics[-1].entropy,
        "grad_norm_first20": float(g[:w].mean()),
    }


SUMMARY_COLUMNS = ("algo", "mean_reward_final20", "grad_norm_final20", "entropy_final",
                   "seed", "anchor", "grad_norm_first20", "entropy_ge_grpo")


def compare_runs(configs, env, out_dir):
    """Run each config; write per-run metrics, summary.csv and plotdata files.

    Returns (summary rows as dicts, artifact paths). A failing run aborts the
    comparison after writing a manifest that lists the completed runs.
    """
    configs = list(configs)
    if len(configs) < 2:
        raise ValueError("comparison needs at least two configurations")
    out_dir = Path(out_dir)
    artifacts, summary, results = [], [], []
    for cfg in configs:
        tag = f"{cfg.algo.value}_s{cfg.seed.value}"
        try:
            res = run_training(env, cfg)
        except Exception:
            write_manifest(out_dir, "compare", {"completed": " ".join(s["tag"] for s in summary)},
                           artifacts, status="aborted")
            raise
        artifacts.append(write_csv(out_dir / "runs" / tag / "metrics.csv", METRIC_COLUMNS,
                                   metrics_rows(res.metrics)))
        row = {"tag": tag, "algo": cfg.algo.value, "seed": cfg.seed.value,
               "anchor": cfg.anchor_mode.value, **summarize(res)}
        summary.append(row)
        results.append((cfg, res))

    grpo_entropy = {r["seed"]: r["entropy_final"] for r in summary if r["algo"] == Algo.GRPO.value}
    for r in summary:
        ref = grpo_entropy.get(r["seed"])
        if r["algo"] == Algo.GRPO.value or ref is None:
            r["entropy_ge_grpo"] = float("nan")
        else:
            r["entropy_ge_grpo"] = int(r["entropy_final"] >= ref)
            if not r["entropy_ge_grpo"]:
                log.info("entropy ordering exception: %s seed %s", r["algo"], r["seed"])
    artifacts.append(write_csv(out_dir / "summary.csv", SUMMARY_COLUMNS,
                               [[r[c] for c in SUMMARY_COLUMNS] for r in summary]))

    by_algo = {}
    for cfg, res in results:
        by_algo.setdefault(cfg.algo.value, []).append(res)
    for algo, runs in by_algo.items():
        steps = min(len(r.metrics) for r in runs)
        for metric in PLOT_METRICS:
            vals = np.mean([[getattr(m, metric) for m in r.metrics[:steps]] for r in runs], axis=0)
            artifacts.append(write_csv(out_dir / "plotdata" / f"{metric}_{algo}.csv", ("step", "value"),
                                       zip(range(1, steps + 1), vals)))
    return summary, artifacts

