"""Function-space experiments on the OPO objective.

Distances are measured in the L2(pi_ref) norm. When no reference is given,
the uniform measure over the coordinates is used.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import RatioField, as_reference, softmax
from .objectives import (
    dpo_local_curvature,
    dpo_margin_grad,
    opo_closed_form,
    opo_grad_v,
    opo_loss_ratio,
    ratio_jacobian,
)

DISTANCE_FLOOR = 1e-13
GRAD_FD_STEP = 1e-5
HESSIAN_FD_STEP = 1e-4


def _weights(ref, size):
    if ref is None:
        return np.full(size, 1.0 / size)
    return as_reference(ref)


def l2_distance(a, b, ref=None) -> float:
    d = np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)
    return float(np.sqrt(np.sum(_weights(ref, d.size) * d**2)))


@dataclass
class DescentTrace:
    iterates: list
    distances: list
    rate_estimates: list
    equilibrium: RatioField
    mu: float
    eta: float
    diverging: bool = field(default=False)

    @property
    def theoretical_rate(self) -> float:
        return abs(1.0 - self.eta * self.mu)


def v_space_descent(v0, omega, mu: float, eta: float, steps: int, ref=None) -> DescentTrace:
    """Plain gradient descent v <- v - eta * grad_v on the OPO objective."""
    if steps < 1:
        raise ValueError("steps must be >= 1")
    v_star = opo_closed_form(omega, mu)
    v = np.asarray(v0, dtype=np.float64).copy()
    iterates = [RatioField(v)]
    distances = [l2_distance(v, v_star, ref)]
    for _ in range(steps):
        v = v - eta * opo_grad_v(v, omega, mu).v
        iterates.append(RatioField(v))
        distances.append(l2_distance(v, v_star, ref))
    rates = [b / a if a > 0 else float("nan") for a, b in zip(distances, distances[1:])]
    return DescentTrace(iterates, distances, rates, v_star, mu, eta,
                        diverging=abs(1.0 - eta * mu) > 1.0)


def recursion_residual(trace: DescentTrace) -> float:
    """max_k ||(v_{k+1} - v*) - (1 - eta mu)(v_k - v*)||_inf."""
    vs = trace.equilibrium.v
    r = 1.0 - trace.eta * trace.mu
    worst = 0.0
    for a, b in zip(trace.iterates, trace.iterates[1:]):
        worst = max(worst, float(np.max(np.abs((b.v - vs) - r * (a.v - vs)))))
    return worst


def measure_contraction_rate(trace: DescentTrace) -> float:
    """Geometric mean of successive distance ratios above the numerical floor."""
    d = trace.distances
    ratios = []
    for a, b in zip(d, d[1:]):
        if a <= DISTANCE_FLOOR:
            break
        ratios.append(b / a)
    if not ratios:
        raise ValueError("trace too short or already at equilibrium")
    if any(r == 0 for r in ratios):
        return 0.0
    return float(np.exp(np.mean(np.log(ratios))))


def steps_to_tolerance(d0: float, rate: float, tol: float = 1e-10) -> int:
    if d0 <= tol:
        return 0
    if rate == 0:
        return 1
    return math.ceil(math.log(tol / d0) / math.log(rate))


@dataclass
class HessianProbe:
    estimates: list
    max_diag_error: float
    max_offdiag: float
    mu: float


def hessian_probe(omega, ref, mu: float, probe_points, step: float = HESSIAN_FD_STEP) -> HessianProbe:
    """Finite-difference Hessian of the OPO loss in L2(pi_ref) at each probe point.

    The coordinate gradient is taken by complex-step differentiation of the
    loss itself, then differenced centrally and divided row-wise by pi_ref
    to express it in the L2(pi_ref) geometry.
    """
    if not step > 0:
        raise ValueError("degenerate finite-difference step")
    q = as_reference(ref)
    n = q.size
    cs = 1e-30

    def coord_grad(v):
        g = np.empty(n)
        for y in range(n):
            z = v.astype(np.complex128)
            z[y] += 1j * cs
            g[y] = opo_loss_ratio(z, omega, q, mu).imag / cs
        return g

    estimates = []
    diag_err = 0.0
    offdiag = 0.0
    for point in probe_points:
        v = np.asarray(point, dtype=np.float64)
        if not np.all(np.isfinite(v)):
            raise ValueError("probe point must be finite")
        H = np.empty((n, n))
        for z in range(n):
            e = np.zeros(n)
            e[z] = step
            H[:, z] = (coord_grad(v + e) - coord_grad(v - e)) / (2 * step)
        H = H / q[:, None]
        estimates.append(H)
        diag_err = max(diag_err, float(np.max(np.abs(np.diag(H) - mu))))
        off = H - np.diag(np.diag(H))
        offdiag = max(offdiag, float(np.max(np.abs(off))))
    return HessianProbe(estimates, diag_err, offdiag, mu)


def saturation_profile(beta: float, mu: float, margins, v_offsets) -> dict:
    """DPO gradient/curvature against margin, and OPO force against distance to v*."""
    margins = np.asarray(margins, dtype=np.float64)
    offsets = np.abs(np.asarray(v_offsets, dtype=np.float64))
    if margins.size == 0 or offsets.size == 0:
        raise ValueError("grids must be non-empty")
    dpo = dpo_margin_grad(margins, beta)
    return {
        "margin": margins,
        "dpo_grad": np.atleast_1d(dpo),
        "dpo_curvature": np.atleast_1d(dpo_local_curvature(margins, beta)),
        "offset": offsets,
        "opo_grad": mu * offsets,
        "dpo_max": float(np.max(dpo)),
    }


@dataclass
class LogApproxReport:
    delta_inf: float
    ratio_error: np.ndarray
    square_error: np.ndarray
    ratio_bound: float
    square_bound: float

    @property
    def holds(self) -> bool:
        return bool(np.all(self.ratio_error <= self.ratio_bound)
                    and np.all(self.square_error <= self.square_bound))


def log_approx_error_check(delta) -> LogApproxReport:
    """Compare v = exp(delta) - 1 with delta against the trust-region bounds."""
    d = np.asarray(delta, dtype=np.float64).reshape(-1)
    dinf = float(np.max(np.abs(d))) if d.size else 0.0
    if dinf >= 1:
        raise ValueError(f"||delta||_inf = {dinf} is outside the trust-region regime (< 1)")
    v = np.expm1(d)
    report = LogApproxReport(
        delta_inf=dinf,
        ratio_error=np.abs(v - d),
        square_error=np.abs(v**2 - d**2),
        ratio_bound=0.5 * dinf**2 * math.exp(dinf),
        square_bound=dinf**3 * math.exp(2 * dinf),
    )
    if not report.holds:
        raise AssertionError("log-ratio approximation bound violated")
    return report


@dataclass
class ParamGradReport:
    chain_rule: np.ndarray
    finite_difference: np.ndarray
    max_rel_discrepancy: float


def param_grad_check(logits, ref, omega, mu: float, step: float = GRAD_FD_STEP) -> ParamGradReport:
    """Chain rule E_ref[grad_v L * grad_theta v] against central differences in theta."""
    theta = np.asarray(logits, dtype=np.float64)
    q = as_reference(ref)

    def loss(th):
        return opo_loss_ratio(softmax(th) / q - 1.0, omega, q, mu)

    v = softmax(theta) / q - 1.0
    gv = opo_grad_v(v, omega, mu).v
    analytic = (q * gv) @ ratio_jacobian(theta, q)

    fd = np.empty_like(theta)
    for j in range(theta.size):
        e = np.zeros_like(theta)
        e[j] = step
        fd[j] = (loss(theta + e) - loss(theta - e)) / (2 * step)

    scale = max(float(np.max(np.abs(analytic))), float(np.max(np.abs(fd))), 1e-12)
    rel = float(np.max(np.abs(analytic - fd)) / scale)
    return ParamGradReport(analytic, fd, rel)
