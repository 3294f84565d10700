"""Generic first-order solvers: FISTA with line search and restarting, and
primal-dual hybrid gradient with adaptive step backtracking.

Both operate on flat complex vectors through small oracle bundles; all
problem-specific detail (operators, proxes, data) stays with the caller.
Runs are deterministic: identical inputs produce bit-identical traces.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .prox import prox_conjugate


class SolverError(RuntimeError):
    """Raised on non-finite values or a line search that cannot make progress."""


def re_inner(a, b) -> float:
    """Real inner product Re<a, b>, the one complex-variable calculus uses."""
    return float(np.real(np.vdot(a, b)))


@dataclass
class SmoothFn:
    """Differentiable objective part: value and gradient oracles."""

    value: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]


@dataclass
class ProxFn:
    """Proximable objective part.

    ``prox(v, t)`` returns argmin_u g(u) + ||u - v||^2 / (2t); ``value`` may
    return inf for indicator functions.
    """

    value: Callable[[np.ndarray], float]
    prox: Callable[[np.ndarray, float], np.ndarray]


ZERO_PROX = ProxFn(value=lambda x: 0.0, prox=lambda v, t: v)


@dataclass
class LinOp:
    """Linear operator given by its forward and adjoint actions."""

    apply: Callable[[np.ndarray], np.ndarray]
    adjoint: Callable[[np.ndarray], np.ndarray]
    norm_hint: Optional[float] = None


def estimate_opnorm(op: LinOp, probe: np.ndarray, iters: int = 20) -> float:
    """Largest singular value of ``op`` by power iteration on A*A."""
    v = np.asarray(probe, dtype=np.complex128)
    nrm = np.linalg.norm(v)
    if nrm == 0:
        raise ValueError("probe vector must be nonzero")
    v = v / nrm
    lam = 0.0
    for _ in range(iters):
        w = op.adjoint(op.apply(v))
        lam = re_inner(v, w)
        nw = np.linalg.norm(w)
        if nw == 0:
            return 0.0
        v = w / nw
    return float(np.sqrt(max(lam, 0.0)))


@dataclass
class FistaParams:
    t0: float = 1.0
    shrink: float = 0.9  # backtracking factor r in (0,1)
    grow: float = 1.25  # step growth factor s > 1
    max_iters: int = 100
    min_step: float = 1e-14
    early_stop: Optional[float] = None  # relative-change exit, off by default

    def __post_init__(self):
        if not (self.t0 > 0 and 0 < self.shrink < 1 and self.grow > 1 and self.max_iters >= 1):
            raise ValueError("invalid FISTA parameters")


@dataclass
class FistaTrace:
    objective: list = field(default_factory=list)
    step: list = field(default_factory=list)
    restarted: list = field(default_factory=list)
    backtracks: int = 0


def fista_ls_restart(f: SmoothFn, g: ProxFn, x0, params: FistaParams):
    """Accelerated proximal gradient with backtracking line search and
    gradient-based adaptive restart.

    Per iteration the trial step grows by ``grow`` and is cut by ``shrink``
    until f(x) <= f(y) + Re<grad f(y), x - y> + ||x - y||^2 / (2t). When
    Re<grad f(y), x - y> > 0 the momentum is reset (theta = 1 next round,
    v = x).
    """
    x = np.array(x0, dtype=np.complex128).reshape(-1)
    v = x.copy()
    t_prev = params.t0
    theta_prev = 1.0  # only consulted if backtracking occurs before the first accept
    gamma = True
    trace = FistaTrace()

    for k in range(params.max_iters):
        x_prev = x
        t = params.grow * t_prev
        while True:
            if gamma:
                theta = 1.0
                gamma = False
            else:
                # positive root of t_prev*theta^2 = t*theta_prev^2*(1 - theta)
                b = t * theta_prev * theta_prev
                theta = (-b + np.sqrt(b * b + 4.0 * t_prev * b)) / (2.0 * t_prev)
            y = (1.0 - theta) * x_prev + theta * v
            fy = f.value(y)
            grad_y = f.grad(y)
            x = g.prox(y - t * grad_y, t)
            fx = f.value(x)
            if not (np.isfinite(fx) and np.isfinite(fy)):
                raise SolverError(
                    f"non-finite objective at iteration {k}: f(x)={fx}, f(y)={fy}"
                )
            dx = x - y
            gap = re_inner(grad_y, dx)
            if fx <= fy + gap + re_inner(dx, dx) / (2.0 * t):
                break
            t *= params.shrink
            trace.backtracks += 1
            if t < params.min_step:
                raise SolverError(
                    f"line search step {t:.3e} below floor at iteration {k}"
                )
        # sufficient decrease holds at every accepted step
        assert fx <= fy + gap + re_inner(dx, dx) / (2.0 * t)
        if gap > 0.0:
            gamma = True
            v = x.copy()
            trace.restarted.append(True)
        else:
            v = x_prev + (x - x_prev) / theta
            trace.restarted.append(False)
        t_prev = t
        theta_prev = theta
        trace.step.append(t)
        trace.objective.append(fx + g.value(x))
        if params.early_stop is not None:
            denom = np.linalg.norm(x_prev)
            if denom > 0 and np.linalg.norm(x - x_prev) < params.early_stop * denom:
                break
    return x, trace


@dataclass
class PdhgParams:
    tau0: float = 1.0
    beta: float = 1.0
    mu: float = 0.7  # step shrink factor in (0,1)
    delta: float = 0.99  # acceptance tolerance in (0,1)
    max_iters: int = 100
    inner_cap: int = 50
    early_stop: Optional[float] = None

    def __post_init__(self):
        ok = (
            self.tau0 > 0
            and self.beta > 0
            and 0 < self.mu < 1
            and 0 < self.delta < 1
            and self.max_iters >= 1
        )
        if not ok:
            raise ValueError("invalid PDHG parameters")


@dataclass
class PdhgTrace:
    tau: list = field(default_factory=list)
    rel_change: list = field(default_factory=list)
    inner_counts: list = field(default_factory=list)
    tau_capped: list = field(default_factory=list)


def pdhg_adaptive(fprox: ProxFn, gprox: ProxFn, A: LinOp, x0, y0, params: PdhgParams):
    """Primal-dual hybrid gradient for min f(x) + g(Ax) with backtracked steps.

    Each iteration proxes the primal with the current tau, then grows tau to
    tau*sqrt(1 + theta) and shrinks it by ``mu`` until
    tau*sqrt(beta)*||A*(y+ - y)|| <= delta*||y+ - y||. The dual prox comes
    from ``gprox`` via the Moreau identity. If the backtracking loop hits
    ``inner_cap`` the current tau is accepted and flagged in the trace.
    """
    x = np.array(x0, dtype=np.complex128).reshape(-1)
    y = np.array(y0, dtype=np.complex128).reshape(-1)
    tau = params.tau0
    theta = 1.0
    beta = params.beta
    sqrt_beta = np.sqrt(beta)
    Aty = A.adjoint(y)
    trace = PdhgTrace()

    for k in range(params.max_iters):
        x_new = fprox.prox(x - tau * Aty, tau)
        tau_new = tau * np.sqrt(1.0 + theta)
        inner = 0
        capped = False
        while True:
            inner += 1
            theta_new = tau_new / tau
            x_bar = x_new + theta_new * (x_new - x)
            sigma = beta * tau_new
            y_new = prox_conjugate(gprox.prox, y + sigma * A.apply(x_bar), sigma)
            Aty_new = A.adjoint(y_new)
            lhs = tau_new * sqrt_beta * np.linalg.norm(Aty_new - Aty)
            rhs = params.delta * np.linalg.norm(y_new - y)
            if lhs <= rhs:
                break
            if inner >= params.inner_cap:
                capped = True
                break
            tau_new *= params.mu
        if not capped:
            # acceptance condition holds at every accepted outer step
            assert lhs <= rhs
        if not np.isfinite(x_new).all():
            raise SolverError(f"non-finite primal iterate at iteration {k}")
        denom = np.linalg.norm(x)
        step_norm = np.linalg.norm(x_new - x)
        rel = float(step_norm / denom) if denom > 0 else (0.0 if step_norm == 0 else np.inf)
        trace.tau.append(tau_new)
        trace.rel_change.append(rel)
        trace.inner_counts.append(inner)
        trace.tau_capped.append(capped)
        x, y, Aty = x_new, y_new, Aty_new
        tau, theta = tau_new, theta_new
        if params.early_stop is not None and rel < params.early_stop:
            break
    return x, trace
