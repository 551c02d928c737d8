"""Propagation of linearizations, covariances, and quadratic values.

Within a mode the variational equation dM/dt = D_x f(t, x(t)) M is integrated
jointly with the state on the same RK4 grid. Across events the saltation
matrix applies. Composing the two along a trajectory yields fundamental and
monodromy matrices; the same sandwich pushes covariances forward and value
matrices backward.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from .errors import NonFiniteState, NotPeriodic, SingularInputPenalty
from .saltation import SaltationResult, saltation_matrix
from .simulate import DEFAULT_STEP
from .system import HybridSystem, ModeId
from .trajectory import HybridTrajectory

TOL_STAB = 1e-9

SYM_TOL = 1e-12
PSD_TOL = 1e-10


def _sym(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.T)


def _joint_rk4_step(f, jac, t, x, M, h):
    """One RK4 step of the state and its variational matrix together."""
    a1 = jac(t, x)
    k1x = f(t, x)
    k1m = a1 @ M

    x2 = x + (0.5 * h) * k1x
    a2 = jac(t + 0.5 * h, x2)
    k2x = f(t + 0.5 * h, x2)
    k2m = a2 @ (M + (0.5 * h) * k1m)

    x3 = x + (0.5 * h) * k2x
    a3 = jac(t + 0.5 * h, x3)
    k3x = f(t + 0.5 * h, x3)
    k3m = a3 @ (M + (0.5 * h) * k2m)

    x4 = x + h * k3x
    a4 = jac(t + h, x4)
    k4x = f(t + h, x4)
    k4m = a4 @ (M + h * k3m)

    x_new = x + (h / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
    m_new = M + (h / 6.0) * (k1m + 2.0 * k2m + 2.0 * k3m + k4m)
    return x_new, m_new


def _variational(sys: HybridSystem, mode: ModeId, t0: float, x0: np.ndarray,
                 t1: float, step: float) -> tuple[np.ndarray, np.ndarray]:
    """Integrate state and variational matrix from t0 to t1; returns (x1, A)."""
    field = sys.modes[mode]
    f = field.f
    jac = field.jacobian
    x = np.asarray(x0, dtype=float).copy()
    M = np.eye(field.dim)
    span = t1 - t0
    if span == 0.0:
        return x, M
    n_sub = max(1, int(np.ceil(abs(span) / step)))
    h = span / n_sub
    t = t0
    for k in range(n_sub):
        x, M = _joint_rk4_step(f, jac, t, x, M, h)
        t = t0 + (k + 1) * h
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(M))):
        raise NonFiniteState(f"non-finite variational flow over [{t0}, {t1}] in mode {mode}")
    return x, M


def variational_flow(sys: HybridSystem, mode: ModeId, t0: float, x0: np.ndarray,
                     t1: float, step: float = DEFAULT_STEP) -> np.ndarray:
    """Linearized flow map A of one smooth mode over [t0, t1] around x0's orbit."""
    _, M = _variational(sys, mode, t0, x0, t1, step)
    return M


@dataclass(frozen=True)
class FundamentalMatrix:
    """Linearized flow along a hybrid trajectory, events included."""

    phi: np.ndarray
    t_start: float
    t_end: float
    n_events: int


def fundamental_matrix(sys: HybridSystem, traj: HybridTrajectory,
                       step: float = DEFAULT_STEP) -> FundamentalMatrix:
    """Compose per-segment variational flows with saltation matrices."""
    phi = np.eye(sys.dim(traj.segments[0].mode))
    for k, seg in enumerate(traj.segments):
        if k > 0:
            xi = saltation_matrix(sys, traj.events[k - 1]).xi
            phi = xi @ phi
        if seg.times.size > 1:
            A = variational_flow(sys, seg.mode, seg.t_start, seg.states[0], seg.t_end, step)
            phi = A @ phi
    return FundamentalMatrix(
        phi=phi, t_start=traj.t_start, t_end=traj.t_end, n_events=len(traj.events)
    )


@dataclass(frozen=True)
class MonodromyReport:
    """Floquet analysis of a closed hybrid trajectory.

    multipliers are eigenvalues of phi sorted by decreasing magnitude;
    exponents satisfy sigma = exp(mu * period); lyapunov = Re(mu).
    """

    phi: np.ndarray
    multipliers: np.ndarray
    exponents: np.ndarray
    lyapunov: np.ndarray
    stable: bool
    verdict: str
    period: float

    def to_dict(self) -> dict:
        return {
            "phi": self.phi.tolist(),
            "multipliers": [[float(s.real), float(s.imag)] for s in self.multipliers],
            "exponents": [[float(m.real), float(m.imag)] for m in self.exponents],
            "lyapunov": [float(v) for v in self.lyapunov],
            "stable": self.stable,
            "verdict": self.verdict,
            "period": self.period,
        }


def monodromy(sys: HybridSystem, traj: HybridTrajectory, tol_periodic: float = 1e-6,
              tol_stab: float = TOL_STAB, step: float = DEFAULT_STEP) -> MonodromyReport:
    """Monodromy matrix and Floquet stability verdict for a closed trajectory."""
    first, last = traj.segments[0], traj.segments[-1]
    if first.mode != last.mode:
        raise NotPeriodic(
            f"trajectory starts in mode {first.mode} but ends in mode {last.mode}"
        )
    gap = float(np.linalg.norm(traj.x_end - traj.x_start))
    if gap > tol_periodic * (1.0 + float(np.linalg.norm(traj.x_start))):
        raise NotPeriodic(f"endpoint gap {gap:.3e} exceeds tol_periodic={tol_periodic}")
    period = traj.t_end - traj.t_start
    if period <= 0.0:
        raise NotPeriodic("trajectory spans zero time")

    fund = fundamental_matrix(sys, traj, step)
    sigma = np.linalg.eigvals(fund.phi)
    order = np.argsort(-np.abs(sigma))
    sigma = sigma[order]
    with np.errstate(divide="ignore"):
        mu = np.log(sigma.astype(complex)) / period
    mags = np.abs(sigma)
    stable = bool(np.all(mags < 1.0 - tol_stab))
    if np.any(mags > 1.0 + tol_stab):
        verdict = "unstable"
    elif np.any(np.abs(mags - 1.0) <= tol_stab):
        verdict = "marginal"
    else:
        verdict = "stable"
    return MonodromyReport(
        phi=fund.phi,
        multipliers=sigma,
        exponents=mu,
        lyapunov=mu.real.copy(),
        stable=stable,
        verdict=verdict,
        period=period,
    )


def _check_sym_psd(mat: np.ndarray, label: str) -> None:
    scale = max(1.0, float(np.abs(mat).max()))
    asym = float(np.abs(mat - mat.T).max())
    if asym > SYM_TOL * scale:
        raise ValueError(f"{label} asymmetry {asym:.3e} exceeds {SYM_TOL}*scale")
    min_eig = float(np.linalg.eigvalsh(_sym(mat)).min())
    if min_eig < -PSD_TOL * scale:
        raise ValueError(f"{label} min eigenvalue {min_eig:.3e} below -{PSD_TOL}*scale")


@dataclass(frozen=True)
class CovarianceState:
    """Symmetric PSD second moment attached to a trajectory sample."""

    t: float
    mode: ModeId
    sigma: np.ndarray

    def __post_init__(self):
        _check_sym_psd(self.sigma, "covariance")


@dataclass(frozen=True)
class ValueState:
    """Symmetric PSD quadratic value matrix attached to a time and mode."""

    t: float
    mode: ModeId
    p: np.ndarray

    def __post_init__(self):
        _check_sym_psd(self.p, "value matrix")


def propagate_covariance(sys: HybridSystem, traj: HybridTrajectory,
                         sigma0: np.ndarray, step: float = DEFAULT_STEP) -> list[CovarianceState]:
    """Push a covariance along a trajectory: A Sigma A^T in segments,
    Xi Sigma Xi^T at events. One output per trajectory sample."""
    sigma = _sym(np.asarray(sigma0, dtype=float))
    out: list[CovarianceState] = []
    for k, seg in enumerate(traj.segments):
        if k > 0:
            xi = saltation_matrix(sys, traj.events[k - 1]).xi
            sigma = _sym(xi @ sigma @ xi.T)
        out.append(CovarianceState(t=float(seg.times[0]), mode=seg.mode, sigma=sigma.copy()))
        for i in range(seg.times.size - 1):
            t0, t1 = float(seg.times[i]), float(seg.times[i + 1])
            A = variational_flow(sys, seg.mode, t0, seg.states[i], t1, step)
            sigma = _sym(A @ sigma @ A.T)
            out.append(CovarianceState(t=t1, mode=seg.mode, sigma=sigma.copy()))
    return out


def riccati_jump(
    xi: SaltationResult,
    p_plus: ValueState,
    q_stage: Optional[np.ndarray] = None,
    mode_minus: Optional[ModeId] = None,
) -> ValueState:
    """Map a post-event value matrix to the pre-event side: P- = Q + Xi^T P+ Xi."""
    n_to, n_from = xi.xi.shape
    p = np.asarray(p_plus.p, dtype=float)
    if p.shape != (n_to, n_to):
        raise ValueError(f"P+ shape {p.shape} does not match saltation output dim {n_to}")
    p_minus = xi.xi.T @ p @ xi.xi
    if q_stage is not None:
        q = np.asarray(q_stage, dtype=float)
        if q.shape != (n_from, n_from):
            raise ValueError(f"q_stage shape {q.shape} does not match input dim {n_from}")
        p_minus = p_minus + q
    mode = p_plus.mode if mode_minus is None else mode_minus
    return ValueState(t=p_plus.t, mode=mode, p=_sym(p_minus))


MatrixLike = Union[np.ndarray, Callable[[float], np.ndarray]]


def _as_matrix_fn(m: MatrixLike) -> Callable[[float], np.ndarray]:
    if callable(m):
        return lambda t: np.asarray(m(t), dtype=float)
    arr = np.asarray(m, dtype=float)
    return lambda t: arr


@dataclass(frozen=True)
class LqrSolution:
    """Backward-pass output: per-interval gains and per-node value matrices.

    gain_times[i] is the left endpoint of the interval gains[i] acts on;
    node_times/node_modes/values align with the flattened trajectory samples
    (event times appear twice: pre- and post-jump).
    """

    gain_times: np.ndarray
    gain_ends: np.ndarray
    gains: tuple[np.ndarray, ...]
    node_times: np.ndarray
    node_modes: tuple[ModeId, ...]
    values: tuple[np.ndarray, ...]

    def gain_at(self, t: float) -> np.ndarray:
        idx = int(np.searchsorted(self.gain_times, t, side="right")) - 1
        idx = min(max(idx, 0), len(self.gains) - 1)
        return self.gains[idx]

    def value_at_start(self) -> np.ndarray:
        return self.values[0]


def hybrid_lqr_backward(
    sys: HybridSystem,
    traj: HybridTrajectory,
    Q: MatrixLike,
    V: MatrixLike,
    B: MatrixLike,
    P_terminal: np.ndarray,
    step: float = DEFAULT_STEP,
) -> LqrSolution:
    """Finite-horizon LQR along a hybrid trajectory.

    Discretization per grid interval [t_k, t_k+1): A_k from the variational
    flow, B_k = dt B(t_k), Q_k = dt Q(t_k), V_k = dt V(t_k). Events are
    zero-duration riccati_jump steps between segments; because segment grids
    end exactly at event times this realizes the smooth-jump-smooth sandwich.
    """
    q_fn, v_fn, b_fn = _as_matrix_fn(Q), _as_matrix_fn(V), _as_matrix_fn(B)

    # forward sweep: assemble nodes and steps
    node_times: list[float] = []
    node_modes: list[ModeId] = []
    steps: list[tuple] = []  # ("flow", t0, dt, A, B_k, Q_k, V_k) | ("jump", event_idx)
    for k, seg in enumerate(traj.segments):
        if k > 0:
            steps.append(("jump", k - 1))
        node_times.append(float(seg.times[0]))
        node_modes.append(seg.mode)
        for i in range(seg.times.size - 1):
            t0, t1 = float(seg.times[i]), float(seg.times[i + 1])
            dt = t1 - t0
            A = variational_flow(sys, seg.mode, t0, seg.states[i], t1, step)
            steps.append(("flow", t0, dt, A, dt * b_fn(t0), dt * q_fn(t0), dt * v_fn(t0)))
            node_times.append(t1)
            node_modes.append(seg.mode)

    p = _sym(np.asarray(P_terminal, dtype=float))
    values_rev: list[np.ndarray] = [p.copy()]
    gains_rev: list[np.ndarray] = []
    gain_times_rev: list[float] = []
    gain_ends_rev: list[float] = []

    for entry in reversed(steps):
        if entry[0] == "jump":
            ev = traj.events[entry[1]]
            res = saltation_matrix(sys, ev)
            p = _sym(res.xi.T @ p @ res.xi)
            values_rev.append(p.copy())
            continue
        _, t0, dt, A, B_k, Q_k, V_k = entry
        S = V_k + B_k.T @ p @ B_k
        try:
            np.linalg.cholesky(_sym(S))
        except np.linalg.LinAlgError as exc:
            raise SingularInputPenalty(
                f"input penalty not positive definite on interval starting t={t0}"
            ) from exc
        K = np.linalg.solve(_sym(S), B_k.T @ p @ A)
        p = _sym(Q_k + A.T @ p @ (A - B_k @ K))
        gains_rev.append(K)
        gain_times_rev.append(t0)
        gain_ends_rev.append(t0 + dt)
        values_rev.append(p.copy())

    return LqrSolution(
        gain_times=np.asarray(gain_times_rev[::-1], dtype=float),
        gain_ends=np.asarray(gain_ends_rev[::-1], dtype=float),
        gains=tuple(gains_rev[::-1]),
        node_times=np.asarray(node_times, dtype=float),
        node_modes=tuple(node_modes),
        values=tuple(values_rev[::-1]),
    )
