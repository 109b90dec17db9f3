"""Lane-centering NMPC producing steering-wheel torque under a haptic
authority budget.

Direct multiple shooting over the single-track + column model (one RK4
step per stage), Gauss-Newton SQP on a condensed dense QP. The torque
sequence is the decision variable; torque magnitude and rate bounds are
hard, lateral-error and yaw-rate corridors are soft through an L1 exact
penalty. The authority scalar both caps the torque (|T| <= lambda) and
scales the torque build-up stiffness: the rate decision the smoothness
weight sees is (T(k) - T(k-1)) / (lambda * T_s), so larger authority makes
the same torque ramp cheaper.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .kernels import EPSI, EY, NX, OMEGA, PSI, R, THETA, X, Y
from .qp import solve_qp
from .steering import SteeringParams, variable_damping
from .vehicle import Path, RoadFrame, VehicleParams, VehicleState, params_array

# indices of the tracked outputs within the state vector
_TRACK = np.array([X, Y, PSI, R])

# soft rows further than this from their bound are left out of the QP
# working model (their penalty is still scored by the merit function)
_EY_MARGIN = 0.5
_R_MARGIN = 0.15


@dataclass
class NmpcConfig:
    n_stages: int = 30
    t_s: float = 0.05
    w_x: tuple[float, float, float, float] = (50.0, 50.0, 50.0, 350.0)
    w_u: float = 0.15
    w_du: float = 0.25
    yaw_rate_bound: float = 0.4
    du_bound: float = 100.0          # torque rate bound (N m / s)
    e_y_lower: float = -1.5
    e_y_upper: float = 5.0
    slack_weight: float = 1e4
    max_sqp_iters: int = 25
    kkt_tol: float = 1e-7

    def __post_init__(self):
        if self.n_stages < 2 or self.t_s <= 0:
            raise ValueError("need n_stages >= 2 and t_s > 0")
        if any(w < 0 for w in self.w_x) or self.w_u < 0 or self.w_du < 0:
            raise ValueError("weights must be non-negative")

    @classmethod
    def corrective(cls) -> "NmpcConfig":
        return cls(w_x=(50.0, 50.0, 50.0, 350.0), w_u=0.15, w_du=0.25,
                   du_bound=100.0, e_y_lower=-1.5, e_y_upper=5.0)

    @classmethod
    def evasive(cls) -> "NmpcConfig":
        return cls(w_x=(40.0, 40.0, 40.0, 300.0), w_u=0.2, w_du=0.2,
                   du_bound=400.0, e_y_lower=-1.5, e_y_upper=1.5)


@dataclass
class AuthorityCommand:
    lam: float
    e_y_upper: np.ndarray | None = None   # per-stage upper bound (m)

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("authority must be non-negative")
        if self.e_y_upper is not None:
            self.e_y_upper = np.asarray(self.e_y_upper, dtype=float)
            if not np.all(np.isfinite(self.e_y_upper)):
                raise ValueError("stage bounds must be finite")


@dataclass
class Reference:
    x_r: np.ndarray
    y_r: np.ndarray
    psi_r: np.ndarray
    r_r: np.ndarray
    rho: np.ndarray
    exhausted: bool = False

    def stacked(self) -> np.ndarray:
        return np.stack([self.x_r, self.y_r, self.psi_r, self.r_r], axis=1)


@dataclass
class ControlOutput:
    t_mpc: float
    torques: np.ndarray                 # full stage-torque sequence
    predicted_states: np.ndarray        # (N, 9): X Y Psi r e_y e_psi theta omega T
    solver_status: str = "converged"
    sqp_iterations: int = 0
    kkt_residual: float = 0.0
    slack_max: float = 0.0


def build_reference(path: Path, state: VehicleState,
                    config: NmpcConfig) -> Reference:
    """Sample the lane-center path ahead at arc-length steps of v_x * T_s."""
    if state.v_x <= kernels.V_X_MIN:
        raise ValueError("reference requires forward motion")
    s0, _, _, _, _ = path.project(state.x, state.y)
    ds = state.v_x * config.t_s
    n = config.n_stages
    xs = np.empty(n)
    ys = np.empty(n)
    psis = np.empty(n)
    rhos = np.empty(n)
    exhausted = False
    for k in range(n):
        s_k = s0 + (k + 1) * ds
        if s_k > path.length:
            exhausted = True
        xs[k], ys[k], psis[k], rhos[k] = path.sample(s_k)
    return Reference(x_r=xs, y_r=ys, psi_r=psis, r_r=rhos * state.v_x,
                     rho=rhos, exhausted=exhausted)


class NmpcSolver:
    """One solver instance per simulation; holds workspace and model params."""

    def __init__(self, config: NmpcConfig,
                 vehicle: VehicleParams | None = None,
                 steering: SteeringParams | None = None):
        self.config = config
        self.vehicle = vehicle or VehicleParams()
        self.steering = steering or SteeringParams()
        self._p = params_array(self.vehicle, self.steering)

    def _bounds(self, authority: AuthorityCommand) -> np.ndarray:
        n = self.config.n_stages
        if authority.e_y_upper is not None:
            ub = np.asarray(authority.e_y_upper, dtype=float)
            if len(ub) != n:
                raise ValueError("per-stage bound vector length != horizon")
            return ub
        return np.full(n, self.config.e_y_upper)

    def solve(self, state: VehicleState, road: RoadFrame,
              reference: Reference, authority: AuthorityCommand,
              warm: ControlOutput | None = None,
              a_x: float = 0.0) -> ControlOutput:
        cfg = self.config
        n = cfg.n_stages
        lam = float(authority.lam)
        x0 = state.as_array(road)
        if not np.all(np.isfinite(x0)):
            raise ValueError("non-finite state handed to the solver")

        ey_ub = self._bounds(authority)
        rho_seq = np.ascontiguousarray(reference.rho)
        t_prev = float(warm.t_mpc) if warm is not None else 0.0

        if lam <= 0.0:
            u = np.zeros(n)
            xs = kernels.rollout(x0, u, a_x, self.steering.b, rho_seq,
                                 self._p, cfg.t_s)
            return ControlOutput(
                t_mpc=0.0, torques=u,
                predicted_states=self._predicted(xs, u),
                solver_status="converged", sqp_iterations=0,
                kkt_residual=0.0,
                slack_max=self._violation(xs, ey_ub))

        b_lam = variable_damping(lam, self.steering.b)
        rate_step = cfg.du_bound * cfg.t_s
        # initial torque must sit inside the new authority box or the rate
        # window from it could exclude every admissible sequence
        t_prev_eff = float(np.clip(t_prev, -lam, lam))

        u = self._warm_start(warm, n, lam, rate_step, t_prev_eff)
        ref = reference.stacked()
        w_sqrt = np.sqrt(np.asarray(cfg.w_x))
        wu_sqrt = np.sqrt(cfg.w_u)
        wdu_sqrt = np.sqrt(cfg.w_du)
        du_scale = 1.0 / (lam * cfg.t_s)
        rho_pen = cfg.slack_weight

        D = np.eye(n) - np.eye(n, k=-1)   # difference operator, u[-1] external

        def merit(u_try, xs_try):
            res = self._residuals(xs_try, u_try, ref, w_sqrt, wu_sqrt,
                                  wdu_sqrt, du_scale, t_prev_eff)
            pen = self._penalty(xs_try, ey_ub)
            return 0.5 * float(res @ res) + rho_pen * pen

        xs, S = kernels.rollout_with_sens(x0, u, a_x, b_lam, rho_seq,
                                          self._p, cfg.t_s)
        phi = merit(u, xs)
        status = "max_iterations"
        kkt = np.inf
        iters = 0

        for _ in range(cfg.max_sqp_iters):
            iters += 1
            d, pred_decrease = self._qp_step(
                u, xs, S, ref, w_sqrt, wu_sqrt, wdu_sqrt, du_scale,
                lam, rate_step, t_prev_eff, ey_ub, D)
            kkt = pred_decrease / (1.0 + phi)
            if kkt < cfg.kkt_tol or \
                    np.max(np.abs(d)) < 1e-9 * (1.0 + np.max(np.abs(u))):
                status = "converged"
                break
            accepted = False
            alpha = 1.0
            for _ls in range(9):
                u_try = u + alpha * d
                xs_try = kernels.rollout(x0, u_try, a_x, b_lam, rho_seq,
                                         self._p, cfg.t_s)
                phi_try = merit(u_try, xs_try)
                if phi_try <= phi - 1e-4 * alpha * pred_decrease:
                    u = u_try
                    xs, S = kernels.rollout_with_sens(
                        x0, u, a_x, b_lam, rho_seq, self._p, cfg.t_s)
                    phi = phi_try
                    accepted = True
                    break
                alpha *= 0.5
            if not accepted:
                status = "degraded"
                break

        # restore exact hard-bound feasibility (removes solver-precision
        # residue; moves u by at most ~1e-8)
        u = self._restore_feasible(u, lam, rate_step, t_prev_eff)
        return ControlOutput(
            t_mpc=float(u[0]), torques=u,
            predicted_states=self._predicted(xs, u),
            solver_status=status, sqp_iterations=iters,
            kkt_residual=float(kkt),
            slack_max=self._violation(xs, ey_ub))

    # -- pieces ---------------------------------------------------------

    def _warm_start(self, warm, n, lam, rate_step, t_prev_eff):
        if warm is not None and len(warm.torques) == n:
            u = np.empty(n)
            u[:-1] = warm.torques[1:]
            u[-1] = warm.torques[-1]
        else:
            u = np.zeros(n)
        return self._restore_feasible(u, lam, rate_step, t_prev_eff)

    @staticmethod
    def _restore_feasible(u, lam, rate_step, t_prev_eff):
        """Forward pass clamping each torque into the box and rate window."""
        out = np.clip(u, -lam, lam)
        prev = t_prev_eff
        for k in range(len(out)):
            lo = max(-lam, prev - rate_step)
            hi = min(lam, prev + rate_step)
            out[k] = min(max(out[k], lo), hi)
            prev = out[k]
        return out

    def _residuals(self, xs, u, ref, w_sqrt, wu_sqrt, wdu_sqrt,
                   du_scale, t_prev_eff):
        track = (xs[1:][:, _TRACK] - ref) * w_sqrt
        du = np.diff(np.concatenate(([t_prev_eff], u))) * du_scale
        return np.concatenate([track.ravel(), wu_sqrt * u, wdu_sqrt * du])

    def _soft_rows(self, xs, S, ey_ub, margin_filter=True):
        """Linearized soft-constraint rows c + G d <= 0 at the current point."""
        cfg = self.config
        n = cfg.n_stages
        e_y = xs[1:, EY]
        r = xs[1:, R]
        S_ey = S[:, EY, :]
        S_r = S[:, R, :]
        cs = np.concatenate([
            e_y - ey_ub,
            cfg.e_y_lower - e_y,
            r - cfg.yaw_rate_bound,
            -cfg.yaw_rate_bound - r,
        ])
        Gs = np.vstack([S_ey, -S_ey, S_r, -S_r])
        if margin_filter:
            margins = np.concatenate([
                np.full(2 * n, _EY_MARGIN), np.full(2 * n, _R_MARGIN)])
            keep = cs > -margins
            cs, Gs = cs[keep], Gs[keep]
        return cs, Gs

    def _penalty(self, xs, ey_ub):
        cfg = self.config
        e_y = xs[1:, EY]
        r = xs[1:, R]
        v = np.maximum(0.0, e_y - ey_ub)
        v += np.maximum(0.0, cfg.e_y_lower - e_y)
        v += np.maximum(0.0, np.abs(r) - cfg.yaw_rate_bound)
        return float(np.sum(v))

    def _violation(self, xs, ey_ub):
        cfg = self.config
        e_y = xs[1:, EY]
        r = xs[1:, R]
        worst = max(
            float(np.max(e_y - ey_ub, initial=0.0)),
            float(np.max(cfg.e_y_lower - e_y, initial=0.0)),
            float(np.max(np.abs(r) - cfg.yaw_rate_bound, initial=0.0)),
        )
        return max(0.0, worst)

    def _qp_step(self, u, xs, S, ref, w_sqrt, wu_sqrt, wdu_sqrt, du_scale,
                 lam, rate_step, t_prev_eff, ey_ub, D, filter_rows=True):
        """Build and solve the condensed QP; returns step and model decrease."""
        cfg = self.config
        n = cfg.n_stages
        # dense residual Jacobian wrt torque sequence
        J_track = (S[:, _TRACK, :] * w_sqrt[None, :, None]).reshape(4 * n, n)
        J_u = wu_sqrt * np.eye(n)
        J_du = wdu_sqrt * du_scale * D
        J = np.vstack([J_track, J_u, J_du])
        res = self._residuals(xs, u, ref, w_sqrt, wu_sqrt, wdu_sqrt,
                              du_scale, t_prev_eff)
        g = J.T @ res
        H = J.T @ J
        H[np.diag_indices_from(H)] += 1e-8

        c_soft, G_soft = self._soft_rows(xs, S, ey_ub, filter_rows)
        ns = len(c_soft)
        rho = cfg.slack_weight
        eps_s = 1e-6 * rho

        nz = n + ns
        Hz = np.zeros((nz, nz))
        Hz[:n, :n] = H
        Hz[n:, n:] = eps_s * np.eye(ns)
        qz = np.concatenate([g, rho * np.ones(ns)])

        rows = []
        rhs = []
        eye_n = np.eye(n)
        zero_s = np.zeros((n, ns))
        # torque box
        rows.append(np.hstack([eye_n, zero_s]))
        rhs.append(lam - u)
        rows.append(np.hstack([-eye_n, zero_s]))
        rhs.append(lam + u)
        # torque rate (chain includes the previously applied command)
        du_cur = np.diff(np.concatenate(([t_prev_eff], u)))
        rows.append(np.hstack([D, zero_s]))
        rhs.append(rate_step - du_cur)
        rows.append(np.hstack([-D, zero_s]))
        rhs.append(rate_step + du_cur)
        if ns:
            rows.append(np.hstack([G_soft, -np.eye(ns)]))
            rhs.append(-c_soft)
            rows.append(np.hstack([np.zeros((ns, n)), -np.eye(ns)]))
            rhs.append(np.zeros(ns))
        A = np.vstack(rows)
        b = np.concatenate(rhs)

        z0 = np.concatenate([np.zeros(n), np.maximum(0.0, c_soft)])
        sol = solve_qp(Hz, qz, A, b, z0)
        d = sol.z[:n]
        # model decrease evaluated from the step itself (slack values carry
        # solver slop that would pollute the convergence measure)
        pen_before = float(np.sum(np.maximum(0.0, c_soft)))
        pen_after = float(np.sum(np.maximum(0.0, c_soft + G_soft @ d))) if ns else 0.0
        pred = -(g @ d + 0.5 * d @ H @ d) + rho * (pen_before - pen_after)
        return d, max(pred, 0.0)

    def _predicted(self, xs, u):
        n = len(u)
        out = np.empty((n, 9))
        out[:, 0] = xs[1:, X]
        out[:, 1] = xs[1:, Y]
        out[:, 2] = xs[1:, PSI]
        out[:, 3] = xs[1:, R]
        out[:, 4] = xs[1:, EY]
        out[:, 5] = xs[1:, EPSI]
        out[:, 6] = xs[1:, THETA]
        out[:, 7] = xs[1:, OMEGA]
        out[:, 8] = u
        return out


def predicted_clearances(output: ControlOutput,
                         obstacle: np.ndarray) -> np.ndarray:
    """Per-stage Euclidean distance between predicted ego CoG and obstacle.

    `obstacle` is an (N, 2) trajectory aligned with the prediction stages;
    use `extrapolate_obstacle` for the constant-velocity case.
    """
    obstacle = np.asarray(obstacle, dtype=float)
    ego = output.predicted_states[:, :2]
    if obstacle.shape != ego.shape:
        raise ValueError(f"obstacle trajectory must be {ego.shape}")
    return np.hypot(*(ego - obstacle).T)


def extrapolate_obstacle(pos: tuple[float, float], vel: tuple[float, float],
                         n_stages: int, t_s: float) -> np.ndarray:
    """Constant-velocity obstacle trajectory aligned with prediction stages."""
    t = (np.arange(n_stages) + 1.0) * t_s
    return np.stack([pos[0] + vel[0] * t, pos[1] + vel[1] * t], axis=1)
