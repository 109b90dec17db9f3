"""Single-track vehicle model with steering column and road-error dynamics.

The same right-hand side serves as the simulation plant and as the
predictive controller's internal model; they differ only in which torques
enter the steering column equation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .kernels import NX, V_X_MIN

A_X_LIMIT = 8.0  # commanded longitudinal acceleration clamp (m/s^2)


class LowSpeedError(ValueError):
    """Raised when the lateral tire model is evaluated below the speed guard."""


@dataclass
class VehicleParams:
    m: float = 1650.0          # mass (kg)
    i_z: float = 3234.0        # yaw inertia (kg m^2)
    l_f: float = 1.40          # CoG to front axle (m)
    l_r: float = 1.65          # CoG to rear axle (m)
    c_alpha_f: float = 94e3    # front cornering stiffness (N/rad)
    c_alpha_r: float = 118e3   # rear cornering stiffness (N/rad)

    def __post_init__(self):
        for name in ("m", "i_z", "l_f", "l_r", "c_alpha_f", "c_alpha_r"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")


@dataclass
class VehicleState:
    x: float = 0.0
    y: float = 0.0
    psi: float = 0.0
    v_x: float = 20.0
    v_y: float = 0.0
    r: float = 0.0
    theta: float = 0.0
    omega: float = 0.0

    def as_array(self, road: "RoadFrame | None" = None) -> np.ndarray:
        a = np.zeros(NX)
        a[kernels.X] = self.x
        a[kernels.Y] = self.y
        a[kernels.PSI] = self.psi
        a[kernels.VX] = self.v_x
        a[kernels.VY] = self.v_y
        a[kernels.R] = self.r
        a[kernels.THETA] = self.theta
        a[kernels.OMEGA] = self.omega
        if road is not None:
            a[kernels.EY] = road.e_y
            a[kernels.EPSI] = road.e_psi
        return a

    @classmethod
    def from_array(cls, a: np.ndarray) -> "VehicleState":
        return cls(x=a[kernels.X], y=a[kernels.Y], psi=a[kernels.PSI],
                   v_x=a[kernels.VX], v_y=a[kernels.VY], r=a[kernels.R],
                   theta=a[kernels.THETA], omega=a[kernels.OMEGA])

    def validate(self):
        vals = [self.x, self.y, self.psi, self.v_x, self.v_y,
                self.r, self.theta, self.omega]
        if not np.all(np.isfinite(vals)):
            raise ValueError(f"non-finite vehicle state: {self}")


@dataclass
class RoadFrame:
    e_y: float = 0.0     # lateral error, left positive (m)
    e_psi: float = 0.0   # heading error (rad)
    rho: float = 0.0     # local path curvature (1/m)

    def __post_init__(self):
        if not np.isfinite(self.rho) or abs(self.rho) >= 0.1:
            raise ValueError(f"curvature out of road-scale range: {self.rho}")


@dataclass
class PlantInputs:
    a_x: float = 0.0        # commanded longitudinal acceleration (m/s^2)
    t_driver: float = 0.0   # driver torque on the column (N m)
    t_act: float = 0.0      # actuator torque on the column (N m)
    b_lambda: float = 0.65  # active column damping (N m s/rad)

    def __post_init__(self):
        self.a_x = float(np.clip(self.a_x, -A_X_LIMIT, A_X_LIMIT))


def params_array(vp: VehicleParams, sp) -> np.ndarray:
    """Pack vehicle + steering parameters into the kernel layout."""
    return np.array([vp.m, vp.i_z, vp.l_f, vp.l_r, vp.c_alpha_f, vp.c_alpha_r,
                     sp.j, sp.b, sp.k_r, sp.eta_t])


def tire_forces(state: VehicleState, delta: float,
                params: VehicleParams) -> tuple[float, float]:
    """Front and rear lateral tire forces at the given road-wheel angle."""
    if state.v_x < V_X_MIN:
        raise LowSpeedError(
            f"v_x={state.v_x} below {V_X_MIN} m/s; lateral dynamics frozen")
    p = np.array([params.m, params.i_z, params.l_f, params.l_r,
                  params.c_alpha_f, params.c_alpha_r, 1.0, 0.0, 1.0, 0.0])
    f_yf, f_yr = kernels.tire_forces_k(state.v_x, state.v_y, state.r, delta, p)
    return float(f_yf), float(f_yr)


def derivatives(state: VehicleState, road: RoadFrame, inputs: PlantInputs,
                params: VehicleParams, steer_params) -> np.ndarray:
    """State rates for the full 10-dim model (plant form: driver + actuator)."""
    state.validate()
    x = state.as_array(road)
    p = params_array(params, steer_params)
    t_col = inputs.t_driver + inputs.t_act
    return np.asarray(kernels.dynamics_rhs(
        x, inputs.a_x, t_col, inputs.b_lambda, road.rho, p))


def step(state: VehicleState, road: RoadFrame, inputs: PlantInputs,
         params: VehicleParams, steer_params,
         dt: float) -> tuple[VehicleState, RoadFrame]:
    """One fixed-step RK4 integration of the plant."""
    if not (0.0 < dt <= 0.05):
        raise ValueError(f"dt must lie in (0, 0.05], got {dt}")
    x = state.as_array(road)
    p = params_array(params, steer_params)
    t_col = inputs.t_driver + inputs.t_act
    x_next = kernels.rk4_step(x, dt, inputs.a_x, t_col,
                              inputs.b_lambda, road.rho, p)
    new_road = RoadFrame(e_y=float(x_next[kernels.EY]),
                         e_psi=float(x_next[kernels.EPSI]), rho=road.rho)
    return VehicleState.from_array(x_next), new_road


def wrap_angle(a: float) -> float:
    """Wrap to (-pi, pi]."""
    w = (a + np.pi) % (2.0 * np.pi) - np.pi
    if w == -np.pi:
        w = np.pi
    return float(w)


class Path:
    """Arc-length parameterized polyline with per-vertex heading/curvature."""

    def __init__(self, xs, ys, curvatures=None):
        self.xs = np.asarray(xs, dtype=float)
        self.ys = np.asarray(ys, dtype=float)
        if self.xs.size < 2:
            raise ValueError("path needs at least 2 points")
        dx = np.diff(self.xs)
        dy = np.diff(self.ys)
        seg = np.hypot(dx, dy)
        if np.any(seg == 0.0):
            raise ValueError("path has repeated points")
        self.s = np.concatenate(([0.0], np.cumsum(seg)))
        self.headings = np.arctan2(dy, dx)  # per segment
        if curvatures is None:
            curvatures = np.zeros_like(self.xs)
        self.curvatures = np.asarray(curvatures, dtype=float)
        # continuous heading per vertex for reference interpolation
        vh = np.empty_like(self.xs)
        vh[0] = self.headings[0]
        vh[-1] = self.headings[-1]
        for i in range(1, len(self.xs) - 1):
            d = wrap_angle(self.headings[i] - self.headings[i - 1])
            vh[i] = self.headings[i - 1] + 0.5 * d
        self.vertex_headings = np.unwrap(vh)

    @classmethod
    def straight(cls, length: float, spacing: float = 10.0) -> "Path":
        n = max(2, int(np.ceil(length / spacing)) + 1)
        xs = np.linspace(0.0, length, n)
        return cls(xs, np.zeros(n))

    @classmethod
    def circle(cls, radius: float, arc: float = 2 * np.pi,
               n: int = 720) -> "Path":
        t = np.linspace(0.0, arc, n)
        xs = radius * np.sin(t)
        ys = radius * (1.0 - np.cos(t))
        return cls(xs, ys, curvatures=np.full(n, 1.0 / radius))

    @property
    def length(self) -> float:
        return float(self.s[-1])

    def project(self, x: float, y: float):
        """Nearest-point projection.

        Returns (arc length s, signed lateral offset e_y, tangent heading,
        curvature, clamped flag). Offset sign is positive to the left of
        the path direction.
        """
        ax, ay = self.xs[:-1], self.ys[:-1]
        bx, by = self.xs[1:], self.ys[1:]
        vx, vy = bx - ax, by - ay
        seg2 = vx * vx + vy * vy
        t = ((x - ax) * vx + (y - ay) * vy) / seg2
        t_c = np.clip(t, 0.0, 1.0)
        px = ax + t_c * vx
        py = ay + t_c * vy
        d2 = (x - px) ** 2 + (y - py) ** 2
        i = int(np.argmin(d2))
        clamped = (i == 0 and t[0] < 0.0) or (i == len(ax) - 1 and t[-1] > 1.0)
        s = self.s[i] + t_c[i] * np.sqrt(seg2[i])
        heading = self.headings[i]
        tx, ty = np.cos(heading), np.sin(heading)
        off_x, off_y = x - px[i], y - py[i]
        e_y = tx * off_y - ty * off_x
        rho = float(np.interp(s, self.s, self.curvatures))
        return float(s), float(e_y), float(heading), rho, bool(clamped)

    def sample(self, s: float):
        """Point, tangent heading (continuous), and curvature at arc length s."""
        s_c = float(np.clip(s, 0.0, self.length))
        x = float(np.interp(s_c, self.s, self.xs))
        y = float(np.interp(s_c, self.s, self.ys))
        heading = float(np.interp(s_c, self.s, self.vertex_headings))
        rho = float(np.interp(s_c, self.s, self.curvatures))
        return x, y, heading, rho


def project_to_path(state: VehicleState, path: Path) -> RoadFrame:
    """Road-frame errors of the CoG relative to the lane-center path."""
    _, e_y, heading, rho, _ = path.project(state.x, state.y)
    e_psi = wrap_angle(state.psi - heading)
    return RoadFrame(e_y=e_y, e_psi=e_psi, rho=rho)
