"""Hot numeric kernels shared by the plant and the predictive controller.

All functions here operate on flat float64 arrays so they compile under
numba's nopython mode (see accel.py for the fallback switch). State layout
(10 entries) used everywhere:

    0 X       absolute CoG x (m)
    1 Y       absolute CoG y (m)
    2 PSI     heading (rad)
    3 VX      longitudinal speed (m/s)
    4 VY      lateral speed (m/s)
    5 R       yaw rate (rad/s)
    6 EY      lateral error to lane-center reference (m, left positive)
    7 EPSI    heading error (rad)
    8 THETA   steering-wheel angle (rad)
    9 OMEGA   steering-wheel angular speed (rad/s)

Parameter vector layout (10 entries):

    0 m, 1 I_z, 2 l_f, 3 l_r, 4 C_f, 5 C_r, 6 J, 7 b, 8 k_r, 9 eta_t
"""

import numpy as np

from .accel import jit_kernel

NX = 10
X, Y, PSI, VX, VY, R, EY, EPSI, THETA, OMEGA = range(NX)

P_M, P_IZ, P_LF, P_LR, P_CF, P_CR, P_J, P_B, P_KR, P_ETA = range(10)

# Below this longitudinal speed the lateral tire model is singular; lateral
# dynamics are frozen instead of evaluated.
V_X_MIN = 0.5


@jit_kernel
def tire_forces_k(vx, vy, r, delta, p):
    """Front/rear lateral tire force, restoring sign convention."""
    f_yf = p[P_CF] * (delta - (vy + p[P_LF] * r) / vx)
    f_yr = -p[P_CR] * (vy - p[P_LR] * r) / vx
    return f_yf, f_yr


@jit_kernel
def dynamics_rhs(x, a_x, t_col, b_lam, rho, p):
    """Continuous-time state rates.

    t_col is the total external column torque (driver + actuator for the
    plant, commanded torque for the prediction model). Self-aligning torque
    is derived from the front tire force through the pneumatic trail
    reflected by the steering ratio.
    """
    out = np.zeros(NX)
    cos_psi = np.cos(x[PSI])
    sin_psi = np.sin(x[PSI])
    out[X] = x[VX] * cos_psi - x[VY] * sin_psi
    out[Y] = x[VX] * sin_psi + x[VY] * cos_psi
    out[PSI] = x[R]

    if x[VX] >= V_X_MIN:
        delta = x[THETA] / p[P_KR]
        f_yf, f_yr = tire_forces_k(x[VX], x[VY], x[R], delta, p)
        cos_d = np.cos(delta)
        sin_d = np.sin(delta)
        out[VX] = a_x - f_yf * sin_d / p[P_M] + x[VY] * x[R]
        out[VY] = (f_yr + f_yf * cos_d) / p[P_M] - x[VX] * x[R]
        out[R] = (p[P_LF] * f_yf * cos_d - p[P_LR] * f_yr) / p[P_IZ]
        t_sat = (p[P_ETA] / p[P_KR]) * f_yf
    else:
        # low-speed guard: lateral dynamics frozen
        out[VX] = a_x
        out[VY] = 0.0
        out[R] = 0.0
        t_sat = 0.0

    out[EY] = x[VX] * np.sin(x[EPSI]) + x[VY] * np.cos(x[EPSI])
    out[EPSI] = x[R] - rho * x[VX]
    out[THETA] = x[OMEGA]
    out[OMEGA] = (t_col - t_sat - b_lam * x[OMEGA]) / p[P_J]
    return out


@jit_kernel
def rk4_step(x, dt, a_x, t_col, b_lam, rho, p):
    """Classical 4th-order Runge-Kutta step with zero-order-hold inputs."""
    k1 = dynamics_rhs(x, a_x, t_col, b_lam, rho, p)
    k2 = dynamics_rhs(x + 0.5 * dt * k1, a_x, t_col, b_lam, rho, p)
    k3 = dynamics_rhs(x + 0.5 * dt * k2, a_x, t_col, b_lam, rho, p)
    k4 = dynamics_rhs(x + dt * k3, a_x, t_col, b_lam, rho, p)
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


@jit_kernel
def pid_step(t_ref, t_meas, integ, prev_err, dt, k_p, k_i, k_d, clamp):
    """One torque-PID update with conditional-integration anti-windup."""
    err = t_ref - t_meas
    d_err = (err - prev_err) / dt
    u_raw = k_p * err + k_i * (integ + err * dt) + k_d * d_err
    if u_raw > clamp:
        u = clamp
    elif u_raw < -clamp:
        u = -clamp
    else:
        u = u_raw
    # freeze the integrator while saturated in the direction the error pushes
    if u == u_raw or u * err < 0.0:
        integ += err * dt
    return u, integ, err


@jit_kernel
def plant_substeps(x, n_sub, dt, a_x, t_ref, t_driver, b_lam, rho, p,
                   pid_gains, pid_state, t_act0, tau_lag, t_motor_max):
    """Execution-level PID + actuator lag + plant integration at dt substeps.

    One call covers one control tick. The PID tracks the torque reference
    against the applied actuator torque (ideal torque sensing); its output
    feeds a first-order lag modelling motor bandwidth. Returns the final
    state, updated PID state (integral, prev error), and actuator torque.
    """
    t_act = t_act0
    integ = pid_state[0]
    prev_err = pid_state[1]
    k_p, k_i, k_d = pid_gains[0], pid_gains[1], pid_gains[2]
    lag_alpha = 1.0 - np.exp(-dt / tau_lag)
    for _ in range(n_sub):
        u, integ, prev_err = pid_step(t_ref, t_act, integ, prev_err, dt,
                                      k_p, k_i, k_d, t_motor_max)
        t_act += lag_alpha * (u - t_act)
        x = rk4_step(x, dt, a_x, t_driver + t_act, b_lam, rho, p)
    out_pid = np.empty(2)
    out_pid[0] = integ
    out_pid[1] = prev_err
    return x, out_pid, t_act


@jit_kernel
def dynamics_jacobians(x, a_x, t_col, b_lam, rho, p):
    """Analytic Jacobians (d rhs / d state, d rhs / d torque input)."""
    A = np.zeros((NX, NX))
    B = np.zeros(NX)
    cos_psi = np.cos(x[PSI])
    sin_psi = np.sin(x[PSI])
    vx, vy, r = x[VX], x[VY], x[R]

    A[X, PSI] = -vx * sin_psi - vy * cos_psi
    A[X, VX] = cos_psi
    A[X, VY] = -sin_psi
    A[Y, PSI] = vx * cos_psi - vy * sin_psi
    A[Y, VX] = sin_psi
    A[Y, VY] = cos_psi
    A[PSI, R] = 1.0

    if vx >= V_X_MIN:
        m, iz, lf, lr = p[P_M], p[P_IZ], p[P_LF], p[P_LR]
        cf, cr, kr, eta = p[P_CF], p[P_CR], p[P_KR], p[P_ETA]
        delta = x[THETA] / kr
        cos_d = np.cos(delta)
        sin_d = np.sin(delta)
        f_yf, f_yr = tire_forces_k(vx, vy, r, delta, p)
        # tire force partials
        df_vx = cf * (vy + lf * r) / vx ** 2
        df_vy = -cf / vx
        df_r = -cf * lf / vx
        df_th = cf / kr
        dr_vx = cr * (vy - lr * r) / vx ** 2
        dr_vy = -cr / vx
        dr_r = cr * lr / vx

        A[VX, VX] = -sin_d * df_vx / m
        A[VX, VY] = -sin_d * df_vy / m + r
        A[VX, R] = -sin_d * df_r / m + vy
        A[VX, THETA] = -(df_th * sin_d + f_yf * cos_d / kr) / m

        A[VY, VX] = (dr_vx + cos_d * df_vx) / m - r
        A[VY, VY] = (dr_vy + cos_d * df_vy) / m
        A[VY, R] = (dr_r + cos_d * df_r) / m - vx
        A[VY, THETA] = (cos_d * df_th - f_yf * sin_d / kr) / m

        A[R, VX] = (lf * cos_d * df_vx - lr * dr_vx) / iz
        A[R, VY] = (lf * cos_d * df_vy - lr * dr_vy) / iz
        A[R, R] = (lf * cos_d * df_r - lr * dr_r) / iz
        A[R, THETA] = (lf * (df_th * cos_d - f_yf * sin_d / kr)) / iz

        A[OMEGA, VX] = -(eta / kr) * df_vx / p[P_J]
        A[OMEGA, VY] = -(eta / kr) * df_vy / p[P_J]
        A[OMEGA, R] = -(eta / kr) * df_r / p[P_J]
        A[OMEGA, THETA] = -(eta / kr) * df_th / p[P_J]

    cos_ep = np.cos(x[EPSI])
    sin_ep = np.sin(x[EPSI])
    A[EY, VX] = sin_ep
    A[EY, VY] = cos_ep
    A[EY, EPSI] = vx * cos_ep - vy * sin_ep
    A[EPSI, R] = 1.0
    A[EPSI, VX] = -rho
    A[THETA, OMEGA] = 1.0
    A[OMEGA, OMEGA] += -b_lam / p[P_J]
    B[OMEGA] = 1.0 / p[P_J]
    return A, B


@jit_kernel
def rk4_step_with_sens(x, dt, a_x, t_col, b_lam, rho, p):
    """RK4 step plus discrete-time sensitivities via the chain rule."""
    eye = np.eye(NX)
    k1 = dynamics_rhs(x, a_x, t_col, b_lam, rho, p)
    A1, B1 = dynamics_jacobians(x, a_x, t_col, b_lam, rho, p)

    x2 = x + 0.5 * dt * k1
    k2 = dynamics_rhs(x2, a_x, t_col, b_lam, rho, p)
    A2r, B2r = dynamics_jacobians(x2, a_x, t_col, b_lam, rho, p)
    A2 = A2r @ (eye + 0.5 * dt * A1)
    B2 = B2r + 0.5 * dt * (A2r @ B1)

    x3 = x + 0.5 * dt * k2
    k3 = dynamics_rhs(x3, a_x, t_col, b_lam, rho, p)
    A3r, B3r = dynamics_jacobians(x3, a_x, t_col, b_lam, rho, p)
    A3 = A3r @ (eye + 0.5 * dt * A2)
    B3 = B3r + 0.5 * dt * (A3r @ B2)

    x4 = x + dt * k3
    k4 = dynamics_rhs(x4, a_x, t_col, b_lam, rho, p)
    A4r, B4r = dynamics_jacobians(x4, a_x, t_col, b_lam, rho, p)
    A4 = A4r @ (eye + dt * A3)
    B4 = B4r + dt * (A4r @ B3)

    x_next = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    A_step = eye + (dt / 6.0) * (A1 + 2.0 * A2 + 2.0 * A3 + A4)
    B_step = (dt / 6.0) * (B1 + 2.0 * B2 + 2.0 * B3 + B4)
    return x_next, A_step, B_step


@jit_kernel
def rollout(x0, u_seq, a_x, b_lam, rho_seq, p, dt):
    """Forward simulation of the prediction model, one RK4 step per stage."""
    n = u_seq.shape[0]
    xs = np.empty((n + 1, NX))
    xs[0] = x0
    for k in range(n):
        xs[k + 1] = rk4_step(xs[k], dt, a_x, u_seq[k], b_lam, rho_seq[k], p)
    return xs


@jit_kernel
def rollout_with_sens(x0, u_seq, a_x, b_lam, rho_seq, p, dt):
    """Rollout plus sensitivities d x(k) / d u(j) for j < k.

    Returns (xs, S) with xs shape (N+1, NX) and S shape (N, NX, N) where
    S[k-1] holds the Jacobian of x(k) with respect to the torque sequence.
    """
    n = u_seq.shape[0]
    xs = np.empty((n + 1, NX))
    xs[0] = x0
    S = np.zeros((n, NX, n))
    S_prev = np.zeros((NX, n))
    for k in range(n):
        x_next, A, B = rk4_step_with_sens(
            xs[k], dt, a_x, u_seq[k], b_lam, rho_seq[k], p)
        xs[k + 1] = x_next
        S_k = A @ S_prev
        S_k[:, k] += B
        S[k] = S_k
        S_prev = S_k
    return xs, S


@jit_kernel
def _rect_corners(cx, cy, heading, length, width):
    c = np.cos(heading)
    s = np.sin(heading)
    hl = 0.5 * length
    hw = 0.5 * width
    corners = np.empty((4, 2))
    lx = np.array([hl, hl, -hl, -hl])
    wy = np.array([hw, -hw, -hw, hw])
    for i in range(4):
        corners[i, 0] = cx + lx[i] * c - wy[i] * s
        corners[i, 1] = cy + lx[i] * s + wy[i] * c
    return corners


@jit_kernel
def rects_overlap(ax, ay, ah, al, aw, bx, by, bh, bl, bw):
    """Oriented-rectangle overlap via the separating axis test."""
    ca = _rect_corners(ax, ay, ah, al, aw)
    cb = _rect_corners(bx, by, bh, bl, bw)
    for rect in range(2):
        h = ah if rect == 0 else bh
        for axis_i in range(2):
            ang = h + axis_i * (np.pi / 2.0)
            ux = np.cos(ang)
            uy = np.sin(ang)
            amin, amax = 1e300, -1e300
            bmin, bmax = 1e300, -1e300
            for i in range(4):
                pa = ca[i, 0] * ux + ca[i, 1] * uy
                pb = cb[i, 0] * ux + cb[i, 1] * uy
                amin = min(amin, pa)
                amax = max(amax, pa)
                bmin = min(bmin, pb)
                bmax = max(bmax, pb)
            if amax < bmin or bmax < amin:
                return False
    return True


@jit_kernel
def _point_segment_dist(px, py, ax, ay, bx, by):
    vx = bx - ax
    vy = by - ay
    wx = px - ax
    wy = py - ay
    vv = vx * vx + vy * vy
    t = 0.0 if vv == 0.0 else max(0.0, min(1.0, (wx * vx + wy * vy) / vv))
    dx = px - (ax + t * vx)
    dy = py - (ay + t * vy)
    return np.sqrt(dx * dx + dy * dy)


@jit_kernel
def rects_distance(ax, ay, ah, al, aw, bx, by, bh, bl, bw):
    """Minimum Euclidean separation of two oriented rectangles (0 if overlapping)."""
    if rects_overlap(ax, ay, ah, al, aw, bx, by, bh, bl, bw):
        return 0.0
    ca = _rect_corners(ax, ay, ah, al, aw)
    cb = _rect_corners(bx, by, bh, bl, bw)
    best = 1e300
    for i in range(4):
        for j in range(4):
            j2 = (j + 1) % 4
            d1 = _point_segment_dist(ca[i, 0], ca[i, 1],
                                     cb[j, 0], cb[j, 1], cb[j2, 0], cb[j2, 1])
            d2 = _point_segment_dist(cb[i, 0], cb[i, 1],
                                     ca[j, 0], ca[j, 1], ca[j2, 0], ca[j2, 1])
            if d1 < best:
                best = d1
            if d2 < best:
                best = d2
    return best
