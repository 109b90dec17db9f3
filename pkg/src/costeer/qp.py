"""Dense primal active-set solver for strictly convex QPs.

Solves   min  0.5 z'Hz + q'z   s.t.  A z <= b

starting from a feasible point. Problems here are small (tens of
variables), so H is inverted once per call and the working-set Schur
systems reuse a precomputed constraint Gram matrix A H^-1 A'. Iterates
remain feasible throughout, which is what guarantees the controller's
hard torque bounds to solver precision.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class QpResult:
    z: np.ndarray
    duals: np.ndarray        # multipliers aligned with rows of A (0 if inactive)
    iterations: int
    converged: bool


def solve_qp(H, q, A, b, z0, max_iter=None, dual_tol=1e-9) -> QpResult:
    n = len(q)
    m = len(b) if b is not None and len(b) else 0
    if m == 0:
        z = np.linalg.solve(H, -q)
        return QpResult(z=z, duals=np.zeros(0), iterations=1, converged=True)

    H_inv = np.linalg.inv(H)
    HA = H_inv @ A.T           # (n, m)
    G = A @ HA                 # (m, m) Gram matrix of rows in the H^-1 metric
    z = np.asarray(z0, dtype=float).copy()
    if max_iter is None:
        max_iter = 3 * (n + m) + 10

    work: list[int] = []
    in_work = np.zeros(m, dtype=bool)
    duals = np.zeros(m)
    step_tol = 1e-10
    at_minimizer = False

    # warm-start the working set with rows already tight at z0 (bound-riding
    # re-solves then converge in a few iterations instead of re-adding rows
    # one by one); keep it safely under n to avoid a degenerate basis
    tight = np.nonzero(b - A @ z <= 1e-12)[0]
    for i in tight[:max(0, n - 1)]:
        work.append(int(i))
        in_work[i] = True

    for it in range(1, max_iter + 1):
        g = H @ z + q
        Hg = H_inv @ g
        AHg = A @ Hg
        if work:
            w = np.array(work)
            M = G[np.ix_(w, w)]
            M = M + 1e-12 * np.eye(len(w))
            try:
                nu = np.linalg.solve(M, -AHg[w])
            except np.linalg.LinAlgError:
                in_work[work.pop()] = False
                at_minimizer = False
                continue
            p = -Hg - HA[:, w] @ nu
        else:
            nu = np.zeros(0)
            p = -Hg

        if at_minimizer or np.max(np.abs(p)) < step_tol * (1.0 + np.max(np.abs(z))):
            at_minimizer = False
            if len(work) == 0 or np.all(nu >= -dual_tol):
                duals[:] = 0.0
                for idx, wi in enumerate(work):
                    duals[wi] = max(0.0, nu[idx])
                return QpResult(z=z, duals=duals, iterations=it, converged=True)
            drop = int(np.argmin(nu))
            in_work[work[drop]] = False
            work.pop(drop)
            continue

        # ratio test against rows not in the working set
        Ap = A @ p
        resid = b - A @ z
        cand = (~in_work) & (Ap > 1e-14)
        alpha = 1.0
        blocking = -1
        if np.any(cand):
            ratios = np.where(cand, np.maximum(resid, 0.0) /
                              np.where(cand, Ap, 1.0), np.inf)
            i_min = int(np.argmin(ratios))
            if ratios[i_min] < alpha:
                alpha = float(ratios[i_min])
                blocking = i_min
        if alpha > 0.0:
            z = z + alpha * p
        if blocking >= 0:
            work.append(blocking)
            in_work[blocking] = True
        else:
            # full step to the working-set minimizer; check duals next pass
            at_minimizer = True

    duals[:] = 0.0
    return QpResult(z=z, duals=duals, iterations=max_iter, converged=False)
