"""Timing comparison of the numba-compiled kernels against the pure-numpy
fallback selected by COSTEER_NO_NUMBA=1.

Run both paths:

    python benchmarks/bench_kernels.py
    COSTEER_NO_NUMBA=1 python benchmarks/bench_kernels.py
"""

import time

import numpy as np

from costeer import kernels
from costeer.accel import ENABLE_NUMBA
from costeer.nmpc import AuthorityCommand, NmpcConfig, NmpcSolver, \
    build_reference
from costeer.steering import SteeringParams
from costeer.vehicle import Path, VehicleParams, VehicleState, \
    params_array, project_to_path


def timeit(label, fn, repeat):
    fn()   # warm-up / JIT compile
    t0 = time.perf_counter()
    for _ in range(repeat):
        fn()
    per_call = (time.perf_counter() - t0) / repeat
    print(f"{label:<44} {per_call * 1e6:10.1f} us/call")
    return per_call


def main():
    mode = "numba" if ENABLE_NUMBA else "numpy fallback"
    print(f"kernel path: {mode}\n")

    p = params_array(VehicleParams(), SteeringParams())
    x = np.zeros(kernels.NX)
    x[kernels.VX] = 25.0
    x[kernels.VY] = 0.3
    x[kernels.R] = 0.05
    u = np.linspace(-2, 2, 30)
    rho = np.zeros(30)

    timeit("dynamics_rhs", lambda: kernels.dynamics_rhs(
        x, 0.5, 1.0, 0.8, 0.0, p), 2000)
    timeit("rk4_step (1 ms plant step)", lambda: kernels.rk4_step(
        x, 0.001, 0.5, 1.0, 0.8, 0.0, p), 2000)
    timeit("plant_substeps (one 50 ms control tick)",
           lambda: kernels.plant_substeps(
               x, 50, 0.001, 0.5, 1.0, 0.5, 0.8, 0.0, p,
               np.array([10.0, 200.0, 0.0]), np.zeros(2), 0.0, 0.01, 15.0),
           500)
    timeit("rollout (30 stages)", lambda: kernels.rollout(
        x, u, 0.0, 0.8, rho, p, 0.05), 1000)
    timeit("rollout_with_sens (30 stages)",
           lambda: kernels.rollout_with_sens(x, u, 0.0, 0.8, rho, p, 0.05),
           200)
    timeit("rects_distance", lambda: kernels.rects_distance(
        0.0, 0.0, 0.1, 4.5, 1.8, 8.0, 2.0, 3.0, 12.0, 2.5), 2000)

    path = Path.straight(3000.0)
    solver = NmpcSolver(NmpcConfig.corrective())
    st = VehicleState(x=100.0, y=1.0, v_x=25.0)
    road = project_to_path(st, path)
    ref = build_reference(path, st, solver.config)
    warm = solver.solve(st, road, ref, AuthorityCommand(lam=3.0))
    timeit("nmpc solve (warm, lane keeping)",
           lambda: solver.solve(st, road, ref, AuthorityCommand(lam=3.0),
                                warm=warm), 50)


if __name__ == "__main__":
    main()
