"""Grid refinement of the Crank-Nicolson solver and time-step refinement of Euler-Maruyama.

Prints L1 errors and observed orders; writes nothing.
"""

import numpy as np
from scipy import stats

from liouville.fokker_planck import heat_problem, solve_fp
from liouville.langevin import simulate_velocity_langevin
from liouville.models import PositionModel, VelocityModel


def fp_orders(sizes=(251, 501, 1001, 2001, 4001), t_end=0.8):
    m = PositionModel(5.0, 2.5)
    ref = stats.norm(m.u_p * t_end, np.sqrt(2 * m.D * t_end))
    errs = []
    for n in sizes:
        p = heat_problem(m, n=n)
        c = solve_fp(p, t_end, (p.grid[1] - p.grid[0]) / 2)
        errs.append(np.trapezoid(np.abs(c.density - ref.pdf(c.coords)), c.coords))
    print("Crank-Nicolson, heat equation, dt = h/2")
    for k, (n, e) in enumerate(zip(sizes, errs)):
        order = "" if k == 0 else f"  order {np.log2(errs[k - 1] / e):.2f}"
        print(f"  n = {n:5d}  L1 = {e:.3e}{order}")


def em_orders(steps=(0.2, 0.1, 0.05, 0.025), n=1_000_000, t_end=5.0):
    m = VelocityModel(10.0, 0.02)
    exact = m.sigma_u(t_end) ** 2
    errs = []
    print("Euler-Maruyama, Var U at t = 5")
    for k, h in enumerate(steps):
        ens = simulate_velocity_langevin(m, n, h, t_end, seed=21)
        errs.append(abs(ens.at(t_end, "u").var() - exact))
        ratio = "" if k == 0 else f"  ratio {errs[k - 1] / errs[k]:.2f}"
        print(f"  dt = {h:.3f}  |error| = {errs[k]:.3e}{ratio}")


if __name__ == "__main__":
    fp_orders()
    em_orders()
