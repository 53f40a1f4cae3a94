"""Grid refinement study for the two closed-form examples.

    python3 demos/convergence_table.py [--example 1] [--case I IV] [--grid 64 128 256]
"""

import argparse

import numpy as np

from kfbi_stokes import exact_errors, exact_two_phase, solve_two_phase
from kfbi_stokes.problems import CASES, EXACT


def main():
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--example", type=int, default=1, choices=sorted(EXACT))
    p.add_argument("--case", nargs="+", default=["I", "IV"], choices=sorted(CASES))
    p.add_argument("--grid", type=int, nargs="+", default=[64, 128, 256])
    args = p.parse_args()
    ex = EXACT[args.example]()
    names = ("e_u_l2", "e_u_h1", "e_p_l2", "e_u_max", "e_u_h1max", "e_p_max")
    for case in args.case:
        mp, mm = CASES[case]
        print(f"example {args.example}, case {case} (mu+ = {mp:g}, mu- = {mm:g})")
        print(f"{'N':>5} {'gmres':>5} " + " ".join(f"{n:>10} {'ord':>5}" for n in names))
        prev = None
        for N in sorted(args.grid):
            P = exact_two_phase(ex, mp, mm, N)
            res = solve_two_phase(P)
            row = np.array(exact_errors(ex, P, res).as_row())
            orders = np.log2(prev / row) if prev is not None else np.full(6, np.nan)
            cells = " ".join(f"{e:10.3e} {o:5.2f}" for e, o in zip(row, orders))
            print(f"{N:5d} {res.state.iterations:5d} {cells}")
            prev = row
        print()


if __name__ == "__main__":
    main()
