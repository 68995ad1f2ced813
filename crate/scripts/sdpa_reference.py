"""Solve SDPA sparse files with cvxpy and print the optimal objectives.

Used to freeze the cross-solver references in crates/core/tests/cross_solver.rs:

    python3 scripts/sdpa_reference.py crates/core/tests/fixtures/*.dat-s
"""

import sys

import cvxpy as cp
import numpy as np


def read_sdpa(path):
    lines = [l.strip() for l in open(path) if l.strip() and l.strip()[0] not in '"*']
    m = int(lines[0].split()[0])
    nblocks = int(lines[1].split()[0])
    sizes = [int(v) for v in lines[2].replace(",", " ").split()[:nblocks]]
    c = np.array([float(v) for v in lines[3].replace(",", " ").split()[:m]])
    mats = [[np.zeros((abs(s), abs(s))) for s in sizes] for _ in range(m + 1)]
    for line in lines[4:]:
        k, b, i, j, v = line.split()
        k, b, i, j, v = int(k), int(b) - 1, int(i) - 1, int(j) - 1, float(v)
        mats[k][b][i, j] = v
        mats[k][b][j, i] = v
    return c, sizes, mats


def solve(path, solver):
    c, sizes, mats = read_sdpa(path)
    x = cp.Variable(len(c))
    cons = []
    for b, s in enumerate(sizes):
        expr = sum(x[k] * mats[k + 1][b] for k in range(len(c)) if np.any(mats[k + 1][b])) - mats[0][b]
        if s < 0:
            cons.append(cp.diag(expr) >= 0)
        else:
            cons.append(0.5 * (expr + expr.T) >> 0)
    prob = cp.Problem(cp.Minimize(c @ x), cons)
    prob.solve(solver=solver)
    return prob.status, prob.value


if __name__ == "__main__":
    for path in sys.argv[1:]:
        for solver in ("CLARABEL", "CVXOPT"):
            status, value = solve(path, solver)
            print(f"{path} {solver} {status} {value:.12e}")
