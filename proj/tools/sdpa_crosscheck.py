#!/usr/bin/env python3
"""Independent feasibility verdict for SDPA sparse files.

Reads F(y) = sum_i y_i F_i - F_0 block by block and solves
    max t  s.t.  s_j F_j(y) >= t I  for every block,  |y_i| <= R
with cvxpy. The system is reported feasible when t* >= floor.
Usage: sdpa_crosscheck.py [--solver CLARABEL] [--floor 1e-6] FILE...
"""

import argparse
import json
import sys

import cvxpy as cp
import numpy as np


def read_sdpa(path):
    rows = []
    with open(path) as f:
        for raw in f:
            if raw.startswith('"') or raw.startswith("*"):
                continue
            for ch in ",(){}":
                raw = raw.replace(ch, " ")
            tok = raw.split()
            if tok:
                rows.append(tok)
    m = int(rows[0][0])
    nblock = int(rows[1][0])
    sizes = [abs(int(s)) for s in rows[2][:nblock]]
    entries = rows[4:] if m > 0 else rows[3:]
    mats = [[np.zeros((d, d)) for d in sizes] for _ in range(m + 1)]
    for e in entries:
        k, b, i, j, v = int(e[0]), int(e[1]) - 1, int(e[2]) - 1, int(e[3]) - 1, float(e[4])
        mats[k][b][i, j] = v
        mats[k][b][j, i] = v
    return m, sizes, mats


def verdict(path, solver, floor, bound):
    m, sizes, mats = read_sdpa(path)
    y = cp.Variable(m)
    t = cp.Variable()
    cons = [cp.abs(y) <= bound] if m else []
    for b, d in enumerate(sizes):
        f0 = mats[0][b]
        scale = 1.0 / max(1.0, np.linalg.norm(f0))
        expr = -f0
        for i in range(m):
            fi = mats[i + 1][b]
            if np.any(fi):
                expr = expr + y[i] * fi
        expr = scale * expr
        if d == 1:
            cons.append(expr >= t)
        else:
            cons.append((expr + expr.T) / 2 - t * np.eye(d) >> 0)
    prob = cp.Problem(cp.Maximize(t), cons)
    prob.solve(solver=solver)
    return {
        "file": path.split("/")[-1],
        "solver": solver,
        "status": prob.status,
        "margin": float(t.value) if t.value is not None else None,
        "feasible": bool(t.value is not None and t.value >= floor),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("files", nargs="+")
    ap.add_argument("--solver", default="CLARABEL")
    ap.add_argument("--floor", type=float, default=1e-6)
    ap.add_argument("--bound", type=float, default=1e4)
    args = ap.parse_args()
    out = [verdict(p, args.solver, args.floor, args.bound) for p in args.files]
    json.dump({"floor": args.floor, "bound": args.bound, "results": out}, sys.stdout, indent=2)
    sys.stdout.write("\n")


if __name__ == "__main__":
    main()
