"""Independent oracle for the frozen frontier values used in the Rust tests.

Enumerates every deterministic policy of the single-buffer model, builds the
row-stochastic chain by simulating one slot of the queue dynamics, solves for
the stationary law with a least-squares system (not the ones-row elimination
used by the library), and extracts the Pareto-optimal lower convex hull.

    python3 frontier_oracle.py 0.4 2 3 5 0,1,4,9
"""
import itertools
import sys
from fractions import Fraction

import numpy as np


def feasible(k, q, m_max):
    return range(max(0, k - q), min(k, m_max) + 1)


def evaluate(alpha, a, q, power, actions):
    kk = q + a
    n = kk + 1
    chain = np.zeros((n, n))
    for t, m in enumerate(actions):
        left = t - m
        chain[t, left] += 1 - alpha
        chain[t, left + a] += alpha
    system = np.vstack([chain.T - np.eye(n), np.ones(n)])
    rhs = np.zeros(n + 1)
    rhs[-1] = 1.0
    pi, _, rank, _ = np.linalg.lstsq(system, rhs, rcond=None)
    if rank < n:
        return None
    p = sum(pi[t] * power[m] for t, m in enumerate(actions))
    d = sum(t * pi[t] for t in range(n)) / (alpha * a) - 1
    return p, d


def lower_left_hull(points):
    pts = sorted(set((round(p, 12), round(d, 12)) for p, d in points))
    hull = []
    for pt in pts:
        while len(hull) >= 2:
            (x1, y1), (x2, y2) = hull[-2], hull[-1]
            cross = (x2 - x1) * (pt[1] - y1) - (y2 - y1) * (pt[0] - x1)
            if cross <= 1e-12:
                hull.pop()
            else:
                break
        hull.append(pt)
    out = [hull[0]]
    for pt in hull[1:]:
        if pt[1] < out[-1][1] - 1e-12:
            out.append(pt)
        else:
            break
    return out[::-1]


def main():
    alpha = float(sys.argv[1])
    a, m_max, q = (int(x) for x in sys.argv[2:5])
    power = [float(x) for x in sys.argv[5].split(",")]
    kk = q + a
    sets = [list(feasible(k, q, m_max)) for k in range(kk + 1)]
    points = []
    owners = {}
    singular = 0
    total = 0
    for actions in itertools.product(*sets):
        total += 1
        r = evaluate(alpha, a, q, power, actions)
        if r is None:
            singular += 1
            continue
        points.append(r)
        owners.setdefault((round(r[0], 12), round(r[1], 12)), actions)
    print(f"policies={total} singular={singular}")
    for p, d in lower_left_hull(points):
        fp = Fraction(p).limit_denominator(100000)
        fd = Fraction(d).limit_denominator(100000)
        print(f"{p:.12f} {d:.12f} {fp} {fd} actions={owners[(p, d)]}")


if __name__ == "__main__":
    main()
