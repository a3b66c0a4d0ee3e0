#!/usr/bin/env python3
"""Generate unstructured Delaunay triangulations of [-1,1]^2 in .node/.ele format.

Interior points start from a jittered hexagonal lattice and are relaxed with a
few spring-smoothing sweeps (distmesh style). Output is deterministic for a
given seed.
"""
import argparse
import numpy as np
from scipy.spatial import Delaunay


def boundary_points(n):
    t = np.linspace(-1.0, 1.0, n + 1)[:-1]
    pts = [np.column_stack([t, -np.ones(n)]),
           np.column_stack([np.ones(n), t]),
           np.column_stack([-t, np.ones(n)]),
           np.column_stack([-np.ones(n), -t])]
    return np.vstack(pts)


def interior_points(h, rng):
    pts = []
    ny = int(np.ceil(2.0 / (h * np.sqrt(3) / 2))) + 2
    for j in range(ny):
        y = -1.0 + j * h * np.sqrt(3) / 2
        off = 0.5 * h if j % 2 else 0.0
        for x in np.arange(-1.0 + off, 1.0 + h, h):
            pts.append((x, y))
    pts = np.array(pts) + rng.uniform(-0.15 * h, 0.15 * h, size=(len(pts), 2))
    keep = np.all(np.abs(pts) < 1.0 - 0.55 * h, axis=1)
    return pts[keep]


def smooth(bnd, inner, iters=40):
    nb = len(bnd)
    for _ in range(iters):
        p = np.vstack([bnd, inner])
        tri = Delaunay(p).simplices
        edges = np.vstack([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]])
        edges = np.unique(np.sort(edges, axis=1), axis=0)
        acc = np.zeros_like(p)
        cnt = np.zeros(len(p))
        for a, b in edges:
            acc[a] += p[b]; cnt[a] += 1
            acc[b] += p[a]; cnt[b] += 1
        newp = acc / cnt[:, None]
        inner = 0.5 * inner + 0.5 * newp[nb:]
        inner = np.clip(inner, -0.999, 0.999)
    return inner


def min_angle(p, tri):
    worst = 180.0
    for t in tri:
        for i in range(3):
            a, b, c = p[t[i]], p[t[(i + 1) % 3]], p[t[(i + 2) % 3]]
            u, v = b - a, c - a
            cosang = np.dot(u, v) / np.linalg.norm(u) / np.linalg.norm(v)
            worst = min(worst, np.degrees(np.arccos(np.clip(cosang, -1, 1))))
    return worst


def write(prefix, p, tri):
    with open(prefix + ".node", "w") as f:
        f.write(f"{len(p)} 2 0 1\n")
        for i, (x, y) in enumerate(p):
            b = int(abs(abs(x) - 1) < 1e-12 or abs(abs(y) - 1) < 1e-12)
            f.write(f"{i + 1} {x:.17g} {y:.17g} {b}\n")
    with open(prefix + ".ele", "w") as f:
        f.write(f"{len(tri)} 3 0\n")
        for i, t in enumerate(tri):
            f.write(f"{i + 1} {t[0] + 1} {t[1] + 1} {t[2] + 1}\n")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--nb", type=int, required=True, help="boundary segments per side")
    ap.add_argument("--h", type=float, required=True, help="interior spacing")
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--out", required=True)
    a = ap.parse_args()
    rng = np.random.default_rng(a.seed)
    bnd = boundary_points(a.nb)
    inner = smooth(bnd, interior_points(a.h, rng))
    p = np.vstack([bnd, inner])
    tri = Delaunay(p).simplices
    e1 = p[tri[:, 1]] - p[tri[:, 0]]
    e2 = p[tri[:, 2]] - p[tri[:, 0]]
    area = np.abs(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]) / 2
    tri = tri[area > 1e-10]
    write(a.out, p, tri)
    print(a.out, "K =", len(tri), "V =", len(p), "min angle =", f"{min_angle(p, tri):.1f}")


if __name__ == "__main__":
    main()
