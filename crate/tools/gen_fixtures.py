#!/usr/bin/env python3
"""Generate the bundled triangulation fixtures.

Horseshoe meshes are built by mapping a structured strip grid through the
horseshoe bend, then splitting the longest interior/boundary edges until the
target triangle/vertex counts are met:

  tri1:  90 triangles /  74 vertices
  tri2: 158 triangles / 114 vertices
  tri3: 286 triangles / 186 vertices

Also emits a unit-square lattice mesh, an irregular blob mesh, and a
deliberately non-conforming two-triangle mesh used by negative tests.
"""
import math
import os
import numpy as np

OUT = os.path.join(os.path.dirname(__file__), "..", "crates", "splsm", "fixtures")

R = 0.5      # spine radius
R0 = 0.1     # inner hole radius
L = 3.0      # arm length
W = R - R0   # half width of the strip
Q = math.pi * R / 2.0


def strip_to_xy(a, d):
    """Map spine coordinate a and signed offset d to the plane."""
    if a >= Q:
        return (a - Q, R + d)
    if a <= -Q:
        return (-Q - a, -R - d)
    psi = a / R
    rho = R + d
    return (-rho * math.cos(psi), rho * math.sin(psi))


def build_strip(m, n):
    """Structured strip mesh: m segments along the spine, n across."""
    amax = Q + L
    verts = []
    for i in range(m + 1):
        a = -amax + 2 * amax * i / m
        for j in range(n + 1):
            d = -W + 2 * W * j / n
            verts.append(strip_to_xy(a, d))
    tris = []
    for i in range(m):
        for j in range(n):
            v00 = i * (n + 1) + j
            v01 = v00 + 1
            v10 = v00 + (n + 1)
            v11 = v10 + 1
            tris.append((v00, v10, v11))
            tris.append((v00, v11, v01))
    return verts, tris


def orient_ccw(verts, tris):
    out = []
    for (a, b, c) in tris:
        (x1, y1), (x2, y2), (x3, y3) = verts[a], verts[b], verts[c]
        area2 = (x2 - x1) * (y3 - y1) - (x3 - x1) * (y2 - y1)
        out.append((a, b, c) if area2 > 0 else (a, c, b))
    return out


def edge_map(tris):
    em = {}
    for t, (a, b, c) in enumerate(tris):
        for (u, v) in ((a, b), (b, c), (c, a)):
            em.setdefault((min(u, v), max(u, v)), []).append(t)
    return em


def edge_len(verts, e):
    (x1, y1), (x2, y2) = verts[e[0]], verts[e[1]]
    return math.hypot(x2 - x1, y2 - y1)


def split_edge(verts, tris, interior):
    """Split the longest interior (or boundary) edge at its midpoint."""
    em = edge_map(tris)
    want = 2 if interior else 1
    cands = [(edge_len(verts, e), e) for e, ts in em.items() if len(ts) == want]
    cands.sort(key=lambda p: (-p[0], p[1]))
    _, e = cands[0]
    owners = em[e]
    (x1, y1), (x2, y2) = verts[e[0]], verts[e[1]]
    mid = ((x1 + x2) / 2, (y1 + y2) / 2)
    mi = len(verts)
    verts.append(mid)
    for t in sorted(owners, reverse=True):
        a, b, c = tris[t]
        # rotate so the split edge is (a, b)
        for _ in range(3):
            if {a, b} == set(e):
                break
            a, b, c = b, c, a
        del tris[t]
        tris.append((a, mi, c))
        tris.append((mi, b, c))
    return verts, tris


def counts(verts, tris):
    em = edge_map(tris)
    nb = sum(1 for ts in em.values() if len(ts) == 1)
    ni = sum(1 for ts in em.values() if len(ts) == 2)
    bad = sum(1 for ts in em.values() if len(ts) > 2)
    return len(tris), len(verts), ni, nb, bad


def build_horseshoe(m, n, k_interior, k_boundary):
    verts, tris = build_strip(m, n)
    verts = [list(v) for v in verts]
    tris = list(tris)
    for _ in range(k_interior):
        verts, tris = split_edge(verts, tris, True)
    for _ in range(k_boundary):
        verts, tris = split_edge(verts, tris, False)
    tris = orient_ccw(verts, tris)
    return verts, tris


def build_lattice(nx, ny, x0=0.0, y0=0.0, x1=1.0, y1=1.0):
    verts = []
    for i in range(nx + 1):
        for j in range(ny + 1):
            verts.append((x0 + (x1 - x0) * i / nx, y0 + (y1 - y0) * j / ny))
    tris = []
    for i in range(nx):
        for j in range(ny):
            v00 = i * (ny + 1) + j
            v01 = v00 + 1
            v10 = v00 + (ny + 1)
            v11 = v10 + 1
            tris.append((v00, v10, v11))
            tris.append((v00, v11, v01))
    return [list(v) for v in verts], orient_ccw(verts, tris)


def build_blob(seed=7):
    from scipy.spatial import Delaunay
    rng = np.random.default_rng(seed)
    pts = []
    # irregular star-shaped boundary
    nb = 26
    for i in range(nb):
        th = 2 * math.pi * i / nb
        rad = 0.85 + 0.22 * math.sin(3 * th) + 0.08 * math.cos(5 * th)
        pts.append((rad * math.cos(th), rad * math.sin(th)))
    # interior points
    while len(pts) < 60:
        p = rng.uniform(-1.2, 1.2, 2)
        th = math.atan2(p[1], p[0])
        rad = 0.85 + 0.22 * math.sin(3 * th) + 0.08 * math.cos(5 * th)
        if math.hypot(*p) < rad - 0.18:
            pts.append((p[0], p[1]))
    pts = np.array(pts)
    dt = Delaunay(pts)
    keep = []
    for simp in dt.simplices:
        c = pts[simp].mean(axis=0)
        th = math.atan2(c[1], c[0])
        rad = 0.85 + 0.22 * math.sin(3 * th) + 0.08 * math.cos(5 * th)
        if math.hypot(*c) < rad - 0.01:
            keep.append(tuple(int(v) for v in simp))
    used = sorted({v for t in keep for v in t})
    remap = {v: i for i, v in enumerate(used)}
    verts = [list(pts[v]) for v in used]
    tris = [(remap[a], remap[b], remap[c]) for (a, b, c) in keep]
    return verts, orient_ccw(verts, tris)


def write_mesh(name, verts, tris):
    os.makedirs(OUT, exist_ok=True)
    with open(os.path.join(OUT, f"{name}_vertices.csv"), "w") as f:
        f.write("x,y\n")
        for (x, y) in verts:
            f.write(f"{x!r},{y!r}\n")
    with open(os.path.join(OUT, f"{name}_triangles.csv"), "w") as f:
        f.write("v1,v2,v3\n")
        for (a, b, c) in tris:
            f.write(f"{a},{b},{c}\n")


def main():
    specs = {
        "horseshoe_tri1": build_horseshoe(18, 2, 1, 16),
        "horseshoe_tri2": build_horseshoe(24, 3, 0, 14),
        "horseshoe_tri3": build_horseshoe(32, 4, 9, 12),
        "lattice": build_lattice(6, 6),
        "blob": build_blob(),
    }
    for name, (verts, tris) in specs.items():
        t, v, ni, nb, bad = counts(verts, tris)
        assert bad == 0, name
        print(f"{name}: T={t} V={v} interior={ni} boundary={nb}")
        write_mesh(name, verts, tris)
    # non-conforming: overlapping partial edge
    write_mesh(
        "nonconforming",
        [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.5, 0.0], [2.0, 0.0], [1.5, 1.0]],
        [(0, 1, 2), (3, 4, 5)],
    )


if __name__ == "__main__":
    main()
