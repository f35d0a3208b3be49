"""Writes the initial meshes of the built-in problems to crates/core/data/.

Every boundary edge carries a pie triangle whose apex is pulled inward from the arc
midpoint; consecutive pies are separated by one buffer triangle, and the polygon of apexes
plus a few interior points is Delaunay-triangulated.

    python3 tools/gen_meshes.py
"""

import json
import math
import os

import numpy as np
from scipy.spatial import Delaunay

OUT = os.path.join(os.path.dirname(__file__), "..", "crates", "core", "data")


def cross(u, v):
    return u[0] * v[1] - u[1] * v[0]


def ellipse_coeffs(cx, cy, a, b):
    ia, ib = 1.0 / (a * a), 1.0 / (b * b)
    return [-ia, 0.0, -ib, 2 * cx * ia, 2 * cy * ib, 1 - cx * cx * ia - cy * cy * ib]


class EllipseArc:
    """x = cx + a cos t, y = cy + b sin t for t from t0 to t1."""

    def __init__(self, cx, cy, a, b, t0, t1):
        self.c, self.a, self.b, self.t0, self.t1 = (cx, cy), a, b, t0, t1

    def point(self, s):
        t = self.t0 + s * (self.t1 - self.t0)
        return np.array([self.c[0] + self.a * math.cos(t), self.c[1] + self.b * math.sin(t)])

    def inward_normal(self, s):
        t = self.t0 + s * (self.t1 - self.t0)
        n = -np.array([math.cos(t) / self.a, math.sin(t) / self.b])
        return n / np.linalg.norm(n) * math.copysign(1.0, self.t1 - self.t0)

    def coeffs(self):
        return ellipse_coeffs(self.c[0], self.c[1], self.a, self.b)


def build(arcs, segments, interior, pull):
    """`segments[k]` boundary edges on arc k; apexes sit `pull` edge lengths inside."""
    bnd, apex, edge_arc = [], [], []
    for k, (arc, n) in enumerate(zip(arcs, segments)):
        for i in range(n):
            p, q = arc.point(i / n), arc.point((i + 1) / n)
            m = arc.point((i + 0.5) / n)
            bnd.append(p)
            apex.append(m + pull * np.linalg.norm(q - p) * arc.inward_normal((i + 0.5) / n))
            edge_arc.append(k)
    nb = len(bnd)
    pts = [np.asarray(x, float) for x in interior]
    inner = np.array(apex + pts)
    tri = Delaunay(inner)
    hull = set(tri.convex_hull.flatten())
    assert hull == set(range(nb)), "apex polygon must be convex and contain the interior points"
    # vertex numbering: interior points, apexes, boundary
    ni = len(pts)
    remap = {i: ni + i for i in range(nb)}
    remap.update({nb + j: j for j in range(ni)})
    vertices = pts + apex + bnd
    w = lambda i: ni + i % nb
    b = lambda i: ni + nb + i % nb
    triangles = []
    for s in tri.simplices:
        a, c, d = (remap[int(x)] for x in s)
        pa, pc, pd = (vertices[x] for x in (a, c, d))
        if cross(pc - pa, pd - pa) < 0:
            c, d = d, c
        triangles.append([a, c, d])
    boundary_arcs = []
    for i in range(nb):
        triangles.append([w(i), b(i), b(i + 1)])
        triangles.append([b(i + 1), w(i + 1), w(i)])
        boundary_arcs.append([b(i), b(i + 1), edge_arc[i]])
    domain = {
        "arcs": [
            {"coeffs": arc.coeffs(), "from": list(arc.point(0.0)), "to": list(arc.point(1.0))}
            for arc in arcs
        ]
    }
    return {
        "domain": domain,
        "vertices": [[float(x[0]), float(x[1])] for x in vertices],
        "triangles": triangles,
        "boundary_arcs": boundary_arcs,
    }


def quarter_arcs(a, b):
    h = math.pi / 2
    return [EllipseArc(0.0, 0.0, a, b, k * h, (k + 1) * h) for k in range(4)]


def disk():
    return build(quarter_arcs(1.0, 1.0), [2] * 4, [[0.0, 0.0]], 0.45)


def ellipse():
    interior = [[-0.45, 0.0], [0.0, 0.0], [0.45, 0.0]]
    return build(quarter_arcs(1.0, 0.4), [3] * 4, interior, 0.4)


def c2_parameters():
    a, b, t = 4.0, 1.3, 0.85 * math.pi
    p = np.array([a * math.cos(t), b * math.sin(t)])
    d1 = np.array([-a * math.sin(t), b * math.cos(t)])
    d2 = np.array([-a * math.cos(t), -b * math.sin(t)])
    speed = np.linalg.norm(d1)
    kappa = a * b / (a * a * math.sin(t) ** 2 + b * b * math.cos(t) ** 2) ** 1.5
    r = 1.0 / kappa
    normal = np.array([-d1[1], d1[0]]) / speed  # left normal, towards the centre
    centre = p + r * normal
    assert abs(cross(d1, d2) / speed**3 - kappa) < 1e-12
    return a, b, t, float(centre[0]), float(centre[1]), float(r)


def c2_domain():
    a, b, t, c1, c2, r = c2_parameters()
    t0 = math.pi - t
    top = EllipseArc(0.0, -c2, a, b, t0, t)
    left_start = math.atan2(top.point(1.0)[1], top.point(1.0)[0] - c1)
    left = EllipseArc(c1, 0.0, r, r, left_start, 2 * math.pi - left_start)
    bottom = EllipseArc(0.0, c2, a, b, t0 + math.pi, t + math.pi)
    right = EllipseArc(-c1, 0.0, r, r, left_start - math.pi, math.pi - left_start)
    interior = [[x, y] for x in (-2.6, -1.3, 0.0, 1.3, 2.6) for y in (-0.75, 0.75)]
    return build([top, left, bottom, right], [6, 3, 6, 3], interior, 0.4)


def main():
    os.makedirs(OUT, exist_ok=True)
    for name, mesh in [("disk", disk()), ("ellipse", ellipse()), ("c2-domain", c2_domain())]:
        with open(os.path.join(OUT, f"{name}.json"), "w") as f:
            json.dump(mesh, f, indent=1)
        print(name, len(mesh["vertices"]), "vertices", len(mesh["triangles"]), "triangles")


if __name__ == "__main__":
    main()
