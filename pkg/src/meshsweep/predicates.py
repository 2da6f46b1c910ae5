"""Robust geometric predicates: orientation and in-sphere tests.

Each predicate evaluates its determinant in plain floating point first and
compares the magnitude against a forward error bound (Shewchuk-style static
filter).  Below the bound, the sign is recomputed exactly with rational
arithmetic, so the returned sign is always correct.

Conventions:
  orient3d(a,b,c,d) = sign det[b-a, c-a, d-a]
    (+1 when d is on the right-handed positive side of plane(a,b,c))
  in_sphere(a,b,c,d,e) = +1 iff e strictly inside the circumsphere,
    assuming orient3d(a,b,c,d) == +1.
"""

from fractions import Fraction

# Machine-epsilon derived filter constants (cf. Shewchuk's predicates).
_eps = 1.0
while 1.0 + _eps / 2.0 != 1.0:
    _eps /= 2.0
_O3D_BOUND = (7.0 + 56.0 * _eps) * _eps
_ISP_BOUND = (16.0 + 224.0 * _eps) * _eps


def _sign(x):
    if x > 0:
        return 1
    if x < 0:
        return -1
    return 0


def _orient3d_det(a, b, c, d):
    """det[b-a, c-a, d-a] and (for floats) its absolute-term permanent."""
    bax = b[0] - a[0]
    bay = b[1] - a[1]
    baz = b[2] - a[2]
    cax = c[0] - a[0]
    cay = c[1] - a[1]
    caz = c[2] - a[2]
    dax = d[0] - a[0]
    day = d[1] - a[1]
    daz = d[2] - a[2]

    m1 = cay * daz
    m2 = caz * day
    m3 = cax * daz
    m4 = caz * dax
    m5 = cax * day
    m6 = cay * dax

    det = bax * (m1 - m2) - bay * (m3 - m4) + baz * (m5 - m6)
    permanent = (abs(bax) * (abs(m1) + abs(m2))
                 + abs(bay) * (abs(m3) + abs(m4))
                 + abs(baz) * (abs(m5) + abs(m6)))
    return det, permanent


def orient3d(a, b, c, d):
    """Orientation of d relative to the plane through a, b, c: -1, 0 or +1."""
    det, permanent = _orient3d_det(a, b, c, d)
    errbound = _O3D_BOUND * permanent
    if det > errbound or -det > errbound:
        return _sign(det)
    fa = (Fraction(a[0]), Fraction(a[1]), Fraction(a[2]))
    fb = (Fraction(b[0]), Fraction(b[1]), Fraction(b[2]))
    fc = (Fraction(c[0]), Fraction(c[1]), Fraction(c[2]))
    fd = (Fraction(d[0]), Fraction(d[1]), Fraction(d[2]))
    det, _ = _orient3d_det(fa, fb, fc, fd)
    return _sign(det)


def _in_sphere_det(a, b, c, d, e):
    """In-sphere determinant with e-relative coordinates.

    Positive iff e is inside the circumsphere of a positively oriented
    (a,b,c,d).  Returns (det, permanent).
    """
    rows = []
    perm_rows = []
    for p in (a, b, c, d):
        px = p[0] - e[0]
        py = p[1] - e[1]
        pz = p[2] - e[2]
        lift = px * px + py * py + pz * pz
        rows.append((px, py, pz, lift))
        perm_rows.append((abs(px), abs(py), abs(pz), lift))

    def det3(r0, r1, r2):
        return (r0[0] * (r1[1] * r2[2] - r1[2] * r2[1])
                - r0[1] * (r1[0] * r2[2] - r1[2] * r2[0])
                + r0[2] * (r1[0] * r2[1] - r1[1] * r2[0]))

    def perm3(r0, r1, r2):
        return (r0[0] * (r1[1] * r2[2] + r1[2] * r2[1])
                + r0[1] * (r1[0] * r2[2] + r1[2] * r2[0])
                + r0[2] * (r1[0] * r2[1] + r1[1] * r2[0]))

    a_, b_, c_, d_ = rows
    pa, pb, pc, pd = perm_rows
    # Laplace expansion along the lifted column; sign chosen so that the
    # determinant is NEGATIVE for e inside when expanded naively, hence the
    # overall negation to make "inside" positive.
    det = (-a_[3] * det3(b_, c_, d_)
           + b_[3] * det3(a_, c_, d_)
           - c_[3] * det3(a_, b_, d_)
           + d_[3] * det3(a_, b_, c_))
    permanent = (pa[3] * perm3(pb, pc, pd)
                 + pb[3] * perm3(pa, pc, pd)
                 + pc[3] * perm3(pa, pb, pd)
                 + pd[3] * perm3(pa, pb, pc))
    return -det, permanent


def in_sphere(a, b, c, d, e):
    """+1 iff e strictly inside the circumsphere of positively oriented
    (a, b, c, d); -1 strictly outside; 0 on the sphere.
    """
    det, permanent = _in_sphere_det(a, b, c, d, e)
    errbound = _ISP_BOUND * permanent
    if det > errbound or -det > errbound:
        return _sign(det)
    fr = [tuple(Fraction(q) for q in p) for p in (a, b, c, d, e)]
    det, _ = _in_sphere_det(*fr)
    return _sign(det)


def in_circumcircle(a, b, c, p):
    """Side of the circumcircle of triangle (a, b, c) for a coplanar point p:
    +1 strictly inside, -1 outside, 0 on the circle.

    Evaluated exactly; used only on the rare hull-facet-coplanar insertion
    path, so speed is irrelevant.
    """
    ux, uy, uz = b[0] - a[0], b[1] - a[1], b[2] - a[2]
    vx, vy, vz = c[0] - a[0], c[1] - a[1], c[2] - a[2]
    nx = uy * vz - uz * vy
    ny = uz * vx - ux * vz
    nz = ux * vy - uy * vx
    ax_, ay_, az_ = abs(nx), abs(ny), abs(nz)
    if az_ >= ax_ and az_ >= ay_:
        i, j = 0, 1
    elif ay_ >= ax_:
        i, j = 2, 0
    else:
        i, j = 1, 2
    pa = (Fraction(a[i]), Fraction(a[j]))
    pb = (Fraction(b[i]), Fraction(b[j]))
    pc = (Fraction(c[i]), Fraction(c[j]))
    pp = (Fraction(p[i]), Fraction(p[j]))
    orient = _sign((pb[0] - pa[0]) * (pc[1] - pa[1])
                   - (pb[1] - pa[1]) * (pc[0] - pa[0]))
    if orient == 0:
        return 0
    rows = []
    for q in (pa, pb, pc):
        qx = q[0] - pp[0]
        qy = q[1] - pp[1]
        rows.append((qx, qy, qx * qx + qy * qy))
    det = (rows[0][0] * (rows[1][1] * rows[2][2] - rows[1][2] * rows[2][1])
           - rows[0][1] * (rows[1][0] * rows[2][2] - rows[1][2] * rows[2][0])
           + rows[0][2] * (rows[1][0] * rows[2][1] - rows[1][1] * rows[2][0]))
    return orient * _sign(det)
