"""Exact symbolic oracle for the five-edge fixture's Fermi-rule constants.

Independent of the numeric solver: the driven vertex-condition system of
the equilateral five-edge network is solved in closed form with sympy and
the holomorphic limit at the embedded eigenvalue cos(k l0) = -1/3 is taken
exactly.  Run it to regenerate the frozen constants asserted in
tests/test_fermi.py:

    python tools/five_edge_symbolic.py

The trick: with z = k*l0 and u = tan(z/2), every matrix entry is a rational
function of u, and the eigenvalue sits at u = sqrt(2).  The driven system
is singular there, but each solution component is a rational function of u
whose (u^2 - 2) factors cancel, so the limit is literal substitution after
``cancel``.

Unknowns, matching the fixture's edge order (e3, e4, e5, e6, e7):
x = (a3, b3, a4, b4, a5, b5, a6, b6, a7, b7, out1, out2) with the field
a sin(kx) + b cos(kx) on edges and in exp(-ikx) + out exp(ikx) on leads.
Vertices: v1, v2 carry leads 1, 2; e3 = (v1,v3), e4 = (v2,v3),
e5 = (v2,v4), e6 = (v1,v4), e7 = (v3,v4).
"""

import sympy as sp

U = sp.symbols("u", positive=True)
SIN = 2 * U / (1 + U**2)
COS = (1 - U**2) / (1 + U**2)
I = sp.I
ROOT = sp.sqrt(2)  # u at the embedded eigenvalue: cos z = -1/3  ->  u = sqrt(2)

# column indices
A3, B3, A4, B4, A5, B5, A6, B6, A7, B7, OUT1, OUT2 = range(12)

EDGES = {  # edge -> (tail, head, (a_col, b_col))
    "e3": ("v1", "v3", (A3, B3)),
    "e4": ("v2", "v3", (A4, B4)),
    "e5": ("v2", "v4", (A5, B5)),
    "e6": ("v1", "v4", (A6, B6)),
    "e7": ("v3", "v4", (A7, B7)),
}
LEADS = {"v1": OUT1, "v2": OUT2}


def value_coeffs(edge, vertex):
    a, b = EDGES[edge][2]
    row = [sp.Integer(0)] * 12
    if EDGES[edge][0] == vertex:  # x = 0 end
        row[b] = sp.Integer(1)
    else:  # x = l0 end
        row[a] = SIN
        row[b] = COS
    return sp.Matrix([row])


def dnu_coeffs(edge, vertex):
    # derivative into the vertex, divided by k
    a, b = EDGES[edge][2]
    row = [sp.Integer(0)] * 12
    if EDGES[edge][0] == vertex:
        row[a] = sp.Integer(-1)
    else:
        row[a] = COS
        row[b] = -SIN
    return sp.Matrix([row])


def build_system(drive_lead):
    """Rows of M x = rhs for unit incoming amplitude on drive_lead (1 or 2)."""
    rows = []
    rhs = []
    incident = {
        "v1": ["lead1", "e3", "e6"],
        "v2": ["lead2", "e4", "e5"],
        "v3": ["e3", "e4", "e7"],
        "v4": ["e5", "e6", "e7"],
    }

    def lead_value(vertex):
        row = [sp.Integer(0)] * 12
        row[LEADS[vertex]] = sp.Integer(1)
        inhom = sp.Integer(1) if f"lead{drive_lead}" == f"lead{1 if vertex == 'v1' else 2}" and (
            (drive_lead == 1 and vertex == "v1") or (drive_lead == 2 and vertex == "v2")
        ) else sp.Integer(0)
        return sp.Matrix([row]), inhom

    def lead_dnu(vertex):
        row = [sp.Integer(0)] * 12
        row[LEADS[vertex]] = -I
        inhom = I if (drive_lead == 1 and vertex == "v1") or (
            drive_lead == 2 and vertex == "v2"
        ) else sp.Integer(0)
        return sp.Matrix([row]), inhom

    for vertex, items in incident.items():
        vals = []
        for item in items:
            if item.startswith("lead"):
                r, inh = lead_value(vertex)
                vals.append((r, inh))
            else:
                vals.append((value_coeffs(item, vertex), sp.Integer(0)))
        for (r1, i1), (r2, i2) in zip(vals, vals[1:]):
            rows.append(r1 - r2)
            rhs.append(-(i1 - i2))  # move the drive to the right-hand side
        ksum = sp.zeros(1, 12)
        inhom = sp.Integer(0)
        for item in items:
            if item.startswith("lead"):
                r, inh = lead_dnu(vertex)
                ksum += r
                inhom += inh
            else:
                ksum += dnu_coeffs(item, vertex)
        rows.append(ksum)
        rhs.append(-inhom)
    return sp.Matrix.vstack(*rows), sp.Matrix(rhs)


def limit_solution(drive_lead):
    m, rhs = build_system(drive_lead)
    x = m.LUsolve(rhs)
    out = []
    for comp in x:
        c = sp.cancel(sp.together(comp))
        val = sp.simplify(c.subs(U, ROOT))
        out.append(sp.nsimplify(val, rational=False))
    return out


def eigenfunction():
    """Normalized lead-vanishing eigenfunction, exact coefficients."""
    l0 = sp.symbols("ell_0", positive=True)
    z0 = sp.acos(-sp.Rational(1, 3))
    k = z0 / l0
    amp = sp.sqrt(sp.Rational(3, 8)) / sp.sqrt(l0)
    s0 = 2 * sp.sqrt(2) / 3
    c0 = -sp.Rational(1, 3)
    coeffs = {
        "e3": (amp, 0),
        "e4": (amp, 0),
        "e5": (-amp, 0),
        "e6": (-amp, 0),
        "e7": (2 * amp * c0, amp * s0),
    }
    return l0, k, s0, c0, coeffs


def overlap(k, l0, s0, c0, z0, a1, b1, a2c, b2c):
    """Integral over one edge of (a1 sin + b1 cos)(a2c sin + b2c cos), exact.

    The second factor is passed already conjugated.
    """
    i_ss = l0 / 2 - 2 * s0 * c0 / (4 * k)
    i_cc = l0 / 2 + 2 * s0 * c0 / (4 * k)
    i_sc = s0**2 / (2 * k)
    return a1 * a2c * i_ss + b1 * b2c * i_cc + (a1 * b2c + b1 * a2c) * i_sc


def main():
    sols = {}
    for lead in (1, 2):
        sols[lead] = limit_solution(lead)
        names = ["a3", "b3", "a4", "b4", "a5", "b5", "a6", "b6", "a7", "b7", "out1", "out2"]
        print(f"e^{lead} limit coefficients at cos(k l0) = -1/3:")
        for n, v in zip(names, sols[lead]):
            print(f"   {n} = {sp.simplify(v)} = {complex(sp.N(v, 20)):.15g}")

    l0, k, s0, c0, coeffs = eigenfunction()
    z0 = sp.acos(-sp.Rational(1, 3))
    rates = {"e3": 1, "e4": -1, "e5": 1, "e6": -1, "e7": -1}

    print("\nF_s pieces with the fixture rates (exact, then numeric at l0 = 1):")
    for lead in (1, 2):
        x = sols[lead]
        gef = {
            "e3": (x[A3], x[B3]),
            "e4": (x[A4], x[B4]),
            "e5": (x[A5], x[B5]),
            "e6": (x[A6], x[B6]),
            "e7": (x[A7], x[B7]),
        }
        vol = sp.Integer(0)
        for e, rate in rates.items():
            a1, b1 = coeffs[e]
            a2, b2 = gef[e]
            vol += rate * overlap(k, l0, s0, c0, z0, a1, b1, sp.conjugate(a2), sp.conjugate(b2))
        vol = sp.simplify(-k * vol)

        # vertex sum: 3 dnu(u) conj(e(v)) - u(v) conj(dnu(e)) over incident edges
        def uval_dnu(e, vertex):
            a, b = coeffs[e]
            if EDGES[e][0] == ("v1", "v2", "v3", "v4")[["v1", "v2", "v3", "v4"].index(vertex)]:
                pass
            if EDGES[e][0] == vertex:
                return b, -k * a
            return a * s0 + b * c0, k * (a * c0 - b * s0)

        def eval_dnu(e, vertex):
            a, b = gef[e]
            if EDGES[e][0] == vertex:
                return b, -k * a
            return a * s0 + b * c0, k * (a * c0 - b * s0)

        def evertex(vertex):
            # common value from any incident edge
            for e in EDGES:
                if vertex in EDGES[e][:2]:
                    v, _ = eval_dnu(e, vertex)
                    return v

        def uvertex(vertex):
            for e in EDGES:
                if vertex in EDGES[e][:2]:
                    v, _ = uval_dnu(e, vertex)
                    return v

        vert = sp.Integer(0)
        for vertex in ("v1", "v2", "v3", "v4"):
            ev = evertex(vertex)
            uv = uvertex(vertex)
            for e, rate in rates.items():
                if vertex not in EDGES[e][:2]:
                    continue
                ends = [EDGES[e][0] == vertex, EDGES[e][1] == vertex]
                # self-loop-free fixture: exactly one end per incident pair
                _, udn = uval_dnu(e, vertex)
                _, edn = eval_dnu(e, vertex)
                vert += sp.Rational(1, 4) * rate * (
                    3 * udn * sp.conjugate(ev) - uv * sp.conjugate(edn)
                )
        vert = sp.simplify(-vert / k)
        f_total = sp.simplify(vol + vert)
        print(f"  lead {lead}:")
        print(f"    volume = {vol}")
        print(f"    vertex = {vert}")
        num_vol = complex(sp.N(vol.subs(l0, 1), 20))
        num_vert = complex(sp.N(vert.subs(l0, 1), 20))
        num_f = complex(sp.N(f_total.subs(l0, 1), 20))
        print(f"    volume(l0=1) = {num_vol:.15g}")
        print(f"    vertex(l0=1) = {num_vert:.15g}")
        print(f"    |F|^2 (l0=1) = {abs(num_f)**2:.15g}")
        if lead == 1:
            im_kdd = sp.simplify(-2 * (sp.re(f_total) ** 2 + sp.im(f_total) ** 2))
            print(f"\nIm k_ddot * l0 (exact): {sp.simplify(im_kdd.subs(l0, 1))}")
            print(f"Im k_ddot * l0 (numeric): {float(sp.N(im_kdd.subs(l0, 1), 20)):.15g}")


if __name__ == "__main__":
    main()
