#!/usr/bin/env python3
"""Writes tests/mms_solution.hpp: body force and boundary tractions of a
manufactured nonlinear Stokes solution on the unit square.

Velocity comes from the stream function psi = z + z^2 (1 + 0.1 sin(pi x)), so it
is divergence free and tangential on the flat bed z = 0.
"""
import pathlib
import sympy as sp

x, z = sp.symbols("x z", real=True)
n_glen, A, eps, beta = sp.Integer(3), sp.Integer(1), sp.Rational(1, 10**10), sp.Integer(0)

psi = z + z**2 * (1 + sp.Rational(1, 10) * sp.sin(sp.pi * x))
u = sp.diff(psi, z)
w = -sp.diff(psi, x)
p = sp.cos(sp.pi * x) * (z - sp.Rational(1, 2))

exx = sp.diff(u, x)
ezz = sp.diff(w, z)
exz = (sp.diff(u, z) + sp.diff(w, x)) / 2
II = (exx**2 + ezz**2 + 2 * exz**2) / 2
eta = A ** (-1 / n_glen) / 2 * (II + eps) ** ((1 - n_glen) / (2 * n_glen))
sxx = 2 * eta * exx - p
szz = 2 * eta * ezz - p
sxz = 2 * eta * exz

fx = -(sp.diff(sxx, x) + sp.diff(sxz, z))
fz = -(sp.diff(sxz, x) + sp.diff(szz, z))


def traction(nx, nz):
    return (sxx * nx + sxz * nz, sxz * nx + szz * nz)


# Bed: sigma n + exp(beta) u (u is tangential there).
bottom = tuple(t + sp.exp(beta) * v for t, v in zip(traction(0, -1), (u, w)))
faces = {
    "bottom": bottom,
    "top": traction(0, 1),
    "left": traction(-1, 0),
    "right": traction(1, 0),
}


def cxx(e):
    return sp.cxxcode(sp.simplify(e) if sp.count_ops(e) < 400 else e, standard="c++17")


lines = [
    "// Generated by tools/gen_mms.py; do not edit.",
    "#pragma once",
    "",
    "#include <array>",
    "#include <cmath>",
    "",
    "namespace mms {",
    "",
    "inline std::array<double, 2> velocity(double x, double z) {",
    f"  return {{{cxx(u)}, {cxx(w)}}};",
    "}",
    "",
    "inline double pressure(double x, double z) {",
    f"  return {cxx(p)};",
    "}",
    "",
    "inline std::array<double, 2> body_force(double x, double z) {",
    f"  return {{{cxx(fx)},",
    f"          {cxx(fz)}}};",
    "}",
    "",
]
for name, (tx, tz) in faces.items():
    lines += [
        f"inline std::array<double, 2> traction_{name}(double x, double z) {{",
        f"  return {{{cxx(tx)},",
        f"          {cxx(tz)}}};",
        "}",
        "",
    ]
lines += ["}  // namespace mms", ""]

out = pathlib.Path(__file__).resolve().parent.parent / "tests" / "mms_solution.hpp"
out.write_text("\n".join(lines))
print(f"wrote {out}")
