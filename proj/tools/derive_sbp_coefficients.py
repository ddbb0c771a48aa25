#!/usr/bin/env python3
"""Regenerates include/hhsbp/detail/sbp_coefficients.hpp.

Solves the diagonal-norm first-derivative SBP conditions exactly with sympy:
interior central stencil of order 2p, boundary block of r rows exact for
polynomials up to degree p, Q + Q^T = diag(-1, 0, ..., 0, 1).  Remaining free
parameters are fixed as follows:

  2p = 6: q(4,5) matches the widely used Mattsson-Nordstrom closure.
  2p = 8: least-squares minimum of the degree 5 and 6 boundary truncation
          residuals of D1.

Usage: derive_sbp_coefficients.py > include/hhsbp/detail/sbp_coefficients.hpp
"""
import sympy as sp

DIGITS = 40


def derive(p, r):
    c = sp.symbols("c1:%d" % (p + 1))
    eqs = [sum(2 * c[k - 1] * k ** (2 * j - 1) for k in range(1, p + 1)) - (1 if j == 1 else 0)
           for j in range(1, p + 1)]
    cs = sp.solve(eqs, c)
    cint = [cs[ci] for ci in c]
    pv = sp.symbols("p0:%d" % r)
    qsym = {}
    unknowns = list(pv)

    def Q(i, j):
        if i == j:
            if i == 0:
                return sp.Rational(-1, 2)
            if i < r:
                return sp.Integer(0)
        if i < r and j < r:
            a, b = min(i, j), max(i, j)
            if (a, b) not in qsym:
                qsym[(a, b)] = sp.Symbol("q_%d_%d" % (a, b))
                unknowns.append(qsym[(a, b)])
            return qsym[(a, b)] if i < j else -qsym[(a, b)]
        d = j - i
        if 0 < abs(d) <= p:
            return cint[abs(d) - 1] * (1 if d > 0 else -1)
        return sp.Integer(0)

    eqs = []
    for i in range(r):
        for k in range(0, p + 1):
            lhs = sum(Q(i, j) * sp.Integer(j) ** k for j in range(0, r + p + 1))
            rhs = pv[i] if k == 1 else (k * pv[i] * sp.Integer(i) ** (k - 1) if k > 1 else 0)
            eqs.append(sp.expand(lhs - rhs))
    sol = sp.solve(eqs, unknowns, dict=True)[0]
    return sol, pv, qsym, cint, Q


def residuals(sol, pv, Q, p, r, degree):
    out = []
    for i in range(r):
        lhs = sum(Q(i, j) * sp.Integer(j) ** degree for j in range(0, r + p + 1))
        rhs = degree * pv[i] * sp.Integer(i) ** (degree - 1)
        out.append(sp.expand((lhs - rhs).subs(sol)) / sol[pv[i]])
    return out


def main():
    print("// Generated by tools/derive_sbp_coefficients.py. Do not edit.")
    print("#pragma once\n\n#include <array>\n\nnamespace hhsbp::detail {\n")
    for p, r in [(1, 1), (2, 4), (3, 6), (4, 8)]:
        sol, pv, qsym, cint, Q = derive(p, r)
        free = sorted(set().union(*[sp.sympify(v).free_symbols for v in sol.values()]), key=str)
        fix = {}
        if p == 3:
            d05 = sp.Rational("0.03662604404499391209045870736276191879693")
            fix = {free[0]: sp.solve(sp.Eq(sol[qsym[(0, 5)]], d05 * sol[pv[0]]), free[0])[0]}
        elif p == 4:
            res = residuals(sol, pv, Q, p, r, p + 1) + residuals(sol, pv, Q, p, r, p + 2)
            J = sum(e ** 2 for e in res)
            fix = sp.solve([sp.diff(J, f) for f in free], free, dict=True)[0]
        weights = [sol[x] for x in pv]
        width = r + p
        block = [[sp.sympify(Q(i, j)).subs(sol).subs(fix) for j in range(width)] for i in range(r)]
        name = "kInterior%d" % (2 * p)
        print("// Interior order %d, boundary closure order %d." % (2 * p, p))
        print("struct Sbp%d {" % (2 * p))
        print("  static constexpr int kHalfWidth = %d;" % p)
        print("  static constexpr int kBlockRows = %d;" % r)
        print("  static constexpr int kBlockCols = %d;" % width)
        print("  // c_k for D u_i = (1/h) sum_k c_k (u_{i+k} - u_{i-k})")
        print("  static constexpr std::array<double, %d> interior{%s};" %
              (p, ", ".join(sp.N(v, DIGITS).__str__() for v in cint)))
        print("  // unit-spacing norm weights of the first block rows")
        print("  static constexpr std::array<double, %d> norm{%s};" %
              (r, ", ".join(sp.N(v, DIGITS).__str__() for v in weights)))
        print("  // strictly upper triangle of the skew block, row major (i < j < block rows)")
        upper = [block[i][j] for i in range(r) for j in range(i + 1, r)]
        print("  static constexpr std::array<double, %d> skew_upper{%s};" %
              (max(len(upper), 1), ", ".join(sp.N(v, DIGITS).__str__() for v in upper) or "0.0"))
        print("};\n")
        del name
    print("}  // namespace hhsbp::detail")


if __name__ == "__main__":
    main()
