#!/usr/bin/env python3
"""MIQP solver adapter: reads a CPLEX-LP file, writes a `status`/`name value`
solution file.

Supports the LP dialect emitted by the tbt toolkit: a `Minimize` section with
an optional diagonal `[ 2 c x ^2 ... ] / 2` quadratic block, `Subject To`,
`Bounds`, `Binary`, `Generals`, `End`.

The mixed-integer search runs on HiGHS (scipy.optimize.milp). HiGHS has no
MIQP support, so the quadratic objective is handled in two phases:

1. each quadratic term w*u^2 is replaced by an epigraph variable with tangent
   cuts over the variable's box, giving a piecewise-linear under-approximation
   that HiGHS minimizes together with the integer search;
2. with the integer assignment fixed, the continuous part is re-solved as an
   exact convex QP (cvxpy), recovering the true optimum for that assignment.

Usage: lp_solve.py MODEL.lp OUT.sol [--time-limit SECONDS]
"""

import argparse
import math
import re
import sys

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, milp
from scipy.sparse import csr_matrix

TANGENT_POINTS = 33

TERM_RE = re.compile(r"([+-])?\s*(\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)?\s*([A-Za-z_][A-Za-z0-9_]*)?")


def tokenize_linear(text):
    """Yields (coefficient, name_or_None) pairs from an LP expression."""
    out = []
    pos = 0
    text = text.strip()
    while pos < len(text):
        m = TERM_RE.match(text, pos)
        if not m or m.end() == pos:
            raise ValueError(f"cannot parse LP expression at {text[pos:pos+30]!r}")
        sign, coeff, name = m.groups()
        if coeff is None and name is None:
            raise ValueError(f"empty term in {text!r}")
        value = float(coeff) if coeff is not None else 1.0
        if sign == "-":
            value = -value
        out.append((value, name))
        pos = m.end()
        while pos < len(text) and text[pos].isspace():
            pos += 1
    return out


def parse_lp(path):
    text = open(path).read()
    lines = [ln.rstrip() for ln in text.splitlines()]
    section = None
    obj_lines = []
    constraint_lines = []
    bounds = {}
    binaries = []
    generals = []
    headers = {"minimize", "subject to", "bounds", "binary", "generals", "end"}
    for ln in lines:
        low = ln.strip().lower()
        if low in headers:
            section = low
            continue
        if not ln.strip():
            continue
        if section == "minimize":
            obj_lines.append(ln.strip())
        elif section == "subject to":
            constraint_lines.append(ln.strip())
        elif section == "bounds":
            m = re.match(
                r"\s*(-?[\d.eE+-]+|-?inf)\s*<=\s*([A-Za-z_][A-Za-z0-9_]*)\s*<=\s*(-?[\d.eE+-]+|-?inf)\s*$",
                ln,
            )
            if not m:
                raise ValueError(f"bad bounds line {ln!r}")
            lo = -math.inf if m.group(1) == "-inf" else float(m.group(1))
            hi = math.inf if m.group(3) == "inf" else float(m.group(3))
            bounds[m.group(2)] = (lo, hi)
        elif section == "binary":
            binaries.append(ln.strip())
        elif section == "generals":
            generals.append(ln.strip())

    obj_text = " ".join(obj_lines)
    if obj_text.startswith("obj:"):
        obj_text = obj_text[4:]
    quad = []  # (name, w) for w * name^2 in the true objective
    qm = re.search(r"\[(.*)\]\s*/\s*2", obj_text, re.S)
    if qm:
        inner = qm.group(1)
        for chunk in re.split(r"(?=[+-])", inner.replace("^2", " ")):
            chunk = chunk.strip()
            if not chunk:
                continue
            terms = tokenize_linear(chunk)
            if len(terms) != 1 or terms[0][1] is None:
                raise ValueError(f"bad quadratic term {chunk!r}")
            c, name = terms[0]
            quad.append((name, c / 2.0))
        obj_text = obj_text[: qm.start()] + obj_text[qm.end():]
    linear = {}
    obj_const = 0.0
    for c, name in tokenize_linear(obj_text) if obj_text.strip() else []:
        if name is None:
            obj_const += c
        else:
            linear[name] = linear.get(name, 0.0) + c

    constraints = []  # (terms: {name: coeff}, sense, rhs)
    for ln in constraint_lines:
        body = ln.split(":", 1)[1] if ":" in ln else ln
        m = re.search(r"(<=|>=|=)", body)
        if not m:
            raise ValueError(f"constraint without sense: {ln!r}")
        lhs, sense, rhs = body[: m.start()], m.group(1), float(body[m.end():])
        terms = {}
        for c, name in tokenize_linear(lhs):
            if name is None:
                rhs -= c
            else:
                terms[name] = terms.get(name, 0.0) + c
        constraints.append((terms, sense, rhs))

    names = list(bounds.keys()) + [b for b in binaries if b not in bounds]
    seen = set(names)
    for terms, _, _ in constraints:
        for n in terms:
            if n not in seen:
                seen.add(n)
                names.append(n)
    for n in list(linear) + [q[0] for q in quad]:
        if n not in seen:
            seen.add(n)
            names.append(n)
    integer = set(binaries) | set(generals)
    for b in binaries:
        bounds.setdefault(b, (0.0, 1.0))
    for g in generals:
        bounds.setdefault(g, (-1.0, 1.0))
    for n in names:
        bounds.setdefault(n, (-math.inf, math.inf))
    return names, bounds, integer, constraints, linear, quad, obj_const


def solve(path, time_limit, mip_gap=None):
    names, bounds, integer, constraints, linear, quad, obj_const = parse_lp(path)
    index = {n: i for i, n in enumerate(names)}
    n_model = len(names)

    # Epigraph variables for the quadratic terms.
    epi_rows = []  # extra constraint rows over the extended variable vector
    epi_names = []
    c = np.zeros(n_model + len(quad))
    lb = np.array([bounds[n][0] for n in names] + [0.0] * len(quad))
    ub = np.array([bounds[n][1] for n in names] + [0.0] * len(quad))
    for n, w in linear.items():
        c[index[n]] += w
    for k, (name, w) in enumerate(quad):
        j = n_model + k
        epi_names.append(f"__epi_{name}")
        lo, hi = bounds[name]
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise ValueError(f"quadratic variable {name} must be box-bounded")
        ub[j] = w * max(lo * lo, hi * hi) + 1.0
        c[j] += 1.0
        # s >= w (2 u_k u - u_k^2) at tangent points u_k.
        for uk in np.linspace(lo, hi, TANGENT_POINTS):
            epi_rows.append(({index[name]: -2.0 * w * uk, j: 1.0}, ">=", -w * uk * uk))

    rows, cols, data, lo_c, hi_c = [], [], [], [], []
    all_rows = [
        ({index[n]: v for n, v in terms.items()}, sense, rhs)
        for terms, sense, rhs in constraints
    ] + epi_rows
    for r, (terms, sense, rhs) in enumerate(all_rows):
        for j, v in terms.items():
            rows.append(r)
            cols.append(j)
            data.append(v)
        lo_c.append(rhs if sense in (">=", "=") else -math.inf)
        hi_c.append(rhs if sense in ("<=", "=") else math.inf)
    a = csr_matrix((data, (rows, cols)), shape=(len(all_rows), len(c)))
    lin_con = LinearConstraint(a, np.array(lo_c), np.array(hi_c))
    integrality = np.zeros(len(c))
    for n in integer:
        integrality[index[n]] = 1

    options = {}
    if time_limit is not None:
        options["time_limit"] = time_limit
    if mip_gap is not None:
        options["mip_rel_gap"] = mip_gap
    res = milp(
        c=c,
        constraints=lin_con,
        integrality=integrality,
        bounds=Bounds(lb, ub),
        options=options,
    )
    if res.status == 2:
        return "infeasible", None, None
    if res.status == 3:
        return "unbounded", None, None
    if res.x is None:
        return "error", None, None
    status = "optimal" if res.status == 0 else "feasible"

    x = dict(zip(names, res.x[:n_model]))
    if quad:
        x = polish(names, bounds, integer, constraints, linear, quad, x) or x
    objective = obj_const + sum(linear.get(n, 0.0) * x[n] for n in names)
    objective += sum(w * x[n] * x[n] for n, w in quad)
    return status, x, objective


def polish(names, bounds, integer, constraints, linear, quad, x):
    """Exact continuous QP with the integer assignment frozen."""
    try:
        import cvxpy as cp
    except ImportError:
        return None
    cont = [n for n in names if n not in integer]
    if not cont:
        return None
    idx = {n: i for i, n in enumerate(cont)}
    v = cp.Variable(len(cont))
    fixed = {n: round(x[n]) for n in integer}
    cons = []
    for n in cont:
        lo, hi = bounds[n]
        if math.isfinite(lo):
            cons.append(v[idx[n]] >= lo)
        if math.isfinite(hi):
            cons.append(v[idx[n]] <= hi)
    for terms, sense, rhs in constraints:
        expr = 0
        shift = 0.0
        for n, coeff in terms.items():
            if n in fixed:
                shift += coeff * fixed[n]
            else:
                expr = expr + coeff * v[idx[n]]
        if isinstance(expr, int):
            continue
        if sense == "<=":
            cons.append(expr <= rhs - shift)
        elif sense == ">=":
            cons.append(expr >= rhs - shift)
        else:
            cons.append(expr == rhs - shift)
    obj = 0
    for n, w in linear.items():
        if n in idx:
            obj = obj + w * v[idx[n]]
    for n, w in quad:
        if n in idx:
            obj = obj + w * cp.square(v[idx[n]])
    prob = cp.Problem(cp.Minimize(obj), cons)
    try:
        prob.solve(solver=cp.CLARABEL)
    except cp.error.SolverError:
        return None
    if prob.status not in ("optimal", "optimal_inaccurate") or v.value is None:
        return None
    out = dict(fixed)
    for n in cont:
        lo, hi = bounds[n]
        out[n] = min(max(float(v.value[idx[n]]), lo), hi)
    return out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("lp")
    ap.add_argument("sol")
    ap.add_argument("--time-limit", type=float, default=None)
    ap.add_argument("--mip-gap", type=float, default=None)
    args = ap.parse_args()
    status, x, objective = solve(args.lp, args.time_limit, args.mip_gap)
    with open(args.sol, "w") as fh:
        fh.write(f"status {status}\n")
        if x is not None:
            fh.write(f"objective {objective}\n")
            for name, value in x.items():
                fh.write(f"{name} {value:.12g}\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
