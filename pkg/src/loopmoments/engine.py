"""Moment closure and exact evaluation.

The loop body is composed into one polynomial per program variable over
*atoms*:

    ('v', name)          previous-iteration value of a state variable
    ('d', k)             fresh draw number k of the current pass
    ('sin'|'cos', k, a)  sin/cos of a * draw k
    ('exp', k, b)        exp of b * draw k

Expectations of monomials in these atoms factor over independent draws;
within one draw, powers and trig/exp factors reduce to the exact mixed
moments of the dist/exactmom modules (trig products are expanded into
complex exponentials first).  Saturating the set of state monomials
reachable from the targets yields an affine-linear recurrence
M_{n+1} = A M_n + b, evaluated at any n by powering the homogenized
matrix (O(log n) matrix products).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import dsl
from .dsl import Assign, BinOp, Call, DistCall, Expr, Num, Program, Var
from .errors import (
    ClosureExplosion,
    ImaginaryResidueTooLarge,
    MissingMoment,
    NonLinearCycle,
)
from .mixed_moments import poly_cis_moment, poly_exp_moment

CLOSURE_CAP = 5000
CLOSURE_DEGREE_CAP = 120
IMAG_TOL = 1e-9

# Monomials are sorted tuples of (atom, power); polynomials are dicts
# {monomial: coefficient}.  The empty monomial () is the constant term.

Poly = dict


def pconst(c: float) -> Poly:
    return {(): float(c)} if c else {}

def patom(atom) -> Poly:
    return {((atom, 1),): 1.0}

def padd(a: Poly, b: Poly) -> Poly:
    out = dict(a)
    for m, c in b.items():
        out[m] = out.get(m, 0.0) + c
        if out[m] == 0.0:
            del out[m]
    return out

def pscale(a: Poly, s: float) -> Poly:
    return {m: c * s for m, c in a.items()} if s else {}

def pmul(a: Poly, b: Poly) -> Poly:
    out: Poly = {}
    for m1, c1 in a.items():
        for m2, c2 in b.items():
            powers = dict(m1)
            for atom, p in m2:
                powers[atom] = powers.get(atom, 0) + p
            m = tuple(sorted(powers.items()))
            out[m] = out.get(m, 0.0) + c1 * c2
    return {m: c for m, c in out.items() if c != 0.0}

def ppow(a: Poly, k: int) -> Poly:
    out = pconst(1.0)
    for _ in range(k):
        out = pmul(out, a)
    return out


# --- expression compilation -------------------------------------------------------


class _DrawAllocator:
    def __init__(self):
        self.dists: dict[int, object] = {}

    def fresh(self, dist) -> Poly:
        k = len(self.dists)
        self.dists[k] = dist
        return patom(("d", k))


_CONST_FUNCS = {"sin": math.sin, "cos": math.cos, "exp": math.exp,
                "log": math.log, "sqrt": math.sqrt}


def expr_to_poly(e: Expr, env: dict, alloc: _DrawAllocator) -> Poly:
    if isinstance(e, Num):
        return pconst(e.value)
    if isinstance(e, Var):
        if e.name not in env:
            raise MissingMoment(f"variable {e.name} read before it has a value")
        return env[e.name]
    if isinstance(e, DistCall):
        return alloc.fresh(e.dist)
    if isinstance(e, BinOp):
        l = expr_to_poly(e.left, env, alloc)
        if e.op in ("+", "-"):
            r = expr_to_poly(e.right, env, alloc)
            return padd(l, pscale(r, -1.0) if e.op == "-" else r)
        if e.op == "*":
            return pmul(l, expr_to_poly(e.right, env, alloc))
        if e.op == "/":
            c = dsl._const_value(e.right)
            if c is None:
                raise NonLinearCycle("division by a non-constant expression")
            return pscale(l, 1.0 / c)
        if e.op == "**":
            k = dsl._const_value(e.right)
            if k is None or k < 0 or k != int(k):
                raise NonLinearCycle("power with a non-constant integer exponent")
            return ppow(l, int(k))
    if isinstance(e, Call):
        arg = expr_to_poly(e.arg, env, alloc)
        return _call_to_poly(e.func, arg)
    raise TypeError(type(e))


def _call_to_poly(func: str, arg: Poly) -> Poly:
    """sin/cos/exp of (a0 + a1*z) for a single fresh draw z; constants fold."""
    a0 = arg.get((), 0.0)
    rest = {m: c for m, c in arg.items() if m != ()}
    if not rest:
        if func not in _CONST_FUNCS:
            raise NonLinearCycle(f"unsupported function {func}")
        return pconst(_CONST_FUNCS[func](a0))
    if len(rest) != 1:
        raise NonLinearCycle(
            f"{func} applied to a non-affine argument; rewrite or PCE-substitute first"
        )
    (mono, a1), = rest.items()
    if len(mono) != 1 or mono[0][1] != 1 or mono[0][0][0] != "d":
        raise NonLinearCycle(
            f"{func} argument must be affine in one fresh draw; "
            "rewrite or PCE-substitute first"
        )
    k = mono[0][0][1]
    if func == "exp":
        return pscale(patom(("exp", k, a1)), math.exp(a0))
    if func in ("sin", "cos"):
        c_at, s_at = patom(("cos", k, a1)), patom(("sin", k, a1))
        if func == "sin":  # sin(a0 + u) = sin a0 cos u + cos a0 sin u
            return padd(pscale(c_at, math.sin(a0)), pscale(s_at, math.cos(a0)))
        return padd(pscale(c_at, math.cos(a0)), pscale(s_at, -math.sin(a0)))
    raise NonLinearCycle(f"no exact moment rule for {func} of a random argument")


def compile_body(p: Program):
    """One-pass update map: var -> polynomial over ('v', .) and draw atoms."""
    alloc = _DrawAllocator()
    env = {v: patom(("v", v)) for v in p.variables}
    for st in p.body:
        vals = [expr_to_poly(e, env, alloc) for e in st.exprs]
        for t, v in zip(st.targets, vals):
            env[t] = v
    return env, alloc.dists


def compile_initials(p: Program):
    """Initial-value polynomials over draw atoms only."""
    alloc = _DrawAllocator()
    env: dict[str, Poly] = {}
    for st in p.initials:
        vals = [expr_to_poly(e, env, alloc) for e in st.exprs]
        for t, v in zip(st.targets, vals):
            env[t] = v
    return env, alloc.dists


# --- expectations over atoms ----------------------------------------------------------


def _strip(z: complex) -> float:
    if abs(z.imag) > IMAG_TOL * max(1.0, abs(z.real)):
        raise ImaginaryResidueTooLarge(f"residue {z.imag} on {z.real}")
    return float(z.real)


def _draw_group_expectation(dist, p: int, trig: list, expo: list) -> float:
    """E[z^p * prod trig(a_i z)^{q_i} * prod exp(b_j z)^{r_j}] for one draw."""
    if trig and expo:
        raise NonLinearCycle(
            "mixed exp and trig of the same fresh draw has no exact moment rule"
        )
    if expo:
        b = sum(b * r for b, r in expo)
        return poly_exp_moment(dist, p, b)
    if not trig:
        return dist.raw_moment(p)
    # expand the trig product into complex exponentials sum_A coef * e^{iAz}
    terms: dict[float, complex] = {0.0: 1.0 + 0.0j}
    for kind, a, q in trig:
        if kind == "cos":  # cos^q = 2^-q sum C(q,k) e^{ia(2k-q)z}
            factors = [(math.comb(q, k) / 2**q, a * (2 * k - q)) for k in range(q + 1)]
        else:  # sin^q = (2i)^-q sum C(q,k) (-1)^{q-k} e^{ia(2k-q)z}
            scale = 1.0 / (2j) ** q
            factors = [
                (math.comb(q, k) * (-1) ** (q - k) * scale, a * (2 * k - q))
                for k in range(q + 1)
            ]
        new: dict[float, complex] = {}
        for freq, coef in terms.items():
            for fc, fa in factors:
                key = freq + fa
                new[key] = new.get(key, 0.0) + coef * fc
        terms = new
    total = 0j
    for freq, coef in terms.items():
        total += coef * poly_cis_moment(dist, p, freq)
    return _strip(total)


def poly_expectation(poly: Poly, dists: dict):
    """Expectation over the fresh draws.  Returns an affine form
    {state monomial over ('v',.): coefficient}; key () is the constant."""
    out: dict[tuple, float] = {}
    for mono, coef in poly.items():
        state: dict[str, int] = {}
        groups: dict[int, dict] = {}
        for atom, power in mono:
            if atom[0] == "v":
                state[atom[1]] = state.get(atom[1], 0) + power
                continue
            k = atom[1]
            g = groups.setdefault(k, {"p": 0, "trig": [], "exp": []})
            if atom[0] == "d":
                g["p"] += power
            elif atom[0] in ("sin", "cos"):
                g["trig"].append((atom[0], atom[2], power))
            else:
                g["exp"].append((atom[2], power))
        val = coef
        for k, g in groups.items():
            val *= _draw_group_expectation(dists[k], g["p"], g["trig"], g["exp"])
        key = tuple(sorted(state.items()))
        out[key] = out.get(key, 0.0) + val
    return out


# --- monomial helpers --------------------------------------------------------------------


def monomial_from_string(s: str) -> tuple:
    """Parse 'x', 'x^2', 'x**2*y' into a canonical (var, power) tuple."""
    powers: dict[str, int] = {}
    for part in s.replace("**", "^").split("*"):
        part = part.strip()
        if not part:
            continue
        if "^" in part:
            name, _, expo = part.partition("^")
            powers[name.strip()] = powers.get(name.strip(), 0) + int(expo)
        else:
            powers[part] = powers.get(part, 0) + 1
    return tuple(sorted(powers.items()))


def monomial_to_string(m: tuple) -> str:
    if not m:
        return "1"
    return "*".join(v if p == 1 else f"{v}^{p}" for v, p in m)


# --- recurrence ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MomentRecurrence:
    monomials: tuple  # canonical (var, power) tuples, one per row
    A: np.ndarray
    b: np.ndarray
    init: np.ndarray

    def labels(self):
        return [monomial_to_string(m) for m in self.monomials]


def moment_closure(p: Program, targets) -> MomentRecurrence:
    """Saturate the monomial set reachable from the targets and assemble
    the affine one-step recurrence."""
    targets = [
        monomial_from_string(t) if isinstance(t, str) else tuple(sorted(t))
        for t in targets
    ]
    updates, body_dists = compile_body(p)
    order: list[tuple] = []
    rows: dict[tuple, dict] = {}
    queue = list(dict.fromkeys(targets))
    while queue:
        m = queue.pop(0)
        if m in rows:
            continue
        if len(rows) >= CLOSURE_CAP:
            raise ClosureExplosion(
                f"monomial set exceeded {CLOSURE_CAP} while adding "
                f"{monomial_to_string(m)}"
            )
        if sum(pw for _, pw in m) > CLOSURE_DEGREE_CAP:
            raise ClosureExplosion(
                f"monomial {monomial_to_string(m)} exceeds total degree "
                f"{CLOSURE_DEGREE_CAP}; the moment family does not close"
            )
        prod = pconst(1.0)
        for var, power in m:
            if var not in updates:
                raise MissingMoment(f"unknown variable {var} in target monomial")
            prod = pmul(prod, ppow(updates[var], power))
        affine = poly_expectation(prod, body_dists)
        rows[m] = affine
        order.append(m)
        for dep in affine:
            if dep != () and dep not in rows and dep not in queue:
                queue.append(dep)
    n = len(order)
    A = np.zeros((n, n))
    b = np.zeros(n)
    index = {m: i for i, m in enumerate(order)}
    for m, affine in rows.items():
        i = index[m]
        for dep, coef in affine.items():
            if dep == ():
                b[i] = coef
            else:
                A[i, index[dep]] = coef
    init = _initial_vector(p, order)
    return MomentRecurrence(tuple(order), A, b, init)


def _initial_vector(p: Program, monomials) -> np.ndarray:
    env, dists = compile_initials(p)
    out = np.zeros(len(monomials))
    for i, m in enumerate(monomials):
        prod = pconst(1.0)
        for var, power in m:
            if var not in env:
                raise MissingMoment(
                    f"variable {var} needs an initial value (appears in the closure)"
                )
            prod = pmul(prod, ppow(env[var], power))
        affine = poly_expectation(prod, dists)
        bad = [k for k in affine if k != ()]
        if bad:
            raise MissingMoment(f"initial value of {bad} is undefined")
        out[i] = affine.get((), 0.0)
    return out


def evaluate_moments(rec: MomentRecurrence, n: int) -> np.ndarray:
    """M_n by homogenized matrix powering (O(log n) matrix products)."""
    if n < 0:
        raise ValueError("iteration must be >= 0")
    k = len(rec.monomials)
    H = np.zeros((k + 1, k + 1))
    H[:k, :k] = rec.A
    H[:k, k] = rec.b
    H[k, k] = 1.0
    v = np.append(rec.init, 1.0)
    return (np.linalg.matrix_power(H, n) @ v)[:k]


def naive_iterate(rec: MomentRecurrence, n: int) -> np.ndarray:
    v = rec.init.copy()
    for _ in range(n):
        v = rec.A @ v + rec.b
    return v


def moments_at(p: Program, targets, n: int) -> dict:
    """Convenience: {target string: E[monomial at iteration n]}.

    Falls back to finite-horizon unrolling when the moment family does not
    close (e.g. a state variable is multiplied by a polynomial of an
    accumulator, which couples E[m*l^k] upward without bound)."""
    try:
        rec = moment_closure(p, targets)
    except ClosureExplosion:
        return moments_at_unrolled(p, targets, n)
    vals = evaluate_moments(rec, n)
    want = [
        monomial_from_string(t) if isinstance(t, str) else tuple(sorted(t))
        for t in targets
    ]
    index = {m: i for i, m in enumerate(rec.monomials)}
    return {monomial_to_string(m): float(vals[index[m]]) for m in want}


def moments_at_unrolled(p: Program, targets, n: int) -> dict:
    """E[targets at iteration n] by backward dependency unrolling.

    Unlike the matrix recurrence this never needs the closure of the moment
    family: for a fixed horizon n the set of monomials whose expectation at
    step i-1 feeds the step-i values is finite, so we collect the needed set
    backwards and then propagate values forward. O(n) instead of O(log n)."""
    want = [
        monomial_from_string(t) if isinstance(t, str) else tuple(sorted(t))
        for t in targets
    ]
    updates, body_dists = compile_body(p)
    memo: dict[tuple, dict] = {}

    def deps(m: tuple) -> dict:
        if m not in memo:
            prod = pconst(1.0)
            for var, power in m:
                if var not in updates:
                    raise MissingMoment(f"unknown variable {var} in target monomial")
                prod = pmul(prod, ppow(updates[var], power))
            memo[m] = poly_expectation(prod, body_dists)
        return memo[m]

    needed = [set(want)]
    for _ in range(n):
        prev: set = set()
        for m in needed[-1]:
            prev.update(d for d in deps(m) if d != ())
        needed.append(prev)

    init = _initial_vector(p, sorted(needed[n]))
    vals = dict(zip(sorted(needed[n]), init))
    for i in range(n - 1, -1, -1):
        vals = {
            m: sum(
                (c if d == () else c * vals[d]) for d, c in deps(m).items()
            )
            for m in needed[i]
        }
    return {monomial_to_string(m): float(vals[m]) for m in want}


# --- result tables --------------------------------------------------------------------------


@dataclass
class MomentTable:
    rows: list  # (n, monomial string, value)
    metadata: dict = field(default_factory=dict)
    stderrs: dict = field(default_factory=dict)  # (n, monomial) -> se, simulation only

    def value(self, n: int, monomial: str) -> float:
        for rn, m, v in self.rows:
            if rn == n and m == monomial:
                return v
        raise MissingMoment(f"{monomial} at n={n} not in table")

    def to_csv(self) -> str:
        lines = ["n,monomial,value"]
        for rn, m, v in self.rows:
            lines.append(f"{rn},{m},{v!r}")
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        return json.dumps(
            {
                "metadata": self.metadata,
                "rows": [
                    {"n": rn, "monomial": m, "value": v} for rn, m, v in self.rows
                ],
                "stderrs": [
                    {"n": rn, "monomial": m, "se": se}
                    for (rn, m), se in self.stderrs.items()
                ],
            },
            indent=2,
        )


def derived_stats(table: MomentTable, variable: str, n: int) -> dict:
    """Variance and standard deviation from first and second raw moments."""
    try:
        m1 = table.value(n, variable)
        m2 = table.value(n, f"{variable}^2")
    except MissingMoment as exc:
        raise MissingMoment(
            f"need E[{variable}] and E[{variable}^2] at n={n}: {exc}"
        ) from exc
    var = m2 - m1 * m1
    if var < -1e-9:
        raise MissingMoment(f"negative variance {var} for {variable} at n={n}")
    var = max(var, 0.0)
    return {"mean": m1, "variance": var, "std": math.sqrt(var)}
