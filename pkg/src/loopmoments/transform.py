"""Program-to-program rewrites eliminating non-polynomial calls.

Exact rewrites (semantics-preserving in distribution):

* exp of an accumulator x (increment z):  auxiliary u = exp(b*x) with
  u0 = exp(b*x0) and body update u = u * exp(b*z) placed right after x's
  update; every exp(a + b*x) becomes e^a * u.
* sin/cos of an accumulator: auxiliary pair c = cos(b*x), s = sin(b*x)
  with the simultaneous angle-sum update
      c, s = c*cos(b*z) - s*sin(b*z), s*cos(b*z) + c*sin(b*z).

PCE substitution replaces a non-polynomial call by its truncated chaos
expansion:

* mode "stable": the call's argument only involves iteration-stable
  fresh-draw variables; the expansion is w.r.t. their true distributions
  and its first moment is unbiased.
* mode "unconditional": the argument is a single (accumulating) state
  variable; the function is expanded in the basis orthonormal w.r.t. the
  standard normal.  This is the scheme used for benchmarks whose basic
  variables accumulate stochasticity.
* mode ("conditional", N): per-iteration expansions w.r.t. the exact
  argument distribution (tracked in the normal closed family), stitched
  by Lagrange interpolation over an iteration counter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from . import dsl, pce
from .distributions import normal
from .dsl import Assign, BinOp, Call, DistCall, Expr, Num, Program, Var
from .errors import ConditionsViolated, NotAnAccumulator
from .simulate import eval_expr


# --- helpers -----------------------------------------------------------------


def _replace(e: Expr, table: dict) -> Expr:
    """Structurally replace subexpressions (by equality) per table."""
    if e in table:
        return table[e]
    if isinstance(e, BinOp):
        return BinOp(e.op, _replace(e.left, table), _replace(e.right, table))
    if isinstance(e, Call):
        return Call(e.func, _replace(e.arg, table))
    return e


def _num_mul(c: float, e: Expr) -> Expr:
    if c == 0.0:
        return Num(0.0)
    if c == 1.0:
        return e
    return BinOp("*", Num(c), e)


def _sum(terms) -> Expr:
    terms = [t for t in terms if not (isinstance(t, Num) and t.value == 0.0)]
    if not terms:
        return Num(0.0)
    out = terms[0]
    for t in terms[1:]:
        out = BinOp("+", out, t)
    return out


def _accumulator_info(p: Program, x: str):
    for var, dist in dsl.detect_accumulators(p):
        if var == x:
            break
    else:
        raise NotAnAccumulator(f"{x} is not updated as {x} = {x} + z with z iid")
    for idx, st in enumerate(p.body):
        if x in st.targets:
            e = st.exprs[st.targets.index(x)]
            z = dsl._accumulator_increment(x, e)
            return idx, z, dist
    raise NotAnAccumulator(x)


def _sites(p: Program, funcs, x: str):
    """Distinct affine scales b with func(a + b*x) occurring in the body."""
    scales = set()
    for st in p.body:
        for e in st.exprs:
            for c in dsl.nonpoly_calls(e):
                if c.func not in funcs:
                    continue
                aff = dsl.affine_in(c.arg, {x})
                if aff is not None:
                    scales.add(aff[1])
    return sorted(scales)


def _initial_expr(p: Program, x: str) -> Expr:
    for st in p.initials:
        if x in st.targets:
            return st.exprs[st.targets.index(x)]
    raise NotAnAccumulator(f"accumulator {x} has no initial value")


def _fresh(base: str, taken) -> str:
    if base not in taken:
        return base
    i = 2
    while f"{base}{i}" in taken:
        i += 1
    return f"{base}{i}"


# --- exact rewrites ------------------------------------------------------------


def _anchor(p: Program, x: str):
    """(body index of x's update, increment name) for an accumulator, or
    (None, None) for a frozen variable (initialized, never reassigned)."""
    if x in dsl.frozen_random_vars(p):
        return None, None
    idx, z, _ = _accumulator_info(p, x)
    return idx, z


def rewrite_exp(p: Program, x: str) -> Program:
    """Eliminate exp(a + b*x) for an accumulator or frozen variable x via
    auxiliary variables."""
    idx, z = _anchor(p, x)
    scales = _sites(p, ("exp",), x)
    if not scales:
        return p
    taken = set(p.variables)
    _initial_expr(p, x)  # accumulators must carry an initial value
    x0 = Var(x)
    new_inits = list(p.initials)
    aux_updates: list[Assign] = []
    table: dict[Expr, Expr] = {}
    for b in scales:
        u = _fresh(f"{x}_exp" if b == 1.0 else f"{x}_exp{len(table)}", taken)
        taken.add(u)
        new_inits.append(Assign((u,), (Call("exp", _num_mul(b, x0)),)))
        if z is not None:
            aux_updates.append(
                Assign((u,), (BinOp("*", Var(u), Call("exp", _num_mul(b, Var(z)))),))
            )
        table[(b, "exp")] = Var(u)
    body = _rewrite_body(p.body, idx, aux_updates, x, ("exp",), table)
    return Program(tuple(new_inits), tuple(body))


def rewrite_trig(p: Program, x: str) -> Program:
    """Eliminate sin/cos(a + b*x) for an accumulator or frozen variable x
    via c/s pairs."""
    idx, z = _anchor(p, x)
    scales = _sites(p, ("sin", "cos"), x)
    if not scales:
        return p
    taken = set(p.variables)
    _initial_expr(p, x)  # accumulators must carry an initial value
    x0 = Var(x)
    new_inits = list(p.initials)
    aux_updates: list[Assign] = []
    table: dict = {}
    for i, b in enumerate(scales):
        suffix = "" if len(scales) == 1 else str(i + 2)
        c = _fresh(f"{x}_cos{suffix}", taken)
        taken.add(c)
        s = _fresh(f"{x}_sin{suffix}", taken)
        taken.add(s)
        new_inits.append(Assign((c,), (Call("cos", _num_mul(b, x0)),)))
        new_inits.append(Assign((s,), (Call("sin", _num_mul(b, x0)),)))
        if z is not None:
            cz, sz = Call("cos", _num_mul(b, Var(z))), Call("sin", _num_mul(b, Var(z)))
            aux_updates.append(
                Assign(
                    (c, s),
                    (
                        BinOp("-", BinOp("*", Var(c), cz), BinOp("*", Var(s), sz)),
                        BinOp("+", BinOp("*", Var(s), cz), BinOp("*", Var(c), sz)),
                    ),
                )
            )
        table[(b, "cos")] = Var(c)
        table[(b, "sin")] = Var(s)
    body = _rewrite_body(p.body, idx, aux_updates, x, ("sin", "cos"), table)
    return Program(tuple(new_inits), tuple(body))


def _rewrite_body(body, acc_idx, aux_updates, x, funcs, table):
    """Insert aux updates right after the accumulator's update and replace
    func(a + b*x) occurrences by their auxiliary-variable equivalents."""
    call_table: dict[Expr, Expr] = {}

    def subst(e: Expr) -> Expr:
        for call in dsl.nonpoly_calls(e):
            if call.func not in funcs or call in call_table:
                continue
            aff = dsl.affine_in(call.arg, {x})
            if aff is None:
                continue
            a0, b, _ = aff
            if call.func == "exp":
                call_table[call] = _num_mul(math.exp(a0), table[(b, "exp")])
            elif call.func == "sin":
                # sin(a0 + bx) = sin a0 * cos(bx) + cos a0 * sin(bx)
                call_table[call] = _sum(
                    [
                        _num_mul(math.sin(a0), table[(b, "cos")]),
                        _num_mul(math.cos(a0), table[(b, "sin")]),
                    ]
                )
            else:
                call_table[call] = _sum(
                    [
                        _num_mul(math.cos(a0), table[(b, "cos")]),
                        _num_mul(-math.sin(a0), table[(b, "sin")]),
                    ]
                )
        return _replace(e, call_table)

    out = []
    for i, st in enumerate(body):
        out.append(Assign(st.targets, tuple(subst(e) for e in st.exprs), st.line))
        if i == acc_idx:
            out.extend(aux_updates)
    return out


def rewrite_all(p: Program) -> Program:
    """Apply every applicable exact rewrite (accumulators and frozen
    variables, both kinds)."""
    names = [x for x, _ in dsl.detect_accumulators(p)]
    names += sorted(dsl.frozen_random_vars(p) - set(names))
    for x in names:
        if _sites(p, ("sin", "cos"), x):
            p = rewrite_trig(p, x)
        if _sites(p, ("exp",), x):
            p = rewrite_exp(p, x)
    return p


# --- PCE substitution -------------------------------------------------------------


def _poly_to_expr(assembled: dict, variables) -> Expr:
    terms = []
    for expo, coef in sorted(assembled.items()):
        factor: Expr = Num(float(coef))
        for v, pw in zip(variables, expo):
            if pw == 0:
                continue
            vp: Expr = Var(v) if pw == 1 else BinOp("**", Var(v), Num(pw))
            factor = BinOp("*", factor, vp)
        terms.append(factor)
    return _sum(terms)


def _site_g(call: Call, variables):
    """Numeric evaluator of the call over its argument variables."""

    def g(*vals):
        env = dict(zip(variables, vals))
        return eval_expr(Call(call.func, call.arg), env)

    return g


@dataclass(frozen=True)
class SubstitutionReport:
    program: Program
    estimates: tuple  # one PceEstimate (or tuple of per-iteration ones) per site
    mode: str


def pce_substitute_all(p: Program, degree: int, mode="stable", n_iters: int = 0,
                       state_dists: dict | None = None) -> SubstitutionReport:
    """Replace every non-polynomial call in the body by a PCE polynomial.

    mode "stable" requires every argument variable to be an
    iteration-stable fresh draw.  mode "unconditional" expands each site
    in the standard-normal basis over its argument variables.  mode
    "conditional" needs n_iters >= 1 and tracks the argument's exact
    per-iteration normal distribution.
    """
    stable = dsl.iteration_stable_vars(p)
    draw_dist = {}
    for st in p.body:
        for t, e in zip(st.targets, st.exprs):
            if isinstance(e, DistCall):
                draw_dist[t] = e.dist
    table: dict[Expr, Expr] = {}
    estimates = []
    counter = None
    for st in p.body:
        for e in st.exprs:
            for call in dsl.nonpoly_calls(e):
                if call in table:
                    continue
                variables = sorted(dsl.free_vars(call.arg))
                g = _site_g(call, variables)
                if mode == "stable":
                    missing = [v for v in variables if v not in stable]
                    if missing:
                        raise ConditionsViolated(
                            [f"{v} is not an iteration-stable fresh draw" for v in missing]
                        )
                    dists = [draw_dist[v] for v in variables]
                    est = pce.expand(g, dists, [degree] * len(variables))
                    estimates.append(est)
                    table[call] = _poly_to_expr(est.assembled, variables)
                elif mode == "unconditional":
                    dists = [normal(0.0, 1.0)] * len(variables)
                    est = pce.expand(g, dists, [degree] * len(variables))
                    estimates.append(est)
                    table[call] = _poly_to_expr(est.assembled, variables)
                elif mode == "conditional":
                    if n_iters < 1:
                        raise ConditionsViolated(["conditional mode needs n_iters >= 1"])
                    if len(variables) != 1:
                        raise ConditionsViolated(
                            ["conditional mode supports a single argument variable"]
                        )
                    v = variables[0]
                    dists_by_iter = _normal_family_track(p, v, n_iters, state_dists)
                    per_iter = tuple(
                        pce.expand(g, [d], [degree]) for d in dists_by_iter
                    )
                    stitched = pce.conditional_estimator(per_iter)
                    estimates.append(per_iter)
                    counter = counter or _fresh("iter_c", set(p.variables))
                    table[call] = _poly_to_expr(stitched, [v, counter])
                else:
                    raise ValueError(f"unknown mode {mode!r}")
    body = [Assign(st.targets, tuple(_replace(e, table) for e in st.exprs), st.line)
            for st in p.body]
    inits = list(p.initials)
    if counter is not None:
        inits.append(Assign((counter,), (Num(0.0),)))
        body.insert(0, Assign((counter,), (BinOp("+", Var(counter), Num(1.0)),)))
    return SubstitutionReport(Program(tuple(inits), tuple(body)), tuple(estimates), mode)


def _normal_family_track(p: Program, v: str, n_iters: int, state_dists=None):
    """Exact per-iteration law of v when it stays in the normal family:
    v must be an accumulator with normal increments and a constant or
    normal initial value (else ConditionsViolated)."""
    if state_dists and v in state_dists:
        return [state_dists[v](n) for n in range(1, n_iters + 1)]
    try:
        _, _, inc = _accumulator_info(p, v)
    except NotAnAccumulator as exc:
        raise ConditionsViolated([str(exc)]) from exc
    if inc.kind != "Normal":
        raise ConditionsViolated(
            [f"increment of {v} is {inc.kind}; only Normal stays in a closed family"]
        )
    init = _initial_expr(p, v)
    c = dsl._const_value(init)
    if c is not None:
        mu0, var0 = float(c), 0.0
    elif isinstance(init, DistCall) and init.dist.kind == "Normal":
        mu0, var0 = init.dist.params
    else:
        raise ConditionsViolated(
            [f"initial value of {v} is neither constant nor Normal"]
        )
    mu_z, var_z = inc.params
    return [
        normal(mu0 + n * mu_z, max(var0 + n * var_z, 1e-300))
        for n in range(1, n_iters + 1)
    ]
