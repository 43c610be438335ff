"""Loop DSL: parsing, AST, pretty-printing and structural classification.

Concrete syntax (file extension ``.pp``, UTF-8, ``#`` comments)::

    x = 0; v = Uniform(6.5, 8.0)
    while true:
        z = Normal(0, 0.01)
        c, s = c*cos(z) - s*sin(z), s*cos(z) + c*sin(z)
        x = x + 0.1*v*c
    end

Statements are separated by newlines or ``;``.  A statement is either a
single assignment ``name = expr`` or a simultaneous assignment
``a, b = e1, e2`` (evaluated with the old values on the right-hand side).
``Normal``'s second parameter is the *variance*.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from . import distributions
from .distributions import CONSTRUCTORS, Distribution
from .errors import (
    DslSyntaxError,
    RedeclaredVariable,
    UnknownDistribution,
    UnknownFunction,
    UnknownVariable,
)

FUNCTIONS = ("sin", "cos", "exp", "log", "sqrt")


# --- AST ---------------------------------------------------------------------


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Call:
    func: str  # one of FUNCTIONS
    arg: "Expr"


@dataclass(frozen=True)
class DistCall:
    dist: Distribution


@dataclass(frozen=True)
class BinOp:
    op: str  # + - * / **
    left: "Expr"
    right: "Expr"


Expr = Num | Var | Call | DistCall | BinOp


@dataclass(frozen=True)
class Assign:
    targets: tuple[str, ...]
    exprs: tuple[Expr, ...]
    line: int = field(default=0, compare=False)

    def __post_init__(self):
        if len(self.targets) != len(self.exprs):
            raise ValueError("assignment arity mismatch")


@dataclass(frozen=True)
class Program:
    initials: tuple[Assign, ...]
    body: tuple[Assign, ...]

    @property
    def variables(self) -> tuple[str, ...]:
        seen: dict[str, None] = {}
        for st in (*self.initials, *self.body):
            for t in st.targets:
                seen.setdefault(t)
        return tuple(seen)


@dataclass(frozen=True)
class ClassificationReport:
    klass: str  # ProbSolvable | ProbSolvableAfterExactRewrite | RequiresPce | Unsupported
    accumulators: tuple[str, ...]
    blocking_constructs: tuple[tuple[str, str], ...] = ()


# --- tokenizer ----------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t]+)
  | (?P<comment>\#[^\n]*)
  | (?P<newline>\n)
  | (?P<number>\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?|\d+(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>\*\*|[+\-*/(),=:;^])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    line, line_start = 1, 0
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise DslSyntaxError(line, pos - line_start + 1, "a valid token")
        kind = m.lastgroup
        pos = m.end()
        if kind == "ws" or kind == "comment":
            continue
        if kind == "newline":
            tokens.append(Token("sep", "\n", line, m.start() - line_start + 1))
            line += 1
            line_start = pos
            continue
        tok_text = m.group()
        if kind == "op":
            if tok_text == ";":
                kind, tok_text = "sep", ";"
            elif tok_text == "^":
                tok_text = "**"
        tokens.append(Token(kind, tok_text, line, m.start() - line_start + 1))
    tokens.append(Token("eof", "", line, 1))
    return tokens


# --- parser -------------------------------------------------------------------


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.toks = tokens
        self.i = 0

    def peek(self) -> Token:
        return self.toks[self.i]

    def next(self) -> Token:
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, text: str) -> Token:
        t = self.peek()
        if t.text != text:
            raise DslSyntaxError(t.line, t.col, repr(text))
        return self.next()

    def skip_seps(self):
        while self.peek().kind == "sep":
            self.next()

    # statements ------------------------------------------------------------

    def parse_program(self) -> Program:
        initials: list[Assign] = []
        self.skip_seps()
        while not (self.peek().kind == "name" and self.peek().text == "while"):
            if self.peek().kind == "eof":
                t = self.peek()
                raise DslSyntaxError(t.line, t.col, "'while true:' loop header")
            initials.append(self.parse_assign())
            self.skip_seps()
        self.expect("while")
        kw = self.peek()
        if kw.text != "true":
            raise DslSyntaxError(kw.line, kw.col, "'true'")
        self.next()
        self.expect(":")
        self.skip_seps()
        body: list[Assign] = []
        while self.peek().text != "end":
            if self.peek().kind == "eof":
                t = self.peek()
                raise DslSyntaxError(t.line, t.col, "'end'")
            body.append(self.parse_assign())
            self.skip_seps()
        self.expect("end")
        self.skip_seps()
        t = self.peek()
        if t.kind != "eof":
            raise DslSyntaxError(t.line, t.col, "end of file")
        prog = Program(tuple(initials), tuple(body))
        _check_wellformed(prog)
        return prog

    def parse_assign(self) -> Assign:
        first = self.peek()
        targets = [self._target_name()]
        while self.peek().text == ",":
            self.next()
            targets.append(self._target_name())
        self.expect("=")
        exprs = [self.parse_expr()]
        while self.peek().text == ",":
            self.next()
            exprs.append(self.parse_expr())
        if len(exprs) != len(targets):
            t = self.peek()
            raise DslSyntaxError(
                t.line, t.col, f"{len(targets)} right-hand sides, got {len(exprs)}"
            )
        t = self.peek()
        if t.kind not in ("sep", "eof") and t.text != "end":
            raise DslSyntaxError(t.line, t.col, "end of statement")
        return Assign(tuple(targets), tuple(exprs), line=first.line)

    def _target_name(self) -> str:
        t = self.peek()
        if t.kind != "name" or t.text in ("while", "true", "end"):
            raise DslSyntaxError(t.line, t.col, "a variable name")
        return self.next().text

    # expressions (precedence climbing) --------------------------------------

    def parse_expr(self) -> Expr:
        return self._additive()

    def _additive(self) -> Expr:
        node = self._multiplicative()
        while self.peek().text in ("+", "-"):
            op = self.next().text
            node = BinOp(op, node, self._multiplicative())
        return node

    def _multiplicative(self) -> Expr:
        node = self._unary()
        while self.peek().text in ("*", "/"):
            op = self.next().text
            node = BinOp(op, node, self._unary())
        return node

    def _unary(self) -> Expr:
        t = self.peek()
        if t.text == "-":
            self.next()
            operand = self._unary()
            if isinstance(operand, Num):
                return Num(-operand.value)
            return BinOp("*", Num(-1.0), operand)
        if t.text == "+":
            self.next()
            return self._unary()
        return self._power()

    def _power(self) -> Expr:
        base = self._atom()
        if self.peek().text == "**":
            self.next()
            return BinOp("**", base, self._unary())  # right-assoc
        return base

    def _atom(self) -> Expr:
        t = self.next()
        if t.kind == "number":
            return Num(float(t.text))
        if t.text == "(":
            e = self.parse_expr()
            self.expect(")")
            return e
        if t.kind == "name":
            if self.peek().text == "(":
                return self._call(t)
            if t.text in ("while", "true", "end"):
                raise DslSyntaxError(t.line, t.col, "an expression")
            return Var(t.text)
        raise DslSyntaxError(t.line, t.col, "an expression")

    def _call(self, name_tok: Token) -> Expr:
        name = name_tok.text
        self.expect("(")
        args = []
        if self.peek().text != ")":
            args.append(self.parse_expr())
            while self.peek().text == ",":
                self.next()
                args.append(self.parse_expr())
        self.expect(")")
        if name in CONSTRUCTORS:
            ctor, arity = CONSTRUCTORS[name]
            if len(args) != arity:
                raise DslSyntaxError(
                    name_tok.line, name_tok.col, f"{arity} arguments to {name}"
                )
            vals = []
            for a in args:
                v = _const_value(a)
                if v is None:
                    raise DslSyntaxError(
                        name_tok.line, name_tok.col, f"constant arguments to {name}"
                    )
                vals.append(v)
            return DistCall(ctor(*vals))
        if name in FUNCTIONS:
            if len(args) != 1:
                raise DslSyntaxError(name_tok.line, name_tok.col, f"1 argument to {name}")
            return Call(name, args[0])
        if name[0].isupper():
            raise UnknownDistribution(f"{name} (line {name_tok.line})")
        raise UnknownFunction(f"{name} (line {name_tok.line})")


def _const_value(e: Expr):
    """Fold a constant expression to a float, or return None."""
    if isinstance(e, Num):
        return e.value
    if isinstance(e, BinOp):
        l, r = _const_value(e.left), _const_value(e.right)
        if l is None or r is None:
            return None
        return {"+": l + r, "-": l - r, "*": l * r, "/": l / r, "**": l**r}[e.op]
    return None


def parse_program(text: str) -> Program:
    return _Parser(tokenize(text)).parse_program()


def parse_file(path) -> Program:
    with open(path, encoding="utf-8") as fh:
        return parse_program(fh.read())


# --- well-formedness -----------------------------------------------------------


def _check_wellformed(p: Program):
    declared: set[str] = set()
    for st in p.initials:
        for e in st.exprs:
            _check_vars(e, declared, st.line)
        for t in st.targets:
            if t in declared:
                raise RedeclaredVariable(f"{t} (line {st.line})")
            declared.add(t)
    body_assigned: set[str] = set()
    for st in p.body:
        for e in st.exprs:
            _check_vars(e, declared | body_assigned, st.line)
        for t in st.targets:
            if t in body_assigned:
                raise RedeclaredVariable(
                    f"{t} updated twice in one body pass (line {st.line})"
                )
            body_assigned.add(t)


def _check_vars(e: Expr, known: set[str], line: int):
    for v in free_vars(e):
        if v not in known:
            raise UnknownVariable(f"{v} (line {line})")


def free_vars(e: Expr) -> set[str]:
    if isinstance(e, Var):
        return {e.name}
    if isinstance(e, BinOp):
        return free_vars(e.left) | free_vars(e.right)
    if isinstance(e, Call):
        return free_vars(e.arg)
    return set()


# --- pretty printer -------------------------------------------------------------

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "**": 3}


def _fmt_num(v: float) -> str:
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def pretty_expr(e: Expr, parent_prec: int = 0) -> str:
    if isinstance(e, Num):
        s = _fmt_num(e.value)
        return f"({s})" if e.value < 0 and parent_prec > 1 else s
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Call):
        return f"{e.func}({pretty_expr(e.arg)})"
    if isinstance(e, DistCall):
        return e.dist.describe().replace("'", "")
    if isinstance(e, BinOp):
        prec = _PREC[e.op]
        left = pretty_expr(e.left, prec)
        # +1 forces parens on same-precedence right operands of - / **
        right = pretty_expr(e.right, prec + (0 if e.op in "+*" else 1))
        s = f"{left} {e.op} {right}" if e.op != "**" else f"{left}**{right}"
        return f"({s})" if prec < parent_prec else s
    raise TypeError(type(e))


def pretty_print(p: Program) -> str:
    lines = []
    for st in p.initials:
        lines.append(
            f"{', '.join(st.targets)} = {', '.join(pretty_expr(e) for e in st.exprs)}"
        )
    lines.append("while true:")
    for st in p.body:
        lines.append(
            f"    {', '.join(st.targets)} = "
            f"{', '.join(pretty_expr(e) for e in st.exprs)}"
        )
    lines.append("end")
    return "\n".join(lines) + "\n"


# --- structural analysis ----------------------------------------------------------


def is_polynomial(e: Expr) -> bool:
    """True when e is built from numbers, variables, draws, + - * and
    integer powers only."""
    if isinstance(e, (Num, Var, DistCall)):
        return True
    if isinstance(e, Call):
        return False
    if isinstance(e, BinOp):
        if e.op in ("+", "-", "*"):
            return is_polynomial(e.left) and is_polynomial(e.right)
        if e.op == "/":
            return is_polynomial(e.left) and _const_value(e.right) is not None
        if e.op == "**":
            exp = _const_value(e.right)
            return (
                is_polynomial(e.left)
                and exp is not None
                and exp >= 0
                and exp == int(exp)
            )
    return False


def nonpoly_calls(e: Expr) -> list[Call]:
    if isinstance(e, Call):
        return [e] + nonpoly_calls(e.arg)
    if isinstance(e, BinOp):
        return nonpoly_calls(e.left) + nonpoly_calls(e.right)
    return []


def detect_accumulators(p: Program) -> list[tuple[str, Distribution]]:
    """Variables updated as ``x = x + z`` with z freshly drawn from an
    iteration-constant distribution earlier in the same body pass."""
    draw_site: dict[str, tuple[int, Distribution]] = {}
    out: list[tuple[str, Distribution]] = []
    for idx, st in enumerate(p.body):
        for t, e in zip(st.targets, st.exprs):
            if isinstance(e, DistCall):
                draw_site[t] = (idx, e.dist)
    for idx, st in enumerate(p.body):
        for t, e in zip(st.targets, st.exprs):
            inc = _accumulator_increment(t, e)
            if inc is None:
                continue
            site = draw_site.get(inc)
            if site is not None and site[0] < idx:
                out.append((t, site[1]))
    return out


def _accumulator_increment(target: str, e: Expr):
    """Name of z if e is ``target + z`` or ``z + target``, else None."""
    if not (isinstance(e, BinOp) and e.op == "+"):
        return None
    l, r = e.left, e.right
    for a, b in ((l, r), (r, l)):
        if isinstance(a, Var) and a.name == target and isinstance(b, Var) and b.name != target:
            return b.name
    return None


def iteration_stable_vars(p: Program) -> set[str]:
    """Variables whose body update is a pure fresh draw (hence identically
    distributed at every iteration)."""
    out = set()
    for st in p.body:
        for t, e in zip(st.targets, st.exprs):
            if isinstance(e, DistCall):
                out.add(t)
    return out


def frozen_random_vars(p: Program) -> set[str]:
    """Variables with an initial value and no body assignment; their
    (possibly random) value is fixed for the entire loop execution."""
    assigned = {t for st in p.body for t in st.targets}
    return {t for st in p.initials for t in st.targets if t not in assigned}


def affine_in(e: Expr, names: set[str]):
    """Decompose e as a0 + a1*x for x in names, with a0, a1 constants.

    Returns (a0, a1, x) or None.  Used to recognize rewritable trig/exp
    arguments such as sin(0.1 + 2*psi)."""
    c = _const_value(e)
    if c is not None:
        return None
    if isinstance(e, Var):
        return (0.0, 1.0, e.name) if e.name in names else None
    if isinstance(e, BinOp):
        if e.op in ("+", "-"):
            sign = 1.0 if e.op == "+" else -1.0
            cl, cr = _const_value(e.left), _const_value(e.right)
            if cl is not None:
                sub = affine_in(e.right, names)
                if sub:
                    return (cl + sign * sub[0], sign * sub[1], sub[2])
            if cr is not None:
                sub = affine_in(e.left, names)
                if sub:
                    return (sub[0] + sign * cr, sub[1], sub[2])
            return None
        if e.op == "*":
            cl, cr = _const_value(e.left), _const_value(e.right)
            if cl is not None:
                sub = affine_in(e.right, names)
                if sub:
                    return (cl * sub[0], cl * sub[1], sub[2])
            if cr is not None:
                sub = affine_in(e.left, names)
                if sub:
                    return (cr * sub[0], cr * sub[1], sub[2])
            return None
        if e.op == "/":
            cr = _const_value(e.right)
            if cr is not None:
                sub = affine_in(e.left, names)
                if sub:
                    return (sub[0] / cr, sub[1] / cr, sub[2])
    return None


def classify(p: Program) -> ClassificationReport:
    accs = detect_accumulators(p)
    acc_names = {a for a, _ in accs}
    stable = iteration_stable_vars(p) | frozen_random_vars(p)
    calls: list[tuple[int, Call]] = []
    for idx, st in enumerate(p.body):
        for e in st.exprs:
            for c in nonpoly_calls(e):
                calls.append((idx, c))
    if not calls:
        return ClassificationReport("ProbSolvable", tuple(acc_names))

    all_rewritable = True
    all_pce = True
    blocking: list[tuple[str, str]] = []
    for idx, c in calls:
        loc = f"body[{idx}]"
        if c.func not in FUNCTIONS:
            all_rewritable = all_pce = False
            blocking.append((loc, f"unknown function {c.func}"))
            continue
        if not is_polynomial(c.arg):
            all_rewritable = all_pce = False
            blocking.append((loc, f"{c.func} of a non-polynomial argument"))
            continue
        rewritable = (
            c.func in ("sin", "cos", "exp")
            and affine_in(c.arg, acc_names | stable) is not None
        )
        if not rewritable:
            all_rewritable = False
            args = free_vars(c.arg)
            if not args <= (stable | acc_names | set(p.variables)):
                all_pce = False
                blocking.append((loc, f"{c.func} argument uses unknown state"))
    if all_rewritable:
        return ClassificationReport("ProbSolvableAfterExactRewrite", tuple(acc_names))
    if all_pce:
        return ClassificationReport("RequiresPce", tuple(acc_names), tuple(blocking))
    return ClassificationReport("Unsupported", tuple(acc_names), tuple(blocking))
