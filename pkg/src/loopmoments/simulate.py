"""Monte Carlo oracle: execute the original program forward.

Vectorized over samples.  Every distribution draw site gets its own
counter-based Philox stream keyed by (seed, iteration, site index), so
results are bit-reproducible regardless of batching or threading, and
sampling goes through the inverse CDF of the dist module.
"""

from __future__ import annotations

import math

import numpy as np

from .dsl import Assign, BinOp, Call, DistCall, Expr, Num, Program, Var
from .engine import MomentTable, monomial_from_string, monomial_to_string
from .errors import MissingMoment, NonFiniteSample

_FUNCS = {"sin": np.sin, "cos": np.cos, "exp": np.exp, "log": np.log,
          "sqrt": np.sqrt}


def eval_expr(e: Expr, env: dict, sampler=None):
    """Evaluate an expression on numpy arrays; draws via `sampler(dist)`."""
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Var):
        if e.name not in env:
            raise MissingMoment(f"variable {e.name} has no value")
        return env[e.name]
    if isinstance(e, DistCall):
        if sampler is None:
            raise MissingMoment("distribution draw in a deterministic context")
        return sampler(e.dist)
    if isinstance(e, Call):
        return _FUNCS[e.func](eval_expr(e.arg, env, sampler))
    if isinstance(e, BinOp):
        l = eval_expr(e.left, env, sampler)
        r = eval_expr(e.right, env, sampler)
        if e.op == "+":
            return l + r
        if e.op == "-":
            return l - r
        if e.op == "*":
            return l * r
        if e.op == "/":
            return l / r
        return l ** r
    raise TypeError(type(e))


class _SiteSampler:
    """Inverse-CDF sampling with one Philox stream per (iteration, site)."""

    def __init__(self, seed: int, samples: int):
        self.seed = seed
        self.samples = samples
        self.iteration = 0
        self.site = 0

    def begin_iteration(self, n: int):
        self.iteration = n
        self.site = 0

    def __call__(self, dist):
        bitgen = np.random.Philox(
            key=[self.seed, (self.iteration << 32) + self.site]
        )
        self.site += 1
        u = np.random.Generator(bitgen).random(self.samples)
        return dist.sample_from_uniform(u)


def _run_statements(stmts, env, sampler):
    for st in stmts:
        vals = [eval_expr(e, env, sampler) for e in st.exprs]
        for t, v in zip(st.targets, vals):
            env[t] = np.broadcast_to(np.asarray(v, dtype=float),
                                     (sampler.samples,)).copy() \
                if np.ndim(v) == 0 else np.asarray(v, dtype=float)


def simulate(p: Program, n: int, samples: int, seed: int, targets,
             record_all: bool = False) -> MomentTable:
    """Sample means and standard errors of target monomials at iteration n
    (or at every iteration when record_all)."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    target_monos = [
        monomial_from_string(t) if isinstance(t, str) else tuple(sorted(t))
        for t in targets
    ]
    sampler = _SiteSampler(seed, samples)
    env: dict[str, np.ndarray] = {}
    sampler.begin_iteration(0)
    _run_statements(p.initials, env, sampler)
    rows, stderrs = [], {}

    def record(it):
        for m in target_monos:
            vals = np.ones(samples)
            for var, power in m:
                if var not in env:
                    raise MissingMoment(f"{var} has no value at iteration {it}")
                vals = vals * env[var] ** power
            label = monomial_to_string(m)
            rows.append((it, label, float(np.mean(vals))))
            se = float(np.std(vals, ddof=1) / math.sqrt(samples)) if samples > 1 else float("nan")
            stderrs[(it, label)] = se

    if record_all:
        record(0)
    for it in range(1, n + 1):
        sampler.begin_iteration(it)
        _run_statements(p.body, env, sampler)
        for var, arr in env.items():
            if not np.all(np.isfinite(arr)):
                raise NonFiniteSample(it, var)
        if record_all or it == n:
            record(it)
    if n == 0:
        record(0)
    table = MomentTable(rows, metadata={"method": "Simulation", "samples": samples,
                                        "seed": seed, "n": n})
    table.stderrs = stderrs
    return table


def run_trajectory(p: Program, n: int, samples: int, seed: int) -> dict:
    """Full state after n iterations (pathwise, for rewrite-equivalence tests)."""
    sampler = _SiteSampler(seed, samples)
    env: dict[str, np.ndarray] = {}
    sampler.begin_iteration(0)
    _run_statements(p.initials, env, sampler)
    for it in range(1, n + 1):
        sampler.begin_iteration(it)
        _run_statements(p.body, env, sampler)
    return env
