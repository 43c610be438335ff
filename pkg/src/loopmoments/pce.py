"""Generalized polynomial chaos expansion.

Builds univariate bases orthonormal w.r.t. arbitrary distributions by
Gram-Schmidt on the monomials (realized as a Cholesky factorization of
the Hankel moment matrix in extended precision), enumerates the tensor
degree matrix D, computes Fourier coefficients by tensorized
Gauss-Legendre quadrature, assembles the estimator in expanded monomial
form, and reports the approximation error

    se(ghat) = sqrt( integral (g - ghat)^2 dF ).

The Theorem-1 bound (2/min(phi(a), phi(b)) + 1) * Var_phi(g) and the
Lagrange-stitched conditional estimator live here too.
"""

from __future__ import annotations

import itertools
import math
import os
from dataclasses import dataclass

import mpmath as mp
import numpy as np

from . import quadrature
from .distributions import Distribution, normal
from .errors import (
    DegreeTooHigh,
    IllConditionedBasis,
    QuadratureNotConverged,
    UnboundedSupport,
)

MAX_BASIS_DEGREE = 12
MAX_VARIABLES = 4
GRAM_TOL = 1e-8
PRUNE_TOL = 1e-12


def _working_dps() -> int:
    return int(os.environ.get("LOOPMOMENTS_DPS", "60"))


# --- orthonormal bases ------------------------------------------------------------


@dataclass(frozen=True)
class OrthonormalBasis:
    """Polynomials p_0..p_d orthonormal w.r.t. dist, p_i of degree i,
    positive leading coefficient.  Coefficient vectors are ascending."""

    dist: object
    polys: tuple  # tuple of np.ndarray, polys[i] has length i+1

    @property
    def max_degree(self) -> int:
        return len(self.polys) - 1

    def eval_all(self, x):
        """Matrix P with P[i] = p_i(x) for array x."""
        x = np.asarray(x, dtype=float)
        return np.stack(
            [np.polynomial.polynomial.polyval(x, c) for c in self.polys]
        )


def orthonormal_basis(dist, max_degree: int) -> OrthonormalBasis:
    """Gram-Schmidt on {1, x, x^2, ...} w.r.t. dist.

    If M is the Hankel matrix of raw moments m_{i+j} and M = L L^T, the
    rows of L^{-1} are exactly the Gram-Schmidt coefficients; the
    factorization runs in extended precision to absorb the cancellation
    that plain 64-bit Gram-Schmidt suffers from at higher degrees."""
    if max_degree < 0:
        raise ValueError("max_degree must be >= 0")
    if max_degree > MAX_BASIS_DEGREE:
        raise IllConditionedBasis(
            f"degree {max_degree} exceeds the supported maximum {MAX_BASIS_DEGREE}"
        )
    d = max_degree
    with mp.workdps(_working_dps()):
        hankel = mp.matrix(d + 1, d + 1)
        for i in range(d + 1):
            for j in range(i, d + 1):
                hankel[i, j] = hankel[j, i] = dist.raw_moment_mp(i + j)
        try:
            low = mp.cholesky(hankel)
            inv = _lower_tri_inverse(low)
        except ZeroDivisionError as exc:  # pragma: no cover - degenerate law
            raise IllConditionedBasis(str(exc)) from exc
        polys = tuple(
            np.array([float(inv[i, j]) for j in range(i + 1)]) for i in range(d + 1)
        )
    basis = OrthonormalBasis(dist, polys)
    _check_gram(basis)
    return basis


def _lower_tri_inverse(low):
    n = low.rows
    inv = mp.matrix(n, n)
    for i in range(n):
        inv[i, i] = 1 / low[i, i]
        for j in range(i - 1, -1, -1):
            s = mp.mpf(0)
            for k in range(j, i):
                s += low[i, k] * inv[k, j]
            inv[i, j] = -s / low[i, i]
    return inv


def _check_gram(basis: OrthonormalBasis):
    nodes, weights = quadrature.weighted_nodes(basis.dist, 4 * (basis.max_degree + 2))
    vals = basis.eval_all(nodes)
    gram = (vals * weights) @ vals.T
    resid = np.max(np.abs(gram - np.eye(len(basis.polys))))
    if resid > GRAM_TOL:
        raise IllConditionedBasis(
            f"Gram residual {resid:.3e} exceeds {GRAM_TOL} for {basis.dist.describe()}"
        )


# --- degree matrix -------------------------------------------------------------------


def degree_matrix(degrees) -> np.ndarray:
    """L x k tensor grid in lexicographic order, first row all zeros,
    L = prod(1 + d_i)."""
    degrees = tuple(int(d) for d in degrees)
    if any(d < 0 for d in degrees):
        raise ValueError("degrees must be non-negative")
    rows = list(itertools.product(*(range(d + 1) for d in degrees)))
    return np.array(rows, dtype=int)


# --- Fourier coefficients ----------------------------------------------------------------


def _tensor_nodes(bases, n_per_panel):
    grids, wgts, pmats = [], [], []
    for b in bases:
        x, w = quadrature.weighted_nodes(b.dist, n_per_panel)
        grids.append(x)
        wgts.append(w)
        pmats.append(b.eval_all(x))
    return grids, wgts, pmats


def _coeffs_once(g, bases, D, n_per_panel):
    k = len(bases)
    grids, wgts, pmats = _tensor_nodes(bases, n_per_panel)
    mesh = np.meshgrid(*grids, indexing="ij")
    gv = np.asarray(g(*mesh), dtype=float)
    if gv.shape != mesh[0].shape:
        gv = np.broadcast_to(gv, mesh[0].shape)
    # weight tensor folded into g's values one axis at a time
    for axis, w in enumerate(wgts):
        shape = [1] * k
        shape[axis] = -1
        gv = gv * w.reshape(shape)
    nodes_sub = "abcd"[:k]
    degree_sub = "ijkl"[:k]
    basis_subs = ",".join(degree_sub[i] + nodes_sub[i] for i in range(k))
    full = np.einsum(f"{nodes_sub},{basis_subs}->{degree_sub}", gv, *pmats)
    return np.array([full[tuple(row)] for row in D]), (grids, wgts, pmats)


def fourier_coefficients(g, bases, D, tol: float = 1e-9):
    """c_j = integral g * prod_i p_i^{d_ji} dF over the product measure,
    by tensor Gauss-Legendre with node doubling."""
    if len(bases) > MAX_VARIABLES:
        raise DegreeTooHigh(f"at most {MAX_VARIABLES} basic variables supported")
    n = 16
    prev = None
    for _ in range(4):
        coeffs, _ = _coeffs_once(g, bases, D, n)
        if prev is not None and np.max(np.abs(coeffs - prev)) <= tol * max(
            1.0, float(np.max(np.abs(coeffs)))
        ):
            return coeffs
        prev = coeffs
        n *= 2
    raise QuadratureNotConverged(
        f"Fourier coefficients did not stabilize to {tol}"
    )


# --- assembly ------------------------------------------------------------------------------


def assemble_estimator(coeffs, bases, D) -> dict:
    """Expanded monomial form {exponent tuple: coefficient}."""
    k = len(bases)
    out: dict[tuple, float] = {}
    for c, row in zip(coeffs, D):
        # product of univariate polynomials, expanded incrementally
        terms = {(): float(c)}
        for i in range(k):
            poly = bases[i].polys[row[i]]
            new: dict[tuple, float] = {}
            for expo, coef in terms.items():
                for p, pc in enumerate(poly):
                    key = expo + (p,)
                    new[key] = new.get(key, 0.0) + coef * pc
            terms = new
        for expo, coef in terms.items():
            out[expo] = out.get(expo, 0.0) + coef
    return {e: c for e, c in out.items() if abs(c) > PRUNE_TOL}


def eval_polynomial(poly: dict, *points):
    pts = [np.asarray(p, dtype=float) for p in points]
    total = np.zeros(np.broadcast(*pts).shape) if pts[0].shape else 0.0
    for expo, coef in poly.items():
        term = coef
        for x, p in zip(pts, expo):
            if p:
                term = term * x**p
        total = total + term
    return total


# --- estimator object -------------------------------------------------------------------------


@dataclass(frozen=True)
class PceEstimate:
    bases: tuple
    D: np.ndarray
    coeffs: np.ndarray
    se: float
    assembled: dict

    @property
    def mean(self) -> float:
        """E[ghat] = coefficient of the all-zeros row (p_0 == 1)."""
        return float(self.coeffs[0])

    def __call__(self, *points):
        return eval_polynomial(self.assembled, *points)

    def basis_form(self, *points):
        pts = [np.asarray(p, dtype=float) for p in points]
        vals = [b.eval_all(x) for b, x in zip(self.bases, pts)]
        total = 0.0
        for c, row in zip(self.coeffs, self.D):
            term = float(c)
            for i, d in enumerate(row):
                term = term * vals[i][d]
            total = total + term
        return total

    def to_json_dict(self) -> dict:
        return {
            "bases": [
                {
                    "dist": b.dist.describe(),
                    "coeffs": [list(map(float, p)) for p in b.polys],
                }
                for b in self.bases
            ],
            "D": self.D.tolist(),
            "coeffs": [float(c) for c in self.coeffs],
            "se": float(self.se),
        }


def expand(g, dists, degrees, tol: float = 1e-9) -> PceEstimate:
    """End-to-end: bases, D, coefficients, assembled polynomial, se."""
    bases = tuple(orthonormal_basis(d, deg) for d, deg in zip(dists, degrees))
    D = degree_matrix(degrees)
    coeffs = fourier_coefficients(g, bases, D, tol=tol)
    assembled = assemble_estimator(coeffs, bases, D)
    est = PceEstimate(bases, D, coeffs, 0.0, assembled)
    se = approximation_error(g, est)
    return PceEstimate(bases, D, coeffs, se, assembled)


def approximation_error(g, est: PceEstimate, tol: float = 1e-9) -> float:
    """se(ghat) = sqrt( integral (g - ghat)^2 dF )."""
    n = 16
    prev = None
    for _ in range(4):
        grids, wgts, _ = _tensor_nodes(est.bases, n)
        mesh = np.meshgrid(*grids, indexing="ij")
        diff = np.asarray(g(*mesh), dtype=float) - est(*mesh)
        val = diff * diff
        for axis, w in enumerate(wgts):
            shape = [1] * len(grids)
            shape[axis] = -1
            val = val * w.reshape(shape)
        total = float(np.sum(val))
        if prev is not None and abs(total - prev) <= tol * max(1.0, abs(total)):
            return math.sqrt(max(total, 0.0))
        prev = total
        n *= 2
    raise QuadratureNotConverged(f"se integral did not stabilize to {tol}")


# --- Theorem-1 bound ------------------------------------------------------------------------------


def error_bound(g, supports) -> float:
    """(2/min phi(corner) + 1) * Var_phi(g) with phi the (product)
    standard normal pdf; supports is a list of finite intervals.

    Returns inf when Var_phi(g) diverges (the bound holds vacuously)."""
    if isinstance(supports[0], (int, float)):
        supports = [supports]
    for a, b in supports:
        if not (math.isfinite(a) and math.isfinite(b)):
            raise UnboundedSupport(f"Theorem-1 bound needs a finite support, got [{a}, {b}]")
    phi = lambda x: math.exp(-0.5 * x * x) / math.sqrt(2 * math.pi)
    min_phi = min(
        math.prod(phi(c) for c in corner)
        for corner in itertools.product(*supports)
    )
    std = normal(0.0, 1.0)
    try:
        var = _product_normal_var(g, len(supports))
    except (QuadratureNotConverged, OverflowError, FloatingPointError):
        return math.inf
    if not math.isfinite(var):
        return math.inf
    return (2.0 / min_phi + 1.0) * var


def _product_normal_var(g, k: int) -> float:
    std = normal(0.0, 1.0)
    n = 16
    prev = None
    for _ in range(4):
        x, w = quadrature.weighted_nodes(std, n)
        mesh = np.meshgrid(*([x] * k), indexing="ij")
        gv = np.asarray(g(*mesh), dtype=float)
        tens1, tens2 = gv.copy(), gv * gv
        for axis in range(k):
            shape = [1] * k
            shape[axis] = -1
            tens1 = tens1 * w.reshape(shape)
            tens2 = tens2 * w.reshape(shape)
        m1, m2 = float(np.sum(tens1)), float(np.sum(tens2))
        var = m2 - m1 * m1
        if prev is not None and abs(var - prev) <= 1e-9 * max(1.0, abs(var)):
            return var
        prev = var
        n *= 2
    raise QuadratureNotConverged("Var_phi(g) did not stabilize")


# --- conditional estimator ---------------------------------------------------------------------------


def conditional_estimator(per_iter, counter_var: str = "c") -> dict:
    """Lagrange-stitch per-iteration estimates over counter values 1..N:

        ghat(c, z) = sum_n P_n(z) prod_{j != n} (c - j)/(n - j)

    Returns an expanded polynomial {(*var exponents, counter exponent): coef};
    evaluating at c = n reproduces P_n exactly."""
    n_of = len(per_iter)
    out: dict[tuple, float] = {}
    for n_idx, est in enumerate(per_iter, start=1):
        # Lagrange basis polynomial ell_n(c), ascending coefficients
        ell = np.array([1.0])
        for j in range(1, n_of + 1):
            if j == n_idx:
                continue
            ell = np.polynomial.polynomial.polymul(ell, np.array([-j, 1.0])) / (
                n_idx - j
            )
        for expo, coef in est.assembled.items():
            for p, lc in enumerate(ell):
                key = expo + (p,)
                out[key] = out.get(key, 0.0) + coef * lc
    return {e: c for e, c in out.items() if abs(c) > PRUNE_TOL}
