"""Paraproducts, resonant products, commutators, the resonance operator and Young mild integrals.

Products are taken pointwise on the nodes of a ``ProductSpace`` and projected back onto
the basis.  Two node sets are offered:

``"dealiased"``
    A product of r fields, tested against phi_k, is poly(x) exp(-(r+1)|x|^2/2) with per-axis
    degree at most (r+1)m (m the largest per-axis degree of the basis).  For each arity r
    the space uses the Gauss-Hermite rule for that weight with ceil(((r+1)m+1)/2) points
    per axis, so every projected product is exact (r=3 gives the 2m+1 rule for cubes).
``"collocation"``
    The m+1 Gauss-Hermite nodes for weight exp(-|x|^2), shared by all arities.  For a
    tensor-complete basis the evaluation map is invertible, products are interpolated
    exactly at the nodes, and the truncated algebra is commutative and associative.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .besov import block_multipliers, max_block
from .errors import CapacityError, UsageError
from .fields import Field, FieldPath
from .hermite import basis_values, gauss_hermite_grid

RULES = ("dealiased", "collocation")


@dataclass(frozen=True)
class ParaConfig:
    separation: int = 4
    resonance_width: int = 3

    def __post_init__(self):
        if self.separation < self.resonance_width + 1:
            raise UsageError("separation must exceed the resonance width")


class _NodeSet:
    def __init__(self, basis, grid):
        self.grid = grid
        self.phi = basis_values(basis, grid.nodes)  # (K, P)
        self.proj = (self.phi * grid.weights).T  # (P, K)


class ProductSpace:
    """Node sets, evaluation and projection matrices for products of fields on one basis.

    Methods taking ``arity`` use the node set that is exact for products of that many
    fields; values and projections must use the same arity.
    """

    def __init__(self, basis, rule="dealiased", para=None, J=None):
        if rule not in RULES:
            raise UsageError(f"unknown product rule {rule!r}")
        if rule == "collocation" and not basis.is_tensor_complete:
            raise UsageError("collocation needs a tensor-complete basis")
        self.basis = basis
        self.rule = rule
        self.para = para or ParaConfig()
        self.J = max_block(basis) if J is None else J
        self._sets = {}

    def nodeset(self, arity=2):
        key = 1 if self.rule == "collocation" else int(arity)
        if key not in self._sets:
            m, d = self.basis.max_degree, self.basis.dimension
            if self.rule == "collocation":
                grid = gauss_hermite_grid(d, m + 1, 1.0)
            else:
                grid = gauss_hermite_grid(d, -(-((key + 1) * m + 1) // 2), (key + 1) / 2.0)
            self._sets[key] = _NodeSet(self.basis, grid)
        return self._sets[key]

    def grid(self, arity=2):
        return self.nodeset(arity).grid

    def nodes(self, arity=2):
        return self.nodeset(arity).grid.nodes

    def values(self, coeffs, arity=2):
        """Node values of coefficient arrays (..., K) -> (..., P)."""
        return np.asarray(coeffs, dtype=float) @ self.nodeset(arity).phi

    def project(self, values, arity=2):
        """Coefficients of node values (..., P) -> (..., K)."""
        return np.asarray(values, dtype=float) @ self.nodeset(arity).proj

    def check(self, *items):
        for it in items:
            if it.basis != self.basis:
                raise UsageError("field basis differs from the product space basis")

    @cached_property
    def multipliers(self):
        return block_multipliers(self.basis, self.J)

    def block_values(self, coeffs, arity=2):
        """Node values of every block: (..., K) -> (..., J+2, P)."""
        coeffs = np.asarray(coeffs, dtype=float)
        phi = self.nodeset(arity).phi
        return np.einsum("...k,jk,kp->...jp", coeffs, self.multipliers, phi, optimize=True)

    def _mask(self, kind):
        n = self.J + 2
        j = np.arange(n)[:, None]
        k = np.arange(n)[None, :]
        s, w = self.para.separation, self.para.resonance_width
        if kind == "lo":
            return (j <= k - s).astype(float)
        if kind == "res":
            return (np.abs(j - k) <= w).astype(float)
        if kind == "hi":
            return (k <= j - s).astype(float)
        raise UsageError(kind)

    @cached_property
    def masks(self):
        return {kind: self._mask(kind) for kind in ("lo", "res", "hi")}

    def pair_values(self, kind, a, b, arity=2):
        """Node values of sum over block pairs (j, k) in the mask of delta_j a * delta_k b."""
        A = self.block_values(a, arity)
        B = self.block_values(b, arity)
        return np.einsum("...jp,jk,...kp->...p", A, self.masks[kind], B, optimize=True)

    def pair(self, kind, a, b):
        return self.project(self.pair_values(kind, a, b))

    def product(self, *coeffs):
        """Projection of the pointwise product of any number of coefficient arrays."""
        r = len(coeffs)
        vals = self.values(coeffs[0], r)
        for c in coeffs[1:]:
            vals = vals * self.values(c, r)
        return self.project(vals, r)


def _coeffs(x):
    return x.coeffs if isinstance(x, (Field, FieldPath)) else np.asarray(x, dtype=float)


def _wrap(template, coeffs):
    if isinstance(template, FieldPath):
        return FieldPath(template.basis, template.times, coeffs)
    return Field(template.basis, coeffs)


def _binary(kind, f, g, space):
    space.check(f, g)
    return _wrap(f, space.pair(kind, _coeffs(f), _coeffs(g)))


def para_lo(f, g, space):
    """f < g: low frequencies of f against high frequencies of g (blocks j <= k - separation)."""
    return _binary("lo", f, g, space)


def para_res(f, g, space):
    """f o g: block pairs with |j - k| <= resonance width."""
    return _binary("res", f, g, space)


def para_hi(f, g, space):
    """f > g = g < f."""
    return _binary("hi", f, g, space)


def product(f, g, space):
    space.check(f, g)
    return _wrap(f, space.product(_coeffs(f), _coeffs(g)))


def commutator_block(k, f, g, space):
    """[delta_k, f](g) = delta_k(f g) - f * delta_k g."""
    space.check(f, g)
    m = space.multipliers[k + 1]
    fg = space.product(f.coeffs, g.coeffs)
    return Field(f.basis, m * fg - space.product(f.coeffs, m * g.coeffs))


def commutator_para_res(f, g, h, space):
    """(f < g) o h - f * (g o h)."""
    space.check(f, g, h)
    fg = space.pair("lo", _coeffs(f), _coeffs(g))
    first = space.pair("res", fg, _coeffs(h))
    second = space.project(
        space.values(_coeffs(f), 3) * space.pair_values("res", _coeffs(g), _coeffs(h), 3), 3
    )
    return _wrap(f, first - second)


def heat_commutator(t, f, g, space):
    """exp(-tH)(f < g) - f < (exp(-tH) g)."""
    space.check(f, g)
    decay = np.exp(-t * f.basis.eigenvalues)
    return Field(
        f.basis,
        decay * space.pair("lo", f.coeffs, g.coeffs) - space.pair("lo", f.coeffs, decay * g.coeffs),
    )


# resonance operator ---------------------------------------------------------------

RESONANCE_MAX_MODES = 40


@dataclass(frozen=True, eq=False)
class FourVarFunction:
    """F(y1, y2, z1, z2) on basis^{(x)4}.

    Either a dense coefficient tensor ``dense[a, b, c, e]`` multiplying
    phi_a(y1) phi_b(y2) phi_c(z1) phi_e(z2), or a list of rank-one terms
    ``(f1, f2, g1, g2)`` of Fields in the same order of variables.
    """

    basis: object
    dense: np.ndarray = None
    terms: tuple = ()

    def __post_init__(self):
        if (self.dense is None) == (not self.terms):
            raise UsageError("give exactly one of a dense tensor or rank-one terms")
        if self.dense is not None:
            K = self.basis.size
            if np.shape(self.dense) != (K, K, K, K):
                raise UsageError("dense tensor must have shape (K, K, K, K)")
            if not np.all(np.isfinite(self.dense)):
                raise UsageError("tensor entries must be finite")
        for term in self.terms:
            if len(term) != 4 or any(f.basis != self.basis for f in term):
                raise UsageError("rank-one terms need four fields on the common basis")

    @classmethod
    def separable(cls, f1, f2, g1, g2):
        return cls(f1.basis, terms=((f1, f2, g1, g2),))


def resonance_matrix(basis, J=None, width=3):
    """R[a, c] = sum over i ~ i' of chi_i(sqrt(lambda_a)) chi_{i'}(sqrt(lambda_c))."""
    M = block_multipliers(basis, max_block(basis) if J is None else J)
    n = M.shape[0]
    near = (np.abs(np.arange(n)[:, None] - np.arange(n)[None, :]) <= width).astype(float)
    return M.T @ near @ M


def resonance_values(F, points, width=3):
    """Values of the resonance operator applied to F at the given points."""
    basis = F.basis
    if F.dense is not None and basis.size > RESONANCE_MAX_MODES:
        raise CapacityError(f"dense resonance operator limited to {RESONANCE_MAX_MODES} modes")
    phi = basis_values(basis, points)
    if F.dense is not None:
        R = resonance_matrix(basis, width=width)
        T = F.dense * R[:, None, :, None] * R[None, :, None, :]
        return np.einsum("abce,ap,bp,cp,ep->p", T, phi, phi, phi, phi, optimize=True)
    R = resonance_matrix(basis, width=width)
    out = 0.0
    for f1, f2, g1, g2 in F.terms:
        r1 = np.einsum("a,ac,c,ap,cp->p", f1.coeffs, R, g1.coeffs, phi, phi, optimize=True)
        r2 = np.einsum("b,be,e,bp,ep->p", f2.coeffs, R, g2.coeffs, phi, phi, optimize=True)
        out = out + r1 * r2
    return out


def resonance_operator(F, space, width=3):
    """Resonance operator applied to F, projected onto the basis through ``space``."""
    if F.basis != space.basis:
        raise UsageError("F and the product space use different bases")
    return Field(F.basis, space.project(resonance_values(F, space.nodes(4), width), 4))


# Young mild integral --------------------------------------------------------------


def interpolate_path(path, t):
    """Piecewise-linear interpolation of the stored coefficients at times ``t``."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    times = path.times
    if np.any(t < times[0] - 1e-12) or np.any(t > times[-1] + 1e-12):
        raise UsageError("interpolation time outside the stored grid")
    pos = np.clip((t - times[0]) / path.dt, 0, len(times) - 1) if len(times) > 1 else np.zeros_like(t)
    i0 = np.minimum(np.floor(pos).astype(int), len(times) - 2)
    i0 = np.maximum(i0, 0)
    w = pos - i0
    return (1 - w)[:, None] * path.coeffs[i0] + w[:, None] * path.coeffs[i0 + 1]


def young_riemann_sum(u, f, s, t, level, space):
    """S^(n)_{s,t} = sum_i exp(-(t - t_i)H)(u_{t_i} (f_{t_{i+1}} - f_{t_i})) on 2^level subintervals."""
    n = 2 ** level
    ti = s + (t - s) * np.arange(n + 1) / n
    U = interpolate_path(u, ti[:-1])
    Fv = interpolate_path(f, ti)
    inc = Fv[1:] - Fv[:-1]
    prods = space.project(space.values(U) * space.values(inc))
    decay = np.exp(-np.outer(t - ti[:-1], u.basis.eigenvalues))
    return np.sum(decay * prods, axis=0)


@dataclass(frozen=True, eq=False)
class YoungResult:
    value: Field
    increment: float
    level: int
    interpolation: str = "piecewise-linear"


def young_mild_integral(u, f, s, t, level, space):
    """Dyadic Riemann-sum approximation of int_s^t exp(-(t-r)H)(u_r df_r).

    Returns the level-``level`` sum together with the L^2 size of its change from the
    previous level, the Cauchy increment used to monitor convergence.
    """
    space.check(u, f)
    if not s < t:
        raise UsageError("need s < t")
    if level < 1:
        raise UsageError("level must be at least 1")
    cur = young_riemann_sum(u, f, s, t, level, space)
    prev = young_riemann_sum(u, f, s, t, level - 1, space)
    return YoungResult(Field(u.basis, cur), float(np.linalg.norm(cur - prev)), level)
