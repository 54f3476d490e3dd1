"""Conforming P1 finite-element spaces on compatible 1D meshes.

Homogeneous Dirichlet conditions at both endpoints; the degrees of freedom
are the interior nodes.  The module provides

* assembly of stiffness K (K_ij = int c^2 phi_i' phi_j') and mass matrices
  (consistent and row-sum lumped),
* the L2 projector, the nodal pass operator between compatible spaces,
  the fine interpolator / fine L2 projector of the LTS splitting,
* the discrete elliptic operator A_n phi = M^{-1} K phi and the LTS
  operator  A~_n phi = A_n phi - (tau^2/16) A_n Pi_f A_n phi,
* discrete pivot (L2), potential (|| c d/dx . ||) and energy norms, plus
  quadrature-based errors against analytic functions,
* a SpaceFamily cache that owns the macro partition and builds common
  refinements / coarsest common spaces for cross-space combinations.

The wave speed c is piecewise constant per macro cell, so all spatial
integrals here are exact.
"""

from __future__ import annotations

from functools import cached_property

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import mesh as meshmod
from .errors import ConfigError, DataError, IncompatibleMeshError
from .mesh import Mesh1D, coarse_fine_split

MASS_MODES = ("lumped", "consistent")

# 5-point Gauss-Legendre on [-1, 1]: exact through degree 9, used for all
# integrals against analytic functions.
_GP, _GW = np.polynomial.legendre.leggauss(5)


class FeSpace:
    """P1 space on a Mesh1D with Dirichlet endpoints and assembled operators."""

    def __init__(self, mesh: Mesh1D, wave_speed=1.0, theta: float = 0.75,
                 mass_mode: str = "lumped", degree: int = 1):
        if degree != 1:
            raise ConfigError("only degree 1 elements are supported")
        if mass_mode not in MASS_MODES:
            raise ConfigError(f"mass mode must be one of {MASS_MODES}")
        self.mesh = mesh
        self.degree = degree
        self.theta = float(theta)
        self.mass_mode = mass_mode
        c = np.asarray(wave_speed, dtype=float)
        if c.ndim == 0:
            c = np.full(mesh.n_macro, float(c))
        if c.shape != (mesh.n_macro,):
            raise DataError("wave speed must be a scalar or one value per macro cell")
        if np.any(c <= 0.0) or not np.all(np.isfinite(c)):
            raise DataError("wave speed must be positive and finite")
        self.c_macro = c
        self.c_elem = c[mesh.element_macro]
        self.split = coarse_fine_split(mesh, theta)
        self._assemble()

    # ------------------------------------------------------------------ setup

    def _assemble(self):
        m = self.mesh
        w = m.widths
        c2 = self.c_elem ** 2
        nn = m.n_elements + 1
        left = np.arange(m.n_elements)
        rows = np.concatenate([left, left, left + 1, left + 1])
        cols = np.concatenate([left, left + 1, left, left + 1])
        kdat = np.concatenate([c2 / w, -c2 / w, -c2 / w, c2 / w])
        mdat = np.concatenate([w / 3.0, w / 6.0, w / 6.0, w / 3.0])
        K = sp.coo_matrix((kdat, (rows, cols)), shape=(nn, nn)).tocsr()
        M = sp.coo_matrix((mdat, (rows, cols)), shape=(nn, nn)).tocsr()
        self.K = K[1:-1, 1:-1].tocsr()
        self.M_cons = M[1:-1, 1:-1].tocsr()
        self.M_lump = np.asarray(self.M_cons.sum(axis=1)).ravel()

    @property
    def n_dofs(self) -> int:
        return self.mesh.n_elements - 1

    @cached_property
    def dof_coords(self) -> np.ndarray:
        return self.mesh.nodes[1:-1]

    @cached_property
    def fine_dof_mask(self) -> np.ndarray:
        """A dof is fine iff its basis support touches a fine element."""
        f = self.split.fine_mask
        return f[:-1] | f[1:]

    @cached_property
    def _mcons_solve(self):
        return spla.factorized(self.M_cons.tocsc())

    def mass_solve(self, b: np.ndarray, mode: str | None = None) -> np.ndarray:
        mode = mode or self.mass_mode
        if mode == "lumped":
            return b / self.M_lump
        return self._mcons_solve(b)

    def zero_field(self) -> "DiscreteField":
        return DiscreteField(self, np.zeros(self.n_dofs))


class DiscreteField:
    """FE function: a space handle plus one coefficient per interior node."""

    __slots__ = ("space", "coeffs")

    def __init__(self, space: FeSpace, coeffs):
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape != (space.n_dofs,):
            raise DataError("coefficient vector does not match the space dimension")
        self.space = space
        self.coeffs = coeffs

    def with_bc(self) -> np.ndarray:
        """Nodal values on all mesh nodes, Dirichlet zeros included."""
        return np.concatenate(([0.0], self.coeffs, [0.0]))

    def __call__(self, x):
        return np.interp(x, self.space.mesh.nodes, self.with_bc())

    def slopes(self) -> np.ndarray:
        """Piecewise-constant derivative per element."""
        return np.diff(self.with_bc()) / self.space.mesh.widths

    # linear algebra on matching spaces (used heavily by the estimators)
    def _same_space(self, other):
        if self.space is not other.space and self.space.mesh != other.space.mesh:
            raise IncompatibleMeshError("field algebra requires one common space")

    def __add__(self, other):
        self._same_space(other)
        return DiscreteField(self.space, self.coeffs + other.coeffs)

    def __sub__(self, other):
        self._same_space(other)
        return DiscreteField(self.space, self.coeffs - other.coeffs)

    def __mul__(self, a):
        return DiscreteField(self.space, self.coeffs * float(a))

    __rmul__ = __mul__


# ---------------------------------------------------------------- projections

def l2_load(space: FeSpace, g) -> np.ndarray:
    """Load vector (g, phi_i) for a callable g, 5-point Gauss per element."""
    m = space.mesh
    lefts = m.nodes[:-1][:, None]
    w = m.widths[:, None]
    xq = lefts + w * 0.5 * (1.0 + _GP)
    gq = np.asarray(g(xq), dtype=float)
    if not np.all(np.isfinite(gq)):
        raise DataError("non-finite values while integrating the data function")
    wq = w * 0.5 * _GW
    s = 0.5 * (1.0 + _GP)
    contrib_l = np.sum(wq * gq * (1.0 - s), axis=1)
    contrib_r = np.sum(wq * gq * s, axis=1)
    full = np.zeros(m.n_elements + 1)
    np.add.at(full, np.arange(m.n_elements), contrib_l)
    np.add.at(full, np.arange(m.n_elements) + 1, contrib_r)
    return full[1:-1]


def l2_project(space: FeSpace, g, mode: str | None = None) -> DiscreteField:
    """L2 projection onto the space; mass matrix per the configured mode.

    g may be a callable g(x) or a DiscreteField (fields are callable, and
    the 5-point rule is exact for the piecewise-linear integrands).
    """
    return DiscreteField(space, space.mass_solve(l2_load(space, g), mode))


def pass_operator(field: DiscreteField, to_space: FeSpace) -> DiscreteField:
    """Nodal (Lagrange) interpolation onto a compatible space."""
    if (field.space.mesh.a, field.space.mesh.b, field.space.mesh.n_macro) != \
            (to_space.mesh.a, to_space.mesh.b, to_space.mesh.n_macro):
        raise IncompatibleMeshError("pass operator needs meshes of one macro family")
    if to_space.mesh == field.space.mesh:
        return DiscreteField(to_space, field.coeffs.copy())
    return DiscreteField(to_space, field(to_space.dof_coords))


def fine_interpolator(field: DiscreteField) -> DiscreteField:
    """Pi_f: keep fine-dof coefficients, zero the coarse ones."""
    out = np.where(field.space.fine_dof_mask, field.coeffs, 0.0)
    return DiscreteField(field.space, out)


def fine_l2_project(space: FeSpace, g) -> DiscreteField:
    """L2 projection onto the fine subspace V_f (utility, unused by the scheme)."""
    mask = space.fine_dof_mask
    out = np.zeros(space.n_dofs)
    if mask.any():
        b = l2_load(space, g)
        Mff = space.M_cons[np.ix_(mask, mask)]
        out[mask] = spla.spsolve(Mff.tocsc(), b[mask])
    return DiscreteField(space, out)


# ------------------------------------------------------------------ operators

def elliptic_apply(field: DiscreteField, mode: str | None = None) -> DiscreteField:
    """Discrete elliptic operator A_n phi = M^{-1} K phi."""
    s = field.space
    return DiscreteField(s, s.mass_solve(s.K @ field.coeffs, mode))


def lts_apply(field: DiscreteField, tau: float, mode: str | None = None) -> DiscreteField:
    """LTS operator  A~_n phi = A_n phi - (tau^2/16) A_n Pi_f A_n phi."""
    a1 = elliptic_apply(field, mode)
    a2 = elliptic_apply(fine_interpolator(a1), mode)
    return DiscreteField(field.space, a1.coeffs - (tau * tau / 16.0) * a2.coeffs)


def lts_two_substep_apply(field: DiscreteField, tau: float,
                          mode: str | None = None) -> DiscreteField:
    """Effective one-step operator realized by two explicit tau/2 substeps.

    Only meaningful when every dof is fine (the all-fine sanity case): the
    leapfrog cosine-propagator over two tau/2 substeps is
    C = 2(I - (tau^2/8)A)^2 - I, and the effective operator solves
    C = I - (tau^2/2) A_eff.
    """
    if not field.space.fine_dof_mask.all():
        raise DataError("two-substep expansion is defined for the all-fine case")
    half = tau * tau / 8.0
    c1 = field.coeffs - half * elliptic_apply(field, mode).coeffs
    c1f = DiscreteField(field.space, c1)
    c2 = 2.0 * (c1 - half * elliptic_apply(c1f, mode).coeffs) - field.coeffs
    return DiscreteField(field.space, 2.0 * (field.coeffs - c2) / (tau * tau))


def source_approx(space: FeSpace, f, n: int, grid, time_continuous: bool = True,
                  mode: str | None = None) -> DiscreteField:
    """Discrete source F^n.

    Continuous-in-time data: F^n = P_n f(., t_n).  Otherwise the staggered
    average (1/tau) int over [t_{n-1/2}, t_{n+1/2}] of P_n f(., t) dt via
    3-point Gauss in time.
    """
    if f is None:
        return space.zero_field()
    tn = grid.node(2 * n)
    if time_continuous:
        return l2_project(space, lambda x: f(x, tn), mode)
    gp, gw = np.polynomial.legendre.leggauss(3)
    tq = tn + 0.5 * grid.tau * gp
    wq = 0.5 * gw  # already divided by tau

    def g(x):
        return sum(w * np.asarray(f(x, t), dtype=float) for w, t in zip(wq, tq))

    return l2_project(space, g, mode)


# ---------------------------------------------------------------------- norms

def pivot_norm(field: DiscreteField) -> float:
    """Exact L2(Omega) norm of the FE function."""
    v = field.with_bc()
    w = field.space.mesh.widths
    vl, vr = v[:-1], v[1:]
    return float(np.sqrt(np.sum(w * (vl * vl + vl * vr + vr * vr) / 3.0)))


def pot_norm(field: DiscreteField) -> float:
    """Potential-energy norm || c d/dx field ||_{L2} = sqrt(a(field, field))."""
    s = field.slopes()
    m = field.space.mesh
    return float(np.sqrt(np.sum(field.space.c_elem ** 2 * s * s * m.widths)))


def energy_norm(u_field: DiscreteField, v_field: DiscreteField) -> float:
    """Energy norm of the pair: sqrt(pot(u)^2 + pivot(v)^2)."""
    return float(np.hypot(pot_norm(u_field), pivot_norm(v_field)))


def _subdivided_quad_points(mesh: Mesh1D, subdiv: int):
    """Gauss points/weights on each element split into `subdiv` pieces."""
    lefts = np.repeat(mesh.nodes[:-1], subdiv)
    w = np.repeat(mesh.widths, subdiv) / subdiv
    offs = np.tile(np.arange(subdiv), mesh.n_elements) * w
    lo = (lefts + offs)[:, None]
    xq = lo + w[:, None] * 0.5 * (1.0 + _GP)
    wq = w[:, None] * 0.5 * _GW
    return xq, wq


def l2_error_vs_function(field: DiscreteField, g, subdiv: int = 4) -> float:
    """|| field - g ||_{L2} by 5-pt Gauss on a subdiv-refined quadrature mesh."""
    xq, wq = _subdivided_quad_points(field.space.mesh, subdiv)
    d = field(xq) - g(xq)
    return float(np.sqrt(np.sum(wq * d * d)))


def pot_error_vs_function(field: DiscreteField, dg, subdiv: int = 4) -> float:
    """|| c (field' - dg) ||_{L2}; dg is the exact spatial derivative."""
    m = field.space.mesh
    xq, wq = _subdivided_quad_points(m, subdiv)
    slope = np.repeat(field.slopes(), subdiv)[:, None]
    c2 = np.repeat(field.space.c_elem ** 2, subdiv)[:, None]
    d = slope - dg(xq)
    return float(np.sqrt(np.sum(wq * c2 * d * d)))


# --------------------------------------------------------------- space family

class SpaceFamily:
    """Cache of FE spaces over one macro partition and wave speed.

    Spaces are keyed by the per-macro-cell level tuple, so meshes occurring
    repeatedly (time-varying runs revisit few distinct meshes, and every
    indicator needs common refinements) are assembled once.
    """

    def __init__(self, a: float, b: float, n_macro: int, wave_speed=1.0,
                 theta: float = 0.75, mass_mode: str = "lumped"):
        self.a, self.b, self.n_macro = float(a), float(b), int(n_macro)
        self.wave_speed = wave_speed
        self.theta = theta
        self.mass_mode = mass_mode
        self._cache: dict[tuple, FeSpace] = {}

    @classmethod
    def for_domain(cls, a, b, H, **kw) -> "SpaceFamily":
        return cls(a, b, max(1, round((b - a) / H)), **kw)

    @property
    def macro_h(self) -> float:
        return (self.b - self.a) / self.n_macro

    def space_for(self, mesh_or_levels) -> FeSpace:
        if isinstance(mesh_or_levels, Mesh1D):
            m = mesh_or_levels
            if (m.a, m.b, m.n_macro) != (self.a, self.b, self.n_macro):
                raise IncompatibleMeshError("mesh does not belong to this family")
            levels = m.levels
        else:
            levels = tuple(int(l) for l in mesh_or_levels)
            m = Mesh1D(self.a, self.b, self.n_macro, levels)
        if levels not in self._cache:
            self._cache[levels] = FeSpace(m, self.wave_speed, self.theta,
                                          self.mass_mode)
        return self._cache[levels]

    def uniform_space(self, level: int = 0) -> FeSpace:
        return self.space_for((level,) * self.n_macro)

    def window_space(self, window) -> FeSpace:
        return self.space_for(
            meshmod.build_window_mesh(self.a, self.b, self.macro_h, window))

    def refinement(self, *spaces: FeSpace) -> FeSpace:
        """Space on the elementwise-finest common mesh."""
        levels = tuple(map(max, *(s.mesh.levels for s in spaces))) \
            if len(spaces) > 1 else spaces[0].mesh.levels
        return self.space_for(levels)

    def coarsening(self, *spaces: FeSpace) -> FeSpace:
        """Intersection space: elementwise-coarsest common mesh."""
        levels = tuple(map(min, *(s.mesh.levels for s in spaces))) \
            if len(spaces) > 1 else spaces[0].mesh.levels
        return self.space_for(levels)

    def refined_space(self, space: FeSpace, extra_levels: int) -> FeSpace:
        return self.space_for(tuple(l + extra_levels for l in space.mesh.levels))

    def combine(self, terms) -> DiscreteField:
        """Sum of (coef, field) terms on the finest common refinement.

        Nodal interpolation onto a refinement reproduces each P1 summand
        exactly, so the result equals the true function sum.
        """
        terms = [(float(a), f) for a, f in terms]
        if not terms:
            raise DataError("combine needs at least one term")
        target = self.refinement(*(f.space for _, f in terms))
        out = np.zeros(target.n_dofs)
        for a, f in terms:
            out += a * pass_operator(f, target).coeffs
        return DiscreteField(target, out)
