"""A posteriori error indicators and total error bounds.

Implements the fully computable estimation pipeline:

* the Babuska-Rheinboldt residual estimator E[w, V, sigma]
      || h^sigma A_V w ||_{L2(Omega)} + sqrt( sum_z h_z^{2 sigma - 1} [c^2 w']_z^2 )
  (the elementwise strong residual -(c^2 w')' vanishes for P1 with
  elementwise-constant c, leaving the discrete elliptic part and the
  interior-node flux jumps), with sigma = 1 for the A(H1)-norm target and
  sigma = 2 for the pivot (L2) target;
* the per-step indicators: mesh change (mu0, mu1, mu2), LTS perturbation
  (alpha0, alpha1, alpha), elliptic (eps0, eps1), data (delta), time
  reconstruction (theta0, theta1), and the half-interval accumulation eta_m;
* the two total bounds
      bound_U = max_n eps0^n + ||err(0)||_energy + 2 sum_m eta_m
      bound_V = max_n eps1^n + ||err(0)||_energy + 2 sum_m eta_m
  together with the true errors measured against the analytic solution.

Mass-mode convention: the scheme runs with its configured (default lumped)
mass, and alpha0 uses the scheme operators so that
alpha0 = (tau^2/16) ||A_n Pi_f A_n U^n|| holds verbatim; every other
estimator-internal elliptic operator (A_V inside E, the A_n U^n / A_n V
sequences feeding theta0/theta1, the reference reconstruction) uses the
consistent mass so Galerkin orthogonality behind the BR bound is exact.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field as dc_field
from math import ceil, floor, hypot

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConfigError
from .fespace import (DiscreteField, FeSpace, SpaceFamily, elliptic_apply,
                      fine_interpolator, l2_error_vs_function, lts_apply,
                      pass_operator, pivot_norm, pot_error_vs_function,
                      pot_norm)
from .mesh import refines
from .stepper import Trajectory
from .timegrid import bubble, hat_basis

# 3-point Gauss in time: exact through degree 5, enough for the quartic
# products of two quadratic bubbles in the eta integrand.
_TGP, _TGW = np.polynomial.legendre.leggauss(3)


class BrNormFlag(enum.IntEnum):
    """Norm target of the BR estimator; the value is the weight power sigma."""

    A_NORM = 1
    PIVOT = 2


# ---------------------------------------------------------------- BR estimator

def _prolongation_matrix(family: SpaceFamily, coarse: FeSpace, fine: FeSpace):
    """Sparse interior-dof interpolation matrix from coarse into fine."""
    cache = getattr(family, "_prolong_cache", None)
    if cache is None:
        cache = family._prolong_cache = {}
    key = (coarse.mesh.levels, fine.mesh.levels)
    if key in cache:
        return cache[key]
    xs = fine.dof_coords
    nodes = coarse.mesh.nodes
    e = np.clip(np.searchsorted(nodes, xs, side="right") - 1, 0,
                coarse.mesh.n_elements - 1)
    s = (xs - nodes[e]) / coarse.mesh.widths[e]
    rows, cols, vals = [], [], []
    nd = coarse.n_dofs
    idx = np.arange(len(xs))
    ln = e - 1  # coarse dof number of the element's left node
    keep = (ln >= 0) & (ln < nd)
    rows.append(idx[keep]); cols.append(ln[keep]); vals.append(1.0 - s[keep])
    rn = e
    keep = (rn >= 0) & (rn < nd)
    rows.append(idx[keep]); cols.append(rn[keep]); vals.append(s[keep])
    P = sp.coo_matrix((np.concatenate(vals),
                       (np.concatenate(rows), np.concatenate(cols))),
                      shape=(len(xs), nd)).tocsr()
    cache[key] = P
    return P


def _local_eval_sizes(w_space: FeSpace, eval_space: FeSpace) -> np.ndarray:
    """Eval-mesh size at each interior node of w's mesh.

    Nodes interior to an eval element get that element's width; nodes
    coinciding with an interior eval node get the mean of the two widths.
    """
    xs = w_space.mesh.nodes[1:-1]
    en = eval_space.mesh.nodes
    ew = eval_space.mesh.widths
    tol = 1e-9 * eval_space.mesh.macro_h
    j = np.clip(np.searchsorted(en, xs), 1, len(en) - 1)
    # xs may land a hair left or right of a coincident node
    near_j = np.abs(en[j] - xs) < tol
    near_jm = np.abs(en[j - 1] - xs) < tol
    coincide = np.where(near_jm, j - 1, j)
    is_node = (near_j | near_jm) & (coincide > 0) & (coincide < len(en) - 1)
    h = ew[np.clip(j - 1, 0, len(ew) - 1)].copy()
    k = coincide[is_node]
    h[is_node] = 0.5 * (ew[k - 1] + ew[k])
    return h


def br_estimator(w: DiscreteField, eval_space: FeSpace, flag,
                 family: SpaceFamily) -> float:
    """Residual estimator E[w, eval_space, flag] (see module docstring)."""
    sigma = int(BrNormFlag(flag))
    ref = family.refinement(w.space, eval_space)
    wR = pass_operator(w, ref)
    P = _prolongation_matrix(family, eval_space, ref)
    load = P.T @ (ref.K @ wR.coeffs)       # a(w, chi_i) for eval basis chi_i
    g = eval_space.mass_solve(load, "consistent")   # A_V w
    # element term: || h^sigma g ||_{L2} with g piecewise linear on eval mesh
    gv = np.concatenate(([0.0], g, [0.0]))
    gl, gr = gv[:-1], gv[1:]
    ew = eval_space.mesh.widths
    term1 = np.sqrt(np.sum(ew ** (2 * sigma) *
                           ew * (gl * gl + gl * gr + gr * gr) / 3.0))
    # jump term at the interior nodes of w's own mesh
    flux = w.space.c_elem ** 2 * w.slopes()
    jumps = flux[:-1] - flux[1:]
    h = _local_eval_sizes(w.space, eval_space)
    term2 = np.sqrt(np.sum(h ** (2 * sigma - 1) * jumps * jumps))
    return float(term1 + term2)


def estimator_functional(w_combo: DiscreteField, target_space: FeSpace, flag,
                         family: SpaceFamily) -> float:
    """E[w, target, flag]: the estimator consumed by every indicator."""
    return br_estimator(w_combo, target_space, flag, family)


def reference_reconstruction(phi: DiscreteField, ref_refine: int,
                             family: SpaceFamily) -> DiscreteField:
    """Approximate elliptic reconstruction R phi = A^{-1} A_n phi.

    Solves a(omega, chi) = (A_n phi, chi) for all chi in the uniformly
    ref_refine-times refined reference space.  Verification aid only.
    """
    if ref_refine < 0:
        raise ConfigError("ref_refine must be non-negative")
    g = elliptic_apply(phi, "consistent")
    ref = family.refined_space(phi.space, ref_refine)
    gR = pass_operator(g, ref)
    b = ref.M_cons @ gR.coeffs
    x = spla.spsolve(ref.K.tocsc(), b)
    return DiscreteField(ref, x)


# ------------------------------------------------------------------ indicators

@dataclass
class IndicatorSample:
    """All indicator values attached to one step n.

    theta0/theta1/delta are time functions; their values at the 3-point
    Gauss nodes of the step's half-intervals are recorded as (t, value)
    pairs.  eta is the summed contribution of the half-intervals whose
    displacement-residual index is n.
    """

    n: int
    mu0: float = 0.0
    mu1: float = 0.0
    mu2: float = 0.0
    alpha0: float = 0.0
    alpha1: float = 0.0
    alpha: float = 0.0
    eps0: float = 0.0
    eps1: float = 0.0
    theta0_quad: list = dc_field(default_factory=list)
    theta1_quad: list = dc_field(default_factory=list)
    delta_quad: list = dc_field(default_factory=list)
    eta: float = 0.0

    def mean(self, pairs) -> float:
        return float(np.mean([v for _, v in pairs])) if pairs else 0.0


@dataclass
class EstimateReport:
    """Total bounds plus everything they were assembled from."""

    bound_U: float
    bound_V: float
    initial_energy_error: float
    samples: list
    etas: np.ndarray           # eta_m for m = 1..2N
    true_error_U: float | None       # max_n potential-norm displacement error
    true_error_V: float | None       # max_n L2 velocity error
    true_error_U_l2: float | None = None  # max_n L2 displacement error

    @property
    def sum_eta(self) -> float:
        return float(np.sum(self.etas))

    @property
    def max_eps0(self) -> float:
        return max(s.eps0 for s in self.samples)

    @property
    def max_eps1(self) -> float:
        return max(s.eps1 for s in self.samples)

    def recompute_bounds(self) -> tuple[float, float]:
        """Totals re-assembled from stored parts (self-consistency check)."""
        tail = self.initial_energy_error + 2.0 * self.sum_eta
        return self.max_eps0 + tail, self.max_eps1 + tail


class _Context:
    """Per-trajectory caches for the estimator layer."""

    def __init__(self, traj: Trajectory, mu0_space: str = "printed"):
        if traj.family is None:
            raise ConfigError("trajectory carries no space family")
        if mu0_space not in ("printed", "shifted"):
            raise ConfigError("mu0_space must be 'printed' or 'shifted'")
        self.traj = traj
        self.family = traj.family
        self.grid = traj.grid
        self.N = traj.grid.steps
        self.mu0_space = mu0_space
        self._au: dict[int, DiscreteField] = {}
        self._av: dict[int, DiscreteField] = {}
        self._atu: dict[int, DiscreteField] = {}

    def S(self, n: int) -> FeSpace:
        return self.traj.space(int(np.clip(n, 0, self.N)))

    def U(self, n: int) -> DiscreteField:
        return self.traj.states[n].U

    def V(self, n: int) -> DiscreteField:
        return self.traj.states[n].V

    def AU(self, n: int) -> DiscreteField | None:
        """Consistent-mass A_n U^n, or None outside [0, N]."""
        if not 0 <= n <= self.N:
            return None
        if n not in self._au:
            self._au[n] = elliptic_apply(self.U(n), "consistent")
        return self._au[n]

    def AV(self, n: int) -> DiscreteField | None:
        """Consistent-mass A_n V^{n-1/2}, or None outside [0, N]."""
        if not 0 <= n <= self.N:
            return None
        if n not in self._av:
            self._av[n] = elliptic_apply(self.V(n), "consistent")
        return self._av[n]

    def AtU(self, n: int) -> DiscreteField:
        """Scheme-mode LTS operator applied to U^n."""
        if n not in self._atu:
            self._atu[n] = lts_apply(self.U(n), self.grid.tau)
        return self._atu[n]

    def delta(self, n: int, t: float) -> float:
        """delta^n(t) = || F^n - f(., t) ||_{L2}."""
        f = getattr(self.traj.problem, "f", None) if self.traj.problem else None
        F = self.traj.sources[n]
        if f is None:
            return pivot_norm(F)
        return l2_error_vs_function(F, lambda x: f(x, t))


def indicators_at(traj_or_ctx, n: int, mu0_space: str = "printed") -> IndicatorSample:
    """Scalar per-step indicators (the time functions are added by accumulate)."""
    ctx = traj_or_ctx if isinstance(traj_or_ctx, _Context) \
        else _Context(traj_or_ctx, mu0_space)
    fam, tau, N = ctx.family, ctx.grid.tau, ctx.N
    s = IndicatorSample(n=n)
    Sn, Sn1 = ctx.S(n), ctx.S(n + 1)

    # mesh-change indicators
    if n >= 1 and not refines(Sn.mesh, ctx.S(n - 1).mesh):
        d = fam.combine([(1.0, pass_operator(ctx.U(n - 1), Sn)),
                         (-1.0, ctx.U(n - 1))])
        tgt = fam.coarsening(Sn, Sn1) if ctx.mu0_space == "printed" \
            else fam.coarsening(ctx.S(n - 1), Sn)
        s.mu0 = (pot_norm(d) + br_estimator(d, tgt, BrNormFlag.A_NORM, fam)) / tau
    if n < N and not refines(Sn1.mesh, Sn.mesh):
        d1 = fam.combine([(1.0, pass_operator(ctx.V(n), Sn1)), (-1.0, ctx.V(n))])
        tgt = fam.coarsening(Sn, Sn1)
        s.mu1 = (pivot_norm(d1) + br_estimator(d1, tgt, BrNormFlag.PIVOT, fam)) / tau
        d2 = fam.combine([(1.0, ctx.AtU(n)),
                          (-1.0, pass_operator(ctx.AtU(n), Sn1))])
        s.mu2 = pivot_norm(d2) + br_estimator(d2, Sn1, BrNormFlag.PIVOT, fam)

    # LTS perturbation indicators (scheme-mode operators)
    a1 = elliptic_apply(ctx.U(n))
    a2 = elliptic_apply(fine_interpolator(a1))
    s.alpha0 = (tau * tau / 16.0) * pivot_norm(a2)
    s.alpha1 = br_estimator(ctx.AtU(n), Sn1, BrNormFlag.PIVOT, fam)
    s.alpha = s.alpha0 + s.alpha1 + s.mu2

    # elliptic indicators
    s.eps0 = br_estimator(ctx.U(n), Sn, BrNormFlag.A_NORM, fam)
    s.eps1 = br_estimator(ctx.V(n), Sn, BrNormFlag.PIVOT, fam)
    return s


def _diff_combo(ctx: _Context, fields_and_coefs):
    """Linear combination of optional fields; None terms are dropped
    (the one-sided convention at n = 0 and n = N)."""
    terms = [(a, f) for a, f in fields_and_coefs if f is not None]
    if not terms:
        return None
    return ctx.family.combine(terms)


def _theta0_parts(ctx: _Context, m: int):
    """Pieces of theta0 on the half-interval [t_{(m-1)/2}, t_{m/2}].

    Returns (X, Y, hat doubled index, bubble doubled index, target space):
    theta0(t) = tau^2 ( ||combo||_pot + E[combo, target, A] ) with
    combo(t) = X (l_n0(t) - 1)/2 - Y q(t), X the second difference of the
    velocity values at t_{n0-1/2}, Y the centered difference of A U.
    """
    tau = ctx.grid.tau
    n0 = ceil(m / 2)
    nprime = n0 - 1 if m % 2 == 1 else n0
    inv_t2 = 1.0 / (tau * tau)
    X = None
    if 1 <= n0 <= ctx.N - 1:
        X = _diff_combo(ctx, [(inv_t2, ctx.V(n0 + 1)), (-2.0 * inv_t2, ctx.V(n0)),
                              (inv_t2, ctx.V(n0 - 1))])
    Y = None
    au_p, au_m = ctx.AU(nprime + 1), ctx.AU(nprime - 1)
    if au_p is not None and au_m is not None:
        Y = _diff_combo(ctx, [(0.5 / tau, au_p), (-0.5 / tau, au_m)])
    spaces = [f.space for f in (X, Y) if f is not None]
    target = ctx.family.coarsening(*spaces) if spaces else None
    return X, Y, 2 * n0, 2 * nprime, target


def _theta0_value(ctx: _Context, parts, t: float) -> float:
    X, Y, hat2, bub2, target = parts
    if target is None:
        return 0.0
    tau = ctx.grid.tau
    cX = 0.5 * (hat_basis(ctx.grid, hat2, t) - 1.0)
    cY = -bubble(ctx.grid, bub2, t)
    terms = []
    if X is not None:
        terms.append((cX, X))
    if Y is not None:
        terms.append((cY, Y))
    combo = ctx.family.combine(terms)
    return tau * tau * (pot_norm(combo)
                        + br_estimator(combo, target, BrNormFlag.A_NORM, ctx.family))


def _theta1_parts(ctx: _Context, m: int):
    """Pieces of theta1 on the half-interval [t_{(m-1)/2}, t_{m/2}].

    theta1(t) = tau^2 || P l_n1(t)/2 - Q q(t) ||_{L2} with P the second
    difference of A U at n1 and Q the centered difference of A V on the
    staggered node covering the half-interval; exact because the continuous
    operator applied to an elliptic reconstruction returns discrete data.
    """
    tau = ctx.grid.tau
    n1 = floor(m / 2)
    inv_t2 = 1.0 / (tau * tau)
    P = None
    au_p, au_m = ctx.AU(n1 + 1), ctx.AU(n1 - 1)
    if au_p is not None and au_m is not None:
        P = _diff_combo(ctx, [(inv_t2, au_p), (-2.0 * inv_t2, ctx.AU(n1)),
                              (inv_t2, au_m)])
    if m % 2 == 0:        # J_{n1}: staggered index n1 - 1/2
        av_p, av_m = ctx.AV(n1 + 1), ctx.AV(n1 - 1)
        bub2 = 2 * n1 - 1
    else:                 # J_{n1 + 1/2}: staggered index n1 + 1/2
        av_p, av_m = ctx.AV(n1 + 2), ctx.AV(n1)
        bub2 = 2 * n1 + 1
    Q = None
    if av_p is not None and av_m is not None:
        Q = _diff_combo(ctx, [(0.5 / tau, av_p), (-0.5 / tau, av_m)])
    return P, Q, 2 * n1, bub2


def _theta1_value(ctx: _Context, parts, t: float) -> float:
    P, Q, hat2, bub2, = parts
    if P is None and Q is None:
        return 0.0
    tau = ctx.grid.tau
    terms = []
    if P is not None:
        terms.append((0.5 * hat_basis(ctx.grid, hat2, t), P))
    if Q is not None:
        terms.append((-bubble(ctx.grid, bub2, t), Q))
    return tau * tau * pivot_norm(ctx.family.combine(terms))


def accumulate(ctx_or_traj, samples: list) -> np.ndarray:
    """Half-interval accumulation eta_m, m = 1..2N.

    eta_m integrates sqrt((mu0 + theta0(t))^2 + (alpha + mu1 + delta(t)
    + theta1(t))^2) by 3-point Gauss.  The displacement-residual group
    (mu0, theta0) takes its step index from n = ceil(m/2), the velocity-
    residual group (alpha, mu1, delta, theta1) from n = floor(m/2) — the
    index whose residual actually lives on the half-interval.  Quadrature
    values and eta are recorded back into the samples.
    """
    ctx = ctx_or_traj if isinstance(ctx_or_traj, _Context) else _Context(ctx_or_traj)
    grid = ctx.grid
    etas = np.zeros(2 * ctx.N)
    for m in range(1, 2 * ctx.N + 1):
        t_lo, t_hi = grid.node(m - 1), grid.node(m)
        tq = 0.5 * (t_lo + t_hi) + 0.25 * grid.tau * _TGP
        wq = 0.25 * grid.tau * _TGW
        n0, n1 = ceil(m / 2), floor(m / 2)
        p0 = _theta0_parts(ctx, m)
        p1 = _theta1_parts(ctx, m)
        s0, s1 = samples[n0], samples[n1]
        acc = 0.0
        for t, w in zip(tq, wq):
            th0 = _theta0_value(ctx, p0, t)
            th1 = _theta1_value(ctx, p1, t)
            dl = ctx.delta(n1, t)
            s0.theta0_quad.append((t, th0))
            s1.theta1_quad.append((t, th1))
            s1.delta_quad.append((t, dl))
            acc += w * hypot(s0.mu0 + th0, s1.alpha + s1.mu1 + dl + th1)
        etas[m - 1] = acc
        s0.eta += acc
    return etas


def total_bounds(traj: Trajectory, mu0_space: str = "printed") -> EstimateReport:
    """Assemble both total bounds and (when available) the true errors."""
    ctx = _Context(traj, mu0_space)
    grid = traj.grid
    samples = [indicators_at(ctx, n) for n in range(ctx.N + 1)]
    etas = accumulate(ctx, samples)

    prob = traj.problem
    U0, Vm = traj.states[0].U, traj.states[0].V
    ux0 = (lambda x: prob.ux(x, 0.0)) if prob is not None and prob.ux else None
    t_half = -0.5 * grid.tau if grid.steps > 0 else 0.0
    vm_exact = (lambda x: prob.v(x, t_half)) if prob is not None and prob.v else None
    e_pot = pot_error_vs_function(U0, ux0) if ux0 else pot_norm(U0)
    e_kin = l2_error_vs_function(Vm, vm_exact) if vm_exact else pivot_norm(Vm)
    err0 = hypot(e_pot, e_kin)

    true_u = true_v = true_u_l2 = None
    if prob is not None and prob.ux is not None and prob.v is not None:
        eu, ev, el = [], [], []
        for n, st in enumerate(traj.states):
            tn = grid.node(2 * n)
            th = grid.node(2 * n - 1) if n > 0 or grid.steps == 0 else -0.5 * grid.tau
            eu.append(pot_error_vs_function(st.U, lambda x: prob.ux(x, tn)))
            ev.append(l2_error_vs_function(st.V, lambda x: prob.v(x, th)))
            if prob.u is not None:
                el.append(l2_error_vs_function(st.U, lambda x: prob.u(x, tn)))
        true_u, true_v = max(eu), max(ev)
        true_u_l2 = max(el) if el else None

    tail = err0 + 2.0 * float(np.sum(etas))
    return EstimateReport(
        bound_U=max(s.eps0 for s in samples) + tail,
        bound_V=max(s.eps1 for s in samples) + tail,
        initial_energy_error=err0,
        samples=samples,
        etas=etas,
        true_error_U=true_u,
        true_error_V=true_v,
        true_error_U_l2=true_u_l2,
    )
