"""Leapfrog integrator with local time-stepping on time-varying FE spaces.

System (one-step) form on the staggered pair (U^n, V^{n-1/2}):

    U^0      = P_0 u_0
    V^{-1/2} = P_0 v_0 - (F^0 - A~_0 U^0) tau/2
    V^{n+1/2} = Pi_{n+1} [ V^{n-1/2} + (F^n - A~_n U^n) tau ]
    U^{n+1}   = Pi_{n+1} U^n + V^{n+1/2} tau

with Pi the nodal pass operator and A~ the LTS-perturbed elliptic
operator.  On a fixed mesh this is algebraically equivalent to the
two-step form  U^{n+1} = 2U^n - U^{n-1} + (F^n - A~ U^n) tau^2.

Stability: cfl_estimate() returns tau_max = 2/sqrt(lambda_max(M^{-1}K))
via power iteration; lts_stability_radius() bounds the spectral radius of
the one-step map through the eigenvalue range of the symmetrized LTS
operator  B - (tau^2/16) B Pi_f B  with  B = M^{-1/2} K M^{-1/2}
(lumped M is diagonal and commutes with the diagonal mask Pi_f, so this
similarity transform of A~ is symmetric).
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np
import scipy.sparse as sp

from .errors import NumericalAbort
from .fespace import (DiscreteField, FeSpace, SpaceFamily, l2_project,
                      lts_apply, pass_operator, source_approx)
from .mesh import build_window_mesh
from .timegrid import TimeGrid


@dataclass
class WaveState:
    """Staggered solution pair at step n: U at t_n, V at t_{n-1/2}."""

    n: int
    U: DiscreteField
    V: DiscreteField

    @property
    def space(self) -> FeSpace:
        return self.U.space


@dataclass
class Trajectory:
    """Full recorded run: one WaveState and source per step.

    The estimator layer needs (n-1, n, n+1) data everywhere, hence the
    complete record; 1D runs are desk-scale.
    """

    grid: TimeGrid
    states: list[WaveState]
    sources: list[DiscreteField]
    mesh_change_steps: set[int] = dc_field(default_factory=set)
    family: SpaceFamily | None = None
    problem: object = None

    def space(self, n: int) -> FeSpace:
        return self.states[n].space


def initialize(space0: FeSpace, u0, v0, f, grid: TimeGrid) -> WaveState:
    """Initial state; the velocity shift makes the two discrete half-step
    velocities average to the projected initial velocity."""
    U0 = l2_project(space0, u0) if u0 is not None else space0.zero_field()
    Pv0 = l2_project(space0, v0) if v0 is not None else space0.zero_field()
    F0 = source_approx(space0, f, 0, grid) if grid.steps > 0 else space0.zero_field()
    if grid.steps == 0:
        return WaveState(0, U0, Pv0)
    rhs = F0 - lts_apply(U0, grid.tau)
    Vm = DiscreteField(space0, Pv0.coeffs - 0.5 * grid.tau * rhs.coeffs)
    return WaveState(0, U0, Vm)


def step(state: WaveState, next_space: FeSpace, f_field: DiscreteField,
         grid: TimeGrid) -> WaveState:
    """One leapfrog-LTS step onto next_space (may equal the current space)."""
    tau = grid.tau
    rhs = f_field - lts_apply(state.U, tau)
    v_new = DiscreteField(state.space, state.V.coeffs + tau * rhs.coeffs)
    V1 = pass_operator(v_new, next_space)
    U1 = DiscreteField(next_space,
                       pass_operator(state.U, next_space).coeffs + tau * V1.coeffs)
    return WaveState(state.n + 1, U1, V1)


# ------------------------------------------------------------------ stability

def cfl_estimate(space: FeSpace, tol: float = 1e-6, max_iter: int = 10000) -> float:
    """tau_max = 2/sqrt(lambda_max) of K x = lambda M_lumped x (power iteration)."""
    lam = _power_lambda_max(_sym_operator(space), space.n_dofs, tol, max_iter)
    return 2.0 / np.sqrt(lam)


def _sym_operator(space: FeSpace) -> sp.csr_matrix:
    d = 1.0 / np.sqrt(space.M_lump)
    D = sp.diags(d)
    return (D @ space.K @ D).tocsr()


def _power_lambda_max(B, n: int, tol: float, max_iter: int) -> float:
    rng = np.random.default_rng(12345)
    x = rng.standard_normal(n)
    x /= np.linalg.norm(x)
    lam = 0.0
    for _ in range(max_iter):
        y = B @ x
        ny = np.linalg.norm(y)
        if ny == 0.0:
            return 0.0
        x_new = y / ny
        lam_new = float(x_new @ (B @ x_new))
        if abs(lam_new - lam) <= tol * max(abs(lam_new), 1.0):
            return lam_new
        lam, x = lam_new, x_new
    raise NumericalAbort("power iteration for the CFL bound did not converge")


def lts_stability_radius(space: FeSpace, tau: float) -> float:
    """Spectral radius of the leapfrog one-step map with the LTS operator.

    For a (real) eigenvalue lam of the symmetrized A~, the amplification
    roots solve z^2 - (2 - tau^2 lam) z + 1 = 0; |z| <= 1 exactly when
    0 <= tau^2 lam <= 4.
    """
    B = _sym_operator(space)
    mask = sp.diags(space.fine_dof_mask.astype(float))
    Bt = (B - (tau * tau / 16.0) * (B @ mask @ B)).tocsr()
    try:
        lam_max = _power_lambda_max(Bt, space.n_dofs, 1e-8, 10000)
        shift = max(lam_max, 1.0)  # smallest eigenvalue via a spectral shift
        lam_min = shift - _power_lambda_max(
            (sp.identity(space.n_dofs) * shift - Bt).tocsr(),
            space.n_dofs, 1e-8, 10000)
    except NumericalAbort:
        lams = np.linalg.eigvalsh(Bt.toarray())
        lam_max, lam_min = float(lams[-1]), float(lams[0])

    def rho(lam):
        a = 2.0 - tau * tau * lam  # trace of the one-step companion map
        if abs(a) <= 2.0 * (1.0 + 1e-10):  # marginal/roundoff band counts as stable
            return 1.0
        h = abs(a) / 2.0
        return h + np.sqrt(h * h - 1.0)

    return max(rho(lam_max), rho(lam_min))


# ------------------------------------------------------------------------ run

def run(family: SpaceFamily, grid: TimeGrid, problem, window0=None,
        move_window: bool = True, stability_check: bool = True) -> Trajectory:
    """Integrate to T on a (possibly) moving-window mesh family.

    The fine window advances with unit wave speed: whenever the elapsed time
    since the last mesh change exceeds the coarse size H, the window shifts
    right by H (one macro cell) and the mesh is rebuilt.
    """
    H = family.macro_h
    window = None if window0 is None else (float(window0[0]), float(window0[1]))
    space = family.window_space(window) if window else family.uniform_space()
    state = initialize(space, problem.u0, problem.v0, problem.f, grid)
    states = [state]
    sources = [source_approx(space, problem.f, 0, grid)] if grid.steps > 0 \
        else [space.zero_field()]
    changes: set[int] = set()

    checked: set[tuple] = set()

    def check(sp_now: FeSpace):
        key = sp_now.mesh.levels
        if key in checked:
            return
        checked.add(key)
        rho = lts_stability_radius(sp_now, grid.tau)
        if rho > 1.0 + 1e-8:
            raise NumericalAbort(
                f"unstable time step: one-step spectral radius {rho:.6g} > 1 "
                f"(tau = {grid.tau:.6g}, tau_max = {cfl_estimate(sp_now):.6g})")

    if stability_check and grid.steps > 0:
        check(space)

    last_change_t = 0.0
    for n in range(grid.steps):
        t_next = grid.node(2 * (n + 1))
        next_space = state.space
        if window is not None and move_window and t_next - last_change_t > H:
            shift = H
            new_window = (min(window[0] + shift, family.b),
                          min(window[1] + shift, family.b))
            new_mesh = build_window_mesh(family.a, family.b, H, new_window)
            if new_mesh != state.space.mesh:
                next_space = family.space_for(new_mesh)
                window = new_window
                changes.add(n + 1)
            last_change_t = t_next
            if stability_check:
                check(next_space)
        f_field = sources[n]
        state = step(state, next_space, f_field, grid)
        states.append(state)
        sources.append(source_approx(state.space, problem.f, n + 1, grid))
    return Trajectory(grid, states, sources, changes, family, problem)


def two_step_solve(space: FeSpace, problem, grid: TimeGrid) -> list[np.ndarray]:
    """Two-step leapfrog U-sequence on a fixed mesh (equivalence oracle)."""
    tau = grid.tau
    U0 = l2_project(space, problem.u0) if problem.u0 is not None else space.zero_field()
    Pv0 = l2_project(space, problem.v0) if problem.v0 is not None else space.zero_field()
    seq = [U0.coeffs.copy()]
    if grid.steps == 0:
        return seq
    F0 = source_approx(space, problem.f, 0, grid)
    rhs0 = F0.coeffs - lts_apply(U0, tau).coeffs
    U1 = U0.coeffs + tau * Pv0.coeffs + 0.5 * tau * tau * rhs0
    seq.append(U1)
    for n in range(1, grid.steps):
        Un = DiscreteField(space, seq[n])
        Fn = source_approx(space, problem.f, n, grid)
        rhs = Fn.coeffs - lts_apply(Un, tau).coeffs
        seq.append(2.0 * seq[n] - seq[n - 1] + tau * tau * rhs)
    return seq


def shadow_energies(traj: Trajectory) -> np.ndarray:
    """Leapfrog shadow energy 1/2 ||d+ U^n||^2 + 1/2 a(U^n, U^{n+1}).

    The kinetic part uses the scheme's (lumped) mass; on a fixed mesh with
    f = 0 this quantity is conserved exactly in exact arithmetic.
    """
    tau = traj.grid.tau
    out = []
    for n in range(len(traj.states) - 1):
        s0, s1 = traj.states[n], traj.states[n + 1]
        u0 = pass_operator(s0.U, s1.space).coeffs
        d = (s1.U.coeffs - u0) / tau
        sp_ = s1.space
        kin = 0.5 * float(d @ (sp_.M_lump * d))
        pot = 0.5 * float(u0 @ (sp_.K @ s1.U.coeffs))
        out.append(kin + pot)
    return np.array(out)


def discrete_energies(traj: Trajectory) -> np.ndarray:
    """Plain discrete energy 1/2 ||V^{n-1/2}||^2 + 1/2 a(U^n, U^n) per step."""
    out = []
    for s in traj.states:
        sp_ = s.space
        kin = 0.5 * float(s.V.coeffs @ (sp_.M_lump * s.V.coeffs))
        pot = 0.5 * float(s.U.coeffs @ (sp_.K @ s.U.coeffs))
        out.append(kin + pot)
    return np.array(out)
