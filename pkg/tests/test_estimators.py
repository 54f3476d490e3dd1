"""BR estimator, indicators, accumulation, bounds, identity suite."""

import numpy as np
import pytest

from waveapost.estimators import (BrNormFlag, _Context, accumulate,
                                  br_estimator, estimator_functional,
                                  indicators_at, reference_reconstruction,
                                  total_bounds)
from waveapost.fespace import DiscreteField, SpaceFamily, pot_norm
from waveapost.problems import ZERO, get_problem
from waveapost.reconstructions import (identity_residuals,
                                       verify_reconstruction_identities)
from waveapost.stepper import run
from waveapost.timegrid import TimeGrid

PULSE = get_problem("gaussian_pulse")
FAM = SpaceFamily(0.0, 1.0, 10)


def rand_field(space, seed):
    rng = np.random.default_rng(seed)
    return DiscreteField(space, rng.standard_normal(space.n_dofs))


# ------------------------------------------------------------------------- BR

def brute_force_br(w, eval_space, sigma):
    """Independent dense evaluation of the BR estimator (oracle)."""
    # discrete elliptic part against the eval space, by direct integration
    import scipy.sparse.linalg as spla
    n = eval_space.n_dofs
    load = np.zeros(n)
    for i in range(n):
        chi = DiscreteField(eval_space, np.eye(n)[i])
        # a(w, chi) integrated exactly on the merged node set
        cuts = np.unique(np.concatenate([w.space.mesh.nodes,
                                         eval_space.mesh.nodes]))
        mids = 0.5 * (cuts[:-1] + cuts[1:])
        dw = np.diff(w(cuts)) / np.diff(cuts)
        dchi = np.diff(chi(cuts)) / np.diff(cuts)
        c2 = w.space.c_elem[np.searchsorted(
            w.space.mesh.nodes, mids) - 1] ** 2
        load[i] = np.sum(c2 * dw * dchi * np.diff(cuts))
    g = spla.spsolve(eval_space.M_cons.tocsc(), load)
    gv = np.concatenate(([0.0], g, [0.0]))
    ew = eval_space.mesh.widths
    t1 = np.sqrt(sum(ew[k] ** (2 * sigma)
                     * ew[k] * (gv[k] ** 2 + gv[k] * gv[k + 1] + gv[k + 1] ** 2) / 3
                     for k in range(len(ew))))
    flux = w.space.c_elem ** 2 * (np.diff(w.with_bc()) / w.space.mesh.widths)
    t2sq = 0.0
    en = eval_space.mesh.nodes
    for j, x in enumerate(w.space.mesh.nodes[1:-1]):
        jump = flux[j] - flux[j + 1]
        k = int(np.searchsorted(en, x + 1e-12)) - 1
        if abs(en[k] - x) < 1e-9 and 0 < k < len(en) - 1:
            h = 0.5 * (ew[k - 1] + ew[k])    # node shared by two eval elements
        else:
            h = ew[k]
        t2sq += h ** (2 * sigma - 1) * jump ** 2
    return t1 + np.sqrt(t2sq)


def test_br_zero_and_linear():
    space = FAM.uniform_space()
    assert br_estimator(space.zero_field(), space, BrNormFlag.A_NORM, FAM) == 0.0
    assert estimator_functional(space.zero_field(), space,
                                BrNormFlag.PIVOT, FAM) == 0.0


def test_br_hat_oracle():
    space = FAM.uniform_space()
    h = 0.1
    hat = DiscreteField(space, np.eye(space.n_dofs)[4])
    got = br_estimator(hat, space, BrNormFlag.A_NORM, FAM)
    oracle = brute_force_br(hat, space, 1)
    assert got == pytest.approx(oracle, rel=1e-10)
    # the jump part alone: flux jumps (-1/h, 2/h, -1/h) at 3 interior nodes,
    # each weighted by h^{2 sigma - 1} = h
    assert got >= np.sqrt(6.0 / h)


def test_br_random_fields_match_oracle():
    fine = FAM.uniform_space(level=1)
    coarse = FAM.uniform_space()
    for seed in range(3):
        w = rand_field(fine, seed)
        for sigma, flag in ((1, BrNormFlag.A_NORM), (2, BrNormFlag.PIVOT)):
            got = br_estimator(w, coarse, flag, FAM)
            assert got == pytest.approx(brute_force_br(w, coarse, sigma),
                                        rel=1e-9)


def test_br_seminorm_properties():
    space = FAM.uniform_space()
    h_max = space.mesh.widths.max()
    for seed in range(10):
        w = rand_field(space, 100 + seed)
        u = rand_field(space, 300 + seed)
        for flag in (BrNormFlag.A_NORM, BrNormFlag.PIVOT):
            e_w = br_estimator(w, space, flag, FAM)
            e_u = br_estimator(u, space, flag, FAM)
            scaled = DiscreteField(space, -2.5 * w.coeffs)
            assert br_estimator(scaled, space, flag, FAM) == \
                pytest.approx(2.5 * e_w, rel=1e-12)
            both = DiscreteField(space, w.coeffs + u.coeffs)
            assert br_estimator(both, space, flag, FAM) <= \
                e_w + e_u + 1e-12 * (e_w + e_u)
        # one extra h-power per weight exponent
        assert br_estimator(w, space, BrNormFlag.PIVOT, FAM) <= \
            h_max * br_estimator(w, space, BrNormFlag.A_NORM, FAM) * (1 + 1e-12)


def test_reference_reconstruction():
    space = FAM.uniform_space()
    z = reference_reconstruction(space.zero_field(), 2, FAM)
    assert np.all(z.coeffs == 0.0)
    # same space: Galerkin reproduction
    w = rand_field(space, 5)
    same = reference_reconstruction(w, 0, FAM)
    assert np.allclose(same.coeffs, w.coeffs, rtol=1e-10, atol=1e-12)
    # hat function: reliability of the BR bound
    hat = DiscreteField(space, np.eye(space.n_dofs)[4])
    rec = reference_reconstruction(hat, 4, FAM)
    err = pot_norm(FAM.combine([(1.0, rec), (-1.0, hat)]))
    assert err <= br_estimator(hat, space, BrNormFlag.A_NORM, FAM)


def test_br_reliability_random():
    for seed in range(5):
        w = rand_field(FAM.window_space((0.2, 0.5)), 200 + seed)
        rec = reference_reconstruction(w, 4, FAM)
        err = pot_norm(FAM.combine([(1.0, rec), (-1.0, w)]))
        assert err <= br_estimator(w, w.space, BrNormFlag.A_NORM, FAM)


# ------------------------------------------------------------------ indicators

def fixed_run(problem, H=0.25, N=10):
    fam = SpaceFamily.for_domain(-10.0, 10.0, H)
    grid = TimeGrid(N * 0.4 * H, N)
    return run(fam, grid, problem, window0=None)


def moving_run(H=0.3):
    fam = SpaceFamily.for_domain(-10.0, 10.0, H)
    tau = 0.52 * H
    import math
    N = math.ceil(1.0 / tau)
    grid = TimeGrid(N * tau, N)
    return run(fam, grid, PULSE, window0=(-1.9, 3.9))


def test_indicator_structure_fixed_mesh():
    traj = fixed_run(PULSE)
    report = total_bounds(traj)
    for s in report.samples:
        assert s.mu0 == 0.0 and s.mu1 == 0.0 and s.mu2 == 0.0
        assert all(v == 0.0 for _, v in s.delta_quad)   # f = 0
        assert s.alpha0 == 0.0                          # no fine elements
        assert s.alpha == pytest.approx(s.alpha1 + s.mu2)
        for v in (s.mu0, s.mu1, s.mu2, s.alpha0, s.alpha1, s.alpha,
                  s.eps0, s.eps1, s.eta):
            assert v >= 0.0
        assert all(v >= 0.0 for _, v in s.theta0_quad + s.theta1_quad)


def test_indicator_mesh_change_locality():
    traj = moving_run()
    report = total_bounds(traj)
    changed = traj.mesh_change_steps
    for s in report.samples:
        near_change = any(abs(s.n - c) <= 1 for c in changed)
        if not near_change:
            assert s.mu0 == 0.0 and s.mu1 == 0.0 and s.mu2 == 0.0
    # but the change steps themselves see nonzero mesh-change indicators
    assert any(report.samples[c].mu0 > 0 or report.samples[c].mu1 > 0
               or report.samples[c - 1].mu1 > 0 for c in changed)
    # window run has fine elements: LTS perturbation active
    assert any(s.alpha0 > 0 for s in report.samples)


def test_zero_problem_all_zero():
    traj = fixed_run(ZERO)
    report = total_bounds(traj)
    assert report.bound_U == 0.0 and report.bound_V == 0.0
    assert report.true_error_U == 0.0 and report.true_error_V == 0.0
    assert np.all(report.etas == 0.0)


def test_accumulate_quadrature_exactness():
    # constant integrand g over each half-interval -> eta_m = g tau/2
    traj = fixed_run(ZERO, N=4)
    ctx = _Context(traj)
    samples = [indicators_at(ctx, n) for n in range(5)]
    g = 0.7
    for s in samples:
        s.alpha = g  # forces the velocity-residual branch to the constant g
    etas = accumulate(ctx, samples)
    assert np.allclose(etas, g * traj.grid.tau / 2.0, rtol=1e-12)


def test_report_self_consistency():
    traj = moving_run()
    report = total_bounds(traj)
    bu, bv = report.recompute_bounds()
    assert bu == pytest.approx(report.bound_U, rel=1e-12)
    assert bv == pytest.approx(report.bound_V, rel=1e-12)
    assert report.bound_V <= report.bound_U
    assert report.bound_U >= report.max_eps0
    # reliability on this single run
    assert report.bound_U >= report.true_error_U
    assert report.bound_V >= report.true_error_V


def test_mu0_space_override():
    traj = moving_run()
    r2 = total_bounds(traj, mu0_space="shifted")
    assert np.isfinite(r2.bound_U)
    # the alternative target space keeps the bound reliable
    assert r2.bound_U >= r2.true_error_U
    assert r2.bound_V >= r2.true_error_V
    from waveapost.errors import ConfigError
    with pytest.raises(ConfigError):
        total_bounds(traj, mu0_space="bogus")


# -------------------------------------------------------------- identity suite

def test_identities_trivial_sequences():
    grid = TimeGrid(1.0, 8)
    rng = np.random.default_rng(0)
    N = grid.steps
    # constant sequences: every residual-side vanishes
    omega = {2 * n: 1.5 for n in range(N + 1)}
    V = {2 * n - 1: -0.3 for n in range(N + 1)}
    W = {2 * n: 0.8 for n in range(N + 1)}
    res = identity_residuals(omega, V, W, grid, rng)
    # affine-in-n sequences: second differences vanish identically
    omega2 = {2 * n: 0.2 + 0.1 * n for n in range(N + 1)}
    res2 = identity_residuals(omega2, V, W, grid, rng)
    for r in (res, res2):
        assert r["linear_displacement"] < 1e-13
        assert r["linear_velocity"] < 1e-13


def test_identity_suite_random():
    worst = verify_reconstruction_identities(n_trials=100)
    assert max(worst.values()) < 1e-12
    assert set(worst) >= {"linear_displacement", "linear_velocity",
                          "quadratic_displacement", "quadratic_velocity",
                          "theorem_displacement", "theorem_velocity",
                          "staggered_interpolation"}
