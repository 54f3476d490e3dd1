"""Assembly, projections, operators, and norms on P1 spaces."""

import numpy as np
import pytest

from waveapost.errors import ConfigError, DataError
from waveapost.fespace import (DiscreteField, SpaceFamily, elliptic_apply,
                               energy_norm, fine_interpolator, fine_l2_project,
                               l2_error_vs_function, l2_project, lts_apply,
                               lts_two_substep_apply, pass_operator,
                               pivot_norm, pot_error_vs_function, pot_norm,
                               source_approx)
from waveapost.timegrid import TimeGrid

FAM = SpaceFamily(0.0, 1.0, 10)          # uniform h = 0.1 family on (0, 1)


def rand_field(space, seed=0):
    rng = np.random.default_rng(seed)
    return DiscreteField(space, rng.standard_normal(space.n_dofs))


def test_assembly_oracles():
    space = FAM.uniform_space()
    h = 0.1
    K = space.K.toarray()
    assert np.allclose(K[4, 3:6], [-1 / h, 2 / h, -1 / h])
    assert space.M_lump[4] == pytest.approx(h)
    Mrow = space.M_cons[4].toarray().ravel()[3:6]
    assert np.allclose(Mrow, [h / 6, 4 * h / 6, h / 6])
    # row sums of consistent mass equal the lumped entries
    assert np.allclose(np.asarray(space.M_cons.sum(axis=1)).ravel(), space.M_lump)
    # c = 2 quadruples K, leaves M alone
    fam2 = SpaceFamily(0.0, 1.0, 10, wave_speed=2.0)
    s2 = fam2.uniform_space()
    assert np.allclose(s2.K.toarray(), 4.0 * K)
    assert np.allclose(s2.M_lump, space.M_lump)
    with pytest.raises(DataError):
        SpaceFamily(0.0, 1.0, 10, wave_speed=-1.0).uniform_space()
    with pytest.raises(ConfigError):
        from waveapost.fespace import FeSpace
        FeSpace(space.mesh, degree=2)


def test_bilinear_symmetry_and_coercivity():
    space = FAM.uniform_space()
    rng = np.random.default_rng(1)
    for _ in range(20):
        p = rng.standard_normal(space.n_dofs)
        q = rng.standard_normal(space.n_dofs)
        apq = p @ (space.K @ q)
        aqp = q @ (space.K @ p)
        assert abs(apq - aqp) < 1e-13 * np.linalg.norm(p) * np.linalg.norm(q) / 0.1
        f = DiscreteField(space, p)
        assert p @ (space.K @ p) == pytest.approx(pot_norm(f) ** 2, rel=1e-12)


def test_l2_project():
    space = FAM.uniform_space()
    # reproduction of a member of the space (consistent mass)
    g = rand_field(space, 2)
    back = l2_project(space, g, mode="consistent")
    assert np.allclose(back.coeffs, g.coeffs, rtol=1e-12, atol=1e-13)
    # zero data
    z = l2_project(space, lambda x: np.zeros_like(x))
    assert np.all(z.coeffs == 0.0)
    # g(x) = x: nodal values near x_m away from the Dirichlet boundary layer
    p = l2_project(space, lambda x: x, mode="consistent")
    mid = slice(1, 5)
    assert np.allclose(p.coeffs[mid], space.dof_coords[mid], atol=2e-3)
    # Galerkin orthogonality of the consistent projection
    load_g = space.M_cons @ back.coeffs
    from waveapost.fespace import l2_load
    assert np.allclose(load_g, l2_load(space, g), rtol=1e-11)


def test_pass_operator():
    coarse = FAM.uniform_space()
    fine = FAM.uniform_space(level=1)
    g = rand_field(coarse, 3)
    up = pass_operator(g, fine)
    # refinement reproduces the function, and going back is exact
    xs = np.linspace(0.0, 1.0, 101)
    assert np.allclose(up(xs), g(xs), atol=1e-14)
    back = pass_operator(up, coarse)
    assert np.allclose(back.coeffs, g.coeffs, atol=1e-14)
    # identity on the same space
    same = pass_operator(g, coarse)
    assert np.all(same.coeffs == g.coeffs)
    # coarsening a hat peaked at a removed node averages the neighbors
    hat = DiscreteField(fine, np.eye(fine.n_dofs)[4])  # node not in coarse mesh?
    down = pass_operator(hat, coarse)
    x_removed = fine.dof_coords[4]
    expected = 0.5 * (down(x_removed - 0.05) + down(x_removed + 0.05))
    assert down(x_removed) == pytest.approx(expected)


def test_fine_interpolator_and_projector():
    win = FAM.space_for((1, 1, 0, 0, 0, 0, 0, 0, 0, 0))
    g = rand_field(win, 4)
    masked = fine_interpolator(g)
    assert np.allclose(masked.coeffs[win.fine_dof_mask],
                       g.coeffs[win.fine_dof_mask])
    assert np.all(masked.coeffs[~win.fine_dof_mask] == 0.0)
    # all-coarse space -> zero field
    uni = FAM.uniform_space()
    assert np.all(fine_interpolator(rand_field(uni)).coeffs == 0.0)
    # fine L2 projector reproduces fine-supported members
    pf = fine_l2_project(win, masked)
    inner_fine = win.fine_dof_mask.copy()
    assert np.allclose(pf.coeffs[inner_fine], masked.coeffs[inner_fine], atol=1e-10)


def test_elliptic_apply():
    space = FAM.uniform_space()
    h = 0.1
    z = elliptic_apply(space.zero_field())
    assert np.all(z.coeffs == 0.0)
    hat = DiscreteField(space, np.eye(space.n_dofs)[4])
    a = elliptic_apply(hat, mode="lumped")
    expect = np.zeros(space.n_dofs)
    expect[3:6] = np.array([-1.0, 2.0, -1.0]) / h ** 2
    assert np.allclose(a.coeffs, expect)
    # defining identity a(phi, chi) = (A phi, chi)_lumped
    rng = np.random.default_rng(5)
    for _ in range(20):
        p = DiscreteField(space, rng.standard_normal(space.n_dofs))
        q = rng.standard_normal(space.n_dofs)
        lhs = p.coeffs @ (space.K @ q)
        rhs = elliptic_apply(p, mode="lumped").coeffs @ (space.M_lump * q)
        assert lhs == pytest.approx(rhs, rel=1e-12)


def test_lts_operator():
    uni = FAM.uniform_space()
    g = rand_field(uni, 6)
    # no fine elements -> identical to A; tau = 0 -> identical to A
    assert np.allclose(lts_apply(g, 0.3).coeffs, elliptic_apply(g).coeffs)
    win = FAM.space_for((1, 1, 0, 0, 0, 0, 0, 0, 0, 0))
    gw = rand_field(win, 7)
    assert np.allclose(lts_apply(gw, 0.0).coeffs, elliptic_apply(gw).coeffs)
    # all-fine: closed form equals two explicit tau/2 substeps
    allfine = FAM.space_for((1,) * 9 + (0,))
    assert allfine.fine_dof_mask.all()
    gf = rand_field(allfine, 8)
    tau = 0.04
    a = lts_apply(gf, tau)
    b = lts_two_substep_apply(gf, tau)
    scale = np.abs(a.coeffs).max()
    assert np.abs(a.coeffs - b.coeffs).max() < 1e-12 * scale
    # and the closed form really is A - (tau^2/16) A^2
    direct = elliptic_apply(gf).coeffs - tau ** 2 / 16.0 * \
        elliptic_apply(elliptic_apply(gf)).coeffs
    assert np.allclose(a.coeffs, direct, rtol=1e-12)


def test_source_approx():
    space = FAM.uniform_space()
    grid = TimeGrid(1.0, 10)
    z = source_approx(space, None, 3, grid)
    assert np.all(z.coeffs == 0.0)
    # constant-in-time source: both branches agree
    f = lambda x, t: np.sin(np.pi * x) + 0.0 * t
    c1 = source_approx(space, f, 3, grid, time_continuous=True)
    c2 = source_approx(space, f, 3, grid, time_continuous=False)
    assert np.allclose(c1.coeffs, c2.coeffs, rtol=1e-12)
    # f(x, t) = t at t_n = 0.5 projects the constant 0.5
    ft = lambda x, t: np.full_like(x, t)
    p = source_approx(space, ft, 5, grid, time_continuous=True)
    ref = l2_project(space, lambda x: np.full_like(x, 0.5))
    assert np.allclose(p.coeffs, ref.coeffs, rtol=1e-12)


def test_norms():
    # constant slope s on (0, 1): pot norm |s|
    space = FAM.uniform_space()
    # hat at node j: pot norm sqrt(2/h)
    hat = DiscreteField(space, np.eye(space.n_dofs)[4])
    assert pot_norm(hat) == pytest.approx(np.sqrt(2.0 / 0.1))
    # pivot norm of the hat: sqrt(2h/3)
    assert pivot_norm(hat) == pytest.approx(np.sqrt(2.0 * 0.1 / 3.0))
    # energy norm of (0, g) is the L2 norm of g
    g = rand_field(space, 9)
    assert energy_norm(space.zero_field(), g) == pytest.approx(pivot_norm(g))
    # quadrature errors vanish for representable functions
    assert l2_error_vs_function(g, g) < 1e-13
    # nodal interpolant of x(1-x): slope error O(h |u''|)
    para = DiscreteField(space, space.dof_coords * (1.0 - space.dof_coords))
    assert pot_error_vs_function(para, lambda x: 1.0 - 2.0 * x) < 0.1


def test_combine_and_family_cache():
    coarse = FAM.uniform_space()
    fine = FAM.uniform_space(level=1)
    assert FAM.uniform_space() is coarse  # cached
    g1, g2 = rand_field(coarse, 10), rand_field(fine, 11)
    combo = FAM.combine([(2.0, g1), (-1.0, g2)])
    xs = np.linspace(0, 1, 57)
    assert np.allclose(combo(xs), 2.0 * g1(xs) - g2(xs), atol=1e-13)
    assert combo.space.mesh == fine.mesh
    assert FAM.refinement(coarse, fine) is fine
    assert FAM.coarsening(coarse, fine) is coarse
