"""Named self-checks for the `verify` CLI command.

Each check returns silently on success; the driver prints one PASS/FAIL
line per check and exits nonzero on any failure.
"""

from __future__ import annotations

import traceback

import numpy as np

from .config import RunConfig
from .estimators import (BrNormFlag, br_estimator, reference_reconstruction)
from .fespace import (DiscreteField, SpaceFamily, lts_apply,
                      lts_two_substep_apply, pass_operator, pot_norm)
from .problems import get_problem
from .reconstructions import verify_reconstruction_identities
from .runs import make_grid, run_single
from .stepper import run, shadow_energies, two_step_solve
from .timegrid import TimeGrid, bubble, hat_basis


def check_time_basis():
    grid = TimeGrid(1.0, 10)
    rng = np.random.default_rng(0)
    for t in rng.random(1000):
        total = sum(hat_basis(grid, 2 * n, t) for n in range(grid.steps + 1))
        assert abs(total - 1.0) < 1e-14, f"partition of unity broken at t={t}"
        for tw in range(-1, 2 * grid.steps + 2):
            q = bubble(grid, tw, t)
            assert -1e-15 <= q <= 0.125 + 1e-15, "bubble out of [0, 1/8]"
    assert abs(bubble(TimeGrid(4.0, 4), 0, 0.25) - 0.09375) < 1e-15


def check_assembly():
    fam = SpaceFamily(0.0, 1.0, 10)
    space = fam.uniform_space()
    h = 0.1
    K = space.K.toarray()
    row = K[4, 3:6]
    assert np.allclose(row, [-1 / h, 2 / h, -1 / h], rtol=1e-12), "stiffness row"
    assert np.allclose(space.M_lump[4], h, rtol=1e-12), "lumped mass entry"
    hat = DiscreteField(space, np.eye(space.n_dofs)[4])
    assert abs(pot_norm(hat) - np.sqrt(2 / h)) < 1e-12, "hat potential norm"


def check_scheme_equivalence():
    cfg = RunConfig(use_window=False, move_window=False, H=0.25, T=1.0)
    prob = get_problem("gaussian_pulse")
    fam = SpaceFamily.for_domain(cfg.a, cfg.b, cfg.H)
    grid = TimeGrid(100 * 0.1, 100)
    traj = run(fam, grid, prob, window0=None)
    seq = two_step_solve(fam.uniform_space(), prob, grid)
    scale = max(np.abs(s.U.coeffs).max() for s in traj.states)
    worst = max(np.abs(traj.states[n].U.coeffs - seq[n]).max()
                for n in range(grid.steps + 1))
    assert worst < 1e-11 * max(scale, 1.0), f"system vs two-step: {worst:.3e}"


def check_lts_substeps():
    # all elements fine: window over all but the last macro cell makes the
    # remaining coarse cell a neighbor of a fine one
    fam = SpaceFamily(0.0, 1.0, 8)
    space = fam.space_for((1,) * 7 + (0,))
    assert space.fine_dof_mask.all()
    rng = np.random.default_rng(7)
    tau = 0.05
    for _ in range(10):
        w = DiscreteField(space, rng.standard_normal(space.n_dofs))
        a = lts_apply(w, tau)
        b = lts_two_substep_apply(w, tau)
        scale = max(np.abs(a.coeffs).max(), 1.0)
        assert np.abs(a.coeffs - b.coeffs).max() < 1e-12 * scale, \
            "LTS operator vs two-substep expansion"


def check_reconstruction_identities():
    verify_reconstruction_identities()


def check_br_reliability():
    fam = SpaceFamily(-2.0, 2.0, 16)
    space = fam.window_space((-0.5, 0.5))
    rng = np.random.default_rng(42)
    for _ in range(5):
        w = DiscreteField(space, rng.standard_normal(space.n_dofs))
        rec = reference_reconstruction(w, 4, fam)
        diff = fam.combine([(1.0, rec), (-1.0, w)])
        err = pot_norm(diff)
        est = br_estimator(w, space, BrNormFlag.A_NORM, fam)
        assert err <= est, f"BR reliability violated: {err:.3e} > {est:.3e}"


def check_energy_drift():
    cfg = RunConfig(use_window=False, move_window=False, H=0.25)
    prob = get_problem("gaussian_pulse")
    fam = SpaceFamily.for_domain(cfg.a, cfg.b, cfg.H)
    grid = make_grid(1.0, cfg.cfl * cfg.H)
    traj = run(fam, grid, prob, window0=None)
    E = shadow_energies(traj)
    assert np.abs(E - E[0]).max() < 1e-10 * abs(E[0]), "shadow energy drift"


CHECKS = [
    ("time-basis properties", check_time_basis),
    ("assembly oracles", check_assembly),
    ("scheme-form equivalence", check_scheme_equivalence),
    ("LTS-substep equivalence", check_lts_substeps),
    ("reconstruction identity suite", check_reconstruction_identities),
    ("BR reliability spot checks", check_br_reliability),
    ("leapfrog energy conservation", check_energy_drift),
]


def cmd_verify() -> int:
    failed = 0
    for name, fn in CHECKS:
        try:
            fn()
        except Exception as exc:  # report and continue with the next check
            failed += 1
            print(f"FAIL {name}: {exc}")
            traceback.print_exc()
        else:
            print(f"PASS {name}")
    return 1 if failed else 0
