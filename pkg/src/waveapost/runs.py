"""Experiment driver: single runs, convergence sweeps, CSV emission.

Reproduces the Gaussian-pulse benchmark: unit-speed pulse on (-10, 10),
coarse mesh size H with a once-bisected fine window that follows the pulse
(the window advances by one macro cell whenever more than H time units
have elapsed since the last mesh change), tau ~ 0.52 H, T = 1.

CSV conventions: '#'-prefixed header line, 17-significant-digit floats,
deterministic content (no timestamps).
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from math import ceil

import numpy as np
from scipy.integrate import quad

from .config import RunConfig
from .errors import ConfigError
from .estimators import EstimateReport, total_bounds
from .fespace import SpaceFamily
from .problems import Problem, get_problem
from .stepper import Trajectory, run
from .timegrid import TimeGrid


def _fmt(x) -> str:
    return f"{float(x):.17g}"


def make_grid(T: float, tau_target: float) -> TimeGrid:
    """Largest uniform grid with tau <= tau_target and N tau = T exactly."""
    if T == 0.0:
        return TimeGrid(0.0, 0)
    return TimeGrid(T, max(1, ceil(T / tau_target - 1e-12)))


def run_single(cfg: RunConfig) -> tuple[Trajectory, EstimateReport]:
    """One full run plus its error estimate."""
    problem = get_problem(cfg.problem)
    family = SpaceFamily.for_domain(cfg.a, cfg.b, cfg.H, theta=cfg.theta,
                                    mass_mode=cfg.mass)
    grid = make_grid(cfg.T, cfg.cfl * cfg.H)
    traj = run(family, grid, problem, window0=cfg.window0,
               move_window=cfg.move_window, stability_check=cfg.stability_check)
    report = total_bounds(traj, mu0_space=cfg.mu0_space)
    return traj, report


# ----------------------------------------------------------------- csv output

def write_indicators_csv(path: str, traj: Trajectory, report: EstimateReport):
    """One row per step: scalar indicators plus time-quadrature means."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# n t eps0 eps1 theta0_bar theta1_bar alpha mu0 mu1 mu2 "
                 "delta_bar eta\n")
        for s in report.samples:
            t = traj.grid.node(2 * s.n)
            row = [s.n, t, s.eps0, s.eps1, s.mean(s.theta0_quad),
                   s.mean(s.theta1_quad), s.alpha, s.mu0, s.mu1, s.mu2,
                   s.mean(s.delta_quad), s.eta]
            fh.write(" ".join([str(s.n)] + [_fmt(v) for v in row[1:]]) + "\n")


def write_mesh_csv(path: str, traj: Trajectory):
    """Space-time node list: one 't x' row per mesh node per step."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# t x\n")
        for n, st in enumerate(traj.states):
            t = traj.grid.node(2 * n)
            for x in st.space.mesh.nodes:
                fh.write(f"{_fmt(t)} {_fmt(x)}\n")


def write_solution_csv(path: str, traj: Trajectory):
    """Nodal solution snapshots at t = 0 and t = T."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# t x u\n")
        for st in (traj.states[0], traj.states[-1]):
            t = traj.grid.node(2 * st.n)
            for x, u in zip(st.space.mesh.nodes, st.U.with_bc()):
                fh.write(f"{_fmt(t)} {_fmt(x)} {_fmt(u)}\n")


# ---------------------------------------------------------------- convergence

def _exact_norms(problem: Problem, a: float, b: float) -> tuple[float, float]:
    """Potential and L2 norms of the exact initial data (for relative errors)."""
    if problem.ux is None or problem.u is None:
        return 1.0, 1.0
    pot2, _ = quad(lambda x: problem.ux(x, 0.0) ** 2, a, b, limit=200)
    l22, _ = quad(lambda x: problem.u(x, 0.0) ** 2, a, b, limit=200)
    return max(np.sqrt(pot2), 1e-300), max(np.sqrt(l22), 1e-300)


@dataclass
class ConvergenceRow:
    H: float
    err_energy_rel: float
    err_l2_rel: float
    bound_U: float
    bound_V: float
    true_error_U: float
    true_error_V: float


@dataclass
class RunReport:
    """Emitted artifacts of a run or sweep."""

    csv_paths: list
    rows: list            # ConvergenceRow per H (sweeps only)
    slopes: dict          # least-squares log-log slopes per column


def fit_slope(hs, vals) -> float:
    """Least-squares slope of log(val) against log(h)."""
    hs, vals = np.asarray(hs, float), np.asarray(vals, float)
    keep = vals > 0
    if keep.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(hs[keep]), np.log(vals[keep]), 1)[0])


def convergence_rows(cfg: RunConfig, h_list) -> list[ConvergenceRow]:
    problem = get_problem(cfg.problem)
    pot0, l20 = _exact_norms(problem, cfg.a, cfg.b)
    rows = []
    for H in h_list:
        sub = RunConfig(**{**cfg.__dict__, "H": float(H)})
        _, rep = run_single(sub)
        rows.append(ConvergenceRow(
            H=float(H),
            err_energy_rel=(rep.true_error_U or 0.0) / pot0,
            err_l2_rel=(rep.true_error_U_l2 or 0.0) / l20,
            bound_U=rep.bound_U, bound_V=rep.bound_V,
            true_error_U=rep.true_error_U or 0.0,
            true_error_V=rep.true_error_V or 0.0))
    return rows


def sweep_slopes(rows) -> dict:
    hs = [r.H for r in rows]
    return {
        "energy": fit_slope(hs, [r.err_energy_rel for r in rows]),
        "l2": fit_slope(hs, [r.err_l2_rel for r in rows]),
        "bound_U": fit_slope(hs, [r.bound_U for r in rows]),
        "bound_V": fit_slope(hs, [r.bound_V for r in rows]),
    }


def write_convergence_csv(path: str, rows, slopes):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# H err_energy_rel err_l2_rel bound_U bound_V "
                 "true_error_U true_error_V\n")
        for r in rows:
            fh.write(" ".join(_fmt(v) for v in (
                r.H, r.err_energy_rel, r.err_l2_rel, r.bound_U, r.bound_V,
                r.true_error_U, r.true_error_V)) + "\n")
        fh.write("# slopes: " + " ".join(
            f"{k}={slopes[k]:.6g}" for k in sorted(slopes)) + "\n")


# ------------------------------------------------------------------- commands

def cmd_run(cfg: RunConfig) -> RunReport:
    traj, report = run_single(cfg)
    os.makedirs(cfg.out, exist_ok=True)
    paths = [os.path.join(cfg.out, name)
             for name in ("indicators.csv", "mesh.csv", "solution.csv")]
    write_indicators_csv(paths[0], traj, report)
    write_mesh_csv(paths[1], traj)
    write_solution_csv(paths[2], traj)
    row = ConvergenceRow(cfg.H, 0.0, 0.0, report.bound_U, report.bound_V,
                         report.true_error_U or 0.0, report.true_error_V or 0.0)
    return RunReport(csv_paths=paths, rows=[row], slopes={})


def cmd_convergence(cfg: RunConfig, h_list=None) -> RunReport:
    h_list = list(h_list if h_list is not None else cfg.h_sweep)
    if len(h_list) < 3:
        raise ConfigError("a convergence sweep needs at least 3 mesh sizes")
    for h0, h1 in zip(h_list, h_list[1:]):
        if not np.isclose(h1, 0.5 * h0, rtol=1e-9):
            raise ConfigError("sweep mesh sizes must halve at each step")
    rows = convergence_rows(cfg, h_list)
    slopes = sweep_slopes(rows)
    os.makedirs(cfg.out, exist_ok=True)
    path = os.path.join(cfg.out, "convergence.csv")
    write_convergence_csv(path, rows, slopes)
    return RunReport(csv_paths=[path], rows=rows, slopes=slopes)
