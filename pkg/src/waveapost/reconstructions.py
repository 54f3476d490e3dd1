"""Time-reconstruction residual identities, verified on node sequences.

The estimator's theta indicators rest on closed-form expressions for the
differences between three time reconstructions of the staggered node data
(omega^n at integer nodes, V^{n-1/2} at half-integer nodes, W^n playing
the elliptic image of omega^n):

* piecewise linear interpolants on the native grids (bar),
* re-interpolations onto the opposite grid (hat),
* quadratic reconstructions (breve) built by integrating the opposite-grid
  interpolant and fixing the linear correction by nodal interpolation.

All identities are algebraic in the node values, so they are checked here
for arbitrary random scalar sequences:

    hat - bar  =  (tau^2/2) (second-difference terms) x hat basis
    breve - bar = +- tau^2 (centered-difference term) x quadratic bubble
    hat - breve = the difference of the two right-hand sides

(the displacement identities live on primal intervals, the velocity
identities on staggered intervals).
"""

from __future__ import annotations

import numpy as np

from .timegrid import (TimeGrid, bubble, cent_diff, hat_basis,
                       pw_linear_interp, second_diff)


def _hat_sequences(omega, V, W, grid):
    """Opposite-grid interpolants: hat values are two-node averages."""
    N = grid.steps
    omega_hat = {2 * n - 1: 0.5 * (omega[2 * n - 2] + omega[2 * n])
                 for n in range(1, N + 1)}
    V_hat = {2 * n: 0.5 * (V[2 * n - 1] + V[2 * n + 1])
             for n in range(0, N)}
    W_hat = {2 * n - 1: 0.5 * (W[2 * n - 2] + W[2 * n])
             for n in range(1, N + 1)}
    return omega_hat, V_hat, W_hat


def _int_linear(v_lo, v_hi, x):
    """Integral over [0, x] (x in [0,1]) of the linear function with values
    v_lo at 0 and v_hi at 1, on a unit interval (multiply by tau outside)."""
    return v_lo * (x - 0.5 * x * x) + v_hi * (0.5 * x * x)


def omega_breve(omega, V, V_hat, grid: TimeGrid, n: int, t: float) -> float:
    """Quadratic displacement reconstruction on I_n = [t_{n-1}, t_n]."""
    tau = grid.tau
    Qn = (omega[2 * n] - omega[2 * n - 2]) / tau \
        - 0.25 * (V[2 * n - 3] + 2.0 * V[2 * n - 1] + V[2 * n + 1])
    x = (t - grid.node(2 * n - 2)) / tau
    integral = tau * _int_linear(V_hat[2 * n - 2], V_hat[2 * n], x)
    return omega[2 * n - 2] + integral + (t - grid.node(2 * n - 2)) * Qn


def v_breve(V, W, W_hat, grid: TimeGrid, n: int, t: float) -> float:
    """Quadratic velocity reconstruction on [t_{n-1/2}, t_{n+1/2}]."""
    tau = grid.tau
    Gn = (V[2 * n + 1] - V[2 * n - 1]) / tau \
        + 0.25 * (W[2 * n - 2] + 2.0 * W[2 * n] + W[2 * n + 2])
    x = (t - grid.node(2 * n - 1)) / tau
    integral = tau * _int_linear(W_hat[2 * n - 1], W_hat[2 * n + 1], x)
    return V[2 * n - 1] - integral + (t - grid.node(2 * n - 1)) * Gn


def identity_residuals(omega, V, W, grid: TimeGrid, rng) -> dict[str, float]:
    """Max absolute residual of every identity for one sequence triple,
    at `rng`-drawn times (10 per admissible interval), normalized by the
    sequence magnitude."""
    tau = grid.tau
    N = grid.steps
    omega_hat, V_hat, W_hat = _hat_sequences(omega, V, W, grid)
    scale = max(1.0, max(abs(v) for s in (omega, V, W) for v in s.values()))
    res = {"staggered_interpolation": 0.0,
           "linear_displacement": 0.0, "linear_velocity": 0.0,
           "quadratic_displacement": 0.0, "quadratic_velocity": 0.0,
           "theorem_displacement": 0.0, "theorem_velocity": 0.0}

    # hat values are averages of the two bracketing nodes (staggered
    # interpolation identity), here checked through pw_linear_interp
    for n in range(1, N):
        lhs = pw_linear_interp(omega, grid, grid.node(2 * n - 1))
        res["staggered_interpolation"] = max(
            res["staggered_interpolation"],
            abs(lhs - omega_hat[2 * n - 1]) / scale)
        lhs = pw_linear_interp(V, grid, grid.node(2 * n))
        res["staggered_interpolation"] = max(
            res["staggered_interpolation"], abs(lhs - V_hat[2 * n]) / scale)

    # displacement identities on primal intervals I_n, n in [2, N-1]
    for n in range(2, N):
        t_lo, t_hi = grid.node(2 * n - 2), grid.node(2 * n)
        for t in t_lo + (t_hi - t_lo) * rng.random(10):
            bar = pw_linear_interp(omega, grid, t)
            hat = pw_linear_interp(omega_hat, grid, t)
            breve = omega_breve(omega, V, V_hat, grid, n, t)
            lin_rhs = 0.5 * tau * tau * (
                second_diff(omega, 2 * n - 2, tau) * hat_basis(grid, 2 * n - 3, t)
                + second_diff(omega, 2 * n, tau) * hat_basis(grid, 2 * n + 1, t))
            quad_rhs = -tau * tau * cent_diff(V, 2 * n - 1, tau) \
                * bubble(grid, 2 * n - 1, t)
            res["linear_displacement"] = max(
                res["linear_displacement"], abs(hat - bar - lin_rhs) / scale)
            res["quadratic_displacement"] = max(
                res["quadratic_displacement"], abs(breve - bar - quad_rhs) / scale)
            res["theorem_displacement"] = max(
                res["theorem_displacement"],
                abs(hat - breve - (lin_rhs - quad_rhs)) / scale)

    # velocity identities on staggered intervals, n in [1, N-2]
    for n in range(1, N - 1):
        t_lo, t_hi = grid.node(2 * n - 1), grid.node(2 * n + 1)
        for t in t_lo + (t_hi - t_lo) * rng.random(10):
            bar = pw_linear_interp(V, grid, t)
            hat = pw_linear_interp(V_hat, grid, t)
            breve = v_breve(V, W, W_hat, grid, n, t)
            lin_rhs = 0.5 * tau * tau * (
                second_diff(V, 2 * n - 1, tau) * hat_basis(grid, 2 * n - 2, t)
                + second_diff(V, 2 * n + 1, tau) * hat_basis(grid, 2 * n + 2, t))
            quad_rhs = tau * tau * cent_diff(W, 2 * n, tau) * bubble(grid, 2 * n, t)
            res["linear_velocity"] = max(
                res["linear_velocity"], abs(hat - bar - lin_rhs) / scale)
            res["quadratic_velocity"] = max(
                res["quadratic_velocity"], abs(breve - bar - quad_rhs) / scale)
            res["theorem_velocity"] = max(
                res["theorem_velocity"],
                abs(hat - breve - (lin_rhs - quad_rhs)) / scale)
    return res


def verify_reconstruction_identities(grid: TimeGrid | None = None,
                                     n_trials: int = 100,
                                     seed: int = 20240801,
                                     tol: float = 1e-12) -> dict[str, float]:
    """Run the full identity suite on random sequences.

    Returns the max residual per identity; raises AssertionError naming the
    first violated identity (with the offending trial) if any residual
    exceeds tol.
    """
    grid = grid or TimeGrid(1.0, 8)
    rng = np.random.default_rng(seed)
    N = grid.steps
    worst: dict[str, float] = {}
    for trial in range(n_trials):
        omega = {2 * n: rng.standard_normal() for n in range(N + 1)}
        V = {2 * n - 1: rng.standard_normal() for n in range(N + 1)}
        W = {2 * n: rng.standard_normal() for n in range(N + 1)}
        res = identity_residuals(omega, V, W, grid, rng)
        for k, v in res.items():
            worst[k] = max(worst.get(k, 0.0), v)
            if v > tol:
                raise AssertionError(
                    f"identity '{k}' violated in trial {trial}: residual {v:.3e}")
    return worst
