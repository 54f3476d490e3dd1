"""Benchmark problems for the wave solver.

The main benchmark is a right-moving Gaussian pulse

    u(x, t) = exp(-4 (x - 1 - t)^2),      v = du/dt = 8 (x - 1 - t) u,

an exact solution of u_tt = u_xx with c = 1 and f = 0 on (-10, 10); the
pulse is negligible (< 1e-140) at the boundary, so homogeneous Dirichlet
conditions hold to machine precision over the simulated times.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class Problem:
    """Analytic problem data; any callback may be None (meaning zero)."""

    name: str
    u0: object        # u0(x)
    v0: object        # v0(x)
    f: object         # f(x, t) or None
    u: object = None  # exact u(x, t)
    v: object = None  # exact du/dt (x, t)
    ux: object = None  # exact du/dx (x, t)


def _pulse(x, t):
    return np.exp(-4.0 * (x - 1.0 - t) ** 2)


def _pulse_t(x, t):
    return 8.0 * (x - 1.0 - t) * _pulse(x, t)


def _pulse_x(x, t):
    return -8.0 * (x - 1.0 - t) * _pulse(x, t)


GAUSSIAN_PULSE = Problem(
    name="gaussian_pulse",
    u0=lambda x: _pulse(x, 0.0),
    v0=lambda x: _pulse_t(x, 0.0),
    f=None,
    u=_pulse,
    v=_pulse_t,
    ux=_pulse_x,
)

ZERO = Problem(name="zero", u0=None, v0=None, f=None,
               u=lambda x, t: np.zeros_like(np.asarray(x, dtype=float)),
               v=lambda x, t: np.zeros_like(np.asarray(x, dtype=float)),
               ux=lambda x, t: np.zeros_like(np.asarray(x, dtype=float)))

_REGISTRY = {"gaussian_pulse": GAUSSIAN_PULSE, "zero": ZERO}


def get_problem(name: str) -> Problem:
    try:
        return _REGISTRY[name]
    except KeyError:
        raise ConfigError(f"unknown problem '{name}' (choose from {sorted(_REGISTRY)})")
