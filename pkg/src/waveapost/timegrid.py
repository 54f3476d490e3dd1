"""Uniform primal and staggered time grids.

Displacements live at integer time nodes t_n = n*tau, velocities at
half-integer nodes t_{n-1/2}.  To keep the staggered bookkeeping exact we
address every node by its *doubled* index (``twice_nu``), so t_{n-1/2} has
doubled index 2n-1 and t_n has 2n.  Valid doubled indices run from -1
(the ghost node t_{-1/2} used by the initialization) to 2N+1.

Node-indexed sequences are represented as mappings ``{twice_nu: value}``
whose keys all share one parity (even = primal grid, odd = staggered grid).
Values may be floats or NumPy arrays; the difference operators only use
linear arithmetic.

Time basis functions:
    hat_basis   piecewise linear "hat" l_nu(t): 1 at t_nu, 0 at t_nu +- tau
    bubble      quadratic bubble q_nu(t) = max(0, (t - t_{nu-1/2})(t_{nu+1/2} - t)) / (2 tau^2),
                supported on [t_{nu-1/2}, t_{nu+1/2}] with maximum 1/8 at t_nu
"""

from dataclasses import dataclass


@dataclass(frozen=True)
class TimeGrid:
    """Uniform partition of [0, T] into N steps of size tau = T/N."""

    final_time: float
    steps: int

    def __post_init__(self):
        if self.steps < 0 or self.final_time < 0.0:
            raise ValueError("TimeGrid needs T >= 0 and N >= 0")
        if self.steps > 0 and self.final_time <= 0.0:
            raise ValueError("TimeGrid with steps needs T > 0")

    @property
    def tau(self) -> float:
        return self.final_time / self.steps

    def check_index(self, twice_nu: int):
        if not -1 <= twice_nu <= 2 * self.steps + 1:
            raise IndexError(f"doubled time index {twice_nu} outside [-1, {2*self.steps+1}]")

    def node(self, twice_nu: int) -> float:
        """Time t_nu for the doubled index twice_nu = 2*nu."""
        self.check_index(twice_nu)
        return 0.5 * twice_nu * self.tau


def hat_basis(grid: TimeGrid, twice_nu: int, t: float) -> float:
    """Piecewise linear basis l_nu(t), supported on [t_nu - tau, t_nu + tau]."""
    grid.check_index(twice_nu)
    s = abs(t - grid.node(twice_nu)) / grid.tau
    return max(0.0, 1.0 - s)


def bubble(grid: TimeGrid, twice_nu: int, t: float) -> float:
    """Quadratic bubble q_nu(t) on [t_{nu-1/2}, t_{nu+1/2}], max 1/8 at t_nu."""
    grid.check_index(twice_nu)
    tau = grid.tau
    t_lo = grid.node(twice_nu) - 0.5 * tau
    t_hi = grid.node(twice_nu) + 0.5 * tau
    return max(0.0, (t - t_lo) * (t_hi - t) / (2.0 * tau * tau))


def _get(seq, twice_nu: int):
    try:
        return seq[twice_nu]
    except KeyError as exc:
        raise IndexError(f"sequence not defined at doubled index {twice_nu}") from exc


def fore_diff(seq, twice_nu: int, tau: float):
    """Forward difference (phi^{nu+1} - phi^nu)/tau on one grid parity."""
    return (_get(seq, twice_nu + 2) - _get(seq, twice_nu)) / tau


def cent_diff(seq, twice_nu: int, tau: float):
    """Centered difference (phi^{nu+1} - phi^{nu-1})/(2 tau)."""
    return (_get(seq, twice_nu + 2) - _get(seq, twice_nu - 2)) / (2.0 * tau)


def second_diff(seq, twice_nu: int, tau: float):
    """Centered second difference (phi^{nu+1} - 2 phi^nu + phi^{nu-1})/tau^2."""
    return (_get(seq, twice_nu + 2) - 2.0 * _get(seq, twice_nu) + _get(seq, twice_nu - 2)) / (tau * tau)


def pw_linear_interp(seq, grid: TimeGrid, t: float):
    """Continuous piecewise linear interpolation of a node-indexed sequence.

    The sequence's keys fix the grid parity; t must lie within the span of
    the sequence's nodes.
    """
    keys = sorted(seq)
    if not keys:
        raise IndexError("empty sequence")
    parity = keys[0] % 2
    if any(k % 2 != parity for k in keys):
        raise IndexError("sequence mixes primal and staggered indices")
    lo, hi = grid.node(keys[0]), grid.node(keys[-1])
    eps = 1e-12 * grid.tau
    if t < lo - eps or t > hi + eps:
        raise ValueError(f"t={t} outside the sequence span [{lo}, {hi}]")
    t = min(max(t, lo), hi)
    # locate the pair of same-parity nodes bracketing t
    k = int((t / grid.tau - 0.5 * parity) // 1.0) * 2 + parity
    k = min(max(k, keys[0]), keys[-1] - 2)
    x = (t - grid.node(k)) / grid.tau  # in [0, 1]
    return _get(seq, k) * (1.0 - x) + _get(seq, k + 2) * x
