"""Compatible 1D meshes as dyadic refinements of a macro partition.

Every mesh is described by its domain [a, b], the number of macro cells,
and one refinement level per macro cell; macro cell i is split into
2^level[i] equal elements.  All meshes of one family share the macro
partition, which makes the finest common refinement (elementwise max
level) and the coarsest common mesh (elementwise min level) exist by
construction.  Only a single extra level (fine = coarse/2) is used by the
solver, matching the two tau/2 local substeps of the LTS scheme.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ConfigError, IncompatibleMeshError

#: relative tolerance for window/macro-boundary intersection tests
_REL_TOL = 1e-12


class Mesh1D:
    """Dyadic-compatible partition of [a, b].

    Parameters
    ----------
    a, b : floats, domain endpoints (b > a).
    n_macro : number of macro cells.
    levels : per-macro-cell refinement level (cell i carries 2^levels[i]
        elements of width macro_h / 2^levels[i]).
    """

    def __init__(self, a: float, b: float, n_macro: int, levels):
        if b <= a:
            raise ConfigError("mesh needs b > a")
        if n_macro < 1:
            raise ConfigError("mesh needs at least one macro cell")
        levels = tuple(int(l) for l in levels)
        if len(levels) != n_macro or any(l < 0 for l in levels):
            raise ConfigError("levels must list one non-negative level per macro cell")
        self.a = float(a)
        self.b = float(b)
        self.n_macro = int(n_macro)
        self.levels = levels

    # identity is structural: same macro grid and levels
    def _key(self):
        return (self.a, self.b, self.n_macro, self.levels)

    def __eq__(self, other):
        return isinstance(other, Mesh1D) and self._key() == other._key()

    def __hash__(self):
        return hash(self._key())

    def __repr__(self):
        return (f"Mesh1D(a={self.a}, b={self.b}, n_macro={self.n_macro}, "
                f"elements={self.n_elements})")

    @property
    def macro_h(self) -> float:
        return (self.b - self.a) / self.n_macro

    @cached_property
    def n_elements(self) -> int:
        return int(sum(1 << l for l in self.levels))

    @cached_property
    def element_levels(self) -> np.ndarray:
        return np.repeat(np.array(self.levels, dtype=int),
                         [1 << l for l in self.levels])

    @cached_property
    def element_macro(self) -> np.ndarray:
        """Macro-cell index owning each element."""
        return np.repeat(np.arange(self.n_macro), [1 << l for l in self.levels])

    @cached_property
    def widths(self) -> np.ndarray:
        return self.macro_h / (1 << self.element_levels).astype(float)

    @cached_property
    def nodes(self) -> np.ndarray:
        n = np.concatenate(([self.a], self.a + np.cumsum(self.widths)))
        n[-1] = self.b  # kill accumulated roundoff at the right endpoint
        return n

    def serialize_nodes(self) -> str:
        """Plain-text node list, one coordinate per line."""
        return "\n".join(f"{x:.17g}" for x in self.nodes) + "\n"


def build_uniform(a: float, b: float, h: float) -> Mesh1D:
    """Uniform mesh with element count round((b - a)/h)."""
    if h <= 0:
        raise ConfigError("mesh size h must be positive")
    count = max(1, round((b - a) / h))
    return Mesh1D(a, b, count, (0,) * count)


def build_window_mesh(a: float, b: float, H: float, window) -> Mesh1D:
    """Macro mesh of size ~H, bisected once on macro cells meeting the window.

    window is a pair (lo, hi); empty/None windows give the uniform mesh.
    Window endpoints are effectively snapped outward to macro boundaries:
    every macro cell with positive-measure intersection is refined.
    """
    if H <= 0:
        raise ConfigError("coarse mesh size H must be positive")
    count = max(1, round((b - a) / H))
    if window is None:
        return Mesh1D(a, b, count, (0,) * count)
    lo, hi = float(window[0]), float(window[1])
    if hi <= lo:
        return Mesh1D(a, b, count, (0,) * count)
    if lo < a - _REL_TOL * (b - a) or hi > b + _REL_TOL * (b - a):
        raise ConfigError(f"window [{lo}, {hi}] outside the domain [{a}, {b}]")
    macro_h = (b - a) / count
    tol = _REL_TOL * (b - a)
    lefts = a + macro_h * np.arange(count)
    rights = lefts + macro_h
    hit = (lefts < hi - tol) & (rights > lo + tol)
    return Mesh1D(a, b, count, tuple(1 if f else 0 for f in hit))


def advance_window(mesh: Mesh1D, new_window) -> Mesh1D:
    """Rebuild the mesh from its macro partition with a shifted window."""
    return build_window_mesh(mesh.a, mesh.b, mesh.macro_h, new_window)


def _check_same_macro(A: Mesh1D, B: Mesh1D):
    if (A.a, A.b, A.n_macro) != (B.a, B.b, B.n_macro):
        raise IncompatibleMeshError("meshes do not share a macro partition")


def common_refinement(A: Mesh1D, B: Mesh1D) -> Mesh1D:
    """Elementwise finest of two compatible meshes (levelwise max)."""
    _check_same_macro(A, B)
    return Mesh1D(A.a, A.b, A.n_macro, tuple(map(max, A.levels, B.levels)))


def common_coarsening(A: Mesh1D, B: Mesh1D) -> Mesh1D:
    """Elementwise coarsest common mesh (levelwise min); carries V_A ∩ V_B."""
    _check_same_macro(A, B)
    return Mesh1D(A.a, A.b, A.n_macro, tuple(map(min, A.levels, B.levels)))


def refines(A: Mesh1D, B: Mesh1D) -> bool:
    """True when A refines B (every element of B is a union of A-elements)."""
    _check_same_macro(A, B)
    return all(la >= lb for la, lb in zip(A.levels, B.levels))


@dataclass(frozen=True)
class CoarseFineSplit:
    """Partition of the element indices into the LTS fine and coarse sets."""

    fine_mask: np.ndarray  # bool per element

    @property
    def coarse_mask(self) -> np.ndarray:
        return ~self.fine_mask

    @property
    def fine_elements(self) -> np.ndarray:
        return np.flatnonzero(self.fine_mask)


def coarse_fine_split(mesh: Mesh1D, theta: float) -> CoarseFineSplit:
    """Classify elements: fine = {K : h_K <= theta * max h} plus neighbors."""
    if not 0.0 < theta < 1.0:
        raise ConfigError("fine-coarse threshold theta must lie in (0, 1)")
    w = mesh.widths
    small = w <= theta * w.max()
    fine = small.copy()
    fine[:-1] |= small[1:]   # left neighbor of a small element
    fine[1:] |= small[:-1]   # right neighbor
    return CoarseFineSplit(fine_mask=fine)
