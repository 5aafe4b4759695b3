"""Structured grids, ghost cells, and face/cell difference operators.

Cell-centered finite-volume layout on a uniform rectangular grid in 1D or
2D.  Arrays carry a fixed-width ghost halo on every side; axis 0 is the
first spatial direction, and 2D arrays are indexed ``[i, j]`` row-major
with ``i`` along axis 0.  Face arrays along an axis have one fewer entry
than the padded cell count: face ``f`` sits between cells ``f`` and
``f + 1`` of the padded array.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

BC_KINDS = ("periodic", "no-flux", "extrapolation", "dirichlet-equilibrium")


class ConfigError(Exception):
    """Raised for invalid grid, boundary, or scenario configuration."""


@dataclass(frozen=True)
class Grid:
    """Uniform cell-centered grid with ghost padding.

    lo, hi   domain bounds per axis
    n        interior cell counts per axis
    ng       ghost width on each side (2 is enough for limited
             piecewise-linear reconstruction up to the boundary faces)
    """

    lo: Tuple[float, ...]
    hi: Tuple[float, ...]
    n: Tuple[int, ...]
    ng: int = 2

    def __post_init__(self):
        if not (1 <= len(self.n) <= 2):
            raise ConfigError("grid must be 1D or 2D")
        if len(self.lo) != len(self.n) or len(self.hi) != len(self.n):
            raise ConfigError("lo/hi/n dimension mismatch")
        if any(m < 4 for m in self.n):
            raise ConfigError("need at least 4 cells per axis")
        if any(h <= l for l, h in zip(self.lo, self.hi)):
            raise ConfigError("domain extent must be positive")
        if self.ng < 2:
            raise ConfigError("ghost width must be at least 2")

    @property
    def dim(self) -> int:
        return len(self.n)

    @property
    def dx(self) -> Tuple[float, ...]:
        return tuple((h - l) / m for l, h, m in zip(self.lo, self.hi, self.n))

    @property
    def shape(self) -> Tuple[int, ...]:
        """Padded array shape (interior plus ghosts)."""
        return tuple(m + 2 * self.ng for m in self.n)

    @property
    def interior(self) -> Tuple[slice, ...]:
        return tuple(slice(self.ng, self.ng + m) for m in self.n)

    def centers(self, axis: int, ghosts: bool = True) -> np.ndarray:
        """1D array of cell-center coordinates along an axis."""
        m, d, l = self.n[axis], self.dx[axis], self.lo[axis]
        if ghosts:
            idx = np.arange(-self.ng, m + self.ng)
        else:
            idx = np.arange(m)
        return l + (idx + 0.5) * d

    def faces(self, axis: int) -> np.ndarray:
        """Coordinates of all faces of the padded array along an axis.

        Entry f is the face between padded cells f and f + 1, so the
        physical domain boundaries sit at indices ng - 1 and ng + n - 1.
        """
        m, d, l = self.n[axis], self.dx[axis], self.lo[axis]
        idx = np.arange(-self.ng + 1, m + self.ng)
        return l + idx * d

    def cell_volume(self) -> float:
        v = 1.0
        for d in self.dx:
            v *= d
        return v

    def meshgrid(self, ghosts: bool = True):
        """Coordinate arrays broadcast to the (padded) cell shape."""
        axes = [self.centers(a, ghosts) for a in range(self.dim)]
        if self.dim == 1:
            return (axes[0],)
        return tuple(np.meshgrid(*axes, indexing="ij"))


@dataclass
class State:
    """Conserved fields on a grid: density rho and momentum q.

    rho has the padded grid shape; q is stacked component-first with
    shape (dim, *padded).
    """

    rho: np.ndarray
    q: np.ndarray

    @classmethod
    def zeros(cls, grid: Grid) -> "State":
        return cls(
            rho=np.zeros(grid.shape),
            q=np.zeros((grid.dim,) + grid.shape),
        )

    def copy(self) -> "State":
        return State(rho=self.rho.copy(), q=self.q.copy())


@dataclass(frozen=True)
class BoundaryCondition:
    """Boundary kinds per axis and side: kinds[axis] = (low, high)."""

    kinds: Tuple[Tuple[str, str], ...]

    def __post_init__(self):
        for pair in self.kinds:
            for k in pair:
                if k not in BC_KINDS:
                    raise ConfigError(f"unknown boundary kind {k!r}")
            # periodic only makes sense as a matched pair
            if ("periodic" in pair) and (pair[0] != pair[1]):
                raise ConfigError("periodic boundaries must pair up")

    @classmethod
    def uniform(cls, kind: str, dim: int) -> "BoundaryCondition":
        return cls(kinds=tuple((kind, kind) for _ in range(dim)))

    def is_periodic(self, axis: int) -> bool:
        return self.kinds[axis][0] == "periodic"


def _axis_slices(arr_ndim: int, axis: int, sl: slice):
    out = [slice(None)] * arr_ndim
    out[axis] = sl
    return tuple(out)


def _fill_scalar_axis(arr, grid, axis, side, kind, eq_tab):
    """Fill ghost cells of a scalar field along one axis side.

    eq_tab is the equilibrium density tabulation on the same padded
    shape, or None.  With it, no-flux mirrors the relative deviation
    rho/rho_eq evenly about the wall face: every multiple of the
    hydrostatic profile passes through exactly, and the ghost values
    stay consistent with the zero-flux closure of the implicit wall
    rows, which sees the same even image.  Without a tabulation,
    no-flux falls back to a plain mirror.
    """
    ng = grid.ng
    m = grid.n[axis]
    nd = arr.ndim
    if side == 0:
        ghosts = [_axis_slices(nd, axis, slice(j, j + 1)) for j in range(ng)]
        mirrors = [_axis_slices(nd, axis, slice(2 * ng - 1 - j, 2 * ng - j)) for j in range(ng)]
        wrap = [_axis_slices(nd, axis, slice(m + j, m + j + 1)) for j in range(ng)]
        edge = _axis_slices(nd, axis, slice(ng, ng + 1))
    else:
        ghosts = [_axis_slices(nd, axis, slice(m + ng + j, m + ng + j + 1)) for j in range(ng)]
        mirrors = [_axis_slices(nd, axis, slice(m + ng - 1 - j, m + ng - j)) for j in range(ng)]
        wrap = [_axis_slices(nd, axis, slice(ng + j, ng + j + 1)) for j in range(ng)]
        edge = _axis_slices(nd, axis, slice(m + ng - 1, m + ng))

    if kind == "periodic":
        for g, w in zip(ghosts, wrap):
            arr[g] = arr[w]
    elif kind == "extrapolation":
        for g in ghosts:
            arr[g] = arr[edge]
    elif kind == "no-flux":
        if eq_tab is None:
            for g, mi in zip(ghosts, mirrors):
                arr[g] = arr[mi]
        else:
            for g, mi in zip(ghosts, mirrors):
                arr[g] = eq_tab[g] * (arr[mi] / eq_tab[mi])
    elif kind == "dirichlet-equilibrium":
        if eq_tab is None:
            raise ConfigError("dirichlet-equilibrium ghosts need an equilibrium profile")
        for g in ghosts:
            arr[g] = eq_tab[g]
    else:  # pragma: no cover
        raise ConfigError(f"unknown boundary kind {kind!r}")


def _fill_momentum_axis(q, grid, axis, side, kind):
    """Fill momentum ghosts along one axis side.

    no-flux negates the normal component and mirrors the transverse one;
    dirichlet-equilibrium zeroes all components (the reference state is
    at rest).
    """
    ng = grid.ng
    m = grid.n[axis]
    nd = q.ndim - 1  # spatial ndim; component axis is 0
    if side == 0:
        ghosts = [_axis_slices(nd, axis, slice(j, j + 1)) for j in range(ng)]
        mirrors = [_axis_slices(nd, axis, slice(2 * ng - 1 - j, 2 * ng - j)) for j in range(ng)]
        wrap = [_axis_slices(nd, axis, slice(m + j, m + j + 1)) for j in range(ng)]
        edge = _axis_slices(nd, axis, slice(ng, ng + 1))
    else:
        ghosts = [_axis_slices(nd, axis, slice(m + ng + j, m + ng + j + 1)) for j in range(ng)]
        mirrors = [_axis_slices(nd, axis, slice(m + ng - 1 - j, m + ng - j)) for j in range(ng)]
        wrap = [_axis_slices(nd, axis, slice(ng + j, ng + j + 1)) for j in range(ng)]
        edge = _axis_slices(nd, axis, slice(m + ng - 1, m + ng))

    for comp in range(q.shape[0]):
        a = q[comp]
        if kind == "periodic":
            for g, w in zip(ghosts, wrap):
                a[g] = a[w]
        elif kind == "extrapolation":
            for g in ghosts:
                a[g] = a[edge]
        elif kind == "no-flux":
            sgn = -1.0 if comp == axis else 1.0
            for g, mi in zip(ghosts, mirrors):
                a[g] = sgn * a[mi]
        elif kind == "dirichlet-equilibrium":
            for g in ghosts:
                a[g] = 0.0
        else:  # pragma: no cover
            raise ConfigError(f"unknown boundary kind {kind!r}")


def fill_density_ghosts(rho, grid, bc, eq_tab=None):
    """Refresh all ghost cells of a density-like scalar field in place."""
    for axis in range(grid.dim):
        for side in (0, 1):
            _fill_scalar_axis(rho, grid, axis, side, bc.kinds[axis][side], eq_tab)
    return rho


def fill_momentum_ghosts(q, grid, bc):
    """Refresh all ghost cells of the momentum components in place."""
    for axis in range(grid.dim):
        for side in (0, 1):
            _fill_momentum_axis(q, grid, axis, side, bc.kinds[axis][side])
    return q


def _fill_deviation_axis(dev, grid, axis, side, kind, eq_tab, base):
    """Ghost fill for a density deviation d = rho - (1+base)*rho_eq along
    one side.

    Each rule is the image of the corresponding density rule under the
    shift by (1+base) times the equilibrium tabulation, so filling d and
    adding the shifted equilibrium reproduces (exactly, in exact
    arithmetic) the density ghosts that fill_density_ghosts would
    produce with the same eq_tab.  base=0 recovers the plain deviation
    rules; a nonzero base lets callers keep an equilibrium-proportional
    offset out of the field entirely.
    """
    ng = grid.ng
    m = grid.n[axis]
    nd = dev.ndim
    if side == 0:
        ghosts = [_axis_slices(nd, axis, slice(j, j + 1)) for j in range(ng)]
        mirrors = [_axis_slices(nd, axis, slice(2 * ng - 1 - j, 2 * ng - j)) for j in range(ng)]
        wrap = [_axis_slices(nd, axis, slice(m + j, m + j + 1)) for j in range(ng)]
        edge = _axis_slices(nd, axis, slice(ng, ng + 1))
    else:
        ghosts = [_axis_slices(nd, axis, slice(m + ng + j, m + ng + j + 1)) for j in range(ng)]
        mirrors = [_axis_slices(nd, axis, slice(m + ng - 1 - j, m + ng - j)) for j in range(ng)]
        wrap = [_axis_slices(nd, axis, slice(ng + j, ng + j + 1)) for j in range(ng)]
        edge = _axis_slices(nd, axis, slice(m + ng - 1, m + ng))

    if kind == "periodic":
        for g, w in zip(ghosts, wrap):
            dev[g] = dev[w]
    elif kind == "extrapolation":
        for g in ghosts:
            dev[g] = dev[edge] + (1.0 + base) * (eq_tab[edge] - eq_tab[g])
    elif kind == "no-flux":
        for g, mi in zip(ghosts, mirrors):
            dev[g] = eq_tab[g] * (dev[mi] / eq_tab[mi])
    elif kind == "dirichlet-equilibrium":
        for g in ghosts:
            dev[g] = -base * eq_tab[g]
    else:  # pragma: no cover
        raise ConfigError(f"unknown boundary kind {kind!r}")


def fill_deviation_ghosts(dev, grid, bc, eq_tab, base: float = 0.0):
    """Refresh all ghost cells of a density deviation field in place.

    The stiff operators read the deviation directly; keeping its ghost
    values exact (instead of recovering them from rho_eq + d after the
    sum has rounded) keeps their rounding floor at the size of the
    deviation itself.  base is the equilibrium-proportional offset held
    outside the field (rho = (1+base)*rho_eq + dev).
    """
    for axis in range(grid.dim):
        for side in (0, 1):
            _fill_deviation_axis(dev, grid, axis, side, bc.kinds[axis][side],
                                 eq_tab, base)
    return dev


def apply_boundary(state: State, grid: Grid, bc: BoundaryCondition, equilibrium=None) -> State:
    """Refresh every ghost cell of a state in place and return it.

    equilibrium is an EquilibriumProfile; it is required for
    dirichlet-equilibrium boundaries and, when present, lets no-flux
    walls mirror the deviation from hydrostatic balance about the wall
    face instead of mirroring the raw density (which keeps balanced
    states exactly balanced through the wall).
    """
    eq_tab = None if equilibrium is None else equilibrium.rho_c
    fill_density_ghosts(state.rho, grid, bc, eq_tab)
    fill_momentum_ghosts(state.q, grid, bc)
    return state


def delta(face_arr: np.ndarray, axis: int = 0) -> np.ndarray:
    """Cellwise difference of a face array: out_i = f_{i+1/2} - f_{i-1/2}.

    The output has one fewer entry along the axis than a cell array that
    owns those faces, i.e. len(cells) = len(faces) - 1.
    """
    nd = face_arr.ndim
    hi = face_arr[_axis_slices(nd, axis, slice(1, None))]
    lo = face_arr[_axis_slices(nd, axis, slice(None, -1))]
    return hi - lo


def mu(cell_arr: np.ndarray, axis: int = 0) -> np.ndarray:
    """Face means of a cell array: out_f = (c_f + c_{f+1}) / 2."""
    nd = cell_arr.ndim
    hi = cell_arr[_axis_slices(nd, axis, slice(1, None))]
    lo = cell_arr[_axis_slices(nd, axis, slice(None, -1))]
    return (lo + hi) / 2.0
