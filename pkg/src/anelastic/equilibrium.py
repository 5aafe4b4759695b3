"""Gravitational potentials and hydrostatic equilibrium profiles.

For the isentropic pressure law p = rho**gamma, hydrostatic balance
grad p = -rho grad phi has the closed-form solution

    rho_eq(x) = (c0 - ((gamma-1)/gamma) * phi(x)) ** (1/(gamma-1))

with one free constant c0 > 0.  The transformed pressure variable
w1 = p * exp(-H), with

    exp(H) = (c0 - ((gamma-1)/gamma) * phi) ** (gamma/(gamma-1)) = rho_eq**gamma,

is identically 1 on the equilibrium, which is what the hydrostatic
reconstruction in the spatial kernels exploits.

Tabulation note: at cell centers exp(H) is stored as rho_c**gamma, the
same floating-point expression the solver uses for the pressure of a
state.  A state that equals the tabulated equilibrium then has w1 == 1.0
bitwise in every cell, so reconstruction slopes and flux/source defects
vanish exactly instead of to rounding level.  That exactness is load
bearing: the defects are multiplied by 1/eps**2, so "almost zero" at
machine precision would still be amplified catastrophically for small
eps.  Pointwise evaluators use the closed forms directly.
"""

from __future__ import annotations

from typing import Callable, Optional, Sequence

import numpy as np

from .mesh import ConfigError, Grid, mu

POTENTIAL_KINDS = ("flat", "linear", "quadratic", "sinusoidal", "sum-2d", "radial")


class Potential:
    """Scalar gravitational potential phi evaluated at arbitrary points.

    fn takes one coordinate array per spatial dimension.  grad, when
    available, returns the tuple of partial derivatives (used only by
    verification tests and the non-well-balanced source variant keeps
    its own discrete gradient, so grad may be None for tabulated data).
    """

    def __init__(self, kind: str, fn: Callable, grad: Optional[Callable] = None,
                 min_dim: int = 1):
        self.kind = kind
        self.fn = fn
        self.grad = grad
        self.min_dim = min_dim

    def __call__(self, *coords):
        return self.fn(*coords)

    @classmethod
    def from_callable(cls, fn: Callable, grad: Optional[Callable] = None) -> "Potential":
        return cls("tabulated", fn, grad)


def potential(kind: str) -> Potential:
    """Built-in potential by name."""
    if kind == "flat":
        return Potential(kind, lambda *c: np.zeros_like(c[0]),
                         lambda *c: tuple(np.zeros_like(x) for x in c))
    if kind == "linear":
        return Potential(kind, lambda *c: np.asarray(c[0], dtype=float).copy(),
                         lambda *c: (np.ones_like(c[0]),) + tuple(np.zeros_like(x) for x in c[1:]))
    if kind == "quadratic":
        return Potential(kind, lambda *c: np.asarray(c[0]) ** 2,
                         lambda *c: (2.0 * c[0],) + tuple(np.zeros_like(x) for x in c[1:]))
    if kind == "sinusoidal":
        return Potential(kind, lambda *c: np.sin(2.0 * np.pi * np.asarray(c[0])),
                         lambda *c: (2.0 * np.pi * np.cos(2.0 * np.pi * c[0]),)
                         + tuple(np.zeros_like(x) for x in c[1:]))
    if kind == "sum-2d":
        return Potential(kind, lambda x, y: x + y,
                         lambda x, y: (np.ones_like(x), np.ones_like(y)), min_dim=2)
    if kind == "radial":
        return Potential(kind, lambda x, y: (x - 0.5) ** 2 + (y - 0.5) ** 2,
                         lambda x, y: (2.0 * (x - 0.5), 2.0 * (y - 0.5)), min_dim=2)
    raise ConfigError(f"unknown potential kind {kind!r}")


class EquilibriumProfile:
    """Tabulated hydrostatic equilibrium for one grid and potential.

    Center tabulations (padded grid shape):
        phi_c, rho_c, peq_c (= rho_c**gamma, also the exp(H) tabulation).
    Per-axis face tabulations (one fewer entry along the axis):
        exph_f[a]    exp(H) at face points, from the closed form
        rho_f[a]     rho_eq at face points, from the closed form
        eqf_mean[a]  (rho_c_f + rho_c_{f+1}) / 2, face means of centers
        eqf_diff[a]  rho_c_{f+1} - rho_c_f, face differences of centers

    eqf_mean/eqf_diff are built with exactly the operations the spatial
    and elliptic kernels apply to a state, so equilibrium states cancel
    bitwise against them.
    """

    def __init__(self, grid: Grid, pot: Potential, gamma: float, c0: float = 1.0):
        if gamma <= 1.0:
            raise ConfigError("gamma must exceed 1")
        if c0 <= 0.0:
            raise ConfigError("c0 must be positive")
        if grid.dim < pot.min_dim:
            raise ConfigError(f"potential {pot.kind!r} needs a {pot.min_dim}D grid")
        self.grid = grid
        self.potential = pot
        self.gamma = float(gamma)
        self.c0 = float(c0)
        self.beta = gamma / (gamma - 1.0) * c0

        coords = grid.meshgrid(ghosts=True)
        self.phi_c = np.asarray(pot(*coords), dtype=float)
        base_c = self._base(self.phi_c)
        self._check_positive(base_c)
        self.rho_c = base_c ** (1.0 / (gamma - 1.0))
        # exp(H) at centers is rho_eq**gamma on purpose; see module docstring
        self.peq_c = self.rho_c ** gamma
        self.exph_c = self.peq_c

        self.exph_f = []
        self.rho_f = []
        self.phi_f = []
        self.eqf_mean = []
        self.eqf_diff = []
        for a in range(grid.dim):
            fc = self._face_coords(a)
            phi_f = np.asarray(pot(*fc), dtype=float)
            base_f = self._base(phi_f)
            self._check_positive(base_f)
            self.phi_f.append(phi_f)
            self.exph_f.append(base_f ** (gamma / (gamma - 1.0)))
            self.rho_f.append(base_f ** (1.0 / (gamma - 1.0)))
            self.eqf_mean.append(mu(self.rho_c, axis=a))
            self.eqf_diff.append(np.diff(self.rho_c, axis=a))

    # ---- closed-form pointwise evaluators ----

    def _base(self, phi):
        return self.c0 - (self.gamma - 1.0) / self.gamma * phi

    @staticmethod
    def _check_positive(base):
        if not np.all(base > 0.0):
            raise ConfigError("potential too strong: equilibrium density not positive "
                              "on the padded grid")

    def rho_eq_at(self, *coords):
        """Equilibrium density at arbitrary points."""
        base = self._base(np.asarray(self.potential(*coords), dtype=float))
        self._check_positive(base)
        return base ** (1.0 / (self.gamma - 1.0))

    def h_at(self, *coords):
        """H(x) = gamma/(gamma-1) * log(((gamma-1)/gamma) * (beta - phi))."""
        base = self._base(np.asarray(self.potential(*coords), dtype=float))
        self._check_positive(base)
        return self.gamma / (self.gamma - 1.0) * np.log(base)

    def exp_h_at(self, *coords):
        """exp(H) evaluated directly as a power, not via exp(log(.))."""
        base = self._base(np.asarray(self.potential(*coords), dtype=float))
        self._check_positive(base)
        return base ** (self.gamma / (self.gamma - 1.0))

    def _face_coords(self, axis):
        axes = []
        for a in range(self.grid.dim):
            if a == axis:
                axes.append(self.grid.faces(a))
            else:
                axes.append(self.grid.centers(a, ghosts=True))
        if self.grid.dim == 1:
            return (axes[0],)
        return tuple(np.meshgrid(*axes, indexing="ij"))

    # ---- periodic consistency ----

    def periodize(self, axes: Sequence[int]):
        """Overwrite ghost tabulations with periodic images.

        For a periodic run the ghost cells of a state wrap the interior,
        so the equilibrium tabulations must wrap identically (a closed
        form evaluated outside the domain agrees only to rounding, which
        is not good enough for the exact-cancellation identities).
        """
        for axis in axes:
            m = self.grid.n[axis]
            ng = self.grid.ng
            for arr in (self.phi_c, self.rho_c, self.peq_c):
                self._wrap_center(arr, axis, m, ng)
            for a in range(self.grid.dim):
                for arr in (self.exph_f[a], self.rho_f[a], self.phi_f[a],
                            self.eqf_mean[a], self.eqf_diff[a]):
                    if a == axis:
                        self._wrap_face(arr, axis, m, ng)
                    else:
                        self._wrap_center(arr, axis, m, ng)
        return self

    @staticmethod
    def _wrap_center(arr, axis, m, ng):
        sl = lambda s: tuple(s if d == axis else slice(None) for d in range(arr.ndim))
        arr[sl(slice(0, ng))] = arr[sl(slice(m, m + ng))]
        arr[sl(slice(m + ng, m + 2 * ng))] = arr[sl(slice(ng, 2 * ng))]

    @staticmethod
    def _wrap_face(arr, axis, m, ng):
        # face f pairs cells (f, f+1); faces repeat with period m and the
        # two physical boundary faces are images of each other
        sl = lambda s: tuple(s if d == axis else slice(None) for d in range(arr.ndim))
        arr[sl(slice(0, ng - 1))] = arr[sl(slice(m, m + ng - 1))]
        arr[sl(slice(m + ng - 1, m + 2 * ng - 1))] = arr[sl(slice(ng - 1, 2 * ng - 1))]

    # ---- balanced variables ----

    def to_balanced(self, rho: np.ndarray, q: np.ndarray):
        """(rho, q) -> (w1, u) with w1 = rho**gamma / exp(H), u = q / rho."""
        w1 = rho ** self.gamma / self.exph_c
        u = q / rho
        return w1, u

    def from_balanced(self, w1: np.ndarray, u: np.ndarray):
        """(w1, u) -> (rho, q); inverse of to_balanced up to rounding."""
        rho = (w1 * self.exph_c) ** (1.0 / self.gamma)
        q = rho * u
        return rho, q

    # ---- balance residuals and diagnostics ----

    def linear_balance_residual(self, rho: np.ndarray) -> np.ndarray:
        """Central-difference residual of grad rho - (rho/rho_eq) grad rho_eq.

        Returns an array of shape (dim, *interior).  Ghost cells of rho
        must be current.  Zero (to rounding) exactly on the family
        K * rho_eq.
        """
        g = self.grid
        out = np.empty((g.dim,) + tuple(g.n))
        inner = g.interior
        for a in range(g.dim):
            up = tuple(slice(s.start + 1, s.stop + 1) if d == a else s
                       for d, s in enumerate(inner))
            dn = tuple(slice(s.start - 1, s.stop - 1) if d == a else s
                       for d, s in enumerate(inner))
            inv2dx = 1.0 / (2.0 * g.dx[a])
            out[a] = (rho[up] - rho[dn]) * inv2dx \
                - (rho[inner] / self.rho_c[inner]) * (self.rho_c[up] - self.rho_c[dn]) * inv2dx
        return out

    def balance_offset(self, rho: np.ndarray):
        """Diagnose the additive constant of the balance family.

        For any member of the hydrostatic family the per-cell quantity
        gamma/(gamma-1) * rho**(gamma-1) + phi is constant.  Returns its
        interior mean and spread (max - min).
        """
        inner = self.grid.interior
        k = self.gamma / (self.gamma - 1.0) * rho[inner] ** (self.gamma - 1.0) \
            + self.phi_c[inner]
        return float(np.mean(k)), float(np.ptp(k))
