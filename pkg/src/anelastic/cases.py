"""Benchmark scenarios, initial data, and the explicit reference solver.

Six built-in configurations exercise the solver:

  wb-1d       rest on the 1D hydrostatic profile; nothing may move
  perturb-1d  Gaussian density bump of size zeta on the 1D profile
  aoc-1d      convergence-study variant of perturb-1d (zeta = eps)
  perturb-2d  Gaussian bump on the 2D profile with phi = x + y
  riemann-1d  moving-contact Riemann data with a pressure-scale jump
  vortex-2d   stationary rotating patch in a radial potential

All parameters carry their standard values; eps, mesh, final time, and
a few others can be overridden per run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Dict, Optional, Tuple

import numpy as np
from scipy.optimize import brentq
from scipy.special import erf

from .equilibrium import EquilibriumProfile, potential
from .mesh import BoundaryCondition, ConfigError, Grid, State, apply_boundary

SCENARIO_NAMES = ("wb-1d", "perturb-1d", "aoc-1d", "perturb-2d",
                  "riemann-1d", "vortex-2d")


@dataclass(frozen=True)
class Scenario:
    """Complete description of one run; serializable to the manifest."""

    name: str
    dim: int
    lo: Tuple[float, ...]
    hi: Tuple[float, ...]
    n: Tuple[int, ...]
    potential: str
    gamma: float
    eps: float
    zeta: float
    perturbation: str            # none | gauss | riemann | vortex
    bc: str
    t_end: float
    dt_policy: str               # 'cfl:NU' or 'fixed:C'
    tableau: str = "DP2-A(2,4,2)"
    beta: Optional[float] = None
    nwb: bool = False
    c0: float = 1.0
    meshes: Tuple[int, ...] = ()  # refinement ladder for convergence runs

    def grid(self, n: Optional[Tuple[int, ...]] = None) -> Grid:
        return Grid(lo=self.lo, hi=self.hi, n=tuple(n or self.n))

    def boundary(self) -> BoundaryCondition:
        return BoundaryCondition.uniform(self.bc, self.dim)

    def profile(self, grid: Grid) -> EquilibriumProfile:
        return EquilibriumProfile(grid, potential(self.potential),
                                  gamma=self.gamma, c0=self.c0)

    def as_dict(self) -> Dict[str, object]:
        return {
            "name": self.name, "dim": self.dim,
            "lo": list(self.lo), "hi": list(self.hi), "n": list(self.n),
            "potential": self.potential, "gamma": self.gamma,
            "eps": self.eps, "zeta": self.zeta,
            "perturbation": self.perturbation, "bc": self.bc,
            "t_end": self.t_end, "dt_policy": self.dt_policy,
            "tableau": self.tableau, "beta": self.beta, "nwb": self.nwb,
            "c0": self.c0, "meshes": list(self.meshes),
        }


@dataclass(frozen=True)
class VortexSpec:
    """Rotating-patch constants; the angular speed is a1*r inside r1,
    a2 + a3*r between r1 and r2, zero outside."""

    r1: float = 0.2
    r2: float = 0.4
    abar: float = 0.1
    center: Tuple[float, float] = (0.5, 0.5)

    @property
    def a1(self) -> float:
        return self.abar / self.r1

    @property
    def a2(self) -> float:
        return -self.abar * self.r2 / (self.r1 - self.r2)

    @property
    def a3(self) -> float:
        return self.abar / (self.r1 - self.r2)


def builtin_scenario(name: str, **overrides) -> Scenario:
    """A named benchmark with its standard parameters.

    Overrides are applied on top (unknown keys rejected); for the
    perturbation cases zeta tracks eps (zeta = eps^2, or eps for the
    convergence case) unless given explicitly.
    """
    base: Dict[str, object]
    if name == "wb-1d":
        base = dict(dim=1, lo=(0.0,), hi=(1.0,), n=(100,), potential="linear",
                    gamma=1.4, eps=1.0, zeta=0.0, perturbation="none",
                    bc="no-flux", t_end=10.0, dt_policy="fixed:0.5")
    elif name == "perturb-1d":
        base = dict(dim=1, lo=(0.0,), hi=(1.0,), n=(100,), potential="linear",
                    gamma=1.4, eps=1e-1, zeta=None, perturbation="gauss",
                    bc="no-flux", t_end=0.25, dt_policy="fixed:0.5")
    elif name == "aoc-1d":
        base = dict(dim=1, lo=(0.0,), hi=(1.0,), n=(40,), potential="linear",
                    gamma=1.4, eps=1e-4, zeta=None, perturbation="gauss",
                    bc="no-flux", t_end=3.0, dt_policy="fixed:0.1",
                    meshes=(20, 40, 80, 160, 320))
    elif name == "perturb-2d":
        base = dict(dim=2, lo=(0.0, 0.0), hi=(1.0, 1.0), n=(50, 50),
                    potential="sum-2d", gamma=1.4, eps=1.0, zeta=1e-3,
                    perturbation="gauss", bc="no-flux", t_end=0.05,
                    dt_policy="fixed:0.1")
    elif name == "riemann-1d":
        base = dict(dim=1, lo=(0.0,), hi=(1.0,), n=(1000,), potential="flat",
                    gamma=2.0, eps=0.3, zeta=0.0, perturbation="riemann",
                    bc="extrapolation", t_end=0.01, dt_policy="cfl:0.9",
                    beta=0.5)
    elif name == "vortex-2d":
        base = dict(dim=2, lo=(0.0, 0.0), hi=(1.0, 1.0), n=(200, 200),
                    potential="radial", gamma=2.0, eps=1e-1, zeta=0.0,
                    perturbation="vortex", bc="no-flux", t_end=1.0,
                    dt_policy="cfl:0.22")
    else:
        raise ConfigError(
            f"unknown scenario {name!r}; available: {', '.join(SCENARIO_NAMES)}")

    unknown = set(overrides) - set(base) - {"tableau", "beta", "nwb", "c0",
                                            "meshes", "t_end", "dt_policy"}
    if unknown:
        raise ConfigError(f"unknown scenario override(s): {sorted(unknown)}")
    base.update(overrides)
    if base.get("zeta") is None:
        eps = float(base["eps"])
        base["zeta"] = eps if name == "aoc-1d" else eps * eps
    base["n"] = tuple(base["n"])
    base["lo"] = tuple(base["lo"])
    base["hi"] = tuple(base["hi"])
    base["meshes"] = tuple(base.get("meshes") or ())
    return Scenario(name=name, **base)


# -- vortex closed forms -----------------------------------------------


def _theta_speed(r: np.ndarray, spec: VortexSpec) -> np.ndarray:
    return np.where(
        r <= spec.r1, spec.a1 * r,
        np.where(r <= spec.r2, spec.a2 + spec.a3 * r, 0.0))


def _speed_integral(r: np.ndarray, spec: VortexSpec) -> np.ndarray:
    """I(r) = integral_0^r u_theta(s)^2/s ds, in closed form."""
    a1, a2, a3 = spec.a1, spec.a2, spec.a3
    r1, r2 = spec.r1, spec.r2
    i1 = 0.5 * a1 * a1 * r1 * r1
    rm = np.clip(r, r1, r2)
    mid = (a2 * a2 * np.log(rm / r1) + 2.0 * a2 * a3 * (rm - r1)
           + 0.5 * a3 * a3 * (rm * rm - r1 * r1))
    inner = 0.5 * a1 * a1 * np.minimum(r, r1) ** 2
    return np.where(r <= r1, inner, i1 + mid)


def vortex_density(r: np.ndarray, eps: float,
                   spec: VortexSpec = VortexSpec()) -> np.ndarray:
    """rho = 1 + (eps^2/2)*I(r) - r^2/2: centrifugally corrected rest
    profile; equals the gamma=2 hydrostatic profile up to O(eps^2)."""
    r = np.asarray(r, dtype=float)
    return 1.0 + 0.5 * eps * eps * _speed_integral(r, spec) - 0.5 * r * r


def vortex_velocity(x: np.ndarray, y: np.ndarray,
                    spec: VortexSpec = VortexSpec()):
    """(u, v) of the rotating patch; (0, 0) at the center."""
    dx = np.asarray(x, dtype=float) - spec.center[0]
    dy = np.asarray(y, dtype=float) - spec.center[1]
    r = np.hypot(dx, dy)
    ut = _theta_speed(r, spec)
    with np.errstate(invalid="ignore", divide="ignore"):
        u = np.where(r > 0.0, ut * dy / r, 0.0)
        v = np.where(r > 0.0, -ut * dx / r, 0.0)
    return u, v


# -- initial states ----------------------------------------------------


def initial_state(scenario: Scenario, grid: Grid,
                  profile: EquilibriumProfile) -> State:
    """Initial data on the padded grid, ghosts filled."""
    st = State.zeros(grid)
    st.rho[...] = profile.rho_c
    kind = scenario.perturbation
    if kind == "none":
        pass
    elif kind == "gauss":
        if grid.dim == 1:
            x = grid.centers(0)
            psi = np.exp(-100.0 * (x - 0.5) ** 2)
        else:
            x, y = grid.meshgrid()
            psi = np.exp(-100.0 * ((x - 0.3) ** 2 + (y - 0.3) ** 2))
        st.rho[...] = profile.rho_c + scenario.zeta * psi
    elif kind == "riemann":
        x = grid.centers(0)
        jump = (x > 0.25) & (x <= 0.75)
        st.rho[...] = 1.0 + scenario.eps ** 2 * jump
        st.q[0][...] = 1.0
    elif kind == "vortex":
        spec = VortexSpec()
        x, y = grid.meshgrid()
        r = np.hypot(x - spec.center[0], y - spec.center[1])
        st.rho[...] = vortex_density(r, scenario.eps, spec)
        u, v = vortex_velocity(x, y, spec)
        st.q[0][...] = st.rho * u
        st.q[1][...] = st.rho * v
    else:
        raise ConfigError(f"unknown perturbation kind {kind!r}")
    apply_boundary(st, grid, scenario.boundary(),
                   equilibrium=None if scenario.nwb else profile)
    return st


def ill_prepared_state(grid: Grid, profile: EquilibriumProfile,
                       bc: BoundaryCondition, rho_amp: float = 0.05,
                       q_amp: float = 0.1) -> State:
    """Smooth data violating both balance constraints at O(1).

    The density offset and the velocity are built from the two lowest
    wall-compatible modes per axis (cosines for density, sines for
    momentum, both on a unit-normalized coordinate), with incommensurate
    amplitude mixes.  The fields are far from every equilibrium yet
    fully resolved, which is the regime the asymptotic-limit statements
    speak about; wall compatibility keeps the mirror ghost extension
    smooth so no boundary-layer artifact pollutes the limit.
    """
    st = State.zeros(grid)
    xi = [(c - grid.lo[a]) / (grid.hi[a] - grid.lo[a])
          for a, c in enumerate(grid.meshgrid())]
    mix = [1.0, 0.59]
    s = sum(m * (np.cos(np.pi * x) + 0.37 * np.cos(2.0 * np.pi * x))
            for m, x in zip(mix, xi))
    st.rho[...] = profile.rho_c * (1.0 + rho_amp * s)
    for m in range(grid.dim):
        axial = np.sin(np.pi * xi[m]) + 0.41 * np.sin(2.0 * np.pi * xi[m])
        for a in range(grid.dim):
            if a != m:
                axial = axial * (1.0 + 0.3 * np.cos(np.pi * xi[a]))
        st.q[m][...] = q_amp * axial
    apply_boundary(st, grid, bc, equilibrium=profile)
    return st


# -- analytic steady reference for the convergence study ---------------


def steady_reference(scenario: Scenario, grid: Grid) -> np.ndarray:
    """Limit steady density for the convergence case, on interior cells.

    The perturbed initial mass relaxes onto a hydrostatic profile from
    the same family with a shifted constant: solve
        F(c) = F(c0) + zeta*integral(psi)
    for c, where F(c) = c^(g/(g-1)) - (c-(g-1)/g)^(g/(g-1)) is the exact
    mass of the profile on [0, 1] with phi = x, and the Gaussian mass is
    sqrt(pi)/10*erf(5).  The limit velocity is zero.
    """
    if scenario.potential != "linear" or scenario.dim != 1:
        raise ConfigError("steady reference implemented for the 1D linear "
                          "potential only")
    g = scenario.gamma
    k = (g - 1.0) / g
    expo = g / (g - 1.0)

    def mass(c):
        return c ** expo - (c - k) ** expo

    psi_mass = math.sqrt(math.pi) / 10.0 * erf(5.0)
    target = mass(scenario.c0) + scenario.zeta * psi_mass
    c_star = brentq(lambda c: mass(c) - target,
                    scenario.c0, scenario.c0 + 10.0 * scenario.zeta + 1e-9,
                    xtol=1e-15, rtol=8.9e-16)
    x = grid.centers(0, ghosts=False)
    return (c_star - k * x) ** (1.0 / (g - 1.0))


# -- first-order explicit reference solver -----------------------------


def reference_explicit_solve(scenario: Scenario, n: int = 10000,
                             cfl: float = 0.1):
    """Fully explicit first-order run of a 1D scenario on its own fine
    mesh: Rusanov flux with the full acoustic wave speed
    |u| + sqrt(gamma*rho^(gamma-1))/eps, forward Euler in time.

    Returns (x_centers, rho, q) at t_end.  Meant for shock benchmarks;
    resolution and CFL default to the standard reference setup.
    """
    if scenario.dim != 1:
        raise ConfigError("the explicit reference solver is 1D only")
    grid = Grid(lo=scenario.lo, hi=scenario.hi, n=(n,))
    profile = scenario.profile(grid)
    bc = scenario.boundary()
    st = initial_state(replace(scenario, n=(n,)), grid, profile)
    eps = scenario.eps
    gam = scenario.gamma
    dx = grid.dx[0]
    inv_eps2 = 1.0 / (eps * eps)
    phi_c = profile.phi_c

    t = 0.0
    t_end = scenario.t_end
    while t < t_end - 1e-14 * max(1.0, t_end):
        rho = st.rho
        q = st.q[0]
        u = q / rho
        c = np.sqrt(gam * rho ** (gam - 1.0)) / eps
        smax = float(np.max(np.abs(u) + c))
        dt = cfl * dx / smax
        if t + dt > t_end:
            dt = t_end - t
        # Rusanov fluxes on cell values (first order)
        p = rho ** gam
        f1 = q
        f2 = q * u + p * inv_eps2
        a_f = np.maximum((np.abs(u) + c)[:-1], (np.abs(u) + c)[1:])
        flux1 = 0.5 * (f1[:-1] + f1[1:]) - 0.5 * a_f * (rho[1:] - rho[:-1])
        flux2 = 0.5 * (f2[:-1] + f2[1:]) - 0.5 * a_f * (q[1:] - q[:-1])
        ng = grid.ng
        m = grid.n[0]
        lam = dt / dx
        interior = slice(ng, ng + m)
        dphi = (phi_c[ng + 1:ng + m + 1] - phi_c[ng - 1:ng + m - 1]) / (2.0 * dx)
        st.rho[interior] = rho[interior] - lam * (flux1[ng:ng + m] - flux1[ng - 1:ng + m - 1])
        st.q[0][interior] = (q[interior]
                             - lam * (flux2[ng:ng + m] - flux2[ng - 1:ng + m - 1])
                             - dt * inv_eps2 * rho[interior] * dphi)
        apply_boundary(st, grid, bc, equilibrium=profile)
        if not np.all(np.isfinite(st.rho[interior])):
            raise ConfigError("reference solve produced non-finite values")
        t += dt
    x = grid.centers(0, ghosts=False)
    return x, st.rho[grid.interior].copy(), st.q[0][grid.interior].copy()
