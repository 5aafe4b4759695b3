"""Spatial discretization: reconstruction, fluxes, sources, stage operators.

Semi-discrete form treated here, per cell i and direction a (1D notation,
nu = dt/dx):

    mass      d rho_i = -nu * (G1_{i+1/2} - G1_{i-1/2})
    momentum  d q_i   = -[nu*(F2 - G2/eps^2) differences
                          + (dt/eps^2)*(S_i + St_i)]   (explicit part)
                        -(1/eps^2)*[nu*G2 differences - dt*St_i]  (implicit part)

with
    F2 at faces   Rusanov flux of q*u + p/eps^2 on hydrostatically
                  reconstructed traces, wave speed alpha = 2*max|u|
    G1, G2        plain central means of q and rho (no reconstruction)
    S_i           -p_i*exp(-H_i) * (expH_{i+1/2} - expH_{i-1/2}) / dx
    St_i          (rho_i/rho_eq_i) * (rho_eq_{i+1} - rho_eq_{i-1}) / (2 dx)

The stage operators are evaluated and cached as three fused cell fields:

    mass_div   sum_a nu_a * delta_a(G1)
    brackets   explicit momentum bracket  = sum over directions of
               nu*delta(F2_advective) + (nu/eps^2)*PG - (1/eps^2)*pen
    pen        nu * [delta(G2) - (rho/rho_eq)*delta(face-mean rho_eq)]

where PG = delta(face-mean pressure) + dx*S fuses the pressure gradient
with the gravity source.  PG and pen are exactly zero (bitwise) on the
tabulated equilibrium: every term is then the same floating-point
expression subtracted from itself.  Keeping the cancellation exact
matters because both defects are divided by eps^2.

Both stiff defects are additionally evaluated in deviation form.  The
balanced variable is carried as w1 = scale*(1 + v) with v built via
expm1/log1p from the relative density deviation, and pen is computed on
the component of rho - rho_eq orthogonal to rho_eq (the defect is linear
and annihilates multiples of rho_eq, so the dropped part is exactly
zero).  This is algebraically identical to the direct expressions, but
the rounding noise of each defect is then proportional to the distance
from equilibrium rather than to the fields themselves.  Without this,
the 1/eps^2 amplification of roundoff on O(1) fields floors the
velocity at eps^{-2}*ulp per step, which buries the asymptotic limit
for small eps; with it, the same limit is resolved down to the floor
set by the deviation magnitude.

The non-well-balanced (nwb) variant reconstructs primitive (rho, u)
instead of (w1, u) and uses the plain central gravity source
rho_i*(phi_{i+1}-phi_{i-1})/(2 dx); its penalization part is unchanged.
St at cell i is evaluated as the difference of face means of rho_eq,
algebraically identical to the wide central difference above.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional

import numpy as np

from .equilibrium import EquilibriumProfile
from .mesh import Grid, State, mu


def _sl(nd, axis, s):
    out = [slice(None)] * nd
    out[axis] = s
    return tuple(out)


def limited_slopes(var: np.ndarray, axis: int) -> np.ndarray:
    """Central slopes per cell; zero in the outermost cells.

    Unlimited central differences keep the reconstruction second order
    everywhere, including at smooth extrema.  Slope clipping there feeds
    O(dx**2) kinks into source terms that are later divided by eps**2,
    which wrecks the convergence of near-equilibrium runs, while the
    discontinuities of the moving-jump scenario stay mild enough for the
    diffusive flux to handle on its own.
    """
    nd = var.ndim
    out = np.zeros_like(var)
    fwd = var[_sl(nd, axis, slice(2, None))] - var[_sl(nd, axis, slice(1, -1))]
    bwd = var[_sl(nd, axis, slice(1, -1))] - var[_sl(nd, axis, slice(None, -2))]
    out[_sl(nd, axis, slice(1, -1))] = 0.5 * (bwd + fwd)
    return out


def _traces(var: np.ndarray, slopes: np.ndarray, axis: int):
    """Left/right states at every face f between cells f and f+1.

    Valid where both adjacent cells have slopes, i.e. faces 1 .. len-3
    of the padded axis; that range covers every face of every interior
    cell when the ghost width is 2.
    """
    nd = var.ndim
    lo = _sl(nd, axis, slice(None, -1))
    hi = _sl(nd, axis, slice(1, None))
    minus = var[lo] + 0.5 * slopes[lo]
    plus = var[hi] - 0.5 * slopes[hi]
    return minus, plus


@dataclass
class Traces:
    """Reconstructed interface states along one axis (face arrays).

    The well-balanced path carries the balanced variable in centered
    form: w1 = scale*(1 + v) with a state-wide constant scale, cell
    values vc (padded) and face traces vm/vp.  Working with v instead of
    w1 keeps every balanced-variable difference accurate relative to the
    deviation itself, which matters wherever a difference is later
    divided by eps^2.
    """

    axis: int
    rhom: np.ndarray
    rhop: np.ndarray
    pm: np.ndarray
    pp: np.ndarray
    unm: np.ndarray
    unp: np.ndarray
    utm: Optional[np.ndarray] = None   # transverse velocity, 2D only
    utp: Optional[np.ndarray] = None
    vc: Optional[np.ndarray] = None    # centered balanced deviation (wb)
    vm: Optional[np.ndarray] = None
    vp: Optional[np.ndarray] = None
    scale: float = 1.0


def reconstruct(state: State, grid: Grid, profile: EquilibriumProfile,
                axis: int, nwb: bool = False,
                dev: Optional[np.ndarray] = None,
                base: float = 0.0) -> Traces:
    """Piecewise-linear traces at faces along one axis.

    The well-balanced path reconstructs (w1, u) with w1 = p*exp(-H) and
    recovers pressure and density through the face values of exp(H); on
    equilibrium data w1 is exactly constant, so all traces coincide.
    w1 is evaluated as scale*(1 + v), v = expm1(gamma*log1p(.)) on the
    density ratio relative to a constant reference offset: exactly
    p/p_eq in exact arithmetic, but with rounding proportional to the
    local deviation rather than to w1 itself.  Callers that track the
    density deviation exactly pass it as dev (padded, ghosts current);
    otherwise it is recovered from the state, which is lossless but
    inherits whatever rounding the stored density carries.  base is an
    equilibrium-proportional density offset held out of dev (the full
    density is (1+base)*rho_eq + dev); it only shifts the constant
    reference of the ratio map.
    """
    gam = profile.gamma
    rho = state.rho
    un_c = state.q[axis] / rho
    s_un = limited_slopes(un_c, axis)
    unm, unp = _traces(un_c, s_un, axis)

    if nwb:
        s_r = limited_slopes(rho, axis)
        rhom, rhop = _traces(rho, s_r, axis)
        pm = rhom ** gam
        pp = rhop ** gam
        vc = vm = vp = None
        scale = 1.0
    else:
        if dev is None:
            dev = rho - profile.rho_c
        r_dev = dev / profile.rho_c
        r0 = float(np.mean(r_dev))
        ref = 1.0 + base + r0
        vc = np.expm1(gam * np.log1p((r_dev - r0) / ref))
        scale = ref ** gam
        s_v = limited_slopes(vc, axis)
        vm, vp = _traces(vc, s_v, axis)
        eh = profile.exph_f[axis]
        pm = eh * (scale * (1.0 + vm))
        pp = eh * (scale * (1.0 + vp))
        inv_gam = 1.0 / gam
        rhom = pm ** inv_gam
        rhop = pp ** inv_gam

    out = Traces(axis=axis, rhom=rhom, rhop=rhop, pm=pm, pp=pp,
                 unm=unm, unp=unp, vc=vc, vm=vm, vp=vp, scale=scale)
    if grid.dim == 2:
        t = 1 - axis
        ut_c = state.q[t] / rho
        s_ut = limited_slopes(ut_c, axis)
        out.utm, out.utp = _traces(ut_c, s_ut, axis)
    return out


def rusanov_momentum_flux(tr: Traces):
    """Rusanov momentum fluxes on reconstructed traces.

    Returns (f2k, f2p, f2t, alpha): kinetic part with diffusion, face
    mean pressure (to be divided by eps^2 by the caller), transverse
    advective flux (None in 1D), and the local wave speed
    alpha = 2*max(|u-|, |u+|).  The split keeps the stiff pressure part
    separate so it can cancel exactly against the gravity source.
    """
    qnm = tr.rhom * tr.unm
    qnp = tr.rhop * tr.unp
    alpha = 2.0 * np.maximum(np.abs(tr.unm), np.abs(tr.unp))
    f2k = 0.5 * (qnm * tr.unm + qnp * tr.unp) - 0.5 * alpha * (qnp - qnm)
    f2p = 0.5 * (tr.pm + tr.pp)
    f2t = None
    if tr.utm is not None:
        qtm = tr.rhom * tr.utm
        qtp = tr.rhop * tr.utp
        f2t = 0.5 * (qtm * tr.unm + qtp * tr.unp) - 0.5 * alpha * (qtp - qtm)
    return f2k, f2p, f2t, alpha


def central_fluxes(state: State, axis: int):
    """Face means of momentum and density: G1 = mu(q_a), G2 = mu(rho).

    Raw cell averages, deliberately without reconstruction; these carry
    the implicit (stiff) part of the system.
    """
    return mu(state.q[axis], axis=axis), mu(state.rho, axis=axis)


def grav_source(state: State, profile: EquilibriumProfile, axis: int,
                nwb: bool = False) -> np.ndarray:
    """Gravity source S per cell (full padded shape, valid off the rim).

    Well-balanced form: S_i = -p_i*exp(-H_i)*(expH_f+ - expH_f-)/dx.
    nwb form: S_i = rho_i*(phi_{i+1} - phi_{i-1})/(2 dx).
    """
    g = profile.grid
    nd = state.rho.ndim
    dx = g.dx[axis]
    out = np.zeros_like(state.rho)
    mid = _sl(nd, axis, slice(1, -1))
    if nwb:
        up = _sl(nd, axis, slice(2, None))
        dn = _sl(nd, axis, slice(None, -2))
        out[mid] = state.rho[mid] * (profile.phi_c[up] - profile.phi_c[dn]) / (2.0 * dx)
    else:
        w1 = state.rho ** profile.gamma / profile.exph_c
        eh = profile.exph_f[axis]
        hi = _sl(nd, axis, slice(1, None))
        lo = _sl(nd, axis, slice(None, -1))
        out[mid] = -w1[mid] * (eh[hi] - eh[lo]) / dx
    return out


def penalization_source(state: State, profile: EquilibriumProfile,
                        axis: int) -> np.ndarray:
    """Penalization source St_i = (rho_i/rho_eq_i)*delta(face-mean rho_eq)/dx.

    Equal to (rho_i/rho_eq_i)*(rho_eq_{i+1}-rho_eq_{i-1})/(2 dx) in exact
    arithmetic.  Full padded shape, valid off the rim.
    """
    g = profile.grid
    nd = state.rho.ndim
    dx = g.dx[axis]
    out = np.zeros_like(state.rho)
    mid = _sl(nd, axis, slice(1, -1))
    fm = profile.eqf_mean[axis]
    hi = _sl(nd, axis, slice(1, None))
    lo = _sl(nd, axis, slice(None, -1))
    ratio = state.rho / profile.rho_c
    out[mid] = ratio[mid] * (fm[hi] - fm[lo]) / dx
    return out


@dataclass
class StageOps:
    """Cached per-stage operator evaluations on interior cells.

    mass_div   sum_a nu_a*delta_a(G1):      shape (*n,)
    brackets   explicit momentum brackets:  shape (dim, *n)
    pen        penalization defects (nu included, one per component):
               shape (dim, *n)
    raw        optional per-axis face/source arrays for diagnostics
    """

    mass_div: np.ndarray
    brackets: np.ndarray
    pen: np.ndarray
    raw: Optional[List[Dict[str, np.ndarray]]] = None


def _face_delta_interior(face_arr: np.ndarray, grid: Grid, axis: int) -> np.ndarray:
    """delta of a full face array evaluated on interior cells."""
    ng = grid.ng
    nd = face_arr.ndim
    sl_hi = []
    sl_lo = []
    for a in range(nd):
        if a == axis:
            sl_hi.append(slice(ng, ng + grid.n[a]))
            sl_lo.append(slice(ng - 1, ng + grid.n[a] - 1))
        else:
            sl_hi.append(slice(ng, ng + grid.n[a]))
            sl_lo.append(slice(ng, ng + grid.n[a]))
    return face_arr[tuple(sl_hi)] - face_arr[tuple(sl_lo)]


def _cell_interior(arr: np.ndarray, grid: Grid) -> np.ndarray:
    return arr[grid.interior]


def penalization_defect(dev: np.ndarray, profile: EquilibriumProfile,
                        axis: int, nu: float) -> np.ndarray:
    """pen = nu*[delta(mu(rho)) - (rho/rho_eq)*delta(mu(rho_eq))] on interior.

    Takes the padded density deviation dev = rho - rho_eq (ghosts
    current).  The defect is linear in rho and annihilates every
    multiple of the equilibrium profile, so it is evaluated on the
    projected deviation dd = dev - c*rho_eq with c the least-squares
    coefficient of dev on rho_eq.  Algebraically identical to the raw
    form (the dropped c-term is exactly zero), but the rounding floor
    scales with the deviation instead of with rho itself, which matters
    when the caller divides by eps^2.  Bitwise zero on equilibrium data.
    """
    g = profile.grid
    c = float(np.sum(dev * profile.rho_c) /
              np.sum(profile.rho_c * profile.rho_c))
    dd = dev - c * profile.rho_c
    dg2 = _face_delta_interior(mu(dd, axis=axis), g, axis)
    dfm = _face_delta_interior(profile.eqf_mean[axis], g, axis)
    ratio = _cell_interior(dd / profile.rho_c, g)
    return nu * (dg2 - ratio * dfm)


def explicit_stage_operators(state: State, grid: Grid, profile: EquilibriumProfile,
                             eps: float, dt: float, nwb: bool = False,
                             keep_raw: bool = False,
                             dev: Optional[np.ndarray] = None,
                             base: float = 0.0) -> StageOps:
    """Evaluate and bundle every explicit operator for one stage state.

    Ghost cells of the state must be current.  All arrays are interior
    shaped; nu_a = dt/dx_a is folded in, so stage predictors are plain
    linear combinations of these caches.  dev is the padded density
    deviation used by the stiff defects; when omitted it is recovered
    from the state.  base is the equilibrium-proportional offset held
    out of dev by deviation-tracking callers.
    """
    dim = grid.dim
    n = tuple(grid.n)
    inv_eps2 = 1.0 / (eps * eps)
    mass_div = np.zeros(n)
    brackets = np.zeros((dim,) + n)
    pen = np.zeros((dim,) + n)
    raw: Optional[List[Dict[str, np.ndarray]]] = [] if keep_raw else None
    if dev is None:
        dev = state.rho - profile.rho_c

    for axis in range(dim):
        nu = dt / grid.dx[axis]
        tr = reconstruct(state, grid, profile, axis, nwb=nwb, dev=dev,
                         base=base)
        f2k, f2p, f2t, alpha = rusanov_momentum_flux(tr)
        g1, g2 = central_fluxes(state, axis)

        mass_div += nu * _face_delta_interior(g1, grid, axis)

        # pressure-gravity defect PG = delta(f2p) + dx*S
        if nwb:
            # dx*S with S the central phi gradient: rho_i*(phi_{i+1}-phi_{i-1})/2
            d_f2p = _face_delta_interior(f2p, grid, axis)
            dphi = _face_delta_interior(
                mu(profile.phi_c, axis=axis), grid, axis)
            pg = d_f2p + _cell_interior(state.rho, grid) * dphi
        else:
            # algebraically delta(f2p) - w1_i*delta(exph_f), factored so
            # the constant part of w1 = scale*(1 + v) cancels exactly
            eh = profile.exph_f[axis]
            vbar = 0.5 * (tr.vm + tr.vp)
            d_ev = _face_delta_interior(eh * vbar, grid, axis)
            d_eh = _face_delta_interior(eh, grid, axis)
            pg = tr.scale * (d_ev - _cell_interior(tr.vc, grid) * d_eh)

        pen_a = penalization_defect(dev, profile, axis, nu)
        pen[axis] += pen_a

        brackets[axis] += nu * _face_delta_interior(f2k, grid, axis) \
            + (nu * inv_eps2) * pg - inv_eps2 * pen_a
        if dim == 2:
            t = 1 - axis
            brackets[t] += nu * _face_delta_interior(f2t, grid, axis)

        if keep_raw:
            raw.append({
                "f2k": f2k, "f2p": f2p, "f2t": f2t, "alpha": alpha,
                "f2": f2k + f2p * inv_eps2,
                "g1": g1, "g2": g2,
                "s_grav": grav_source(state, profile, axis, nwb=nwb),
                "s_pen": penalization_source(state, profile, axis),
                "pg": pg, "pen": pen_a, "traces": tr,
            })

    return StageOps(mass_div=mass_div, brackets=brackets, pen=pen, raw=raw)
