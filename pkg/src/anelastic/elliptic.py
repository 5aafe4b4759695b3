"""Linear implicit step: a penalized Helmholtz solve for the density.

Eliminating the implicit momentum correction from the implicit mass
update couples density to itself through one symmetric-looking compact
operator per direction.  With y the deviation from the tabulated
equilibrium density, the system reads

    (A y)_i = y_i - sum_a c_a * (W_{f+} - W_{f-}) = rhs_i,
    W_f(y)  = (y_{f+1} - y_f)
              - 0.5*(y_f/rho_eq_f + y_{f+1}/rho_eq_{f+1}) * (rho_eq_{f+1} - rho_eq_f)

with c_a = (a_kk * dt / dx_a)^2 / eps^2 and f, f+1 the cells adjacent to
face f.  W is the compact counterpart of the penalization defect: it
vanishes identically on multiples of rho_eq, so equilibrium is in the
kernel of the correction and the solve returns y = 0 exactly for a zero
right-hand side.

Solving for the deviation instead of the density itself is deliberate:
near equilibrium the right-hand side is a small difference computed
directly, never the difference of two large solves, which keeps
well-balancing exact to the last bit.

A multiple of rho_eq in the right-hand side passes through the exact
operator untouched (W annihilates it), but feeding it to the linear
solver seeds rounding noise proportional to the operator condition
number times its amplitude, and the momentum correction amplifies that
noise at the largest scales.  solve_deviation therefore splits off the
least-squares rho_eq component, solves only for the remainder, and adds
the component back, so solver noise scales with the physically active
part of the data.  The split is skipped when a Dirichlet closure pins
the boundary value, because there rho_eq is not in the operator kernel.

Boundary closure per axis side:
  periodic                wrap the neighbor index; the face weights come
                          from the periodized equilibrium tabulation
  no-flux, extrapolation  the boundary face carries no W flux (for
                          no-flux this is exactly what the
                          equilibrium-scaled ghost mirror implies)
  dirichlet-equilibrium   ghost deviation is zero: the boundary face
                          stays in the diagonal, the ghost entry drops

The operator matrix depends only on the coefficients c_a and the frozen
equilibrium, so LU factorizations are cached.
"""

from __future__ import annotations

from typing import Dict, List, Tuple

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .equilibrium import EquilibriumProfile
from .mesh import BoundaryCondition, Grid


class SolverError(RuntimeError):
    """Raised when the numerical solution breaks down (non-finite data,
    loss of positivity, or an implicit solve that did not converge)."""


def _axis_sl(nd, axis, s):
    out = [slice(None)] * nd
    out[axis] = s
    return tuple(out)


def face_weights(profile: EquilibriumProfile, axis: int):
    """Per-face weights (wL, wR) of the compact operator along an axis.

    W_f(y) = wR_f*y_{f+1} - wL_f*y_f with
        wR_f = 1 - d_f/(2*rho_eq_{f+1}),  wL_f = 1 + d_f/(2*rho_eq_f),
        d_f  = rho_eq_{f+1} - rho_eq_f.

    Full padded face arrays (length n_tot-1 along the axis).
    """
    rho_eq = profile.rho_c
    nd = rho_eq.ndim
    d = profile.eqf_diff[axis]
    hi = rho_eq[_axis_sl(nd, axis, slice(1, None))]
    lo = rho_eq[_axis_sl(nd, axis, slice(None, -1))]
    wR = 1.0 - d / (2.0 * hi)
    wL = 1.0 + d / (2.0 * lo)
    return wL, wR


def assemble_operator(grid: Grid, profile: EquilibriumProfile,
                      bc: BoundaryCondition, coeffs: Tuple[float, ...]) -> sp.csr_matrix:
    """Sparse matrix of the deviation-form implicit operator.

    coeffs[a] = (a_kk*dt/dx_a)^2/eps^2.  Unknowns are interior cells in
    C order.  The matrix is an M-matrix for the grids and coefficients
    used here (strict diagonal dominance as long as the relative
    equilibrium jump per cell stays below 2).
    """
    if len(coeffs) != grid.dim:
        raise ValueError("one coefficient per axis required")
    n = tuple(grid.n)
    ng = grid.ng
    size = int(np.prod(n))
    idx = np.arange(size).reshape(n)
    diag = np.ones(n)
    rows: List[np.ndarray] = []
    cols: List[np.ndarray] = []
    vals: List[np.ndarray] = []

    for a in range(grid.dim):
        c = float(coeffs[a])
        if c == 0.0:
            continue
        wL, wR = face_weights(profile, a)
        # restrict transverse directions to interior cells
        for t in range(grid.dim):
            if t != a:
                tsl = _axis_sl(wL.ndim, t, slice(ng, ng + n[t]))
                wL = wL[tsl]
                wR = wR[tsl]
        m = n[a]
        # right face of cell j is face ng+j, left face is face ng+j-1
        plus = _axis_sl(wL.ndim, a, slice(ng, ng + m))
        minus = _axis_sl(wL.ndim, a, slice(ng - 1, ng + m - 1))
        wL_plus = wL[plus].copy()
        wR_plus = wR[plus]
        wL_minus = wL[minus]
        wR_minus = wR[minus].copy()

        lo_kind, hi_kind = bc.kinds[a]
        first = _axis_sl(grid.dim, a, slice(0, 1))
        last = _axis_sl(grid.dim, a, slice(m - 1, m))

        if hi_kind in ("no-flux", "extrapolation"):
            wL_plus[last] = 0.0          # boundary face carries no flux
        if lo_kind in ("no-flux", "extrapolation"):
            wR_minus[first] = 0.0
        diag += c * (wL_plus + wR_minus)

        # neighbor in the +a direction
        nbr = np.roll(idx, -1, axis=a)
        val = -c * wR_plus
        keep = np.ones(n, dtype=bool)
        if not bc.is_periodic(a):
            keep[last] = False           # dropped face or zero ghost
        rows.append(idx[keep])
        cols.append(nbr[keep])
        vals.append(val[keep])

        # neighbor in the -a direction
        nbr = np.roll(idx, 1, axis=a)
        val = -c * wL_minus
        keep = np.ones(n, dtype=bool)
        if not bc.is_periodic(a):
            keep[first] = False
        rows.append(idx[keep])
        cols.append(nbr[keep])
        vals.append(val[keep])

    rows.append(idx.ravel())
    cols.append(idx.ravel())
    vals.append(diag.ravel())
    mat = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(size, size))
    return mat.tocsr()


class HelmholtzSolver:
    """Factorization cache for the implicit density solve.

    The matrix depends on the coefficients c_a only (the equilibrium and
    boundary setup are frozen at construction), so repeated stages and
    steps with the same dt reuse one LU decomposition.
    """

    def __init__(self, grid: Grid, profile: EquilibriumProfile,
                 bc: BoundaryCondition, max_cached: int = 8,
                 residual_tol: float = 1e-10):
        self.grid = grid
        self.profile = profile
        self.bc = bc
        self.max_cached = max_cached
        self.residual_tol = residual_tol
        self.last_residual = 0.0
        self._cache: Dict[Tuple[float, ...], Tuple[sp.csr_matrix, spla.SuperLU]] = {}
        self._eq_flat = np.ascontiguousarray(
            profile.rho_c[grid.interior], dtype=float).ravel()
        self._eq_norm2 = float(self._eq_flat @ self._eq_flat)
        self._split_kernel = not any(
            k == "dirichlet-equilibrium" for pair in bc.kinds for k in pair)

    def coefficients(self, dt: float, a_kk: float, eps: float) -> Tuple[float, ...]:
        return tuple((a_kk * dt / dx) ** 2 / (eps * eps) for dx in self.grid.dx)

    def _factor(self, coeffs: Tuple[float, ...]):
        hit = self._cache.get(coeffs)
        if hit is not None:
            return hit
        mat = assemble_operator(self.grid, self.profile, self.bc, coeffs)
        try:
            lu = spla.splu(mat.tocsc())
        except RuntimeError as exc:
            raise SolverError(f"implicit operator factorization failed: {exc}") from exc
        norm = float(np.max(np.abs(mat).sum(axis=1)))
        if len(self._cache) >= self.max_cached:
            self._cache.pop(next(iter(self._cache)))
        self._cache[coeffs] = (mat, lu, norm)
        return mat, lu, norm

    def solve_deviation(self, rhs_dev: np.ndarray, dt: float, a_kk: float,
                        eps: float) -> np.ndarray:
        """Solve (I + c*L) y = rhs for the equilibrium deviation y.

        rhs_dev has interior shape and must already have the tabulated
        equilibrium subtracted.  Returns y with the same shape.  The
        relative residual of every solve is checked and kept in
        last_residual.
        """
        coeffs = self.coefficients(dt, a_kk, eps)
        mat, lu, norm = self._factor(coeffs)
        b = np.ascontiguousarray(rhs_dev, dtype=float).ravel()
        cbar = 0.0
        if self._split_kernel:
            cbar = float(b @ self._eq_flat) / self._eq_norm2
            if cbar != 0.0:
                b = b - cbar * self._eq_flat
        y = lu.solve(b)
        if not np.all(np.isfinite(y)):
            raise SolverError("implicit density solve produced non-finite values")
        # backward error: ||Ay-b|| / (||A||*||y|| + ||b||), ~1e-16 for a
        # healthy direct solve regardless of conditioning
        denom = norm * float(np.max(np.abs(y), initial=0.0)) \
            + float(np.max(np.abs(b), initial=0.0))
        if denom > 0.0:
            res = float(np.max(np.abs(mat @ y - b))) / denom
            self.last_residual = res
            if res > self.residual_tol:
                raise SolverError(
                    f"implicit density solve backward error {res:.3e} exceeds "
                    f"{self.residual_tol:.1e}")
        else:
            self.last_residual = 0.0
        if cbar != 0.0:
            y = y + cbar * self._eq_flat
        return y.reshape(rhs_dev.shape)
