"""IMEX Runge-Kutta tableaux: storage, classification, order checks.

A double Butcher tableau pairs an explicit method (strictly lower
triangular A_expl) with a diagonally implicit one (lower triangular
A_impl).  Conventions used by the stepper:

  type A    A_impl is invertible (every diagonal entry nonzero), so
            every stage solves an implicit problem.
  type CK   the first row of A_impl is zero and the trailing
            (s-1) x (s-1) block is invertible: stage 1 is explicit.
  GSA       the last row of each part equals its weight vector exactly,
            so the final update coincides with the last stage.

Additive order-2 conditions, with w = weights and c = abscissae:
  sum(w_expl) = 1, sum(w_impl) = 1                            (order 1)
  w_expl.c_expl = w_impl.c_impl = w_expl.c_impl
    = w_impl.c_expl = 1/2                                     (order 2)
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

from .mesh import ConfigError

BUILTIN_TABLEAUX = ("ARS(1,1,1)", "DP-A(1,2,1)", "DP2-A(2,4,2)")


@dataclass(frozen=True)
class ImexTableau:
    name: str
    a_expl: np.ndarray
    w_expl: np.ndarray
    c_expl: np.ndarray
    a_impl: np.ndarray
    w_impl: np.ndarray
    c_impl: np.ndarray

    def __post_init__(self):
        s = self.stages
        for m in (self.a_expl, self.a_impl):
            if m.shape != (s, s):
                raise ConfigError("tableau blocks must be square and matched")
        for v in (self.w_expl, self.c_expl, self.w_impl, self.c_impl):
            if v.shape != (s,):
                raise ConfigError("tableau vectors must have one entry per stage")
        if np.any(np.triu(self.a_expl) != 0.0):
            raise ConfigError("explicit part must be strictly lower triangular")
        if np.any(np.triu(self.a_impl, 1) != 0.0):
            raise ConfigError("implicit part must be lower triangular")
        for a, c, label in ((self.a_expl, self.c_expl, "explicit"),
                            (self.a_impl, self.c_impl, "implicit")):
            if not np.allclose(a.sum(axis=1), c, rtol=0.0, atol=1e-14):
                raise ConfigError(f"{label} row sums must equal the abscissae")

    @property
    def stages(self) -> int:
        return self.a_expl.shape[0]


@dataclass(frozen=True)
class TableauClassification:
    type_a: bool
    type_ck: bool
    gsa: bool


def classify(tab: ImexTableau) -> TableauClassification:
    """Structural classification; GSA is tested with zero tolerance."""
    diag = np.diag(tab.a_impl)
    type_a = bool(np.all(diag != 0.0))
    s = tab.stages
    type_ck = bool(
        s >= 2
        and np.all(tab.a_impl[0, :] == 0.0)
        and np.all(np.diag(tab.a_impl)[1:] != 0.0)
    )
    gsa = bool(
        np.all(tab.a_expl[s - 1, :] == tab.w_expl)
        and np.all(tab.a_impl[s - 1, :] == tab.w_impl)
    )
    return TableauClassification(type_a=type_a, type_ck=type_ck, gsa=gsa)


def order_check(tab: ImexTableau) -> Dict[str, float]:
    """Residuals of the additive order conditions (zero means satisfied).

    Returns a dict of named residuals plus 'order', the classical
    additive order achieved at tolerance 1e-14.
    """
    we, ce = tab.w_expl, tab.c_expl
    wi, ci = tab.w_impl, tab.c_impl
    res = {
        "sum_w_expl": float(abs(we.sum() - 1.0)),
        "sum_w_impl": float(abs(wi.sum() - 1.0)),
        "we_ce": float(abs(we @ ce - 0.5)),
        "wi_ci": float(abs(wi @ ci - 0.5)),
        "we_ci": float(abs(we @ ci - 0.5)),
        "wi_ce": float(abs(wi @ ce - 0.5)),
    }
    tol = 1e-14
    order = 0
    if res["sum_w_expl"] <= tol and res["sum_w_impl"] <= tol:
        order = 1
        if all(res[k] <= tol for k in ("we_ce", "wi_ci", "we_ci", "wi_ce")):
            order = 2
    res["order"] = order
    return res


def builtin(name: str, beta: Optional[float] = None) -> ImexTableau:
    """Built-in tableau by name.

    beta applies to the DP variants; the default is 0.7.  DP-A(1,2,1)
    requires beta > 1/2; DP2-A(2,4,2) accepts any nonzero beta (0.7 is
    the recommended value, 0.5 is useful for extra damping).
    """
    arr = lambda *rows: np.array(rows, dtype=float)
    if name == "ARS(1,1,1)":
        if beta is not None:
            raise ConfigError("ARS(1,1,1) has no beta parameter")
        return ImexTableau(
            name=name,
            a_expl=arr([0.0, 0.0], [1.0, 0.0]),
            w_expl=np.array([1.0, 0.0]),
            c_expl=np.array([0.0, 1.0]),
            a_impl=arr([0.0, 0.0], [0.0, 1.0]),
            w_impl=np.array([0.0, 1.0]),
            c_impl=np.array([0.0, 1.0]),
        )
    if name == "DP-A(1,2,1)":
        b = 0.7 if beta is None else float(beta)
        if not b > 0.5:
            raise ConfigError("DP-A(1,2,1) needs beta > 1/2")
        return ImexTableau(
            name=name,
            a_expl=arr([0.0, 0.0], [1.0, 0.0]),
            w_expl=np.array([1.0, 0.0]),
            c_expl=np.array([0.0, 1.0]),
            a_impl=arr([b, 0.0], [1.0 - b, b]),
            w_impl=np.array([1.0 - b, b]),
            c_impl=np.array([b, 1.0]),
        )
    if name == "DP2-A(2,4,2)":
        b = 0.7 if beta is None else float(beta)
        if b == 0.0:
            raise ConfigError("DP2-A(2,4,2) needs nonzero beta")
        return ImexTableau(
            name=name,
            a_expl=arr([0.0, 0.0, 0.0, 0.0],
                       [0.0, 0.0, 0.0, 0.0],
                       [0.0, 1.0, 0.0, 0.0],
                       [0.0, 0.5, 0.5, 0.0]),
            w_expl=np.array([0.0, 0.5, 0.5, 0.0]),
            c_expl=np.array([0.0, 0.0, 1.0, 1.0]),
            a_impl=arr([b, 0.0, 0.0, 0.0],
                       [-b, b, 0.0, 0.0],
                       [0.0, 1.0 - b, b, 0.0],
                       [0.0, 0.5, 0.5 - b, b]),
            w_impl=np.array([0.0, 0.5, 0.5 - b, b]),
            c_impl=np.array([b, 0.0, 1.0, 1.0]),
        )
    raise ConfigError(f"unknown tableau {name!r}; built-ins: {', '.join(BUILTIN_TABLEAUX)}")
