"""Forward model: exterior-data Dirichlet problem and flux evaluation.

Given a nonnegative potential ``f`` on the bulk nodes and an exterior
datum ``phi``, the discrete state ``u`` satisfies

* ``(A u)_i + f_i u_i = 0`` for every bulk node ``i`` (``A`` the
  discrete fractional Laplacian),
* ``u_i = phi_i`` at every node outside the bulk.

Writing ``u = v + phi`` with ``v`` supported on the bulk nodes turns this
into the symmetric positive-definite system

``(A_bb + diag f) v_b = -(A phi)|_b``,

solved by a dense Cholesky factorization with an explicit residual check.
The observable is the nonlocal flux ``dn = (A u)|_dd`` on the measurement
nodes, evaluated at off-grid points by linear interpolation between the
two bracketing measurement nodes.  Measurement points must stay one mesh
cell away from the four boundary points of the measurement set so that
both bracketing nodes exist.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve, toeplitz

from .grid import GridFunction, GridSpec, RegionMap
from .operator import FracOperator, _apply_direct

__all__ = [
    "SolveError",
    "Potential",
    "ForwardSolution",
    "DirichletSolver",
    "ForwardModel",
    "solve_dirichlet",
    "dn_on_grid",
    "eval_G",
    "admissible_intervals",
]

RESIDUAL_TOL = 1e-10


class SolveError(RuntimeError):
    """Raised when the Dirichlet solve fails or its residual is too large."""


@dataclass
class Potential:
    """Nonnegative potential values on the bulk (omega) nodes.

    ``background`` records the value the potential takes outside the
    observation window; the parameter space keeps it fixed at 1.  An
    optional ``cap`` enforces an upper bound at construction (set when
    the potential comes through a bounded link function).
    """

    values: np.ndarray
    background: float = 1.0
    cap: float | None = None

    def __post_init__(self) -> None:
        vals = np.asarray(self.values, dtype=float)
        if not np.isfinite(vals).all():
            raise ValueError("potential values must be finite")
        if (vals < 0).any():
            raise ValueError(f"potential values must be nonnegative, min was {vals.min()!r}")
        if self.cap is not None and (vals > self.cap).any():
            raise ValueError(f"potential values exceed the cap {self.cap!r}")
        self.values = vals


@dataclass
class ForwardSolution:
    """State of one forward solve.

    ``u`` is the full state (datum plus response), ``v = u - phi`` its
    bulk-supported part, and ``dn`` the cached flux on the measurement
    nodes (filled by :func:`dn_on_grid`).
    """

    u: GridFunction
    v: GridFunction
    dn: np.ndarray | None = None


def _dn_from_parts(a_ddo: np.ndarray, aphi_dd: np.ndarray, v_om: np.ndarray) -> np.ndarray:
    """Flux on measurement nodes from the bulk response and datum parts."""
    return a_ddo @ v_om + aphi_dd


class DirichletSolver:
    """Caches everything reusable across solves with varying potentials.

    The bulk submatrix, the datum contributions to the right-hand side and
    to the flux, and the bulk/measurement coupling block depend only on
    the operator, the datum, and the regions; each solve then costs one
    Cholesky factorization of ``A_bb + diag f``.
    """

    def __init__(self, op: FracOperator, phi: GridFunction, regions: RegionMap) -> None:
        spec = op.spec
        if phi.spec != spec:
            raise ValueError("datum grid does not match operator grid")
        om = regions.omega
        if om.size == 0:
            raise ValueError("bulk region contains no interior nodes")
        if not (np.diff(om) == 1).all():
            raise ValueError("bulk node indices must be contiguous")
        if (phi.at(om) != 0).any():
            raise ValueError("exterior datum must vanish on all bulk nodes")
        self.op = op
        self.regions = regions
        self.a_oo = toeplitz(op.symbol[: om.size])
        self.a_ddo = op.symbol[np.abs(regions.dd[:, None] - om[None, :])]
        aphi = _apply_direct(op.symbol, phi.values)
        self.rhs = -aphi[om - 1]
        self.aphi_dd = aphi[regions.dd - 1]
        self._rhs_norm = float(np.linalg.norm(self.rhs))
        self.phi = phi

    def solve_values(self, f_om: np.ndarray) -> np.ndarray:
        """Bulk response ``v`` for potential values ``f_om`` on the bulk nodes.

        Raises
        ------
        SolveError
            If the factorization fails or the verified residual exceeds
            ``1e-10 * (1 + ||rhs||)``.
        """
        n = self.rhs.size
        mat = self.a_oo.copy()
        mat.flat[:: n + 1] += f_om
        try:
            factor = cho_factor(mat, lower=True, overwrite_a=True, check_finite=False)
        except LinAlgError as exc:
            raise SolveError(f"Cholesky factorization failed: {exc}") from exc
        v = cho_solve(factor, self.rhs, check_finite=False)
        residual = self.a_oo @ v + f_om * v - self.rhs
        res_norm = float(np.linalg.norm(residual))
        if not res_norm <= RESIDUAL_TOL * (1.0 + self._rhs_norm):
            raise SolveError(
                f"solve residual {res_norm:.3e} exceeds {RESIDUAL_TOL:.0e} * (1 + ||rhs||)"
            )
        return v

    def dn_values(self, v_om: np.ndarray) -> np.ndarray:
        """Flux on the measurement nodes for a given bulk response."""
        return _dn_from_parts(self.a_ddo, self.aphi_dd, v_om)

    def solution(self, v_om: np.ndarray) -> ForwardSolution:
        """Package a bulk response as a full :class:`ForwardSolution`."""
        spec = self.op.spec
        v_full = np.zeros(spec.n_interior)
        v_full[self.regions.omega - 1] = v_om
        u = v_full + self.phi.values
        return ForwardSolution(u=GridFunction(spec, u), v=GridFunction(spec, v_full))


def solve_dirichlet(
    f: Potential, phi: GridFunction, op: FracOperator, regions: RegionMap
) -> ForwardSolution:
    """Solve the exterior-data Dirichlet problem for one potential.

    Parameters
    ----------
    f : Potential
        Nonnegative values on the bulk nodes (one per node in
        ``regions.omega``).
    phi : GridFunction
        Exterior datum; must vanish on every bulk node.
    op : FracOperator
        The discrete fractional Laplacian.
    regions : RegionMap
        Region bookkeeping for the grid.

    Returns
    -------
    ForwardSolution

    Raises
    ------
    ValueError
        On shape mismatches or a datum that does not vanish on the bulk.
    SolveError
        If the factorization fails or the residual check is violated.
    """
    solver = DirichletSolver(op, phi, regions)
    if f.values.shape != (regions.omega.size,):
        raise ValueError(
            f"potential needs {regions.omega.size} bulk values, got shape {f.values.shape}"
        )
    return solver.solution(solver.solve_values(f.values))


def dn_on_grid(sol: ForwardSolution, op: FracOperator, regions: RegionMap) -> np.ndarray:
    """Nonlocal flux ``(A u)`` restricted to the measurement nodes.

    The result is cached on ``sol.dn``.  The computation reuses the
    block decomposition of the cached solver path (bulk coupling plus
    datum part), so repeated evaluations are bit-identical.
    """
    if sol.dn is None:
        v_om = sol.v.at(regions.omega)
        phi_vals = sol.u.values - sol.v.values
        a_ddo = op.symbol[np.abs(regions.dd[:, None] - regions.omega[None, :])]
        aphi_dd = _apply_direct(op.symbol, phi_vals)[regions.dd - 1]
        sol.dn = _dn_from_parts(a_ddo, aphi_dd, v_om)
    return sol.dn


def admissible_intervals(spec: GridSpec, regions: RegionMap) -> tuple[tuple[float, float], tuple[float, float]]:
    """Evaluation intervals: the measurement set shrunk by one mesh cell.

    Returns the coordinate spans of the two measurement-node blocks; every
    point inside them has both interpolation neighbours on measurement
    nodes.
    """
    dd = regions.dd
    gaps = np.nonzero(np.diff(dd) != 1)[0]
    if gaps.size != 1:
        raise ValueError("measurement set must consist of exactly two node blocks")
    left = dd[: gaps[0] + 1]
    right = dd[gaps[0] + 1 :]
    x = spec.node_x
    return (float(x(left[0])), float(x(left[-1]))), (float(x(right[0])), float(x(right[-1])))


@dataclass
class InterpPlan:
    """Precomputed linear-interpolation stencil for fixed evaluation points."""

    x: np.ndarray
    left: np.ndarray
    weight: np.ndarray


class ForwardModel:
    """Potential-to-measurement map ``f -> G(f)(x)``.

    Bundles the cached solver with the interpolation machinery used by
    data generation and likelihood evaluation, so both consume the exact
    same arithmetic path.
    """

    def __init__(self, op: FracOperator, phi: GridFunction, regions: RegionMap) -> None:
        self.op = op
        self.regions = regions
        self.solver = DirichletSolver(op, phi, regions)
        self.x_dd = op.spec.node_x(regions.dd)
        self.blocks = admissible_intervals(op.spec, regions)

    @property
    def spec(self) -> GridSpec:
        return self.op.spec

    def prepare(self, x) -> InterpPlan:
        """Validate evaluation points and build their interpolation stencil.

        Raises
        ------
        ValueError
            If any point leaves the admissible evaluation set (the
            measurement set shrunk by one mesh cell at each boundary).
        """
        pts = np.atleast_1d(np.asarray(x, dtype=float))
        (a1, b1), (a2, b2) = self.blocks
        ok = ((pts >= a1) & (pts <= b1)) | ((pts >= a2) & (pts <= b2))
        if not ok.all():
            bad = pts[~ok][0]
            raise ValueError(
                f"evaluation point {bad!r} outside admissible set [{a1}, {b1}] u [{a2}, {b2}]"
            )
        left = np.searchsorted(self.x_dd, pts, side="right") - 1
        left = np.clip(left, 0, self.x_dd.size - 2)
        # points on a node must return the nodal value exactly, including
        # the final node, where the clip puts them at the right stencil end
        weight = np.where(
            pts == self.x_dd[left + 1], 1.0, (pts - self.x_dd[left]) / self.spec.h
        )
        return InterpPlan(x=pts, left=left, weight=weight)

    def predict_values(self, f_om: np.ndarray, plan: InterpPlan) -> np.ndarray:
        """Evaluate ``G(f)`` at prepared points for bulk potential values."""
        dn = self.solver.dn_values(self.solver.solve_values(f_om))
        return (1.0 - plan.weight) * dn[plan.left] + plan.weight * dn[plan.left + 1]

    def predict(self, f: Potential, x) -> np.ndarray:
        """Evaluate ``G(f)`` at points ``x`` (validating admissibility)."""
        return self.predict_values(f.values, self.prepare(x))


def eval_G(sol: ForwardSolution, x, regions: RegionMap):
    """Evaluate the flux of a solved state at point(s) ``x`` in the
    admissible evaluation set.

    Uses linear interpolation between the two bracketing measurement
    nodes; a point exactly on a node returns that node's flux value.
    Requires ``sol.dn`` to be populated (call :func:`dn_on_grid` first).

    Raises
    ------
    ValueError
        If the flux cache is missing or ``x`` leaves the admissible set.
    """
    if sol.dn is None:
        raise ValueError("solution has no cached flux; call dn_on_grid(sol, op, regions) first")
    spec = sol.u.spec
    (a1, b1), (a2, b2) = admissible_intervals(spec, regions)
    pts = np.atleast_1d(np.asarray(x, dtype=float))
    ok = ((pts >= a1) & (pts <= b1)) | ((pts >= a2) & (pts <= b2))
    if not ok.all():
        bad = pts[~ok][0]
        raise ValueError(f"evaluation point {bad!r} outside admissible set [{a1}, {b1}] u [{a2}, {b2}]")
    x_dd = spec.node_x(regions.dd)
    left = np.clip(np.searchsorted(x_dd, pts, side="right") - 1, 0, x_dd.size - 2)
    w = np.where(pts == x_dd[left + 1], 1.0, (pts - x_dd[left]) / spec.h)
    out = (1.0 - w) * sol.dn[left] + w * sol.dn[left + 1]
    if np.asarray(x).ndim == 0:
        return float(out[0])
    return out
