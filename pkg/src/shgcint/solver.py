"""Finite-difference Helmholtz operators with a PML and the second-harmonic fixed point.

The physical domain is the interior grid; the PML pads it by ``width/h`` nodes
on every side and the padded field vanishes beyond the outermost nodes.  All
susceptibilities are zero inside the PML.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .grid import Grid
from .waves import g0_2d

log = logging.getLogger(__name__)

FOUR_PI = 4.0 * np.pi


class SolverError(RuntimeError):
    """Factorisation or solve failure."""


class ConvergenceError(SolverError):
    """The fixed-point iteration did not converge; ``solution`` holds the last iterate."""

    def __init__(self, message, solution=None, history=None, diverged=False):
        super().__init__(message)
        self.solution = solution
        self.history = history or []
        self.diverged = diverged


@dataclass(frozen=True)
class PmlParams:
    width: float = 1.5
    strength: float = 1.79

    def __post_init__(self):
        if not self.width > 0:
            raise ValueError(f"PML width must be positive, got {self.width}")
        if not self.strength >= 0:
            raise ValueError(f"PML strength must be non-negative, got {self.strength}")

    def nodes(self, h: float) -> int:
        n = int(round(self.width / h))
        if n < 1:
            raise ValueError(f"PML width {self.width} is thinner than one cell (h={h})")
        return n


@dataclass(frozen=True, eq=False)
class DiscreteOperator:
    matrix: sp.csc_matrix
    grid: Grid
    padded: Grid
    npml: int
    jk: float
    ex: np.ndarray = field(repr=False)
    ey: np.ndarray = field(repr=False)

    def pad(self, f: np.ndarray) -> np.ndarray:
        """Embed an interior field into the padded grid (zeros in the PML)."""
        out = np.zeros(self.padded.shape, dtype=np.result_type(f, float))
        n = self.npml
        out[n:n + self.grid.ny, n:n + self.grid.nx] = f
        return out

    def strip(self, f: np.ndarray) -> np.ndarray:
        n = self.npml
        return f[n:n + self.grid.ny, n:n + self.grid.nx]

    def apply(self, u: np.ndarray) -> np.ndarray:
        return (self.matrix @ u.ravel()).reshape(self.padded.shape)


def stretch_profiles(grid: Grid, padded: Grid, pml: PmlParams) -> tuple[np.ndarray, np.ndarray]:
    """Nodal complex stretching factors ``e_x, e_y`` on the padded grid, shape ``(ny, nx)``."""
    px, py = padded.x, padded.y
    dx = np.maximum(np.maximum(grid.x0 - px, px - grid.x1), 0.0)
    dy = np.maximum(np.maximum(grid.y0 - py, py - grid.y1), 0.0)
    sx = 1 + 1j * pml.strength * (dx / pml.width) ** 2
    sy = 1 + 1j * pml.strength * (dy / pml.width) ** 2
    ex = np.broadcast_to(sx[None, :], padded.shape)
    ey = np.broadcast_to(sy[:, None], padded.shape)
    return ex, ey


def _harmonic_mean(a, b):
    return 2 * a * b / (a + b)


def assemble(grid: Grid, eta, eta1, jk: float, pml: PmlParams = PmlParams(), harmonic: int = 1) -> DiscreteOperator:
    """Flux-form five-point discretisation of the stretched Helmholtz operator.

    ``div(diag(e_y/e_x, e_x/e_y) grad u) + jk^2 e_x e_y (1 + 4 pi eta + 4 pi eta1) u``
    with face coefficients taken as harmonic means of the adjacent nodal values.
    ``harmonic`` only enters the resolution check ``h <= wavelength / (10 j)``,
    where ``wavelength = 2 pi j / jk`` is the fundamental one.
    """
    h = grid.h
    fundamental = 2 * np.pi * harmonic / jk
    if h > fundamental / (10 * harmonic) * (1 + 1e-9):
        raise ValueError(
            f"grid spacing {h:g} under-resolves harmonic {harmonic} (need h <= {fundamental / (10 * harmonic):g})"
        )
    n = pml.nodes(h)
    padded = grid.padded(n)
    ex, ey = stretch_profiles(grid, padded, pml)

    pot = np.ones(grid.shape)
    if eta is not None:
        pot = pot + FOUR_PI * np.asarray(eta, dtype=float)
    if eta1 is not None:
        pot = pot + FOUR_PI * np.asarray(eta1, dtype=float)
    full = np.ones(padded.shape)
    full[n:n + grid.ny, n:n + grid.nx] = pot

    cx = ey / ex
    cy = ex / ey
    # face coefficients: fx[:, i] sits between columns i and i+1, fy[j, :] between rows j and j+1
    fx = _harmonic_mean(cx[:, :-1], cx[:, 1:])
    fy = _harmonic_mean(cy[:-1, :], cy[1:, :])
    ny, nx = padded.shape
    west = np.zeros(padded.shape, complex)
    east = np.zeros(padded.shape, complex)
    south = np.zeros(padded.shape, complex)
    north = np.zeros(padded.shape, complex)
    east[:, :-1] = fx
    west[:, 1:] = fx
    north[:-1, :] = fy
    south[1:, :] = fy
    # the Dirichlet layer just outside the padded grid still contributes its face to the diagonal
    west[:, 0] = cx[:, 0]
    east[:, -1] = cx[:, -1]
    south[0, :] = cy[0, :]
    north[-1, :] = cy[-1, :]

    diag = -(west + east + south + north) / h**2 + jk**2 * ex * ey * full
    if not np.all(np.isfinite(diag)):
        raise ValueError("non-finite operator coefficients")

    N = nx * ny
    idx = np.arange(N).reshape(padded.shape)
    rows = [idx.ravel()]
    cols = [idx.ravel()]
    vals = [diag.ravel()]
    for nb, shift_rows, shift_cols in (
        (east[:, :-1], idx[:, :-1], idx[:, 1:]),
        (west[:, 1:], idx[:, 1:], idx[:, :-1]),
        (north[:-1, :], idx[:-1, :], idx[1:, :]),
        (south[1:, :], idx[1:, :], idx[:-1, :]),
    ):
        rows.append(shift_rows.ravel())
        cols.append(shift_cols.ravel())
        vals.append(nb.ravel() / h**2)
    A = sp.csc_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(N, N)
    )
    return DiscreteOperator(A, grid, padded, n, float(jk), np.asarray(ex), np.asarray(ey))


class LinearSolveHandle:
    """Sparse LU factors of an operator, reusable across right-hand sides."""

    def __init__(self, op: DiscreteOperator, rtol: float = 1e-10):
        self.op = op
        self.rtol = rtol
        try:
            self._lu = spla.splu(op.matrix, permc_spec="COLAMD")
        except RuntimeError as exc:
            raise SolverError(f"sparse factorisation failed: {exc}") from exc
        except MemoryError as exc:
            raise MemoryError(
                f"not enough memory to factorise a {op.padded.nx}x{op.padded.ny} grid"
            ) from exc

    def solve(self, b: np.ndarray) -> np.ndarray:
        shape = b.shape
        b = np.asarray(b, dtype=complex).ravel()
        nb = np.linalg.norm(b)
        if nb == 0:
            return np.zeros(shape, complex)
        x = self._lu.solve(b)
        r = b - self.op.matrix @ x
        res = np.linalg.norm(r) / nb
        if res > self.rtol:
            x = x + self._lu.solve(r)
            res = np.linalg.norm(b - self.op.matrix @ x) / nb
            if res > self.rtol:
                raise SolverError(f"solve residual {res:.2e} exceeds {self.rtol:.0e}")
        return x.reshape(shape)


def factorize(op: DiscreteOperator) -> LinearSolveHandle:
    return LinearSolveHandle(op)


@dataclass
class FieldSolution:
    u: np.ndarray
    v: np.ndarray
    iterations: int
    final_residual: float
    history: list = field(default_factory=list)


def _rel_change(new, old) -> float:
    scale = np.max(np.abs(new))
    if scale == 0:
        return 0.0 if np.max(np.abs(old)) == 0 else np.inf
    return float(np.max(np.abs(new - old)) / scale)


def coupled_residual(op_k: DiscreteOperator, op_2k: DiscreteOperator, k: float, eta_lin, eta2, ui, u, v) -> float:
    """Relative interior residual of the coupled equations for padded fields ``u, v``."""
    n = op_k.npml
    inner = (slice(n + 1, n + op_k.grid.ny - 1), slice(n + 1, n + op_k.grid.nx - 1))
    u1 = u + ui
    src_u = -FOUR_PI * k**2 * (2 * eta2 * v * np.conj(u1) + eta_lin * ui)
    src_v = -4 * FOUR_PI * k**2 * eta2 * u1**2
    ru = op_k.apply(u) - src_u
    rv = op_2k.apply(v) - src_v
    num = np.linalg.norm(ru[inner]) + np.linalg.norm(rv[inner])
    den = np.linalg.norm((op_k.apply(u))[inner]) + np.linalg.norm((op_2k.apply(v))[inner])
    return float(num / den) if den > 0 else float(num)


def fixed_point_shg(
    solve_k: LinearSolveHandle,
    solve_2k: LinearSolveHandle,
    eta_lin: np.ndarray,
    eta2: np.ndarray,
    ui: np.ndarray,
    k: float,
    tol: float = 1e-8,
    max_iter: int = 50,
) -> FieldSolution:
    """Alternate linear solves for the scattered fundamental ``u`` and the harmonic ``v``.

    ``eta_lin`` (random medium plus linear scatterer susceptibility), ``eta2``
    and the incident field ``ui`` live on the padded grid.  Stops when the
    relative sup-norm change of both fields drops below ``tol``.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    op_k, op_2k = solve_k.op, solve_2k.op
    if op_k.padded != op_2k.padded:
        raise ValueError("operators live on different grids")
    u = np.zeros(op_k.padded.shape, complex)
    v = np.zeros_like(u)
    src_lin = eta_lin * ui
    history = []
    growth = 0
    for it in range(1, max_iter + 1):
        u_new = -FOUR_PI * k**2 * solve_k.solve(2 * eta2 * v * np.conj(u + ui) + src_lin)
        v_new = -4 * FOUR_PI * k**2 * solve_2k.solve(eta2 * (u_new + ui) ** 2)
        change = max(_rel_change(u_new, u), _rel_change(v_new, v))
        u, v = u_new, v_new
        history.append(change)
        if change < tol:
            res = coupled_residual(op_k, op_2k, k, eta_lin, eta2, ui, u, v)
            return FieldSolution(op_k.strip(u).copy(), op_k.strip(v).copy(), it, res, history)
        growth = growth + 1 if len(history) > 1 and change > history[-2] else 0
        if growth >= 3:
            sol = FieldSolution(op_k.strip(u).copy(), op_k.strip(v).copy(), it, np.nan, history)
            raise ConvergenceError(f"fixed point diverging after {it} iterations", sol, history, True)
    sol = FieldSolution(op_k.strip(u).copy(), op_k.strip(v).copy(), max_iter, np.nan, history)
    raise ConvergenceError(
        f"fixed point not converged in {max_iter} iterations (last change {history[-1]:.2e})", sol, history
    )


def point_source_field(handle: LinearSolveHandle, source) -> np.ndarray:
    """Interior field radiated by a discrete ``-4 pi delta`` at the node nearest ``source``."""
    op = handle.op
    row, col = op.grid.nearest_index(source)
    f = np.zeros(op.padded.shape, complex)
    f[row + op.npml, col + op.npml] = -FOUR_PI / op.grid.h**2
    return op.strip(handle.solve(f))


def pml_quality(op_k: DiscreteOperator, k: float | None = None, r_min: float = 2.0, r_max: float = 5.0,
                fit_scale: bool = False) -> float:
    """Worst relative deviation from ``g0_2d`` on an annulus around a centred point source.

    ``op_k`` must describe a homogeneous medium.  Radii are in wavelengths of
    the operator's wavenumber.  With ``fit_scale`` the computed field is first
    multiplied by the one complex factor that minimises the worst-case
    deviation (least-squares start), which removes a uniform amplitude/phase
    offset but not the radial phase drift of the stencil.
    """
    from scipy.optimize import minimize

    jk = op_k.jk if k is None else k
    wavelength = 2 * np.pi / jk
    g = op_k.grid
    centre = g.node(g.ny // 2, g.nx // 2)
    u = point_source_field(factorize(op_k), centre)
    X, Y = g.mesh()
    r = np.hypot(X - centre[0], Y - centre[1])
    ring = (r >= r_min * wavelength) & (r <= r_max * wavelength)
    if not ring.any():
        raise ValueError("annulus does not fit inside the grid")
    exact = g0_2d(np.column_stack([X[ring], Y[ring]]), centre, jk)
    num = u[ring]
    weight = 1 / np.abs(exact)

    def worst(p):
        return float(np.max(np.abs((p[0] + 1j * p[1]) * num - exact) * weight))

    if not fit_scale:
        return worst([1.0, 0.0])
    c = np.vdot(num, exact) / np.vdot(num, num)
    best = minimize(worst, [c.real, c.imag], method="Nelder-Mead",
                    options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": 4000})
    return min(worst([c.real, c.imag]), float(best.fun))
