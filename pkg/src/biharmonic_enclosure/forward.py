"""Forward solves of the perturbed fourth-order problem on the grid.

The equation Delta(gamma Delta u) + A . Du + kappa^2 n u = -source with
Navier data (u, Delta u) prescribed on the boundary is discretized through
the second-order splitting m = gamma Delta u, giving a 2x2 block system of
coupled Laplacians.  Here D = -i grad, so the first-order term reads
-i A . grad u.

Boundary rows are identities (Dirichlet in both u and m); gamma is 1 near the
outer boundary because the obstacle is strictly interior, so the m-trace is
the Laplacian trace.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .geometry import BOUNDARY, EXTERIOR, Grid
from .media import MediumSpec

DIRECT_SIZE_LIMIT = 400_000  # unknown count above which the Krylov path is used


class SolverFailure(RuntimeError):
    """Linear solve did not converge; carries the residual history."""

    def __init__(self, message, residual_history=None):
        super().__init__(message)
        self.residual_history = list(residual_history or [])


@dataclass
class Field:
    """Complex nodal field with a role tag (u, split, reflected, probe)."""

    values: np.ndarray  # shaped like grid.counts, complex
    role: str = "u"

    def copy(self, role=None):
        return Field(self.values.copy(), role or self.role)


@dataclass
class NavierData:
    """Boundary pair (trace of u, trace of Delta u), boundary-node ordered."""

    f1: np.ndarray
    f2: np.ndarray

    def __post_init__(self):
        self.f1 = np.asarray(self.f1, complex)
        self.f2 = np.asarray(self.f2, complex)
        if self.f1.shape != self.f2.shape or self.f1.ndim != 1:
            raise ValueError("boundary data arrays must be 1-d and aligned")

    def scaled(self, factor):
        return NavierData(self.f1 * factor, self.f2 * factor)

    @staticmethod
    def zeros(grid: Grid):
        nb = len(grid.boundary_idx)
        return NavierData(np.zeros(nb, complex), np.zeros(nb, complex))


@dataclass
class DtNTrace:
    """Normal derivatives (of u and of Delta u) on the boundary nodes."""

    du_dnu: np.ndarray
    dlap_dnu: np.ndarray

    def __sub__(self, other):
        return DtNTrace(self.du_dnu - other.du_dnu, self.dlap_dnu - other.dlap_dnu)


@dataclass
class NavierSolution:
    u: Field
    m: Field  # split variable gamma * Delta u
    iterations: int
    residual: float
    backend: str


def _strides(counts):
    s = np.ones(len(counts), dtype=np.int64)
    for a in range(len(counts) - 2, -1, -1):
        s[a] = s[a + 1] * counts[a + 1]
    return s


def laplacian_apply(grid: Grid, values: np.ndarray) -> np.ndarray:
    """Centered second-order Laplacian; valid at interior nodes only."""
    out = np.zeros_like(values, dtype=complex)
    for ax in range(grid.dim):
        s2 = grid.spacing[ax] ** 2
        plus = np.roll(values, -1, axis=ax)
        minus = np.roll(values, 1, axis=ax)
        out += (plus - 2.0 * values + minus) / s2
    return out


def gradient_apply(grid: Grid, values: np.ndarray) -> list:
    """Centered first derivatives per axis; valid at interior nodes only."""
    grads = []
    for ax in range(grid.dim):
        plus = np.roll(values, -1, axis=ax)
        minus = np.roll(values, 1, axis=ax)
        grads.append((plus - minus) / (2.0 * grid.spacing[ax]))
    return grads


def trapezoid_volume_weights(grid: Grid) -> np.ndarray:
    """Second-order volume quadrature weights over non-exterior nodes."""
    w = np.full(grid.counts, grid.cell_volume)
    cls = grid.classification
    w[cls == EXTERIOR] = 0.0
    # halve once per lattice face a node sits on (box domains); staircase
    # boundaries just get the half weight once
    for ax in range(grid.dim):
        sl = [slice(None)] * grid.dim
        sl[ax] = 0
        w[tuple(sl)] /= 2.0
        sl[ax] = -1
        w[tuple(sl)] /= 2.0
    return w


class ForwardSolver:
    """Assembled split system for one (grid, medium) pair.

    The sparse matrix and its factorization are built lazily and cached; the
    object is read-only after that and safe to share across solves.
    """

    def __init__(self, grid: Grid, medium: MediumSpec, tol: float = 1e-10,
                 maxiter: int = 20000, backend: str = "auto"):
        self.grid = grid
        self.medium = medium
        self.tol = float(tol)
        self.maxiter = int(maxiter)
        if backend not in ("auto", "direct", "iterative"):
            raise ValueError(f"unknown backend {backend!r}")
        self.backend = backend

        gamma, A, nfield, chi = medium.sample(grid)
        self.gamma = gamma
        self.Afield = A
        self.nfield = nfield
        self.chi = chi

        cls = grid.classification.reshape(-1)
        self.nonext = grid.nonexterior_idx
        self.M = len(self.nonext)
        self.pos = np.full(grid.n_nodes, -1, dtype=np.int64)
        self.pos[self.nonext] = np.arange(self.M)
        self.int_idx = grid.interior_idx
        self.bnd_idx = grid.boundary_idx
        if (np.abs(gamma[self.int_idx]) < 1e-14).any():
            raise ValueError("gamma vanishes at an interior node; system singular")

        self._matrix = None
        self._lu = None
        self._ilu = None

    # -- assembly ----------------------------------------------------------

    @property
    def matrix(self) -> sp.csr_matrix:
        if self._matrix is None:
            self._matrix = self._assemble()
        return self._matrix

    def _assemble(self) -> sp.csr_matrix:
        grid, M = self.grid, self.M
        strides = _strides(grid.counts)
        ipos = self.pos[self.int_idx]
        kappa2 = self.medium.kappa**2

        rows, cols, vals = [], [], []

        def add(r, c, v):
            rows.append(r)
            cols.append(c)
            vals.append(np.asarray(v, complex))

        diag1 = np.zeros(len(ipos), complex)
        diag2 = np.zeros(len(ipos), complex)
        for ax in range(grid.dim):
            inv_s2 = 1.0 / grid.spacing[ax] ** 2
            for step in (-1, 1):
                nb = self.pos[self.int_idx + step * strides[ax]]
                add(ipos, nb, np.full(len(ipos), inv_s2))
                add(M + ipos, M + nb, np.full(len(ipos), inv_s2))
            diag1 -= 2.0 * inv_s2
            diag2 -= 2.0 * inv_s2
        add(ipos, ipos, diag1)
        add(M + ipos, M + ipos, diag2)

        # coupling: -m / gamma in the u-equation, kappa^2 n u in the m-equation
        add(ipos, M + ipos, -1.0 / self.gamma[self.int_idx])
        add(M + ipos, ipos, kappa2 * self.nfield[self.int_idx])

        # first-order term -i A . grad u, centered; entries only where A != 0
        for ax in range(grid.dim):
            Aax = self.Afield[self.int_idx, ax]
            nz = np.abs(Aax) > 0
            if not nz.any():
                continue
            coef = -1j * Aax[nz] / (2.0 * grid.spacing[ax])
            nb_p = self.pos[self.int_idx[nz] + strides[ax]]
            nb_m = self.pos[self.int_idx[nz] - strides[ax]]
            add(M + ipos[nz], nb_p, coef)
            add(M + ipos[nz], nb_m, -coef)

        bpos = self.pos[self.bnd_idx]
        ones = np.ones(len(bpos))
        add(bpos, bpos, ones)
        add(M + bpos, M + bpos, ones)

        rows = np.concatenate(rows)
        cols = np.concatenate(cols)
        vals = np.concatenate(vals)
        A = sp.coo_matrix((vals, (rows, cols)), shape=(2 * M, 2 * M), dtype=complex)
        return A.tocsr()

    def _rhs(self, data: NavierData, source=None) -> np.ndarray:
        M = self.M
        b = np.zeros(2 * M, complex)
        bpos = self.pos[self.bnd_idx]
        if len(data.f1) != len(bpos):
            raise ValueError("boundary data length does not match the grid")
        b[bpos] = data.f1
        b[M + bpos] = data.f2
        if source is not None:
            src = np.asarray(source, complex).reshape(-1)
            b[M + self.pos[self.int_idx]] = -src[self.int_idx]
        return b

    # -- linear algebra ----------------------------------------------------

    def _pick_backend(self) -> str:
        if self.backend != "auto":
            return self.backend
        return "direct" if 2 * self.M <= DIRECT_SIZE_LIMIT else "iterative"

    def _solve_linear(self, b: np.ndarray):
        backend = self._pick_backend()
        A = self.matrix
        if backend == "direct":
            if self._lu is None:
                try:
                    self._lu = spla.splu(A.tocsc())
                except RuntimeError as exc:
                    raise SolverFailure(f"sparse factorization failed: {exc}") from exc
            x = self._lu.solve(b)
            iters = 1
        else:
            if self._ilu is None:
                self._ilu = spla.spilu(A.tocsc(), drop_tol=1e-5, fill_factor=12)
            prec = spla.LinearOperator(A.shape, self._ilu.solve)
            history = []

            def cb(xk):
                history.append(float(np.linalg.norm(A @ xk - b)))

            x, info = spla.bicgstab(A, b, M=prec, rtol=self.tol, atol=0.0,
                                    maxiter=self.maxiter, callback=cb)
            iters = len(history)
            if info != 0:
                raise SolverFailure(
                    f"BiCGSTAB did not converge (info={info}) after {iters} iterations",
                    residual_history=history,
                )
        bnorm = float(np.linalg.norm(b))
        resid = float(np.linalg.norm(A @ x - b)) / bnorm if bnorm > 0 else 0.0
        if not np.isfinite(resid) or (bnorm > 0 and resid > max(self.tol * 100, 1e-8)):
            raise SolverFailure(
                f"solve residual {resid:.3e} above tolerance; "
                "medium may be near an interior eigenvalue",
                residual_history=[resid],
            )
        return x, iters, resid, backend

    def _unpack(self, x, role_u="u"):
        grid, M = self.grid, self.M
        u = np.zeros(grid.n_nodes, complex)
        m = np.zeros(grid.n_nodes, complex)
        u[self.nonext] = x[:M]
        m[self.nonext] = x[M:]
        return (Field(u.reshape(grid.counts), role_u),
                Field(m.reshape(grid.counts), "split"))

    # -- public solves -----------------------------------------------------

    def solve_navier(self, data: NavierData, source=None) -> NavierSolution:
        """Solve with the given Navier traces and optional volumetric source."""
        b = self._rhs(data, source)
        x, iters, resid, backend = self._solve_linear(b)
        u, m = self._unpack(x)
        return NavierSolution(u=u, m=m, iterations=iters, residual=resid,
                              backend=backend)

    def reflected_source(self, v: Field, m_v: Field) -> np.ndarray:
        """Right-hand side driving the reflected problem for a probe field v."""
        grid = self.grid
        gamma = self.gamma.reshape(grid.counts)
        nfield = self.nfield.reshape(grid.counts)
        jump_m = (gamma - 1.0) * m_v.values
        src = laplacian_apply(grid, jump_m)
        src += self.medium.kappa**2 * (nfield - 1.0) * v.values
        if np.abs(self.Afield).max() > 0:
            grads = gradient_apply(grid, v.values)
            Ash = self.Afield.reshape(*grid.counts, grid.dim)
            for ax in range(grid.dim):
                src += Ash[..., ax] * (-1j) * grads[ax]
        return src

    def solve_reflected(self, v: Field, m_v: Field) -> NavierSolution:
        """Solve for the obstacle-induced difference field w = u - v.

        v must be an exact discrete background solution; the result satisfies
        (v + w, m_v + (gamma-1)*m_v + m_w-split...) -- concretely, adding w to
        v reproduces the medium solution with v's traces to solver precision.
        """
        src = self.reflected_source(v, m_v)
        sol = self.solve_navier(NavierData.zeros(self.grid), source=src.reshape(-1))
        sol.u.role = "reflected"
        return sol


# ---------------------------------------------------------------------------
# traces
# ---------------------------------------------------------------------------

def interp_field(grid: Grid, values: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Multilinear interpolation with exterior corners masked out."""
    vals = np.asarray(values)
    pts = np.atleast_2d(points)
    rel = (pts - grid.origin) / grid.spacing
    base = np.floor(rel).astype(np.int64)
    base = np.clip(base, 0, np.array(grid.counts) - 2)
    frac = rel - base
    frac = np.where(np.abs(frac) < 1e-9, 0.0, frac)
    frac = np.where(np.abs(frac - 1.0) < 1e-9, 1.0, frac)

    mask = (grid.classification != EXTERIOR).astype(float)
    out = np.zeros(len(pts), complex)
    wsum = np.zeros(len(pts))
    for corner in range(2**grid.dim):
        offs = [(corner >> a) & 1 for a in range(grid.dim)]
        idx = tuple((base[:, a] + offs[a]) for a in range(grid.dim))
        w = np.ones(len(pts))
        for a in range(grid.dim):
            w = w * (frac[:, a] if offs[a] else (1.0 - frac[:, a]))
        w = w * mask[idx]
        out += w * vals[idx]
        wsum += w
    bad = wsum <= 0
    if bad.any():
        raise ValueError("interpolation point has no non-exterior support")
    return out / wsum


def extract_dtn(grid: Grid, u: Field, m: Field) -> DtNTrace:
    """One-sided second-order normal derivatives of u and of Delta u.

    Delta u equals the split field m near the boundary (gamma is 1 there).
    """
    delta = float(grid.spacing.min())
    pts0 = grid.boundary_coords
    nu = grid.boundary_normals
    p1 = pts0 - delta * nu
    p2 = pts0 - 2.0 * delta * nu

    def one_sided(values):
        v0 = values.reshape(-1)[grid.boundary_idx]
        v1 = interp_field(grid, values, p1)
        v2 = interp_field(grid, values, p2)
        return (3.0 * v0 - 4.0 * v1 + v2) / (2.0 * delta)

    return DtNTrace(one_sided(u.values), one_sided(m.values))


def boundary_traces(grid: Grid, u: Field, m: Field) -> NavierData:
    """Navier data carried by a solved field pair."""
    return NavierData(u.values.reshape(-1)[grid.boundary_idx],
                      m.values.reshape(-1)[grid.boundary_idx])
