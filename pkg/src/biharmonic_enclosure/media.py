"""Coefficient fields of the perturbed medium and the smallness checker.

The background is (gamma, A, n) = (1, 0, 1); the obstacle carries constant or
radially sampled complex jumps.  The admissibility checker evaluates the two
coercivity margins of the second-order splitting; it warns but never blocks,
since the smallness conditions are sufficient rather than necessary.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import gamma as _gamma_fn

import numpy as np

from .geometry import Grid, ObstacleShape


class MediaError(ValueError):
    """Raised for invalid coefficient configurations."""


def unit_ball_volume(dim: int) -> float:
    """Lebesgue measure of the unit ball in R^dim."""
    return float(np.pi ** (dim / 2) / _gamma_fn(dim / 2 + 1))


@dataclass(frozen=True)
class MediumSpec:
    """Medium description: jumps on the obstacle, wave number, shape.

    ``gamma_jump`` and ``q_jump`` are complex scalars or callables of node
    coordinates; ``A_jump`` is a complex vector or a callable returning one.
    Outside the obstacle the coefficients are exactly (1, 0, 1).
    """

    shape: ObstacleShape | None
    gamma_jump: object = 0.0
    q_jump: object = 0.0
    A_jump: object = None
    kappa: float = 1.0

    def __post_init__(self):
        if self.kappa < 0:
            raise MediaError("wave number must be nonnegative")
        if np.isscalar(self.gamma_jump) and self.shape is not None:
            if (1.0 + complex(self.gamma_jump)).real <= 0:
                raise MediaError("Re(gamma) must stay positive on the obstacle")
        if np.isscalar(self.q_jump) and self.shape is not None:
            if (1.0 + complex(self.q_jump)).real <= 0:
                raise MediaError("Re(n) must stay positive on the obstacle")

    @property
    def has_obstacle(self) -> bool:
        return self.shape is not None

    def _eval_scalar(self, jump, x):
        if callable(jump):
            return np.asarray(jump(x), complex)
        return complex(jump)

    def evaluate(self, x):
        """Coefficient triple (gamma, A, n) at points x of shape (..., dim)."""
        x = np.asarray(x, float)
        base_shape = x.shape[:-1]
        dim = x.shape[-1]
        gamma = np.ones(base_shape, complex)
        nfield = np.ones(base_shape, complex)
        Afield = np.zeros(base_shape + (dim,), complex)
        if self.shape is None:
            return gamma, Afield, nfield
        chi = self.shape.chi(x)
        gamma = gamma + self._eval_scalar(self.gamma_jump, x) * chi
        nfield = nfield + self._eval_scalar(self.q_jump, x) * chi
        if self.A_jump is not None:
            if callable(self.A_jump):
                Aval = np.asarray(self.A_jump(x), complex)
            else:
                Aval = np.broadcast_to(np.asarray(self.A_jump, complex), base_shape + (dim,))
            Afield = Aval * chi[..., None]
        return gamma, Afield, nfield

    def sample(self, grid: Grid):
        """Node-sampled coefficient arrays (gamma, A, n) plus the chi mask."""
        coords = grid.node_coords().reshape(*grid.counts, grid.dim)
        gamma, A, nfield = self.evaluate(coords)
        if self.shape is None:
            chi = np.zeros(grid.counts)
        else:
            chi = self.shape.chi(coords)
        if (gamma.real <= 0).any():
            raise MediaError("Re(gamma) not bounded away from zero on the grid")
        if self.shape is not None and (nfield.real[chi > 0.5] <= 0).any():
            raise MediaError("Re(n) not positive on the obstacle")
        return gamma.reshape(-1), A.reshape(-1, grid.dim), nfield.reshape(-1), chi.reshape(-1)


def evaluate_coefficients(medium: MediumSpec, x):
    """Coefficient triple (gamma, A, n) at a single point or batch x."""
    return medium.evaluate(x)


@dataclass(frozen=True)
class AdmissibilityReport:
    """Coercivity margins of the split system.

    ``lhs_small1``/``lhs_small2`` are the two margin expressions; both must be
    positive for the sufficient smallness conditions to hold.  The margins
    double as the constants C0 and C0_tilde.
    """

    lhs_small1: float
    lhs_small2: float
    omega_n: float
    domain_volume: float
    margin_C0: float
    margin_C0_tilde: float

    @property
    def passed(self) -> bool:
        return self.lhs_small1 > 0 and self.lhs_small2 > 0


def check_admissibility(a_inv_norm, b_norm, c_norm, kappa, domain_volume, dim) -> AdmissibilityReport:
    """Evaluate the smallness margins from the coefficient norms.

    Inputs are the sup norms of 1/a, b and c of the fourth-order operator
    written as Delta(a Delta u) + b . Du + kappa^2 c u.  For the perturbed
    medium, a is gamma, b is -A, and c is the zeroth-order coefficient divided
    by kappa^2 (n minus the A-divergence term over kappa^2).
    """
    vals = dict(a_inv_norm=a_inv_norm, b_norm=b_norm, c_norm=c_norm,
                kappa=kappa, domain_volume=domain_volume)
    for name, v in vals.items():
        if not np.isfinite(v) or v < 0:
            raise MediaError(f"{name} must be finite and nonnegative, got {v}")
    dim = int(dim)
    if dim < 2:
        raise MediaError("dimension must be at least 2")
    omega_n = unit_ball_volume(dim)
    ratio = (domain_volume / omega_n) ** (2.0 / dim)
    lhs1 = 0.5 * (1.0 - ratio * (kappa**2 * c_norm**2 + a_inv_norm))
    lhs2 = 1.0 - 0.5 * ratio * (b_norm**2 + kappa**2 * c_norm**2 + a_inv_norm)
    return AdmissibilityReport(
        lhs_small1=float(lhs1),
        lhs_small2=float(lhs2),
        omega_n=omega_n,
        domain_volume=float(domain_volume),
        margin_C0=float(lhs1),
        margin_C0_tilde=float(lhs2),
    )
