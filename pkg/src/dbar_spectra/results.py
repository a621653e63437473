"""Containers shared by the analytic and discrete solvers."""
from dataclasses import dataclass, field

import numpy as np

__all__ = ["Spectrum", "MULTIPLICITY_RTOL", "KINDS"]

MULTIPLICITY_RTOL = 1e-7
KINDS = ("dbar-robin", "robin", "dirichlet", "dbar-neumann")


@dataclass
class Spectrum:
    """Ascending eigenvalues of one operator, optionally with eigenvectors.

    Attributes
    ----------
    kind : str
        One of ``KINDS``.
    values : ndarray
        Ascending eigenvalues.
    vectors : ndarray or None
        Columns are M-orthonormal eigenvectors (discrete solvers only).
    residuals : ndarray or None
        Relative residuals ``||Ax - mu Mx|| / ||Ax||``.
    labels : list or None
        Branch labels for analytic spectra, e.g. ``(j, k, sign)``.
    param : float or None
        Boundary parameter ``a`` where applicable.
    """

    kind: str
    values: np.ndarray
    vectors: np.ndarray = None
    residuals: np.ndarray = None
    labels: list = None
    param: float = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 1:
            raise ValueError("values must be one-dimensional")
        if np.any(np.diff(self.values) < 0):
            raise ValueError("values must be ascending")

    def __len__(self):
        return len(self.values)

    def clusters(self, rtol=MULTIPLICITY_RTOL):
        """Group indices of numerically equal eigenvalues.

        Two neighbours belong to one cluster when their gap is at most
        ``rtol * max(1, mu)``.
        """
        groups = []
        for i, mu in enumerate(self.values):
            if groups and mu - self.values[groups[-1][-1]] <= rtol * max(1.0, abs(mu)):
                groups[-1].append(i)
            else:
                groups.append([i])
        return groups

    def multiplicities(self, rtol=MULTIPLICITY_RTOL):
        """List of (value, multiplicity) pairs."""
        return [(float(self.values[g[0]]), len(g)) for g in self.clusters(rtol)]
