"""scikit-learn style wrappers around the solvers.

``fit`` takes a domain (a ``DomainSpec``), ``predict`` maps boundary
parameters ``a`` to eigenvalues.
"""
import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from . import analytic, fem, mesh, spectra

__all__ = ["DiskBranchEstimator", "DiscreteSpectrumEstimator"]


def _a_column(A):
    A = check_array(np.asarray(A, dtype=float).reshape(-1, 1), ensure_2d=True)
    a = A[:, 0]
    if np.any(a < 0):
        raise ValueError("a must be non-negative")
    return a


class DiskBranchEstimator(BaseEstimator):
    """Ordered d-bar Robin eigenvalues of a disk from the Bessel equations.

    Parameters
    ----------
    count : int
        Number of eigenvalues returned per ``a``.
    """

    def __init__(self, count=6):
        self.count = count

    def fit(self, domain, y=None):
        if not isinstance(domain, mesh.DomainSpec) or domain.kind != "disk":
            raise ValueError("DiskBranchEstimator needs a disk DomainSpec")
        if int(self.count) < 1:
            raise ValueError("count must be positive")
        self.radius_ = float(domain.params["R"])
        return self

    def predict(self, A):
        check_is_fitted(self, "radius_")
        a = _a_column(A)
        return np.array([analytic.disk_ordered_spectrum(self.radius_, x, self.count).values
                         for x in a])


class DiscreteSpectrumEstimator(BaseEstimator):
    """Finite element eigenvalues of one operator family on a meshed domain.

    Parameters
    ----------
    h : float
        Target mesh size.
    count : int
    kind : str
        ``"dbar-robin"``, ``"robin"``, ``"dirichlet"`` or ``"dbar-neumann"``.
    holomorphic_degree : int
        Degree of the holomorphic enrichment (0 for plain P1).
    seed : int
    """

    def __init__(self, h=0.1, count=6, kind="dbar-robin", holomorphic_degree=0, seed=0):
        self.h = h
        self.count = count
        self.kind = kind
        self.holomorphic_degree = holomorphic_degree
        self.seed = seed

    def fit(self, domain, y=None):
        if not isinstance(domain, mesh.DomainSpec):
            raise ValueError("fit expects a DomainSpec")
        if not self.h > 0 or int(self.count) < 1:
            raise ValueError("h must be positive and count at least 1")
        fem.normalize_kind(self.kind)
        self.mesh_ = mesh.triangulate(domain, self.h)
        self.forms_ = fem.assemble(self.mesh_, holomorphic_degree=self.holomorphic_degree)
        return self

    def predict(self, A):
        check_is_fitted(self, "forms_")
        a = _a_column(A)
        return np.array([spectra.solve_operator(self.forms_, self.kind, x, self.count,
                                                seed=self.seed).values for x in a])

    def transform(self, A):
        """Hellmann-Feynman slopes d mu_k / d a at each ``a``."""
        check_is_fitted(self, "forms_")
        a = _a_column(A)
        out = []
        for x in a:
            s = spectra.solve_operator(self.forms_, self.kind, x, self.count, seed=self.seed)
            out.append(spectra._cluster_slopes(self.forms_, s))
        return np.array(out)
