"""scikit-learn style wrappers around the closed-form work statistics.

``WorkStatistics`` is configured by physical hyper-parameters; ``fit`` takes
no data (the model is exact) and computes the distribution and summary, and
``transform`` maps time-like arguments ``u`` to the characteristic function.
``CoarseGrainer`` is fitted on an atom table and transforms work values to a
smoothed density.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .analysis import coarse_grain, fluctuation_checks
from .distribution import WorkDistribution
from .fock import CouplingKind, PhysicalParams, Truncation, check_caps, choose_truncation
from .linear import chi_linear, work_distribution_linear
from .quadratic import chi_quadratic, work_distribution_quadratic
from .errors import CapExceededError, UnboundedSpectrumError


class WorkStatistics(TransformerMixin, BaseEstimator):
    """Work statistics of a sudden optomechanical quench.

    Parameters
    ----------
    kind : {"linear", "quadratic"}
    coupling : float
        g or kappa in units of the mechanical frequency.
    omega_c, beta, displacement : float
        Cavity frequency, inverse temperature and mechanical drive.
    tail_tol : float
        Probability allowed to fall outside the truncation.
    n_max, k_max : int, optional
        Cutoff overrides; chosen automatically when None.

    Attributes
    ----------
    params_ : PhysicalParams
    truncation_ : Truncation
    distribution_ : WorkDistribution or None
        None when the phonon cutoff exceeds the hard cap.
    summary_ : ThermoSummary or None
        None when the linear free-energy series diverges at the cutoff.
    """

    def __init__(self, kind="linear", coupling=0.1, omega_c=500.0, beta=1e-3,
                 displacement=0.0, tail_tol=1e-12, n_max=None, k_max=None):
        self.kind = kind
        self.coupling = coupling
        self.omega_c = omega_c
        self.beta = beta
        self.displacement = displacement
        self.tail_tol = tail_tol
        self.n_max = n_max
        self.k_max = k_max

    def _truncation(self, params):
        if self.n_max is not None and self.k_max is not None:
            return Truncation(self.n_max, self.k_max, self.tail_tol)
        auto = choose_truncation(params, self.tail_tol, require_convergent=False)
        n_max = auto.n_max if self.n_max is None else self.n_max
        k_max = auto.k_max if self.k_max is None else self.k_max
        return Truncation(n_max, k_max, self.tail_tol, min(auto.k_init, k_max))

    def fit(self, X=None, y=None):
        params = PhysicalParams(omega_c=self.omega_c, coupling=self.coupling,
                                kind=CouplingKind(self.kind), beta=self.beta,
                                displacement=self.displacement)
        trunc = self._truncation(params)
        self.params_ = params
        self.truncation_ = trunc
        try:
            check_caps(trunc)
            build = (work_distribution_linear if params.kind is CouplingKind.LINEAR
                     else work_distribution_quadratic)
            self.distribution_ = build(params, trunc)
        except CapExceededError:
            self.distribution_ = None
        try:
            self.summary_ = fluctuation_checks(params, trunc)
        except UnboundedSpectrumError:
            self.summary_ = None
        return self

    def transform(self, X):
        """Characteristic function at the values ``u`` in ``X``; columns (Re, Im)."""
        check_is_fitted(self, "params_")
        u = check_array(X, ensure_2d=False, dtype=float).ravel()
        chi = chi_linear if self.params_.kind is CouplingKind.LINEAR else chi_quadratic
        values = np.atleast_1d(chi(u, self.params_, self.truncation_))
        return np.column_stack([values.real, values.imag])

    def fit_transform(self, X, y=None):
        return self.fit().transform(X)


class CoarseGrainer(TransformerMixin, BaseEstimator):
    """Kernel smoothing of a discrete work distribution.

    ``fit`` takes an ``(n_atoms, 2)`` array of ``(work, probability)``;
    ``transform`` evaluates the smoothed density at the work values given.
    """

    def __init__(self, kernel="gaussian", width=0.5, spacing=None):
        self.kernel = kernel
        self.width = width
        self.spacing = spacing

    def fit(self, X, y=None):
        atoms = check_array(X, dtype=float)
        if atoms.shape[1] != 2:
            raise ValueError("expected columns (work, probability)")
        self.distribution_ = WorkDistribution.from_transitions(atoms[:, 0], atoms[:, 1])
        self.density_ = coarse_grain(self.distribution_, self.kernel, self.width,
                                     spacing=self.spacing)
        return self

    def transform(self, X):
        check_is_fitted(self, "density_")
        w = check_array(X, ensure_2d=False, dtype=float).ravel()
        grid, dens = self.density_.grid, self.density_.density
        return np.interp(w, grid, dens, left=0.0, right=0.0)[:, None]
