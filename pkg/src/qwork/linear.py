"""Work statistics of a sudden quench of the linear (radiation-pressure) coupling.

Within photon manifold ``n`` the post-quench mechanical Hamiltonian is a
displaced oscillator, so the phonon transition kernel is the displacement
overlap with amplitude ``g*n`` and the work lattice is
``W = k' - k - g**2 n**2 + 2 g n E``.  ``E`` is the static mechanical drive
of the displaced variant, entering both Hamiltonians as ``-E (b + b^dagger)``.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np
from scipy.special import logsumexp

from .distribution import (CharFunctionSample, Manifold, WorkDistribution, merge_manifolds,
                           stream_statistics)
from .errors import CapExceededError, SeriesOverflowError, UnboundedSpectrumError
from .fock import (CouplingKind, check_caps, choose_truncation, displacement_overlap_matrix,
                   photon_log_weights, thermal_weight, thermal_weights)

__all__ = [
    "Moments",
    "chi_linear",
    "char_function_linear",
    "iter_manifolds_linear",
    "work_distribution_linear",
    "moments_linear",
    "delta_f_linear",
    "default_u_grid",
]

EXP_LIMIT = 700.0
DEGENERATE = "degenerate: zero-photon initial state"


class Moments(NamedTuple):
    """Mean, variance and skewness of the work.

    ``source`` is ``"closed-form"`` or ``"distribution-derived"``; ``note``
    carries the degeneracy message when the skewness is undefined (NaN).
    """

    mean: float
    variance: float
    skewness: float
    source: str = "closed-form"
    note: str = ""


def default_u_grid(count=512, stop=4 * math.pi):
    return np.linspace(0.0, stop, count)


def _require_linear(params):
    if params.kind is not CouplingKind.LINEAR:
        raise ValueError("parameters describe a quadratic coupling")


def check_convergent(params, n_max):
    """Raise when the free-energy series term still grows at ``n_max``."""
    g = params.coupling
    growth = g * g * (2 * n_max + 1) - 2.0 * g * params.displacement - params.omega_c
    if n_max > 0 and growth >= 0:
        raise UnboundedSpectrumError("free-energy series term increasing at the photon cutoff",
                                     quantity={"n_max": n_max, "log_ratio_over_beta": growth})


def chi_linear(u, params, trunc):
    """Characteristic function of the work at real or complex ``u``.

    Sum over photon manifolds up to ``trunc.n_max``, with the thermal photon
    weights renormalized on that range.  Complex arguments are restricted to
    ``|Im u| <= beta``, which covers the Jarzynski point ``u = i*beta`` and
    the Crooks segment.

    Raises
    ------
    SeriesOverflowError
        If the real part of a retained exponent exceeds 700.
    """
    _require_linear(params)
    u = np.asarray(u, dtype=complex)
    if np.any(np.abs(u.imag) > params.beta * (1 + 1e-12)):
        raise ValueError("complex u must satisfy |Im u| <= beta")
    g, c = params.coupling, 1.0 + 2.0 * params.n_m
    if g == 0.0:
        return complex(1.0) if u.ndim == 0 else np.ones(u.shape, dtype=complex)
    log_w = photon_log_weights(params, trunc.n_max)
    n = np.flatnonzero(np.isfinite(log_w)).astype(float)
    log_w = log_w[np.isfinite(log_w)]
    uu = u[..., None]
    expo = (-(g * n) ** 2 * (1j * (uu - np.sin(uu)) + c * (1.0 - np.cos(uu)))
            + 2j * g * n * params.displacement * uu)
    worst = float(np.max(expo.real)) if expo.size else 0.0
    if worst > EXP_LIMIT:
        raise SeriesOverflowError("characteristic-function exponent overflows", quantity=worst)
    out = np.exp(log_w + expo).sum(axis=-1)
    out = np.where(u == 0, 1.0 + 0.0j, out)     # exact normalization, free of rounding
    if out.ndim == 0:
        return complex(out)
    return out


def char_function_linear(params, trunc, u_grid=None):
    u_grid = default_u_grid() if u_grid is None else np.asarray(u_grid, dtype=float)
    return CharFunctionSample(u_grid=u_grid, values=np.atleast_1d(chi_linear(u_grid, params, trunc)))


def iter_manifolds_linear(params, trunc):
    """Yield the transition table of every photon manifold in increasing ``n``."""
    _require_linear(params)
    check_caps(trunc)
    g, e = params.coupling, params.displacement
    k = np.arange(trunc.k_init + 1)
    kp = np.arange(trunc.k_max + 1)
    p_k = thermal_weights(params.n_m, trunc.k_init)
    init = k + 0.5
    for n in range(trunc.n_max + 1):
        p_n = thermal_weight(n, params.n_c)
        kernel = displacement_overlap_matrix(g * n, trunc.k_init, trunc.k_max)
        final = kp + 0.5 - (g * n) ** 2 + 2.0 * g * n * e
        yield Manifold(n, init, final, (p_n * p_k)[:, None] * kernel)


def work_distribution_linear(params, trunc):
    """Two-point-measurement work distribution as merged atoms.

    Raises
    ------
    TruncationError
        If the discarded probability exceeds ``trunc.tail_tol``.
    CapExceededError
        If the cutoffs exceed the hard caps.
    """
    if params.coupling == 0.0:
        # no quench: every transition is k -> k with zero work
        return WorkDistribution(np.zeros(1), np.ones(1), 0.0, {"kind": "linear"})
    return merge_manifolds(iter_manifolds_linear(params, trunc), tail_tol=trunc.tail_tol,
                           metadata={"kind": "linear"})


def moments_linear(params, trunc=None):
    """Mean, variance and skewness of the work.

    Closed forms at ``E = 0``: zero mean, variance
    ``g^2 N_c (1 + 2 N_c)(1 + 2 N_m)`` and skewness
    ``1 / (g (1 + 2 N_m)^{3/2} sqrt(N_c (1 + 2 N_c)))``.  With a drive the
    mean is ``2 g E N_c`` and the higher moments come from the distribution
    (truncation chosen automatically when ``trunc`` is None).
    """
    _require_linear(params)
    g, e = params.coupling, params.displacement
    n_c, c = params.n_c, 1.0 + 2.0 * params.n_m
    mean = 2.0 * g * e * n_c
    if e != 0.0 and g != 0.0:
        if trunc is None:
            trunc = choose_truncation(params, require_convergent=False)
        try:
            stats = stream_statistics(iter_manifolds_linear(params, trunc), tail_tol=trunc.tail_tol)
        except CapExceededError:
            nan = float("nan")
            return Moments(mean, nan, nan, note="variance and skewness need cutoffs above the hard caps")
        return Moments(mean, stats.variance, stats.skewness, "distribution-derived")
    photon = n_c * (1.0 + 2.0 * n_c)
    variance = g * g * photon * c
    if variance == 0.0:
        return Moments(mean, 0.0, float("nan"), note=DEGENERATE)
    return Moments(mean, variance, 1.0 / (abs(g) * c ** 1.5 * math.sqrt(photon)))


def delta_f_linear(params, trunc=None):
    """Free-energy difference ``-(1/beta) ln(Z_F / Z_I)``.

    The photon sum runs to ``trunc.n_max`` with renormalized thermal weights;
    the series diverges without a cutoff, so a cutoff at which the terms still
    grow is rejected.
    """
    _require_linear(params)
    if trunc is None:
        trunc = choose_truncation(params, resolve_phonons=False)
    check_convergent(params, trunc.n_max)
    g, e, beta = params.coupling, params.displacement, params.beta
    if g == 0.0:
        return 0.0
    n = np.arange(trunc.n_max + 1, dtype=float)
    log_w = photon_log_weights(params, trunc.n_max)
    return float(-logsumexp(log_w + beta * (g * n) ** 2 - 2.0 * beta * g * n * e) / beta) + 0.0
