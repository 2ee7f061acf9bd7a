"""Work statistics of a sudden quench of the quadratic (position-squared) coupling.

In photon manifold ``n`` the post-quench mechanical Hamiltonian is
``(1 + 2 kappa n)(b^dagger b + 1/2) + kappa n (b^2 + b^dagger^2)``: an
oscillator of frequency ``s_n = sqrt(1 + 4 kappa n)`` diagonalized by the
squeeze ``S(zeta_n)`` with ``zeta_n = ln(1 + 4 kappa n) / 4``.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np
from scipy.special import logsumexp

from .distribution import CharFunctionSample, Manifold, WorkDistribution, merge_manifolds
from .errors import BranchTrackingError
from .fock import (CouplingKind, check_caps, choose_truncation, photon_log_weights,
                   squeeze_overlap_matrix, squeeze_parameter, thermal_weight, thermal_weights)
from .linear import DEGENERATE, Moments, default_u_grid

__all__ = [
    "SqueezeFactors",
    "squeeze_factors",
    "chi_quadratic",
    "char_function_quadratic",
    "iter_manifolds_quadratic",
    "work_distribution_quadratic",
    "moments_quadratic",
    "delta_f_quadratic",
]


class SqueezeFactors(NamedTuple):
    """Disentangled propagator of one photon manifold.

    ``exp(-i H_n u) = exp((xi* b^2 - xi b^dagger^2) / 2) exp(-i eta (b^dagger b + 1/2))``
    up to the photon phase ``exp(-i omega_c n u)``, with ``xi = xi_abs * exp(i phi)``.
    """

    eta: np.ndarray
    xi_abs: np.ndarray
    phi: np.ndarray
    zeta: float

    @property
    def xi(self):
        return self.xi_abs * np.exp(1j * self.phi)


def _require_quadratic(params):
    if params.kind is not CouplingKind.QUADRATIC:
        raise ValueError("parameters describe a linear coupling")


def squeeze_factors(n, u, params):
    """Rotation angle, squeeze amplitude and phase at time ``u`` in manifold ``n``.

    ``eta`` is continued across the poles of ``tan``: it is taken from
    ``atan2`` and shifted by the multiple of ``2 pi`` that keeps it closest to
    ``s_n u``, which it meets at every multiple of ``pi / 2``.
    """
    _require_quadratic(params)
    if n < 0:
        raise ValueError("photon index must be non-negative")
    u = np.asarray(u, dtype=float)
    kn = params.coupling * n
    s = math.sqrt(1.0 + 4.0 * kn)
    theta = s * u
    base = np.arctan2((1.0 + 2.0 * kn) / s * np.sin(theta), np.cos(theta))
    eta = base + 2.0 * np.pi * np.round((theta - base) / (2.0 * np.pi))
    r = np.arcsinh(2.0 * kn / s * np.sin(theta))
    phi = np.pi / 2.0 - eta + np.where(r < 0, np.pi, 0.0)
    return SqueezeFactors(eta, np.abs(r), phi, float(squeeze_parameter(n, params.coupling)))


def _polynomial(u, n, params):
    """``chi_{n,0} + chi_{n,1} N_m + chi_{n,2} N_m^2`` on a grid of real ``u``."""
    s = np.sqrt(1.0 + 4.0 * params.coupling * n)
    ratio = (1.0 + 2.0 * params.coupling * n) / s
    uu = u[None, :]
    su = s[:, None] * uu
    re0 = np.cos(uu) * np.cos(su) + ratio[:, None] * np.sin(uu) * np.sin(su)
    im0 = np.sin(uu) * np.cos(su) - ratio[:, None] * np.cos(uu) * np.sin(su)
    c0 = re0 + 1j * im0
    nm = params.n_m
    return c0 + 2.0 * (c0 - 1.0) * nm + 2.0 * (re0 - 1.0) * nm * nm


def _refined(points, step):
    """Sorted grid containing ``points`` and 0 with spacing at most ``step``."""
    knots = np.unique(np.concatenate([[0.0], points]))
    pieces = [knots[:1]]
    for a, b in zip(knots[:-1], knots[1:]):
        m = max(int(math.ceil((b - a) / step)), 1)
        pieces.append(np.linspace(a, b, m + 1)[1:])
    return np.concatenate(pieces)


MAX_PHASE_STEP = np.pi / 4
MAX_REFINE = 40


def chi_quadratic(u, params, trunc):
    """Characteristic function of the work at real ``u``.

    Each manifold contributes ``1 / sqrt(Q_n(u))`` with the square-root branch
    continued from ``Q_n(0) = 1``.  The phase of ``Q_n`` is accumulated along
    an internal grid that starts at step ``pi / (8 s_max)`` and is bisected
    wherever the phase moves by more than ``pi / 4`` between neighbours.

    Raises
    ------
    BranchTrackingError
        If bisection fails to resolve the phase.
    """
    _require_quadratic(params)
    u_in = np.asarray(u, dtype=float)
    flat = u_in.ravel()
    if params.coupling == 0.0:
        return complex(1.0) if u_in.ndim == 0 else np.ones(u_in.shape, dtype=complex)
    log_w = photon_log_weights(params, trunc.n_max)
    keep = np.isfinite(log_w)
    n = np.flatnonzero(keep).astype(float)
    w = np.exp(log_w[keep])
    s_max = math.sqrt(1.0 + 4.0 * params.coupling * trunc.n_max)
    fine = _refined(flat, np.pi / (8.0 * s_max))
    q = _polynomial(fine, n, params)
    for _ in range(MAX_REFINE):
        step = np.angle(q[:, 1:] / q[:, :-1])
        bad = np.flatnonzero(np.any(np.abs(step) > MAX_PHASE_STEP, axis=0))
        if bad.size == 0:
            break
        mid = 0.5 * (fine[bad] + fine[bad + 1])
        fine = np.insert(fine, bad + 1, mid)
        q = np.insert(q, bad + 1, _polynomial(mid, n, params), axis=1)
    else:
        raise BranchTrackingError("square-root branch ambiguous; refine the u grid",
                                  quantity=float(np.abs(step).max()))
    zero = int(np.searchsorted(fine, 0.0))
    phase = np.concatenate([np.zeros((n.size, 1)), np.cumsum(step, axis=1)], axis=1)
    phase -= phase[:, zero:zero + 1]
    root = np.sqrt(np.abs(q)) * np.exp(0.5j * phase)
    per_point = (w[:, None] / root).sum(axis=0)
    out = per_point[np.searchsorted(fine, flat)]
    out = np.where(flat == 0, 1.0 + 0.0j, out).reshape(u_in.shape)
    return complex(out) if out.ndim == 0 else out


def char_function_quadratic(params, trunc, u_grid=None):
    u_grid = default_u_grid() if u_grid is None else np.asarray(u_grid, dtype=float)
    return CharFunctionSample(u_grid=u_grid, values=np.atleast_1d(chi_quadratic(u_grid, params, trunc)))


def iter_manifolds_quadratic(params, trunc):
    """Yield the transition table of every photon manifold in increasing ``n``.

    Work values come from the eigenvalues ``s_n (k' + 1/2) - (k + 1/2)``.
    """
    _require_quadratic(params)
    check_caps(trunc)
    k = np.arange(trunc.k_init + 1)
    kp = np.arange(trunc.k_max + 1)
    p_k = thermal_weights(params.n_m, trunc.k_init)
    init = k + 0.5
    for n in range(trunc.n_max + 1):
        p_n = thermal_weight(n, params.n_c)
        zeta = float(squeeze_parameter(n, params.coupling))
        kernel = squeeze_overlap_matrix(zeta, trunc.k_init, trunc.k_max)
        final = math.sqrt(1.0 + 4.0 * params.coupling * n) * (kp + 0.5)
        yield Manifold(n, init, final, (p_n * p_k)[:, None] * kernel)


def work_distribution_quadratic(params, trunc):
    """Two-point-measurement work distribution as merged atoms.

    Raises
    ------
    TruncationError
        If the discarded probability exceeds ``trunc.tail_tol``.
    """
    if params.coupling == 0.0:
        # no quench: every transition is k -> k with zero work
        return WorkDistribution(np.zeros(1), np.ones(1), 0.0, {"kind": "quadratic"})
    return merge_manifolds(iter_manifolds_quadratic(params, trunc), tail_tol=trunc.tail_tol,
                           metadata={"kind": "quadratic"})


def moments_quadratic(params):
    """Closed-form mean, variance and skewness of the work."""
    _require_quadratic(params)
    kappa, n_c = params.coupling, params.n_c
    c = 1.0 + 2.0 * params.n_m
    mean = kappa * n_c * c
    variance = kappa ** 2 * n_c * (3.0 + 5.0 * n_c) * c ** 2
    if variance == 0.0:
        return Moments(mean, 0.0, float("nan"), note=DEGENERATE)
    numer = 4.0 + 8.0 * n_c + kappa * (15.0 + 81.0 * n_c + 74.0 * n_c ** 2) * c ** 2
    denom = kappa * math.sqrt(n_c) * (3.0 + 5.0 * n_c) ** 1.5 * c ** 2
    return Moments(mean, variance, numer / denom)


def _log_sinh(x):
    x = np.asarray(x, dtype=float)
    return x + np.log(-np.expm1(-2.0 * x)) - math.log(2.0)


def delta_f_quadratic(params, trunc=None):
    """Free-energy difference from the manifold frequencies ``s_n``.

    ``-(1/beta) [ln sinh(beta/2) - ln sum_n w_n sinh(s_n beta/2)^-1]`` with the
    thermal photon weights ``w_n`` renormalized up to ``trunc.n_max``.
    """
    _require_quadratic(params)
    if trunc is None:
        trunc = choose_truncation(params, resolve_phonons=False)
    if params.coupling == 0.0:
        return 0.0
    beta = params.beta
    log_w = photon_log_weights(params, trunc.n_max)
    s = np.sqrt(1.0 + 4.0 * params.coupling * np.arange(trunc.n_max + 1))
    total = logsumexp(log_w - _log_sinh(0.5 * beta * s))
    return float(-(_log_sinh(0.5 * beta) + total) / beta) + 0.0
