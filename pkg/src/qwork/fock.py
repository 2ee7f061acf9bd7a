"""Thermal statistics, Fock-space overlap kernels and truncation selection.

Units: hbar = omega_m = 1.  Energies and work are in units of hbar*omega_m,
times and the characteristic-function argument u in units of 1/omega_m.
"""

from __future__ import annotations

import enum
import math
import os
from dataclasses import dataclass, field, replace

import mpmath
import numpy as np
from scipy.special import gammaln, xlogy

from .errors import CapExceededError, TemperatureError, UnboundedSpectrumError

__all__ = [
    "CouplingKind",
    "PhysicalParams",
    "Truncation",
    "thermal_occupation",
    "thermal_weight",
    "thermal_weights",
    "thermal_tail",
    "displacement_overlap",
    "displacement_overlap_matrix",
    "squeeze_overlap",
    "squeeze_overlap_matrix",
    "squeeze_parameter",
    "choose_truncation",
    "overlap_kernel",
    "photon_log_weights",
    "photon_cap",
    "phonon_cap",
    "check_caps",
]

PHOTON_HARD_CAP = 4096
PHONON_HARD_CAP = 8192


class CouplingKind(str, enum.Enum):
    LINEAR = "linear"
    QUADRATIC = "quadratic"


def thermal_occupation(omega, beta):
    """Bose-Einstein occupation ``1 / (exp(beta*omega) - 1)``.

    Raises
    ------
    TemperatureError
        If ``beta*omega`` underflows to zero or the result is not finite.
    """
    if omega <= 0 or beta <= 0:
        raise ValueError(f"omega and beta must be positive, got {omega!r}, {beta!r}")
    x = beta * omega
    if x == 0.0:
        raise TemperatureError("temperature too high for cutoff", quantity=x)
    with np.errstate(over="ignore", divide="ignore"):
        value = 1.0 / np.expm1(x)
    if not np.isfinite(value):
        raise TemperatureError("temperature too high for cutoff", quantity=x)
    return float(value)


def thermal_weight(n, occupation):
    """Geometric weight ``N**n / (1 + N)**(n + 1)`` of Fock level ``n``."""
    n = np.asarray(n)
    if np.any(n < 0) or occupation < 0:
        raise ValueError("n and occupation must be non-negative")
    if occupation == 0:
        out = (n == 0).astype(float)
    else:
        out = np.exp(n * math.log(occupation) - (n + 1) * math.log1p(occupation))
    return float(out) if out.ndim == 0 else out


def thermal_weights(occupation, n_max):
    return thermal_weight(np.arange(n_max + 1), occupation)


def thermal_tail(occupation, n_max):
    """Mass of the geometric law above ``n_max``."""
    if occupation == 0:
        return 0.0
    ratio_log = math.log(occupation) - math.log1p(occupation)
    return math.exp((n_max + 1) * ratio_log)


def photon_log_weights(params, n_max):
    """Log thermal photon weights renormalized over ``0..n_max``.

    Truncated sums in the characteristic function and free energy use these,
    so that ``chi(0) == 1`` and a zero coupling gives ``delta_f == 0``.
    """
    n = np.arange(n_max + 1)
    occ = params.n_c
    if occ == 0:
        return np.where(n == 0, 0.0, -np.inf)
    log_w = n * (math.log(occ) - math.log1p(occ))
    return log_w - np.logaddexp.reduce(log_w)


def _smallest_cutoff(occupation, tol):
    if occupation == 0:
        return 0
    ratio_log = math.log(occupation) - math.log1p(occupation)
    n = max(int(math.ceil(math.log(tol) / ratio_log)) - 1, 0)
    # guard the ceil against rounding in either direction
    while n > 0 and thermal_tail(occupation, n - 1) <= tol:
        n -= 1
    while thermal_tail(occupation, n) > tol:
        n += 1
    return n


@dataclass(frozen=True)
class PhysicalParams:
    """Quench configuration in units of the mechanical frequency.

    ``coupling`` is the linear coupling g or the quadratic coupling kappa,
    selected by ``kind``.  ``displacement`` is the real mechanical drive
    amplitude E of the displaced-oscillator variant (linear coupling only).
    """

    omega_c: float
    coupling: float
    kind: CouplingKind = CouplingKind.LINEAR
    beta: float = 1e-3
    displacement: float = 0.0
    omega_m: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", CouplingKind(self.kind))
        for name in ("omega_c", "coupling", "beta", "displacement", "omega_m"):
            value = getattr(self, name)
            if isinstance(value, complex) or not np.isfinite(value):
                raise ValueError(f"{name} must be a finite real number, got {value!r}")
            object.__setattr__(self, name, float(value))
        if self.omega_m != 1.0:
            raise ValueError("omega_m is the unit of energy and must equal 1")
        if self.omega_c <= 0 or self.beta <= 0:
            raise ValueError("omega_c and beta must be positive")
        if self.kind is CouplingKind.QUADRATIC:
            if self.coupling < 0:
                raise ValueError("quadratic coupling kappa must be non-negative")
            if self.displacement != 0.0:
                raise ValueError("displacement is only defined for linear coupling")

    @classmethod
    def from_occupations(cls, n_c, n_m, coupling, kind=CouplingKind.LINEAR, displacement=0.0):
        """Build parameters from thermal occupations instead of beta and omega_c."""
        if n_c <= 0 or n_m <= 0:
            raise ValueError("occupations must be positive")
        beta = math.log1p(1.0 / n_m)
        omega_c = math.log1p(1.0 / n_c) / beta
        return cls(omega_c=omega_c, coupling=coupling, kind=kind, beta=beta,
                   displacement=displacement)

    @property
    def n_c(self):
        return thermal_occupation(self.omega_c, self.beta)

    @property
    def n_m(self):
        return thermal_occupation(self.omega_m, self.beta)

    def with_(self, **changes):
        return replace(self, **changes)

    def to_dict(self):
        return {
            "omega_c": self.omega_c,
            "omega_m": self.omega_m,
            "coupling": self.coupling,
            "kind": self.kind.value,
            "beta": self.beta,
            "displacement": self.displacement,
            "n_c": self.n_c,
            "n_m": self.n_m,
        }


def photon_cap():
    return min(PHOTON_HARD_CAP, _env_cap())


def phonon_cap():
    return min(PHONON_HARD_CAP, _env_cap())


def _env_cap():
    raw = os.environ.get("QW_MAX_DIM")
    if not raw:
        return PHONON_HARD_CAP
    value = int(raw)
    if value < 0:
        raise ValueError("QW_MAX_DIM must be non-negative")
    return value


@dataclass(frozen=True)
class Truncation:
    """Photon and phonon cutoffs.

    ``k_init`` bounds the initial (thermal) phonon index and ``k_max`` the
    final one; the final range is wider because the quench kernels spread
    the phonon distribution.  ``k_init`` defaults to ``k_max``.
    """

    n_max: int
    k_max: int
    tail_tol: float = 1e-12
    k_init: int = field(default=None)

    def __post_init__(self):
        if self.k_init is None:
            object.__setattr__(self, "k_init", self.k_max)
        for name in ("n_max", "k_max", "k_init"):
            value = getattr(self, name)
            if int(value) != value or value < 0:
                raise ValueError(f"{name} must be a non-negative integer, got {value!r}")
            object.__setattr__(self, name, int(value))
        if not 0 < self.tail_tol < 1:
            raise ValueError("tail_tol must lie in (0, 1)")
        if self.k_init > self.k_max:
            raise ValueError("k_init cannot exceed k_max")

    def to_dict(self):
        return {"n_max": self.n_max, "k_max": self.k_max, "k_init": self.k_init,
                "tail_tol": self.tail_tol}


def check_caps(trunc):
    """Raise if a truncation exceeds the hard caps for phonon-resolved work."""
    if trunc.n_max > photon_cap():
        raise CapExceededError("photon cutoff above hard cap", quantity=trunc.n_max)
    if trunc.k_max > phonon_cap():
        raise CapExceededError("phonon cutoff above hard cap", quantity=trunc.k_max)


# ---------------------------------------------------------------------------
# displacement kernel

def _log_laguerre_table(j_max, alphas, x):
    """``log|L_j^(alpha)(x)|`` for ``j = 0..j_max`` and every alpha in ``alphas``.

    Upward three-term recurrence in the degree, with per-column rescaling so
    that high degrees and large orders do not overflow.
    """
    alphas = np.asarray(alphas, dtype=float)
    table = np.empty((j_max + 1, alphas.size))
    table[0] = 0.0
    if j_max == 0:
        return table
    scale = np.zeros_like(alphas)
    prev = np.ones_like(alphas)
    cur = 1.0 + alphas - x
    with np.errstate(divide="ignore"):
        table[1] = np.log(np.abs(cur))
        for j in range(1, j_max):
            nxt = ((2 * j + 1 + alphas - x) * cur - (j + alphas) * prev) / (j + 1)
            big = np.abs(nxt) > 1e150
            if big.any():
                f = np.where(big, np.abs(nxt), 1.0)
                nxt = nxt / f
                cur = cur / f
                scale = scale + np.log(f)
            prev, cur = cur, nxt
            table[j + 1] = np.log(np.abs(cur)) + scale
    return table


def _log_displacement(lo, d, x, log_lag):
    return (gammaln(lo + 1) - gammaln(lo + d + 1) - x + xlogy(d, x) + 2.0 * log_lag)


def displacement_overlap(k, k_prime, lam):
    """Transition probability ``|<k'|D(lam)|k>|**2`` for real ``lam``.

    Evaluated from the associated-Laguerre closed form in log space, with the
    lower index as the polynomial degree (the modulus is symmetric in k, k').
    Accepts broadcastable integer arrays.
    """
    k, k_prime = np.broadcast_arrays(np.asarray(k), np.asarray(k_prime))
    if np.any(k < 0) or np.any(k_prime < 0):
        raise ValueError("Fock indices must be non-negative")
    if not np.isfinite(lam):
        raise ValueError("lam must be finite")
    x = float(lam) ** 2
    lo = np.minimum(k, k_prime)
    d = np.abs(k - k_prime)
    alphas, inverse = np.unique(d, return_inverse=True)
    table = _log_laguerre_table(int(lo.max(initial=0)), alphas, x)
    log_lag = table[lo.ravel(), inverse.ravel()].reshape(lo.shape)
    out = np.exp(_log_displacement(lo, d, x, log_lag))
    return float(out) if out.ndim == 0 else out


def displacement_overlap_matrix(lam, k_init, k_final):
    """Matrix ``P[k, k'] = |<k'|D(lam)|k>|**2``, shape (k_init+1, k_final+1)."""
    x = float(lam) ** 2
    if x == 0.0:
        return np.eye(k_init + 1, k_final + 1)
    lo_max = min(k_init, k_final)
    d_max = max(k_init, k_final)
    table = _log_laguerre_table(lo_max, np.arange(d_max + 1), x)
    kp = np.arange(k_final + 1)
    out = np.empty((k_init + 1, k_final + 1))
    for k in range(k_init + 1):
        lo = np.minimum(k, kp)
        d = np.abs(kp - k)
        out[k] = np.exp(_log_displacement(lo, d, x, table[lo, d]))
    return out


# ---------------------------------------------------------------------------
# squeeze kernel

def squeeze_parameter(n, kappa):
    """Static diagonalizing squeeze ``zeta_n = ln(1 + 4 kappa n) / 4``."""
    return 0.25 * np.log1p(4.0 * kappa * np.asarray(n, dtype=float))


def _squeeze_terms(k, k_prime, zeta, ctx):
    """Signed terms of the double sum over (m, l) with k' - 2m = k - 2l."""
    half = (k_prime - k) // 2
    tanh = ctx.tanh(zeta)
    cosh = ctx.cosh(zeta)
    terms = []
    for l in range(k // 2 + 1):
        m = l + half
        if m < 0 or m > k_prime // 2:
            continue
        mag = (tanh ** (m + l)) * cosh ** (2 * l) / (
            ctx.mpf(2) ** (m + l) * ctx.factorial(m) * ctx.factorial(l) * ctx.factorial(k - 2 * l))
        terms.append(-mag if m % 2 else mag)
    return terms


def _squeeze_from_terms(k, k_prime, zeta, terms, ctx):
    total = ctx.fsum(terms)
    cosh = ctx.cosh(zeta)
    return ctx.factorial(k) * ctx.factorial(k_prime) / cosh ** (2 * k + 1) * total ** 2


def squeeze_overlap(k, k_prime, zeta):
    """Transition probability ``|<k'|S(zeta)|k>|**2`` for real ``zeta``.

    ``S(zeta) = exp(zeta/2 (b**2 - b^dag**2))``.  The finite double sum over
    the normal-ordered expansion is evaluated term by term; it alternates in
    sign, so the working precision is raised until two successive precisions
    agree to 1e-15 relative.  Odd ``k' - k`` returns exactly 0.
    """
    k, k_prime = int(k), int(k_prime)
    if k < 0 or k_prime < 0:
        raise ValueError("Fock indices must be non-negative")
    if not np.isfinite(zeta):
        raise ValueError("zeta must be finite")
    if (k_prime - k) % 2:
        return 0.0
    if zeta == 0.0:
        return 1.0 if k == k_prime else 0.0
    ctx = mpmath.mp
    dps = 30
    previous = None
    while True:
        with mpmath.workdps(dps):
            z = ctx.mpf(zeta)
            terms = _squeeze_terms(k, k_prime, z, ctx)
            value = _squeeze_from_terms(k, k_prime, z, terms, ctx)
        if previous is not None:
            scale = max(abs(value), abs(previous))
            if scale == 0 or abs(value - previous) <= 1e-15 * scale:
                return float(value)
        previous = value
        dps *= 2
        if dps > 20000:  # pragma: no cover - would need k in the tens of thousands
            raise ArithmeticError("squeeze double sum failed to converge in precision")


def _log_jacobi_table(a_max, alphas, beta, x):
    """``log|P_a^(alpha, beta)(x)|`` for ``a = 0..a_max`` (forward recurrence)."""
    alphas = np.asarray(alphas, dtype=float)
    table = np.empty((a_max + 1, alphas.size))
    table[0] = 0.0
    if a_max == 0:
        return table
    scale = np.zeros_like(alphas)
    prev = np.ones_like(alphas)
    cur = (alphas + 1.0) + (alphas + beta + 2.0) * (x - 1.0) / 2.0
    with np.errstate(divide="ignore"):
        table[1] = np.log(np.abs(cur))
        for n in range(2, a_max + 1):
            s = alphas + beta
            c = 2 * n + s
            a_coef = (c - 1) * (c * (c - 2) * x + alphas ** 2 - beta ** 2)
            b_coef = 2 * (n + alphas - 1) * (n + beta - 1) * c
            d_coef = 2 * n * (n + s) * (c - 2)
            nxt = (a_coef * cur - b_coef * prev) / d_coef
            big = np.abs(nxt) > 1e150
            if big.any():
                f = np.where(big, np.abs(nxt), 1.0)
                nxt = nxt / f
                cur = cur / f
                scale = scale + np.log(f)
            prev, cur = cur, nxt
            table[n] = np.log(np.abs(cur)) + scale
    return table


def squeeze_overlap_matrix(zeta, k_init, k_final):
    """Matrix ``P[k, k'] = |<k'|S(zeta)|k>|**2``, shape (k_init+1, k_final+1).

    Same quantity as :func:`squeeze_overlap`, rewritten through a Pfaff
    transformation as a Jacobi polynomial ``P_a^(d, p - 1/2)(1 - 2 tanh^2)``
    (``lo = 2a + p`` the smaller index, ``d`` half the index gap) whose
    forward recurrence is stable in double precision.
    """
    zeta = float(zeta)
    if zeta == 0.0:
        return np.eye(k_init + 1, k_final + 1)
    tanh, log_cosh = math.tanh(zeta), math.log(math.cosh(zeta))
    x = 1.0 - 2.0 * tanh * tanh
    lo_max = min(k_init, k_final)
    d_max = max(k_init, k_final) // 2
    tables = [_log_jacobi_table(lo_max // 2, np.arange(d_max + 1), p - 0.5, x) for p in (0, 1)]
    log_half_tanh = math.log(abs(tanh) / 2.0)
    kp = np.arange(k_final + 1)
    out = np.zeros((k_init + 1, k_final + 1))
    for k in range(k_init + 1):
        sel = kp[(kp - k) % 2 == 0]
        lo = np.minimum(k, sel)
        hi = np.maximum(k, sel)
        a, p = np.divmod(lo, 2)
        d = (hi - lo) // 2
        log_jac = np.where(p == 0, tables[0][a, d], tables[1][a, d])
        log_s = (d * log_half_tanh + 2 * a * log_cosh + gammaln(a + 1)
                 - gammaln(lo + 1) - gammaln(d + a + 1) + log_jac)
        out[k, sel] = np.exp(gammaln(lo + 1) + gammaln(hi + 1)
                             - (2 * lo + 1) * log_cosh + 2.0 * log_s)
    return out


# ---------------------------------------------------------------------------
# truncation

def overlap_kernel(params, n, k_init, k_final):
    """Phonon transition matrix of photon manifold ``n`` for either coupling."""
    if params.kind is CouplingKind.LINEAR:
        return displacement_overlap_matrix(params.coupling * n, k_init, k_final)
    return squeeze_overlap_matrix(float(squeeze_parameter(n, params.coupling)), k_init, k_final)


def _leakage(params, n, k_init, k_final):
    weights = thermal_weights(params.n_m, k_init)
    kept = overlap_kernel(params, n, k_init, k_final).sum(axis=1)
    return float(np.dot(weights, np.clip(1.0 - kept, 0.0, None)))


def _final_spacing(params, n):
    if params.kind is CouplingKind.LINEAR:
        return 1.0
    return math.sqrt(1.0 + 4.0 * params.coupling * n)


def _log_exp_gain(params, n):
    """Log of the manifold-``n`` Boltzmann-weighted average of ``exp(-beta W)``."""
    beta, g = params.beta, params.coupling
    if params.kind is CouplingKind.LINEAR:
        return beta * (g * g * n * n - 2.0 * g * n * params.displacement)
    s = _final_spacing(params, n)
    return -0.5 * beta * (s - 1.0) + math.log(-math.expm1(-beta)) - math.log(-math.expm1(-beta * s))


def _reweighted_tail(params, n, k_init):
    """Share of ``<exp(-beta W)>`` in manifold ``n`` carried by levels above ``k_init``.

    The phonon kernel is unitary, so its columns sum to one and the missing
    share follows from the final levels alone, weighted by the final Gibbs law.
    """
    s = _final_spacing(params, n)
    occ = 1.0 / math.expm1(params.beta * s)
    k_f = _smallest_cutoff(occ, 1e-16)
    gibbs = thermal_weights(occ, k_f)
    kept = overlap_kernel(params, n, k_init, k_f).sum(axis=0)
    return float(np.dot(gibbs, np.clip(1.0 - kept, 0.0, None)))


def _reweighted_cutoff(params, n_max, k_init, tol):
    """Initial phonon cutoff that also covers the exponential work average."""
    n = np.arange(n_max + 1)
    log_c = photon_log_weights(params, n_max) + np.array([_log_exp_gain(params, m) for m in n])
    share = np.exp(log_c - np.logaddexp.reduce(log_c))
    cap = phonon_cap()
    for m in n[::-1]:
        if m == 0 or share[m] <= tol:
            continue
        while k_init <= cap and share[m] * _reweighted_tail(params, m, k_init) > tol:
            k_init = int(math.ceil(k_init * 1.25)) + 1
    return k_init


def choose_truncation(params, tail_tol=1e-12, require_convergent=True, resolve_phonons=True):
    """Smallest cutoffs whose discarded probability stays below ``tail_tol``.

    Each thermal tail (photon, initial phonon) is held below ``tail_tol/4``.
    The initial phonon cutoff is widened further until the levels it drops
    carry less than ``tail_tol/4`` of the exponential work average, since
    the Boltzmann factor of a downward transition undoes their thermal
    suppression.  A linear point whose free-energy series does not converge
    at the photon cutoff skips this step.
    The final phonon cutoff starts from the thermal one plus a kernel-spread
    allowance and grows until the mass leaking past it, measured with the
    actual overlap kernel of the widest manifold, is below ``tail_tol/4``.

    Parameters
    ----------
    require_convergent : bool
        Check the linear free-energy series at the photon cutoff.  Work
        distributions and characteristic functions stay finite without it.
    resolve_phonons : bool
        Widen the final phonon cutoff for the kernel spread.  Quantities that
        only sum over photons (free energies) can skip this scan, in which
        case ``k_max`` equals the thermal cutoff.

    Raises
    ------
    UnboundedSpectrumError
        Linear coupling whose free-energy series term is still growing at the
        photon cutoff (only with ``require_convergent``).
    CapExceededError
        Photon cutoff above the hard cap.  Phonon cutoffs above the cap are
        returned as-is and rejected by the phonon-resolved consumers.
    """
    if not 0 < tail_tol < 1:
        raise ValueError("tail_tol must lie in (0, 1)")
    part = tail_tol / 4.0
    n_max = _smallest_cutoff(params.n_c, part)
    if n_max > photon_cap():
        raise CapExceededError("photon cutoff above hard cap", quantity=n_max)
    g = params.coupling
    growth = -1.0
    if params.kind is CouplingKind.LINEAR:
        growth = g * g * (2 * n_max + 1) - 2.0 * g * params.displacement - params.omega_c
    if require_convergent and growth >= 0:
        raise UnboundedSpectrumError(
            "free-energy series term increasing at the photon cutoff",
            quantity={"n_max": n_max, "log_ratio_over_beta": growth})
    k_init = _smallest_cutoff(params.n_m, part)
    spread = g * n_max
    if spread == 0.0 or not resolve_phonons:
        return Truncation(n_max=n_max, k_max=k_init, tail_tol=tail_tol, k_init=k_init)
    if growth < 0:
        # without convergence the exponential average has no limit to cover
        k_init = _reweighted_cutoff(params, n_max, k_init, part)
    if params.kind is CouplingKind.LINEAR:
        k_max = k_init + int(math.ceil(10.0 * abs(spread) + 10.0))
    else:
        k_max = int(math.ceil(k_init * math.sqrt(1.0 + 4.0 * spread))) + 10
    cap = phonon_cap()
    while k_max <= cap and _leakage(params, n_max, k_init, k_max) > part:
        k_max = int(math.ceil(k_max * 1.25))
    return Truncation(n_max=n_max, k_max=k_max, tail_tol=tail_tol, k_init=k_init)
