"""Brute-force reference: truncated Hamiltonian matrices and the two-point measurement.

Everything here works on the bare product basis ``|n> (x) |k>`` with row-major
ordering (photon index outer).  Both Hamiltonians commute with the photon
number, so most routines only ever build one ``(k_max + 1)``-square phonon
block per photon manifold.  Matrix truncation corrupts the top few phonon
levels; comparisons against the closed forms should stay inside
:func:`interior_limit`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.linalg import LinAlgError, block_diag, eigh, expm
from scipy.special import logsumexp

from .distribution import WorkDistribution
from .errors import CapExceededError, EigensolverError
from .fock import CouplingKind, check_caps, thermal_weights
from .linear import check_convergent
from .quadratic import squeeze_factors

__all__ = [
    "TruncatedOperator",
    "TwoPointOutcomes",
    "build_hamiltonians",
    "block_spectra",
    "two_point_outcomes",
    "two_point_measurement",
    "chi_by_trace",
    "backward_chi",
    "crooks_delta_f",
    "work_moment_by_trace",
    "evolve_state",
    "trace_distance",
    "mutual_information",
    "interior_limit",
]

# dense full-space operators beyond this dimension are refused
FULL_DIM_LIMIT = 4096
INTERIOR_FRACTION = 0.85


@dataclass(frozen=True)
class TruncatedOperator:
    """Dense operator on the truncated photon-phonon product space."""

    dim_photon: int
    dim_phonon: int
    entries: np.ndarray

    def __post_init__(self):
        dim = self.dim_photon * self.dim_phonon
        if self.entries.shape != (dim, dim):
            raise ValueError(f"entries must have shape ({dim}, {dim})")

    def block(self, n, m=None):
        m = n if m is None else m
        d = self.dim_phonon
        return self.entries[n * d:(n + 1) * d, m * d:(m + 1) * d]

    def hermiticity_error(self):
        return float(np.max(np.abs(self.entries - self.entries.conj().T)))

    def off_block_norm(self):
        """Largest entry outside the photon-diagonal blocks."""
        mask = np.kron(1 - np.eye(self.dim_photon), np.ones((self.dim_phonon, self.dim_phonon)))
        return float(np.max(np.abs(self.entries) * mask)) if self.dim_photon > 1 else 0.0

    def trace(self):
        return complex(np.trace(self.entries))

    def tensor(self):
        """Entries reshaped to ``(n, k, n', k')``."""
        return self.entries.reshape(self.dim_photon, self.dim_phonon, self.dim_photon, self.dim_phonon)


def ladder(dim):
    """Truncated annihilation operator."""
    return np.diag(np.sqrt(np.arange(1.0, dim)), 1)


def interior_limit(trunc):
    """Phonon indices below this value are free of truncation artifacts (top 15% excluded)."""
    return int(math.floor(INTERIOR_FRACTION * (trunc.k_max + 1)))


def _mechanical_blocks(params, n, dim):
    b = ladder(dim)
    x = b + b.T
    h0 = np.diag(np.arange(dim) + 0.5) - params.displacement * x + params.omega_c * n * np.eye(dim)
    if params.kind is CouplingKind.LINEAR:
        v = params.coupling * n * x
    else:
        v = params.coupling * n * (x @ x)
    return h0, h0 + v


def build_hamiltonians(params, trunc):
    """Full truncated ``(H_I, H_F)`` as dense block-diagonal matrices.

    Raises
    ------
    CapExceededError
        If the cutoffs exceed the hard caps or the full dimension exceeds 4096.
    """
    check_caps(trunc)
    dim = trunc.k_max + 1
    full = (trunc.n_max + 1) * dim
    if full > FULL_DIM_LIMIT:
        raise CapExceededError("full product-space dimension too large for dense operators",
                               quantity=full)
    blocks = [_mechanical_blocks(params, n, dim) for n in range(trunc.n_max + 1)]
    h_i = block_diag(*[b[0] for b in blocks])
    h_f = block_diag(*[b[1] for b in blocks])
    dp = trunc.n_max + 1
    return TruncatedOperator(dp, dim, h_i), TruncatedOperator(dp, dim, h_f)


class BlockSpectrum(NamedTuple):
    n: int
    init_energies: np.ndarray
    init_vectors: np.ndarray
    final_energies: np.ndarray
    final_vectors: np.ndarray

    def overlaps(self):
        """``O[a, j] = |<init_a|final_j>|^2``."""
        return np.abs(self.init_vectors.T @ self.final_vectors) ** 2

    def edge_weights(self, k_limit):
        """Weight of each initial and final eigenvector on bare levels ``>= k_limit``."""
        return ((self.init_vectors[k_limit:] ** 2).sum(axis=0),
                (self.final_vectors[k_limit:] ** 2).sum(axis=0))


def _eigh(matrix, n):
    try:
        return eigh(matrix)
    except LinAlgError as exc:
        raise EigensolverError("dense eigensolver failed", quantity={"block": n}) from exc


def block_spectra(params, trunc):
    """Diagonalize both Hamiltonians manifold by manifold (lazy, increasing ``n``)."""
    check_caps(trunc)
    dim = trunc.k_max + 1
    for n in range(trunc.n_max + 1):
        h0, h1 = _mechanical_blocks(params, n, dim)
        if params.displacement == 0.0:
            e0, v0 = np.diag(h0).copy(), np.eye(dim)
        else:
            e0, v0 = _eigh(h0, n)
        e1, v1 = _eigh(h1, n)
        yield BlockSpectrum(n, e0, v0, e1, v1)


@dataclass(frozen=True)
class TwoPointOutcomes:
    """Flat table of measurement outcomes ``(n, k) -> (n, k')``.

    ``k`` and ``k'`` label eigenstates of the initial and final block in
    increasing energy; the initial weight is the geometric thermal law in
    that label, so the table is directly comparable with the closed forms.
    """

    n: np.ndarray
    k: np.ndarray
    k_prime: np.ndarray
    work: np.ndarray
    probability: np.ndarray
    edge_weight: np.ndarray

    def restrict(self, k_limit, edge_tol=None):
        """Keep outcomes away from the truncation edge.

        Both labels must lie below ``k_limit``; with ``edge_tol`` the two
        eigenvectors must also carry at most that weight on the bare levels
        at or above the limit (recorded when the table was built).
        """
        keep = (self.k < k_limit) & (self.k_prime < k_limit)
        if edge_tol is not None:
            keep &= self.edge_weight <= edge_tol
        return TwoPointOutcomes(*(getattr(self, f)[keep] for f in _FIELDS))

    def distribution(self):
        return WorkDistribution.from_transitions(self.work, self.probability,
                                                 metadata={"source": "oracle"})


_FIELDS = ("n", "k", "k_prime", "work", "probability", "edge_weight")


def two_point_outcomes(params, trunc):
    """Every ``(n, k, k')`` outcome with its work and joint probability.

    ``edge_weight`` is the larger of the two eigenvector weights on the top
    15% of bare phonon levels, a measure of truncation damage.
    """
    dim = trunc.k_max + 1
    limit = interior_limit(trunc)
    p_k = thermal_weights(params.n_m, trunc.k_max)
    p_n = thermal_weights(params.n_c, trunc.n_max)
    kk, jj = np.meshgrid(np.arange(dim), np.arange(dim), indexing="ij")
    cols = {f: [] for f in _FIELDS}
    for spec in block_spectra(params, trunc):
        prob = p_n[spec.n] * p_k[:, None] * spec.overlaps()
        cols["n"].append(np.full(dim * dim, spec.n))
        cols["k"].append(kk.ravel())
        cols["k_prime"].append(jj.ravel())
        cols["work"].append((spec.final_energies[None, :] - spec.init_energies[:, None]).ravel())
        cols["probability"].append(prob.ravel())
        w0, w1 = spec.edge_weights(limit)
        cols["edge_weight"].append(np.maximum(w0[:, None], w1[None, :]).ravel())
    return TwoPointOutcomes(**{f: np.concatenate(v) for f, v in cols.items()})


def two_point_measurement(params, trunc):
    """Work distribution from explicit diagonalization of every manifold."""
    return two_point_outcomes(params, trunc).distribution()


def _gibbs_log_weights(energies, beta):
    """Normalized log Gibbs weights over all blocks; shifting by the minimum avoids overflow."""
    flat = np.concatenate(energies)
    shift = flat.min()
    log_z = logsumexp(-beta * (flat - shift))
    return [-beta * (e - shift) - log_z for e in energies]


def _spectral_sum(u, params, trunc, backward):
    u = np.atleast_1d(np.asarray(u, dtype=complex))
    spectra = list(block_spectra(params, trunc))
    if backward:
        log_w = _gibbs_log_weights([s.final_energies for s in spectra], params.beta)
    else:
        log_w = _gibbs_log_weights([s.init_energies for s in spectra], params.beta)
    total = np.zeros(u.shape, dtype=complex)
    for spec, lw in zip(spectra, log_w):
        with np.errstate(divide="ignore"):
            log_o = np.log(spec.overlaps())
        gap = spec.final_energies[None, :] - spec.init_energies[:, None]
        if backward:
            base = lw[None, :] + log_o
            gap = -gap
        else:
            base = lw[:, None] + log_o
        for i, ui in enumerate(u):
            expo = base + 1j * ui * gap
            peak = np.max(expo.real)
            if np.isfinite(peak):
                total[i] += np.exp(peak) * np.exp(expo - peak).sum()
    return total


def chi_by_trace(u, params, trunc):
    """``Tr[exp(i u H_F) exp(-i u H_I) rho_I]`` with ``rho_I`` the truncated Gibbs state.

    Valid at complex ``u``; ``u = i beta`` gives ``Z_F / Z_I`` on the truncated space.
    """
    out = _spectral_sum(u, params, trunc, backward=False)
    return complex(out[0]) if np.ndim(u) == 0 else out


def backward_chi(u, params, trunc):
    """Characteristic function of the reversed quench, starting from the Gibbs state of ``H_F``.

    Raises
    ------
    UnboundedSpectrumError
        Linear coupling whose final Gibbs state is not normalizable at this cutoff.
    """
    if params.kind is CouplingKind.LINEAR:
        check_convergent(params, trunc.n_max)
    out = _spectral_sum(u, params, trunc, backward=True)
    return complex(out[0]) if np.ndim(u) == 0 else out


def crooks_delta_f(u, params, trunc):
    """``-(1/beta) ln[chi(u) / chi_rev(i beta - u)]``; constant in ``u`` when the relation holds."""
    u = np.asarray(u, dtype=float)
    ratio = chi_by_trace(u, params, trunc) / backward_chi(1j * params.beta - u, params, trunc)
    return -np.log(ratio) / params.beta


def work_moment_by_trace(order, params, trunc):
    """``Tr[(H_F - H_I)^order rho_I]`` on the truncated space."""
    dim = trunc.k_max + 1
    spectra = list(block_spectra(params, trunc))
    log_w = _gibbs_log_weights([s.init_energies for s in spectra], params.beta)
    total = 0.0
    for spec, lw in zip(spectra, log_w):
        h0, h1 = _mechanical_blocks(params, spec.n, dim)
        v = np.linalg.matrix_power(h1 - h0, order)
        diag = np.einsum("ka,kl,la->a", spec.init_vectors, v, spec.init_vectors)
        total += float(np.dot(np.exp(lw), diag))
    return total


def _initial_state_blocks(params, trunc):
    spectra = list(block_spectra(params, trunc))
    log_w = _gibbs_log_weights([s.init_energies for s in spectra], params.beta)
    return [(s.init_vectors * np.exp(lw)) @ s.init_vectors.T for s, lw in zip(spectra, log_w)]


def _factored_propagator(params, n, t, dim):
    b = ladder(dim)
    num = np.diag(np.arange(dim) + 0.5)
    if params.kind is CouplingKind.LINEAR:
        lam = params.coupling * n
        alpha = -lam * (1.0 - np.exp(-1j * t))
        disp = expm(alpha * b.T - np.conj(alpha) * b)
        phase = np.exp(1j * lam * lam * (t - math.sin(t)))
        return phase * disp @ np.diag(np.exp(-1j * t * np.diag(num)))
    f = squeeze_factors(n, t, params)
    xi = complex(f.xi)
    squeeze = expm(0.5 * (np.conj(xi) * (b @ b) - xi * (b.T @ b.T)))
    return squeeze @ np.diag(np.exp(-1j * float(f.eta) * np.diag(num)))


def evolve_state(t, params, trunc, method="factored"):
    """Joint state ``exp(-i H_F t) rho_I exp(i H_F t)`` as a dense operator.

    ``method="factored"`` builds each manifold propagator from its closed
    disentangled form (undriven case only); ``"expm"`` exponentiates the
    truncated block directly.  Global photon phases cancel because the
    initial state is diagonal in photon number.
    """
    check_caps(trunc)
    if method not in ("factored", "expm"):
        raise ValueError("method must be 'factored' or 'expm'")
    dim = trunc.k_max + 1
    full = (trunc.n_max + 1) * dim
    if full > FULL_DIM_LIMIT:
        raise CapExceededError("full product-space dimension too large for dense operators",
                               quantity=full)
    if method == "factored" and params.displacement != 0.0:
        method = "expm"
    blocks = []
    for n, rho in enumerate(_initial_state_blocks(params, trunc)):
        if method == "factored":
            u_n = _factored_propagator(params, n, t, dim)
        else:
            h1 = _mechanical_blocks(params, n, dim)[1] - params.omega_c * n * np.eye(dim)
            u_n = expm(-1j * t * h1)
        blocks.append(u_n @ rho @ u_n.conj().T)
    return TruncatedOperator(trunc.n_max + 1, dim, block_diag(*blocks))


def trace_distance(rho, sigma):
    diff = rho.entries - sigma.entries
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(0.5 * (diff + diff.conj().T)))))


def _entropy(matrix):
    vals = np.linalg.eigvalsh(0.5 * (matrix + matrix.conj().T))
    vals = vals[vals > 1e-300]
    return float(-np.sum(vals * np.log(vals)))


def mutual_information(rho):
    """Photon-phonon mutual information ``S(rho_c) + S(rho_m) - S(rho)``."""
    t = rho.tensor()
    rho_c = np.einsum("akbk->ab", t)
    rho_m = np.einsum("akal->kl", t)
    return _entropy(rho_c) + _entropy(rho_m) - _entropy(rho.entries)
