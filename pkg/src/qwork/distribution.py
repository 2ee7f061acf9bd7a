"""Discrete work distributions and characteristic-function samples."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple

import numpy as np
from scipy.special import logsumexp

from .errors import TruncationError

MERGE_TOL = 1e-9


class Manifold(NamedTuple):
    """Transition table of one photon-number manifold.

    ``probs[k, k']`` is the joint probability of the initial phonon level k
    and the final level k'; the work of that transition is
    ``final_energy[k'] - init_energy[k]``.
    """

    n: int
    init_energy: np.ndarray
    final_energy: np.ndarray
    probs: np.ndarray

    def works(self):
        return self.final_energy[None, :] - self.init_energy[:, None]


@dataclass(frozen=True)
class CharFunctionSample:
    u_grid: np.ndarray
    values: np.ndarray

    def rows(self):
        return [[float(u), float(v.real), float(v.imag)] for u, v in zip(self.u_grid, self.values)]


@dataclass(frozen=True)
class WorkDistribution:
    """Discrete work measure: atoms sorted by work plus the missing mass.

    ``deficit`` is ``1 - sum(probs)``, the probability discarded by the
    truncation.  Expectations are taken with respect to the normalized measure.
    """

    works: np.ndarray
    probs: np.ndarray
    deficit: float = 0.0
    metadata: dict = field(default_factory=dict)

    @classmethod
    def from_transitions(cls, works, probs, merge_tol=MERGE_TOL, metadata=None):
        """Merge transitions into atoms; works closer than ``merge_tol`` coalesce."""
        works = np.asarray(works, dtype=float).ravel()
        probs = np.asarray(probs, dtype=float).ravel()
        if works.shape != probs.shape:
            raise ValueError("works and probs must have the same length")
        if np.any(probs < 0):
            raise ValueError("probabilities must be non-negative")
        total = float(np.sum(probs))
        keep = probs > 0
        works, probs = works[keep], probs[keep]
        order = np.argsort(works, kind="stable")
        works, probs = works[order], probs[order]
        if works.size:
            starts = np.flatnonzero(np.concatenate(([True], np.diff(works) >= merge_tol)))
            mass = np.add.reduceat(probs, starts)
            first = works[starts]
            counts = np.diff(np.append(starts, works.size))
            # weighted mean of offsets keeps the representative inside its group
            offset = np.add.reduceat(probs * (works - np.repeat(first, counts)), starts)
            works = first + offset / mass
            probs = mass
        return cls(works=works, probs=probs, deficit=_deficit(total),
                   metadata=dict(metadata or {}))

    @property
    def atoms(self):
        return np.column_stack([self.works, self.probs])

    def __len__(self):
        return self.works.size

    @property
    def total(self):
        return float(np.sum(self.probs))

    def mean(self):
        return float(np.dot(self.probs, self.works) / self.total)

    def central_moment(self, order):
        mu = self.mean()
        return float(np.dot(self.probs, (self.works - mu) ** order) / self.total)

    def variance(self):
        return self.central_moment(2)

    def skewness(self):
        var = self.variance()
        return self.central_moment(3) / var ** 1.5 if var > 0 else float("nan")

    def raw_moment(self, order):
        return float(np.dot(self.probs, self.works ** order) / self.total)

    def exp_average(self, beta):
        """Normalized ``<exp(-beta W)>``, accumulated in log space."""
        log_sum = logsumexp(np.log(self.probs) - beta * self.works)
        return float(np.exp(log_sum - math.log(self.total)))

    def char_function(self, u):
        u = np.asarray(u)
        phase = np.exp(1j * np.multiply.outer(u, self.works))
        return phase @ self.probs

    def to_rows(self):
        return [[float(w), float(p)] for w, p in zip(self.works, self.probs)]


def _deficit(total):
    deficit = 1.0 - total
    # rounding can push a complete measure a few ulps above one
    return 0.0 if -1e-13 < deficit < 0 else deficit


def merge_manifolds(manifolds: Iterable[Manifold], tail_tol=None, merge_tol=MERGE_TOL, metadata=None):
    """Merge the transition tables of several manifolds into one distribution."""
    works, probs, total = [], [], 0.0
    for m in manifolds:
        total += float(np.sum(m.probs))
        # merging each manifold first keeps the final sort small
        part = WorkDistribution.from_transitions(m.works(), m.probs, merge_tol=merge_tol)
        works.append(part.works)
        probs.append(part.probs)
    merged = WorkDistribution.from_transitions(
        np.concatenate(works) if works else np.zeros(0),
        np.concatenate(probs) if probs else np.zeros(0),
        merge_tol=merge_tol)
    dist = WorkDistribution(merged.works, merged.probs, _deficit(total), dict(metadata or {}))
    if tail_tol is not None and dist.deficit > tail_tol:
        raise TruncationError("normalization deficit above tail tolerance; phonon cutoff too small",
                              quantity=dist.deficit)
    return dist


class StreamStats(NamedTuple):
    mass: float
    mean: float
    variance: float
    skewness: float
    third_central: float
    exp_average: float | None
    deficit: float


def stream_statistics(manifolds: Iterable[Manifold], beta=None, tail_tol=None):
    """Moments and ``<exp(-beta W)>`` without materializing the merged atom list.

    Per-manifold central moments are combined pairwise (Chan et al.), which
    keeps the third central moment accurate when the mean is large.
    """
    mass = mean = m2 = m3 = 0.0
    log_exp = -np.inf
    for m in manifolds:
        w = m.works()
        p = m.probs
        pm = float(p.sum())
        if pm == 0:
            continue
        mu = float(np.sum(p * w) / pm)
        dw = w - mu
        c2 = float(np.sum(p * dw * dw))
        c3 = float(np.sum(p * dw * dw * dw))
        if beta is not None:
            with np.errstate(divide="ignore"):
                log_exp = np.logaddexp(log_exp, logsumexp(np.log(p) - beta * w))
        total = mass + pm
        delta = mu - mean
        m3 = (m3 + c3 + delta ** 3 * mass * pm * (mass - pm) / total ** 2
              + 3.0 * delta * (mass * c2 - pm * m2) / total)
        m2 = m2 + c2 + delta * delta * mass * pm / total
        mean = mean + delta * pm / total
        mass = total
    deficit = _deficit(mass)
    if tail_tol is not None and deficit > tail_tol:
        raise TruncationError("normalization deficit above tail tolerance; phonon cutoff too small",
                              quantity=deficit)
    var = m2 / mass
    third = m3 / mass
    skew = third / var ** 1.5 if var > 0 else float("nan")
    exp_avg = float(np.exp(log_exp - math.log(mass))) if beta is not None else None
    return StreamStats(mass, mean, var, skew, third, exp_avg, deficit)
