"""Post-processing of work distributions: smoothing, tail fits and fluctuation checks."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.ndimage import uniform_filter1d
from scipy.stats import linregress

from .errors import CapExceededError, GridError
from .fock import CouplingKind, check_caps, choose_truncation
from .linear import (check_convergent, delta_f_linear, iter_manifolds_linear,
                     moments_linear)
from .quadratic import delta_f_quadratic, iter_manifolds_quadratic, moments_quadratic
from .distribution import stream_statistics

__all__ = [
    "CoarseGrainedDensity",
    "TailFit",
    "ThermoSummary",
    "coarse_grain",
    "smoothed_cdf_density",
    "exponential_tail_fit",
    "fluctuation_checks",
]

KERNELS = ("gaussian", "lorentzian")
GAUSS_REACH = 12.0      # kernel evaluated within this many widths
LORENTZ_CUTOFF = 40.0
GRID_PAD = {"gaussian": 8.0, "lorentzian": LORENTZ_CUTOFF + 1.0}
ORACLE_N_MAX = 16
ORACLE_K_MAX = 400


@dataclass(frozen=True)
class CoarseGrainedDensity:
    """Density sampled on a uniform work grid."""

    grid: np.ndarray
    density: np.ndarray
    kernel: str
    width: float
    deficit: float = 0.0
    metadata: dict = field(default_factory=dict)

    @property
    def spacing(self):
        return float(self.grid[1] - self.grid[0]) if self.grid.size > 1 else 0.0

    def mass(self):
        return float(np.sum(self.density) * self.spacing)

    def mean(self):
        return float(np.sum(self.grid * self.density) / np.sum(self.density))

    def variance(self):
        mu = self.mean()
        return float(np.sum((self.grid - mu) ** 2 * self.density) / np.sum(self.density))

    def to_rows(self):
        return [[float(w), float(d)] for w, d in zip(self.grid, self.density)]


def _uniform_grid(lo, hi, step):
    count = int(math.ceil((hi - lo) / step)) + 1
    return lo + step * np.arange(count)


def _check_grid(grid, width):
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2:
        raise GridError("grid must be one-dimensional with at least two points", quantity=grid.shape)
    steps = np.diff(grid)
    step = float(steps.mean())
    if step <= 0 or np.max(np.abs(steps - step)) > 1e-9 * max(1.0, abs(step)):
        raise GridError("grid must be uniform and increasing", quantity=step)
    if step > width / 4.0:
        raise GridError("grid too coarse for kernel width (spacing > width/4)", quantity=step)
    return grid, step


def _kernel(kind, width):
    """Return (callable, reach, metadata) for a normalized smoothing kernel."""
    if kind == "gaussian":
        norm = 1.0 / (width * math.sqrt(2.0 * math.pi))
        return (lambda x: norm * np.exp(-0.5 * (x / width) ** 2)), GAUSS_REACH * width, {}
    reach = LORENTZ_CUTOFF * width
    edge = width / math.pi / (reach ** 2 + width ** 2)
    # shifted so the truncated kernel stays continuous at the cutoff
    mass = 2.0 / math.pi * math.atan(LORENTZ_CUTOFF) - 2.0 * reach * edge

    def lorentz(x):
        return np.clip(width / math.pi / (x * x + width * width) - edge, 0.0, None) / mass

    return lorentz, reach, {"lorentzian_cutoff_widths": LORENTZ_CUTOFF,
                            "lorentzian_renormalization": 1.0 / mass}


def coarse_grain(dist, kernel="gaussian", width=0.5, grid=None, spacing=None):
    """Convolve the atoms of ``dist`` with a normalized kernel of the given width.

    Parameters
    ----------
    kernel : {"gaussian", "lorentzian"}
        ``width`` is the standard deviation (Gaussian) or half width at half
        maximum (Lorentzian).  The Lorentzian is cut at 40 widths and
        renormalized.
    grid : array_like, optional
        Uniform evaluation grid covering the atoms by at least 5 widths on
        each side.  Built automatically when omitted, with ``spacing``
        defaulting to ``width / 8``.

    Raises
    ------
    GridError
        Spacing above ``width / 4`` or insufficient coverage.
    """
    if kernel not in KERNELS:
        raise ValueError(f"kernel must be one of {KERNELS}")
    if not width > 0:
        raise ValueError("width must be positive")
    works, probs = dist.works, dist.probs
    if works.size == 0:
        raise ValueError("distribution has no atoms")
    if grid is None:
        step = width / 8.0 if spacing is None else float(spacing)
        pad = GRID_PAD[kernel] * width
        grid = _uniform_grid(works[0] - pad, works[-1] + pad, step)
    grid, step = _check_grid(grid, width)
    if grid[0] > works[0] - 5 * width or grid[-1] < works[-1] + 5 * width:
        raise GridError("grid must cover the atoms by five kernel widths",
                        quantity=(float(grid[0]), float(grid[-1])))
    func, reach, meta = _kernel(kernel, width)
    first = np.ceil((works - reach - grid[0]) / step).astype(np.int64)
    span = int(math.floor(2.0 * reach / step)) + 2
    density = np.zeros(grid.size)
    for j in range(span):
        idx = first + j
        ok = (idx >= 0) & (idx < grid.size)
        if not ok.any():
            continue
        vals = probs[ok] * func(grid[idx[ok]] - works[ok])
        density += np.bincount(idx[ok], weights=vals, minlength=grid.size)
    meta.update({"spacing": step, "atoms": int(works.size)})
    return CoarseGrainedDensity(grid, density, kernel, float(width), dist.deficit, meta)


def smoothed_cdf_density(dist, window=0.5, spacing=None):
    """Density from a moving average of the cumulative distribution.

    The cumulative distribution is sampled on a uniform grid, averaged over
    ``window`` (an odd number of grid points) and differentiated by central
    differences.  Negative values cannot arise from a monotone input but are
    clipped and their mass reported in ``metadata`` for safety.
    """
    if not window > 0:
        raise ValueError("window must be positive")
    works, probs = dist.works, dist.probs
    if works.size == 0:
        raise ValueError("distribution has no atoms")
    points = 21 if spacing is None else max(int(round(window / spacing)), 1)
    points += 1 - points % 2
    step = window / points
    pad = window + 4 * step
    grid = _uniform_grid(works[0] - pad, works[-1] + pad, step)
    cdf = np.concatenate([[0.0], np.cumsum(probs)])[np.searchsorted(works, grid, side="right")]
    smooth = uniform_filter1d(cdf, size=points, mode="nearest")
    density = np.gradient(smooth, step)
    clipped = float(-np.sum(density[density < 0]) * step)
    density = np.clip(density, 0.0, None)
    return CoarseGrainedDensity(grid, density, "cdf-moving-average", float(window), dist.deficit,
                                {"spacing": step, "window_points": points, "clipped_mass": clipped})


class TailFit(NamedTuple):
    slope: float
    intercept: float
    r_squared: float


def exponential_tail_fit(density, window):
    """Least-squares line through ``ln density`` for grid points inside ``window``."""
    lo, hi = window
    x, y = density.grid, density.density
    mask = (x >= lo) & (x <= hi) & (y > 0)
    if mask.sum() < 3:
        raise GridError("fewer than three positive density points in the fit window",
                        quantity=(lo, hi))
    fit = linregress(x[mask], np.log(y[mask]))
    return TailFit(float(fit.slope), float(fit.intercept), float(fit.rvalue ** 2))


@dataclass(frozen=True)
class ThermoSummary:
    """Work moments, free energy and fluctuation-relation residuals.

    Residuals are ``None`` when the corresponding check was not run (cutoffs
    above the caps, or above the oracle scale for the reversed process).
    """

    mean: float
    variance: float
    skewness: float
    delta_f: float
    w_irr: float
    jarzynski_residual: float | None
    crooks_residual_max: float | None
    deficit: float | None = None
    moments_source: str = "closed-form"
    note: str = ""

    def to_dict(self):
        return asdict(self)


def _summary_manifolds(params, trunc):
    if params.kind is CouplingKind.LINEAR:
        return iter_manifolds_linear(params, trunc)
    return iter_manifolds_quadratic(params, trunc)


def _within(trunc, n_cap, k_cap):
    return trunc.n_max <= n_cap and trunc.k_max <= k_cap


def fluctuation_checks(params, trunc=None, u_grid=None, oracle_trunc=None):
    """Moments, free energy, irreversible work and fluctuation residuals.

    The Jarzynski residual streams over the phonon-resolved distribution and
    is skipped when the cutoffs exceed the hard caps.  The Crooks residual
    needs the reversed process and therefore the oracle; it runs at
    ``oracle_trunc`` or, when that is omitted, at ``trunc`` if it is small
    enough (``n_max <= 16``, ``k_max <= 400``).

    Raises
    ------
    UnboundedSpectrumError
        Linear coupling outside the convergent regime.
    TruncationError
        Distribution deficit above the tail tolerance.
    """
    from . import oracle

    if trunc is None:
        trunc = choose_truncation(params)
    linear = params.kind is CouplingKind.LINEAR
    if linear:
        check_convergent(params, trunc.n_max)
        delta_f = delta_f_linear(params, trunc)
    else:
        delta_f = delta_f_quadratic(params, trunc)

    try:
        check_caps(trunc)
        within_caps = True
    except CapExceededError:
        within_caps = False

    stats = None
    if within_caps:
        stats = stream_statistics(_summary_manifolds(params, trunc), beta=params.beta,
                                  tail_tol=trunc.tail_tol)
    if linear:
        mom = moments_linear(params, trunc) if within_caps or params.displacement == 0 else None
    else:
        mom = moments_quadratic(params)
    if mom is None:
        nan = float("nan")
        mean = 2.0 * params.coupling * params.displacement * params.n_c
        mom = (mean, nan, nan, "unavailable", "cutoffs above hard caps")
    mean, var, skew, source, note = mom

    jarzynski = None
    if stats is not None:
        jarzynski = abs(stats.exp_average * math.exp(params.beta * delta_f) - 1.0)

    crooks = None
    o_trunc = oracle_trunc
    if o_trunc is None and _within(trunc, ORACLE_N_MAX, ORACLE_K_MAX):
        o_trunc = trunc
    if o_trunc is not None:
        u = np.linspace(0.0, 2.0 * np.pi, 16, endpoint=False) if u_grid is None else np.asarray(u_grid)
        reference = delta_f_linear(params, o_trunc) if linear else delta_f_quadratic(params, o_trunc)
        values = oracle.crooks_delta_f(u, params, o_trunc)
        crooks = float(np.max(np.abs(values - reference)))

    return ThermoSummary(
        mean=float(mean), variance=float(var), skewness=float(skew), delta_f=float(delta_f),
        w_irr=float(mean - delta_f), jarzynski_residual=jarzynski, crooks_residual_max=crooks,
        deficit=None if stats is None else stats.deficit, moments_source=source, note=note)
