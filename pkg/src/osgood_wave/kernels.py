"""Green kernels of the 1-D wave equation on the three supported domains.

The three kernels share unit propagation speed:

* ``g3``      -- whole line, the half indicator of the light cone,
* ``g2``      -- circle of circumference 2*pi, the periodic wrap of ``g3``,
* ``g1_*``    -- unit interval with Dirichlet ends, as a reflected image
                 sum and as a sine eigenfunction series.

The image sum carries a prefactor 1/2 so that it agrees with the sine
series and so that its x-integral is bounded by t (the same normalisation
that makes ``g3`` and ``g1_images`` coincide before reflections arrive).

Kernel evaluators accept scalars or numpy arrays in their spatial
arguments.  All functions here are pure and thread-safe.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi

DIRICHLET = "dirichlet"
CIRCLE = "circle"
LINE = "line"

_TAGS = (DIRICHLET, CIRCLE, LINE)


@dataclass(frozen=True)
class DomainCase:
    """One of the three spatial domains.

    For the whole-line case, ``window`` is the closed interval actually
    simulated / integrated over.  Finite propagation speed 1 means the
    window is causally sufficient for probes in ``interest`` up to a
    horizon equal to the padding built into the window.
    """

    tag: str
    window: tuple[float, float] | None = None
    interest: tuple[float, float] | None = None

    def __post_init__(self):
        if self.tag not in _TAGS:
            raise ValueError(f"unknown domain tag {self.tag!r}")
        if self.tag == LINE:
            if self.window is None:
                raise ValueError("line domain requires a window")
            lo, hi = self.window
            if not hi > lo:
                raise ValueError("window must have positive length")

    @property
    def length(self) -> float:
        if self.tag == DIRICHLET:
            return 1.0
        if self.tag == CIRCLE:
            return TWO_PI
        lo, hi = self.window
        return hi - lo

    def check_horizon(self, t_max: float) -> None:
        """Verify the window causally covers ``interest`` up to ``t_max``."""
        if self.tag != LINE:
            return
        lo, hi = self.window
        a, b = self.interest if self.interest is not None else (lo, hi)
        if lo > a - t_max or hi < b + t_max:
            raise ValueError(
                f"window {self.window} too small for horizon {t_max} "
                f"around interest interval {(a, b)}"
            )


def dirichlet01() -> DomainCase:
    return DomainCase(DIRICHLET)


def circle() -> DomainCase:
    return DomainCase(CIRCLE)


def real_line(interest: tuple[float, float], horizon: float, pad: float = 0.0) -> DomainCase:
    """Line domain with a window wide enough for ``interest`` up to ``horizon``."""
    a, b = interest
    return DomainCase(LINE, window=(a - horizon - pad, b + horizon + pad), interest=(a, b))


def phi(n: int, x):
    """Dirichlet eigenfunctions: sqrt(2) sin(n pi x), orthonormal on [0,1]."""
    return math.sqrt(2.0) * np.sin(n * math.pi * np.asarray(x, dtype=float))


def _maybe_scalar(arr, scalar_in: bool):
    return float(arr) if scalar_in else arr


def g3(t: float, z) -> float | np.ndarray:
    """Whole-line kernel: 1/2 on the open light cone |z| < t, else 0."""
    scalar = np.isscalar(z)
    z = np.asarray(z, dtype=float)
    return _maybe_scalar(np.where(np.abs(z) < t, 0.5, 0.0), scalar)


def g2(t: float, z) -> float | np.ndarray:
    """Circle kernel: half the number of images z + 2*pi*n inside the cone.

    The truncation |n| <= ceil((t+|z|)/(2*pi)) + 1 is exact: images beyond
    it cannot satisfy |z + 2*pi*n| < t.
    """
    scalar = np.isscalar(z)
    z = np.asarray(z, dtype=float)
    if t <= 0.0:
        return _maybe_scalar(np.zeros_like(z), scalar)
    n_max = math.ceil((t + float(np.max(np.abs(z)))) / TWO_PI) + 1
    shifts = TWO_PI * np.arange(-n_max, n_max + 1)
    fired = np.abs(z[..., None] + shifts) < t
    return _maybe_scalar(0.5 * fired.sum(axis=-1), scalar)


def g1_images(t: float, x, y: float) -> float | np.ndarray:
    """Dirichlet kernel on [0,1] as a reflected image sum.

    Returns 1/2 * sum_n ( 1{|y-x-2n| <= t} - 1{|y+x-2n| <= t} ), truncated
    exactly: |n| beyond ceil((t + |x| + |y|)/2) + 1 cannot fire.
    """
    scalar = np.isscalar(x)
    x = np.asarray(x, dtype=float)
    if t <= 0.0:
        return _maybe_scalar(np.zeros_like(x), scalar)
    n_max = math.ceil((t + float(np.max(np.abs(x))) + abs(y)) / 2.0) + 1
    shifts = 2.0 * np.arange(-n_max, n_max + 1)
    plus = np.abs(y - x[..., None] - shifts) <= t
    minus = np.abs(y + x[..., None] - shifts) <= t
    total = plus.sum(axis=-1) - minus.sum(axis=-1)
    return _maybe_scalar(0.5 * total, scalar)


def g1_series(t: float, x: float, y: float, n_terms: int = 100_000) -> float:
    """Dirichlet kernel as the truncated sine series.

    sum_{n=1}^{N} sin(n pi t)/(n pi) * 2 sin(n pi x) sin(n pi y).

    Converges pointwise (non-uniformly) to ``g1_images`` away from the
    light-cone discontinuities, with O(1/N) error there; callers near a
    discontinuity should use ``g1_images``.
    """
    if n_terms < 1:
        raise ValueError("n_terms must be >= 1")
    n = np.arange(1, n_terms + 1, dtype=float)
    terms = (np.sin(n * math.pi * t) / (n * math.pi)
             * 2.0 * np.sin(n * math.pi * x) * np.sin(n * math.pi * y))
    # summing smallest-to-largest keeps roundoff below the truncation error
    return float(np.sum(terms[::-1]))


def kernel_x_integral(case: DomainCase, t: float, y: float, n_cells: int = 20_000) -> float:
    """Midpoint-rule integral of the kernel over x across the domain.

    Exactly t for the circle and the line; bounded by t for the Dirichlet
    interval (the image families cancel part of the mass).  The integrand
    is piecewise constant, so the midpoint rule is exact up to the cells
    containing jumps: error O(length / n_cells).
    """
    if case.tag == LINE:
        lo, hi = case.window if case.window is not None else (y - t - 1.0, y + t + 1.0)
        if lo > y - t or hi < y + t:
            raise ValueError("window does not contain the light cone of (t, y)")
    elif case.tag == CIRCLE:
        lo, hi = 0.0, TWO_PI
    else:
        lo, hi = 0.0, 1.0
    dx = (hi - lo) / n_cells
    xs = lo + (np.arange(n_cells) + 0.5) * dx
    if case.tag == DIRICHLET:
        vals = g1_images(t, xs, y)
    elif case.tag == CIRCLE:
        vals = g2(t, xs - y)
    else:
        vals = g3(t, xs - y)
    return float(np.sum(vals) * dx)


def g1_l2_norm_sq(t: float, y: float, n_cells: int = 20_000) -> float:
    """Numerical integral of the squared Dirichlet kernel over x in [0,1]."""
    dx = 1.0 / n_cells
    xs = (np.arange(n_cells) + 0.5) * dx
    vals = g1_images(t, xs, y)
    return float(np.sum(vals * vals) * dx)
