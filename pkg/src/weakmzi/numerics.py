"""Grids, quadrature, root finding, inverse-CDF sampling and seeded RNG streams."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import optimize

RNG_ALGORITHM = "numpy Philox4x64-10, keyed by SeedSequence(seed, spawn_key=(stream_id, *path))"


class QuadratureError(RuntimeError):
    """Adaptive quadrature did not reach the requested tolerance.

    The best estimate so far is kept in ``partial``.
    """

    def __init__(self, message: str, partial: float):
        super().__init__(message)
        self.partial = partial


class BracketError(ValueError):
    pass


class DomainCoverageError(ValueError):
    pass


@dataclass(frozen=True)
class Grid1D:
    min: float
    max: float
    points: int

    def __post_init__(self):
        if not self.min < self.max:
            raise ValueError(f"grid requires min < max, got [{self.min}, {self.max}]")
        if self.points < 2:
            raise ValueError("grid needs at least 2 points")

    @property
    def spacing(self) -> float:
        return (self.max - self.min) / (self.points - 1)

    @property
    def values(self) -> np.ndarray:
        return np.linspace(self.min, self.max, self.points)

    def trapezoid_weights(self) -> np.ndarray:
        w = np.full(self.points, self.spacing)
        w[0] = w[-1] = 0.5 * self.spacing
        return w


@dataclass(frozen=True)
class QuadratureSpec:
    method: str = "adaptive-simpson"
    abs_tol: float = 1e-10
    max_subdivisions: int = 200_000
    node_count: int = 128

    def __post_init__(self):
        if self.method not in ("adaptive-simpson", "gauss-hermite"):
            raise ValueError(f"unknown quadrature method {self.method!r}")
        if not self.abs_tol > 0:
            raise ValueError("abs_tol must be positive")
        if self.max_subdivisions < 1 or self.node_count < 1:
            raise ValueError("subdivision and node counts must be positive")


DEFAULT_QUADRATURE = QuadratureSpec()


@dataclass(frozen=True)
class RngStream:
    """A reproducible random stream identified by ``(seed, stream_id)``.

    Child streams (``child``) extend the spawn key, so independent tasks can
    derive their own generators without sharing state.
    """

    seed: int
    stream_id: int = 0
    path: tuple = field(default=())

    def __post_init__(self):
        for v in (self.seed, self.stream_id, *self.path):
            if not 0 <= int(v) < 2**64:
                raise ValueError("seed, stream_id and path entries must be 64-bit unsigned integers")

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(int(self.seed), spawn_key=(int(self.stream_id), *map(int, self.path)))
        return np.random.Generator(np.random.Philox(ss))

    def child(self, index: int) -> "RngStream":
        return RngStream(self.seed, self.stream_id, self.path + (int(index),))


# ---------------------------------------------------------------------------
# quadrature


def _simpson_level_adaptive(f, a: float, b: float, tol: float, max_sub: int, n_init: int = 16) -> float:
    # Breadth-first adaptive Simpson: every level refines all unconverged
    # panels in one vectorised call to f.
    edges = np.linspace(a, b, n_init + 1)
    lo, hi = edges[:-1], edges[1:]
    mid = 0.5 * (lo + hi)
    vals = np.asarray(f(np.concatenate([lo, mid, hi])), dtype=float)
    flo, fmid, fhi = np.split(vals, 3)
    whole = (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi)
    eps = np.full(n_init, tol / n_init)
    depth = 0
    total = 0.0
    used = n_init
    while lo.size:
        lm = 0.5 * (lo + mid)
        rm = 0.5 * (mid + hi)
        v = np.asarray(f(np.concatenate([lm, rm])), dtype=float)
        flm, frm = np.split(v, 2)
        left = (mid - lo) / 6.0 * (flo + 4.0 * flm + fmid)
        right = (hi - mid) / 6.0 * (fmid + 4.0 * frm + fhi)
        delta = left + right - whole
        # a few forced levels guard against a coarse first sample missing a narrow peak
        done = (np.abs(delta) <= 15.0 * eps) & (depth >= 3)
        total += float(np.sum((left + right + delta / 15.0)[done]))
        keep = ~done
        used += int(np.count_nonzero(keep))
        if used > max_sub:
            partial = total + float(np.sum((left + right)[keep]))
            raise QuadratureError(f"adaptive Simpson exceeded {max_sub} subdivisions", partial)
        lo, mid, hi = lo[keep], mid[keep], hi[keep]
        flo, fmid, fhi = flo[keep], fmid[keep], fhi[keep]
        flm, frm, left, right, e = flm[keep], frm[keep], left[keep], right[keep], eps[keep] / 2.0
        lo, mid, hi = (np.concatenate([lo, mid]), np.concatenate([0.5 * (lo + mid), 0.5 * (mid + hi)]),
                       np.concatenate([mid, hi]))
        flo, fmid, fhi = np.concatenate([flo, fmid]), np.concatenate([flm, frm]), np.concatenate([fmid, fhi])
        whole = np.concatenate([left, right])
        eps = np.concatenate([e, e])
        depth += 1
    return total


def _finite(g):
    def wrapped(t):
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            v = np.asarray(g(t), dtype=float)
        return np.where(np.isfinite(v), v, 0.0)

    return wrapped


def integrate(
    f: Callable[[np.ndarray], np.ndarray],
    domain: Optional[Sequence[float]] = None,
    spec: QuadratureSpec = DEFAULT_QUADRATURE,
    *,
    center: float = 0.0,
    scale: float = 1.0,
) -> float:
    """Integrate a vectorised real function.

    Args:
        f: callable accepting and returning numpy arrays.
        domain: ``(a, b)``; either end may be infinite. ``None`` means the
            whole real line.
        spec: quadrature method and tolerance.
        center, scale: location and width of the integrand's bulk. Used to
            map infinite ranges and to place Gauss-Hermite nodes.

    Returns:
        The integral. Adaptive Simpson raises :class:`QuadratureError`
        (with the partial sum attached) if it runs out of subdivisions.
    """
    a, b = (-math.inf, math.inf) if domain is None else (float(domain[0]), float(domain[1]))
    if a == b:
        return 0.0
    if a > b:
        return -integrate(f, (b, a), spec, center=center, scale=scale)

    if spec.method == "gauss-hermite":
        if not (math.isinf(a) and math.isinf(b)):
            raise ValueError("Gauss-Hermite quadrature is only defined on the whole line")
        t, w = np.polynomial.hermite.hermgauss(spec.node_count)
        x = center + math.sqrt(2.0) * scale * t
        weights = w * np.exp(t * t) * math.sqrt(2.0) * scale
        return float(np.sum(weights * np.asarray(f(x), dtype=float)))

    tol, nmax = spec.abs_tol, spec.max_subdivisions
    if math.isinf(a) and math.isinf(b):
        g = _finite(lambda t: f(center + scale * t / (1 - t * t)) * scale * (1 + t * t) / (1 - t * t) ** 2)
        return _simpson_level_adaptive(g, -1.0, 1.0, tol, nmax)
    if math.isinf(b):
        g = _finite(lambda t: f(a + scale * t / (1 - t)) * scale / (1 - t) ** 2)
        return _simpson_level_adaptive(g, 0.0, 1.0, tol, nmax)
    if math.isinf(a):
        g = _finite(lambda t: f(b - scale * t / (1 - t)) * scale / (1 - t) ** 2)
        return _simpson_level_adaptive(g, 0.0, 1.0, tol, nmax)
    return _simpson_level_adaptive(f, a, b, tol, nmax)


def grid_integral(values: np.ndarray, grid: Grid1D, axis: int = -1) -> np.ndarray:
    """Trapezoid rule on a uniform grid.

    For smooth integrands that have decayed at both grid ends this is
    spectrally accurate, which is what every Gaussian-enveloped density in
    this package is.
    """
    return np.tensordot(values, grid.trapezoid_weights(), axes=([axis], [0]))


def find_root(f: Callable[[float], float], bracket: Sequence[float], tol: float = 1e-12) -> float:
    lo, hi = float(bracket[0]), float(bracket[1])
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if flo * fhi > 0:
        raise BracketError(f"no sign change on [{lo}, {hi}]: f(lo)={flo:.3g}, f(hi)={fhi:.3g}")
    return float(optimize.brentq(f, lo, hi, xtol=tol, rtol=4 * np.finfo(float).eps))


# ---------------------------------------------------------------------------
# sampling


def tabulate_cdf(density, grid: Grid1D) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(x, cdf)`` for a density on ``grid``; ``cdf`` rises from 0 to the grid mass."""
    x = grid.values
    p = np.asarray(density(x), dtype=float)
    if np.any(p < -1e-14 * max(1.0, float(np.max(np.abs(p))))):
        raise ValueError("density is negative on the sampling grid")
    p = np.clip(p, 0.0, None)
    h = grid.spacing
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * h * (p[1:] + p[:-1]))])
    return x, cdf


def sample_inverse_cdf(density, grid: Grid1D, rng: np.random.Generator | RngStream, size=None):
    """Draw samples from ``density`` by inverting its tabulated CDF on ``grid``.

    ``density`` is any vectorised callable; if it has a ``mass`` attribute the
    grid must capture all but 1e-6 of that mass.
    """
    if isinstance(rng, RngStream):
        rng = rng.generator()
    x, cdf = tabulate_cdf(density, grid)
    total = cdf[-1]
    mass = float(getattr(density, "mass", total))
    if mass <= 0 or total <= 0:
        raise DomainCoverageError("density has no mass on the grid")
    if total < mass * (1.0 - 1e-6):
        raise DomainCoverageError(f"grid covers only {total / mass:.9f} of the density mass")
    u = rng.random(size) * total
    return np.interp(u, cdf, x)
