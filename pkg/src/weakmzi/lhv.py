"""Local-hidden-variables analysis: mixtures, weights, bivariate models and histograms.

Notation: Phi_A and Phi_B are the meter distributions when the particle
passes or misses Alice's arm; Phi_+ = Phi_A / 2 + (1 - cos phi) Phi_B / 4 is
what reaches the last beam splitter B2, and Phi_1 + Phi_2 = Phi_+ splits it
between detectors D1 and D2.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import optimize

from .interferometer import Detector, ExperimentConfig
from .numerics import Grid1D, find_root, grid_integral
from .phasespace import PhaseSpaceField, wigner_closed_form
from .pointer import (
    POSITION,
    WAVENUMBER,
    Basis,
    Distribution,
    click_probability,
    default_grid,
    density,
)

UNDERFLOW_FLOOR = 1e-300


class UndefinedWeightsError(ZeroDivisionError):
    """Convex weights are undefined because Phi_A and Phi_B coincide."""


class ClampedDomainWarning(UserWarning):
    """A weight was requested where Phi_+ underflows; the nearest admissible value is returned."""


def _gauss(lam, mean, var):
    return np.exp(-((lam - mean) ** 2) / (2 * var)) / np.sqrt(2 * np.pi * var)


@dataclass(frozen=True)
class DefaultDistributions:
    phi_A_x: Distribution
    phi_B_x: Distribution
    phi_A_k: Distribution
    phi_B_k: Distribution

    def get(self, which: str, basis: Basis | str) -> Distribution:
        """``which`` is ``"A"`` or ``"B"``; basis is position or wavenumber."""
        return getattr(self, f"phi_{which}_{Basis.parse(basis).label}")


def default_distributions(config: ExperimentConfig) -> DefaultDistributions:
    """Normalised meter distributions with the particle in (A) or out of (B) Alice's arm."""
    s, g = config.sigma, config.g
    gx, gk = default_grid(config, POSITION), default_grid(config, WAVENUMBER)
    vk = 1.0 / (4 * s * s)
    return DefaultDistributions(
        Distribution(POSITION, lambda x: _gauss(x, g, s * s), 1.0, True, "Phi_A(x)", gx),
        Distribution(POSITION, lambda x: _gauss(x, 0.0, s * s), 1.0, True, "Phi_B(x)", gx),
        Distribution(WAVENUMBER, lambda k: _gauss(k, 0.0, vk), 1.0, True, "Phi_A(k)", gk),
        Distribution(WAVENUMBER, lambda k: _gauss(k, 0.0, vk), 1.0, True, "Phi_B(k)", gk),
    )


def default_distribution(config: ExperimentConfig, which: str, basis: Basis | str) -> Distribution:
    """Phi_A or Phi_B in any basis; on eta = a x + b k both are Gaussians of variance D / 4 sigma^2."""
    basis = Basis.parse(basis)
    if which not in ("A", "B"):
        raise ValueError("which must be 'A' or 'B'")
    if basis.kind != "quadrature":
        return default_distributions(config).get(which, basis)
    a, b = basis.coefficients
    s = config.sigma
    var = (b * b + 4 * a * a * s**4) / (4 * s * s)
    mean = a * config.g if which == "A" else 0.0
    return Distribution(basis, lambda e: _gauss(e, mean, var), 1.0, True, f"Phi_{which}({basis.label})",
                        default_grid(config, basis))


def mixture_before_B2(config: ExperimentConfig, basis: Basis | str = POSITION) -> Distribution:
    """Phi_+ = Phi_A / 2 + (1 - cos phi) Phi_B / 4, the meter reaching B2."""
    basis = Basis.parse(basis)
    a_dist = default_distribution(config, "A", basis)
    b_dist = default_distribution(config, "B", basis)
    wb = 0.25 * (1 - math.cos(config.phi))
    mass = 0.5 + wb
    return Distribution(basis, lambda lam: 0.5 * a_dist(lam) + wb * b_dist(lam), mass, False,
                        f"Phi_+({basis.label})", a_dist.grid)


# ---------------------------------------------------------------------------
# convex weights (commitment to a distribution)


@dataclass(frozen=True)
class ConvexWeightFunction:
    """w_A(lambda) such that Phi~_i = w_A Phi_A + (1 - w_A) Phi_B pointwise.

    ``excluded_points`` lists outcomes where Phi_A = Phi_B and the weight is
    undefined; ``eval`` returns NaN there.
    """

    eval: Callable[[np.ndarray], np.ndarray]
    detector: Detector
    basis: Basis
    config: ExperimentConfig
    excluded_points: tuple[float, ...]
    component: str = "A"

    def __call__(self, lam):
        return self.eval(np.asarray(lam, dtype=float))

    def complement(self) -> "ConvexWeightFunction":
        f = self.eval
        other = "B" if self.component == "A" else "A"
        return ConvexWeightFunction(lambda lam: 1.0 - f(lam), self.detector, self.basis, self.config,
                                    self.excluded_points, other)


def _convex_weight_a(config: ExperimentConfig, detector: Detector):
    """w_A in the position basis, written in u = exp((2 g x - g^2) / 4 sigma^2).

    With d = 1 - cos phi and P the click probability,
    Phi~_1 / Phi_B = [2u^2 + (1 + 2u) d] / 8P and Phi_A / Phi_B = u^2, so
    w_A = ([2u^2 + (1 +- 2u) d] / 8P - 1) / (u^2 - 1). D3 gives w_A = 0.
    """
    s, g = config.sigma, config.g
    d = 1 - math.cos(config.phi)
    p = click_probability(config, detector)
    sign = {Detector.D1: 1.0, Detector.D2: -1.0}.get(detector)

    def w(x):
        x = np.asarray(x, dtype=float)
        if detector is Detector.D3:
            return np.where(x == g / 2, np.nan, 0.0)
        lu = (2 * g * x - g * g) / (4 * s * s)
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            # divide through by u^2 on the u > 1 side so large |x| cannot overflow
            big = lu > 0
            iu = np.exp(-np.abs(lu))  # 1/u for u>1, u for u<1
            num_big = (2 + (iu * iu + sign * 2 * iu) * d) / (8 * p) - iu * iu
            den_big = 1 - iu * iu
            num_small = (2 * iu * iu + (1 + sign * 2 * iu) * d) / (8 * p) - 1
            den_small = iu * iu - 1
            out = np.where(big, num_big / den_big, num_small / den_small)
        return np.where(lu == 0, np.nan, out)

    return w


def convex_weights(config: ExperimentConfig, detector, basis: Basis | str = POSITION) -> ConvexWeightFunction:
    """Weight on Phi_A that makes the normalised post-selected density a mixture of Phi_A and Phi_B.

    Raises:
        UndefinedWeightsError: in the wavenumber basis, where Phi_A = Phi_B
            identically and the weight is 0/0 everywhere.
    """
    detector = Detector.parse(detector)
    basis = Basis.parse(basis)
    if basis.kind == "wavenumber" or (basis.kind == "quadrature" and basis.coefficients[0] == 0):
        raise UndefinedWeightsError("Phi_A(k) equals Phi_B(k) identically; convex weights are undefined")
    if basis.kind == "quadrature" and config.g == 0:
        raise UndefinedWeightsError("Phi_A equals Phi_B when g = 0")
    if basis.kind != "position":
        raise ValueError("convex weights are implemented for the position basis")
    if config.g == 0:
        raise UndefinedWeightsError("Phi_A equals Phi_B when g = 0")
    return ConvexWeightFunction(_convex_weight_a(config, detector), detector, basis, config, (config.g / 2,))


@dataclass(frozen=True)
class WeightClassification:
    above_one: bool
    below_zero: bool
    min_value: float
    max_value: float


def classify_convex_weights(w: ConvexWeightFunction, grid: Optional[Grid1D] = None) -> WeightClassification:
    """Whether w leaves [0, 1] anywhere on ``grid`` (the default position grid if omitted)."""
    grid = grid or default_grid(w.config, POSITION)
    v = w(grid.values)
    v = v[np.isfinite(v)]
    return WeightClassification(bool(np.any(v > 1)), bool(np.any(v < 0)), float(v.min()), float(v.max()))


def negative_region_onset(
    config: ExperimentConfig,
    detector,
    bracket: Sequence[float] = (0.01, math.pi / 2),
    grid: Optional[Grid1D] = None,
    tol: float = 1e-10,
) -> float:
    """Smallest phi > 0 at which w_A (position basis) turns negative on ``grid``.

    The root of phi -> min over grid of w_A(x, phi), with the excluded point
    x = g/2 left out. Only ``config.g`` and ``config.sigma`` are used.

    Raises:
        BracketError: if the minimum does not change sign over ``bracket``.
    """
    detector = Detector.parse(detector)
    grid = grid or default_grid(config, POSITION)
    x = grid.values

    def f(phi):
        cfg = ExperimentConfig(phi=phi, g=config.g, sigma=config.sigma)
        v = _convex_weight_a(cfg, detector)(x)
        return float(np.nanmin(v))

    return find_root(f, bracket, tol)


def negative_interval(config: ExperimentConfig, detector) -> Optional[tuple[float, float]]:
    """Exact x-interval on which w_A < 0, or None if there is none.

    Next to the pole at x = g/2 the numerator of w_A keeps a fixed sign while
    the denominator flips, so w_A < 0 on (x(u0), g/2) for D1 and on
    (g/2, x(u0')) for D2, with
    u0 = (-d + sqrt(d^2 + 4 + 4 E d)) / 2 and u0' = (d + sqrt(d^2 + 4 - 4 E d)) / 2.
    """
    detector = Detector.parse(detector)
    s, g = config.sigma, config.g
    d = 1 - math.cos(config.phi)
    e = config.damping
    if detector is Detector.D3 or g == 0 or d == 0 or e == 1:
        return None

    def x_of(u):
        return (4 * s * s * math.log(u) + g * g) / (2 * g)

    if detector is Detector.D1:
        u0 = (-d + math.sqrt(d * d + 4 + 4 * e * d)) / 2
        lo, hi = sorted((x_of(u0), g / 2))
    else:
        u0 = (d + math.sqrt(d * d + 4 - 4 * e * d)) / 2
        lo, hi = sorted((g / 2, x_of(u0)))
    return (lo, hi) if hi > lo else None


# ---------------------------------------------------------------------------
# split weights (commitment to an outcome)


@dataclass(frozen=True)
class SplitWeightFunction:
    """w_i(lambda) = Phi_i(lambda) / Phi_+(lambda), the quantum routing probability at B2.

    ``domain`` is where Phi_+ exceeds the underflow floor; requests outside
    it are clamped to the boundary with a :class:`ClampedDomainWarning`.
    """

    raw: Callable[[np.ndarray], np.ndarray]
    detector: Detector
    basis: Basis
    config: ExperimentConfig
    domain: tuple[float, float]

    def __call__(self, lam):
        lam = np.asarray(lam, dtype=float)
        lo, hi = self.domain
        if np.any((lam < lo) | (lam > hi)):
            warnings.warn(f"weight requested outside [{lo:.6g}, {hi:.6g}] where Phi_+ underflows; clamped",
                          ClampedDomainWarning, stacklevel=2)
            lam = np.clip(lam, lo, hi)
        return self.raw(lam)

    eval = __call__


def _split_parts(config: ExperimentConfig, basis: Basis):
    """Return (log v(lambda), theta(lambda)) for w_1 = 1/2 + v T / (2 v^2 + d), T = cos th - cos(th + phi)."""
    a, b = basis.coefficients
    s, g = config.sigma, config.g
    D = b * b + 4 * a * a * s**4

    def parts(lam):
        lv = (2 * lam * a * g - a * a * g * g) * s * s / D
        theta = b * g * (2 * lam - a * g) / (2 * D)
        return lv, theta

    return parts


def _clamp_domain(config: ExperimentConfig, basis: Basis) -> tuple[float, float]:
    mix = mixture_before_B2(config, basis)
    a, b = basis.coefficients
    s, g = config.sigma, config.g
    sd = math.sqrt(b * b + 4 * a * a * s**4) / (2 * s)
    lo_c, hi_c = min(0.0, a * g), max(0.0, a * g)
    # Phi_+ is a sum of two Gaussians; solve for where it meets the floor
    reach = sd * math.sqrt(2 * math.log(1.0 / UNDERFLOW_FLOOR) + 2 * math.log(1.0 / (sd * math.sqrt(2 * math.pi)) + 1))

    def f(lam):
        with np.errstate(under="ignore"):
            return math.log(max(float(mix(lam)), 1e-320)) - math.log(UNDERFLOW_FLOOR)

    lo = find_root(f, (lo_c - reach - 10 * sd, lo_c), tol=1e-9) if f(lo_c - reach - 10 * sd) < 0 else lo_c - reach
    hi = find_root(f, (hi_c, hi_c + reach + 10 * sd), tol=1e-9) if f(hi_c + reach + 10 * sd) < 0 else hi_c + reach
    return (lo, hi)


def split_weights(config: ExperimentConfig, detector, basis: Basis | str = POSITION) -> SplitWeightFunction:
    """Routing weight towards ``detector`` (D1 or D2) given the committed outcome.

    Evaluated in a ratio form that needs no Gaussian envelopes:
    w_1 = 1/2 + v T / (2 v^2 + d), w_2 = 1 - w_1, where d = 1 - cos phi and
    v, T depend on the basis (v = exp((2gx - g^2)/4 sigma^2) and T = d in
    position; v = 1 and T = cos gk - cos(gk + phi) in wavenumber).
    """
    detector = Detector.parse(detector)
    if detector is Detector.D3:
        raise ValueError("split weights are defined for D1 and D2 only")
    basis = Basis.parse(basis)
    d = 1 - math.cos(config.phi)
    phi = config.phi
    parts = _split_parts(config, basis)
    sign = 1.0 if detector is Detector.D1 else -1.0

    def raw(lam):
        lam = np.asarray(lam, dtype=float)
        lv, theta = parts(lam)
        t = np.cos(theta) - np.cos(theta + phi)
        if d == 0:
            return np.full(lam.shape, 0.5)  # T vanishes identically
        with np.errstate(under="ignore"):
            # v / (2 v^2 + d) through e = exp(-|log v|) so nothing overflows
            e = np.exp(-np.abs(lv))
            frac = np.where(lv > 0, e / (2.0 + d * e * e), e / (2.0 * e * e + d))
        return 0.5 + sign * t * frac

    return SplitWeightFunction(raw, detector, basis, config, _clamp_domain(config, basis))


def weight_range(w: SplitWeightFunction, points: int = 200_001) -> tuple[float, float]:
    """(inf, sup) of the weight over its clamped domain, extremes refined locally."""
    lo, hi = w.domain
    lam = np.linspace(lo, hi, points)
    v = w.raw(lam)
    out = []
    for sign in (1.0, -1.0):
        i = int(np.argmin(sign * v))
        best = float(v[i])
        a, b = lam[max(i - 1, 0)], lam[min(i + 1, points - 1)]
        if b > a:
            r = optimize.minimize_scalar(lambda t: sign * float(w.raw(np.array(t))), bounds=(a, b),
                                         method="bounded", options={"xatol": 1e-12})
            cand = float(w.raw(np.array(r.x)))
            best = min(best, cand) if sign > 0 else max(best, cand)
        out.append(best)
    return out[0], out[1]


# ---------------------------------------------------------------------------
# bivariate hidden-variable models


@dataclass(frozen=True)
class HiddenBivariateModel:
    """Hidden densities f_A, f_B over (x, k) and routing weights towards D1.

    ``w1_A`` and ``w1_B`` are functions of (x, k) at the configured phi; the
    weights towards D2 are their complements.
    """

    f_A: PhaseSpaceField
    f_B: PhaseSpaceField
    w1_A: Callable[[np.ndarray, np.ndarray], np.ndarray]
    w1_B: Callable[[np.ndarray, np.ndarray], np.ndarray]
    name: str = "custom"


@dataclass(frozen=True)
class ConstraintCheck:
    name: str
    passed: bool
    residual: float
    where: Optional[tuple[float, float]] = None


@dataclass(frozen=True)
class ConstraintVerdict:
    checks: tuple[ConstraintCheck, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name: str) -> ConstraintCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def failed(self) -> list[str]:
        return [c.name for c in self.checks if not c.passed]


def phase_space_grids(config: ExperimentConfig, points: int = 512) -> tuple[Grid1D, Grid1D]:
    """Product grid wide enough for marginals: the default pointer grids at ``points`` nodes."""
    return default_grid(config, POSITION, points), default_grid(config, WAVENUMBER, points)


def verify_bivariate_constraints(
    model: HiddenBivariateModel,
    config: ExperimentConfig,
    tol: float = 1e-6,
    points: int = 512,
) -> ConstraintVerdict:
    """Check a hidden-variable model against every marginal, positivity and reproduction constraint.

    Checks (each reports its worst residual and where it occurs):
    marginals of f_A and f_B against Phi_A and Phi_B in x and k; f_A, f_B >= 0;
    routing weights in [0, 1]; and reproduction of Phi_i(x) and Phi_i(k) for
    i = 1, 2 by integrating (f_A w_i^A / 2 + (1 - cos phi) f_B w_i^B / 4).
    """
    gx, gk = phase_space_grids(config, points)
    x, k = gx.values, gk.values
    X, K = x[:, None], k[None, :]
    fa, fb = model.f_A(X, K), model.f_B(X, K)
    wa, wb = np.broadcast_to(model.w1_A(X, K), fa.shape), np.broadcast_to(model.w1_B(X, K), fa.shape)
    dd = default_distributions(config)
    checks: list[ConstraintCheck] = []

    def add_curve(name, got, want, axis_vals):
        r = np.abs(got - want)
        i = int(np.argmax(r))
        checks.append(ConstraintCheck(name, bool(r[i] <= tol), float(r[i]), (float(axis_vals[i]), float("nan"))))

    add_curve("marginal_A_x", grid_integral(fa, gk, axis=1), dd.phi_A_x(x), x)
    add_curve("marginal_A_k", grid_integral(fa, gx, axis=0), dd.phi_A_k(k), k)
    add_curve("marginal_B_x", grid_integral(fb, gk, axis=1), dd.phi_B_x(x), x)
    add_curve("marginal_B_k", grid_integral(fb, gx, axis=0), dd.phi_B_k(k), k)

    def add_sign(name, values, lo, hi):
        viol = np.maximum(lo - values, values - hi)
        idx = np.unravel_index(int(np.argmax(viol)), viol.shape)
        worst = float(max(viol[idx], 0.0))
        checks.append(ConstraintCheck(name, worst <= tol, worst, (float(x[idx[0]]), float(k[idx[1]]))))

    add_sign("nonnegative_f_A", fa, 0.0, np.inf)
    add_sign("nonnegative_f_B", fb, 0.0, np.inf)
    add_sign("weight_range_A", wa, 0.0, 1.0)
    add_sign("weight_range_B", wb, 0.0, 1.0)

    wB = 0.25 * (1 - math.cos(config.phi))
    for det, (ta, tb) in ((Detector.D1, (wa, wb)), (Detector.D2, (1 - wa, 1 - wb))):
        joint = 0.5 * fa * ta + wB * fb * tb
        add_curve(f"reproduce_{det.value}_x", grid_integral(joint, gk, axis=1), density(config, det, POSITION)(x), x)
        add_curve(f"reproduce_{det.value}_k", grid_integral(joint, gx, axis=0), density(config, det, WAVENUMBER)(k), k)
    return ConstraintVerdict(tuple(checks))


def wigner_model(config: ExperimentConfig) -> HiddenBivariateModel:
    """f_A = W_A, f_B = W_B with the quantum routing weight W_1 / W_+ for both."""
    wa = wigner_closed_form("W_A", config)
    wb = wigner_closed_form("W_B", config)
    w1 = wigner_closed_form("W_1", config)
    wp = wigner_closed_form("W_plus", config)

    def ratio(x, k):
        with np.errstate(invalid="ignore", divide="ignore"):
            return w1(x, k) / wp(x, k)

    return HiddenBivariateModel(wa, wb, ratio, ratio, "wigner")


# ---------------------------------------------------------------------------
# factorised candidate solutions


@dataclass(frozen=True)
class FactorizedSolution:
    """f_+ = Phi_+(x) Phi_+(k) / Prob(D_+) with a product routing kernel w_1^+(x, k).

    ``residuals`` are the worst deviations from the two defining integral
    equations for D1 and D2; ``weight_min`` and ``weight_max`` bound w_1^+
    (and hence w_2^+ = 1 - w_1^+) on the checking grid.
    """

    which: str
    config: ExperimentConfig
    f_plus: PhaseSpaceField
    w1_plus: Callable[[np.ndarray, np.ndarray], np.ndarray]
    residuals: dict
    weight_min: float
    weight_max: float
    tol: float

    @property
    def satisfies_equations(self) -> bool:
        return max(self.residuals.values()) <= self.tol

    @property
    def admissible(self) -> bool:
        return self.weight_min >= 0.0 and self.weight_max <= 1.0

    @property
    def model(self) -> HiddenBivariateModel:
        """The same solution phrased with f_A, f_B and a shared routing kernel."""
        wa = wigner_closed_form("W_A", self.config)
        wb = wigner_closed_form("W_B", self.config)
        return HiddenBivariateModel(wa, wb, self.w1_plus, self.w1_plus, self.which)


def _solution_kernel(config: ExperimentConfig, which: str):
    p_plus = (3 - math.cos(config.phi)) / 4
    if which == "solution1":
        det = Detector.D1
    elif which == "solution2":
        det = Detector.D2
    else:
        raise ValueError("which must be 'solution1' or 'solution2'")
    p = click_probability(config, det)
    if p <= 0:
        raise ZeroDivisionError(f"Prob({det.value}) vanishes at phi={config.phi}")
    wx = split_weights(config, det, POSITION).raw
    wk = split_weights(config, det, WAVENUMBER).raw
    c = p_plus / p
    if det is Detector.D1:
        return (lambda x, k: c * wx(x) * wk(k)), c, wx, wk, det
    return (lambda x, k: 1.0 - c * wx(x) * wk(k)), c, wx, wk, det


def factorized_solutions(config: ExperimentConfig, which: str = "solution1", tol: float = 1e-6,
                         points: int = 2048) -> FactorizedSolution:
    """Build a factorised candidate and check it against both integral equations.

    For solution1 the D1 kernel is [Prob(D_+)/Prob(D_1)] w_1(x) w_1(k) and the
    D2 kernel its complement; solution2 swaps the roles of the detectors.
    The equations require (1/Prob(D_+)) \\int Phi_+(k) w_i^+ dk = w_i(x) and the
    same with x and k exchanged.
    """
    kern1, _, _, _, _ = _solution_kernel(config, which)
    p_plus = (3 - math.cos(config.phi)) / 4
    gx, gk = default_grid(config, POSITION, points), default_grid(config, WAVENUMBER, points)
    x, k = gx.values, gk.values
    mx, mk = mixture_before_B2(config, POSITION), mixture_before_B2(config, WAVENUMBER)
    K1 = kern1(x[:, None], k[None, :])
    residuals = {}
    for det, kern in ((Detector.D1, K1), (Detector.D2, 1.0 - K1)):
        wx = split_weights(config, det, POSITION).raw(x)
        wk = split_weights(config, det, WAVENUMBER).raw(k)
        lhs_x = grid_integral(kern * mk(k)[None, :], gk, axis=1) / p_plus
        lhs_k = grid_integral(kern * mx(x)[:, None], gx, axis=0) / p_plus
        residuals[f"{det.value}_x"] = float(np.max(np.abs(lhs_x - wx)))
        residuals[f"{det.value}_k"] = float(np.max(np.abs(lhs_k - wk)))
    wmin, wmax = _kernel_bounds(config, which)
    f_plus = PhaseSpaceField(lambda xx, kk: mx(xx) * mk(kk) / p_plus, "custom", config, p_plus,
                             (gx.min, gx.max), (gk.min, gk.max))
    return FactorizedSolution(which, config, f_plus, kern1, residuals, wmin, wmax, tol)


def _kernel_bounds(config: ExperimentConfig, which: str) -> tuple[float, float]:
    """Exact bounds of w_1^+ from the separable form: products of the factor ranges."""
    _, c, wx, wk, det = _solution_kernel(config, which)
    rx = weight_range(split_weights(config, det, POSITION), points=20_001)
    rk = weight_range(split_weights(config, det, WAVENUMBER), points=20_001)
    prods = [c * a * b for a in rx for b in rk]
    lo, hi = min(prods), max(prods)
    if det is Detector.D1:
        return lo, hi
    return 1.0 - hi, 1.0 - lo


@dataclass(frozen=True)
class ViolationScan:
    which: str
    phis: np.ndarray
    weight_min: np.ndarray
    weight_max: np.ndarray

    @property
    def violating(self) -> np.ndarray:
        return (self.weight_min < 0) | (self.weight_max > 1)

    @property
    def violating_phis(self) -> np.ndarray:
        return self.phis[self.violating]


def scan_violations(config: ExperimentConfig, which: str = "solution1", points: int = 720) -> ViolationScan:
    """Scan phi over (0, 2 pi) at ``points`` midpoints and record the kernel bounds."""
    phis = 2 * math.pi * (np.arange(points) + 0.5) / points
    lo, hi = np.full(points, np.nan), np.full(points, np.nan)
    for i, phi in enumerate(phis):
        cfg = ExperimentConfig(phi=phi, g=config.g, sigma=config.sigma)
        try:
            lo[i], hi[i] = _kernel_bounds(cfg, which)
        except ZeroDivisionError:
            continue
    return ViolationScan(which, phis, lo, hi)


# ---------------------------------------------------------------------------
# weight-probability histograms


@dataclass(frozen=True)
class WeightHistogram:
    """Histogram of the routing weight w_i over outcomes distributed as Phi_+.

    ``p[n]`` is the Phi_+ mass of outcomes whose weight falls in bin n;
    ``component_mass[n]`` is the Phi_i mass of the same outcomes, so it sums
    to the click probability. Bins are [n dw, (n+1) dw) with the last closed.
    In ``density`` mode ``values`` is ``p / dw``.
    """

    edges: np.ndarray
    p: np.ndarray
    component_mass: np.ndarray
    basis: Basis
    detector: Detector
    config: ExperimentConfig
    mode: str
    support: tuple[float, float]

    @property
    def bins(self) -> int:
        return self.p.size

    @property
    def width(self) -> float:
        return 1.0 / self.bins

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[1:] + self.edges[:-1])

    @property
    def values(self) -> np.ndarray:
        return self.p / self.width if self.mode == "density" else self.p


def _monotone_breaks(f, lam: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Refined interior extrema of f, so f is monotone between consecutive breakpoints."""
    dv = np.diff(v)
    s = np.sign(dv)
    turns = np.nonzero(s[1:] * s[:-1] < 0)[0] + 1
    out = []
    for i in turns:
        a, b = lam[i - 1], lam[i + 1]
        sign = 1.0 if dv[i - 1] < 0 else -1.0  # minimum if decreasing before
        r = optimize.minimize_scalar(lambda t: sign * float(f(np.array(t))), bounds=(a, b), method="bounded",
                                     options={"xatol": 1e-13})
        out.append(float(r.x))
    return np.asarray(out)


def _bin_index(w: np.ndarray, bins: int) -> np.ndarray:
    return np.clip(np.floor(w * bins).astype(int), 0, bins - 1)


def weight_histogram(config: ExperimentConfig, detector, basis: Basis | str = POSITION, bins: int = 100,
                     mode: str = "discrete", scan_points: int = 20_001, gl_nodes: int = 16) -> WeightHistogram:
    """Weight-probability histogram of Phi_+ split towards ``detector``.

    Outcome space is cut at every point where w_i crosses a bin edge (found
    by root finding on monotone pieces), so each piece lies in exactly one
    bin; both Phi_+ and Phi_i are then integrated over each piece with
    composite Gauss-Legendre quadrature.
    """
    if bins < 2:
        raise ValueError("need at least 2 bins")
    if mode not in ("discrete", "density"):
        raise ValueError("mode must be 'discrete' or 'density'")
    detector = Detector.parse(detector)
    basis = Basis.parse(basis)
    w = split_weights(config, detector, basis).raw
    mix = mixture_before_B2(config, basis)
    comp = density(config, detector, basis)
    grid = default_grid(config, basis)
    lam = np.linspace(grid.min, grid.max, scan_points)
    v = w(lam)

    breaks = np.concatenate([[grid.min], _monotone_breaks(w, lam, v), [grid.max]])
    breaks.sort()
    cuts = [breaks]
    edges = np.linspace(0.0, 1.0, bins + 1)
    inner_edges = edges[1:-1]
    for a, b in zip(breaks[:-1], breaks[1:]):
        wa, wb = float(w(np.array(a))), float(w(np.array(b)))
        lo, hi = min(wa, wb), max(wa, wb)
        for e in inner_edges[(inner_edges > lo) & (inner_edges < hi)]:
            cuts.append(np.array([find_root(lambda t: float(w(np.array(t))) - e, (a, b), tol=1e-14)]))
    pts = np.unique(np.concatenate(cuts))
    # keep Gauss-Legendre panels short compared with the Gaussian envelope
    s = (grid.max - grid.min) / 400.0
    fine = [pts[:1]]
    for a, b in zip(pts[:-1], pts[1:]):
        n = max(1, int(math.ceil((b - a) / s)))
        fine.append(np.linspace(a, b, n + 1)[1:])
    pts = np.concatenate(fine)

    t, wt = np.polynomial.legendre.leggauss(gl_nodes)
    a, b = pts[:-1], pts[1:]
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    nodes = mid[:, None] + half[:, None] * t[None, :]
    pm = (mix(nodes) * wt).sum(axis=1) * half
    cm = (comp(nodes) * wt).sum(axis=1) * half
    idx = _bin_index(w(mid), bins)
    p = np.bincount(idx, weights=pm, minlength=bins)
    m = np.bincount(idx, weights=cm, minlength=bins)
    return WeightHistogram(edges, p, m, basis, detector, config, mode, (float(v.min()), float(v.max())))


@dataclass(frozen=True)
class OverlapRecord:
    """Bin-wise overlap of two weight histograms and what is left to match.

    ``remainder_mass`` holds the total Phi_+ mass of each remainder;
    ``split_mass`` the mass of each remainder routed to the histogram's
    detector, taking the overlap's share at the common bin-centre weight.
    """

    overlap: np.ndarray
    remainder_x: np.ndarray
    remainder_k: np.ndarray
    remainder_mass: tuple[float, float]
    split_mass: tuple[float, float]
    precondition_residual: float
    precondition_ok: bool
    remainders_equal: bool


class BinningMismatchError(ValueError):
    pass


def histogram_overlap(h_x: WeightHistogram, h_k: WeightHistogram, tol: float = 1e-6,
                      precondition_tol: float = 1e-8) -> OverlapRecord:
    """OVL = (p_k + p_x - |p_k - p_x|) / 2 and the two remainders p - OVL."""
    if h_x.bins != h_k.bins or not np.array_equal(h_x.edges, h_k.edges):
        raise BinningMismatchError("histograms must share the same bins")
    if h_x.detector is not h_k.detector:
        raise BinningMismatchError("histograms must describe the same detector")
    px, pk = h_x.p, h_k.p
    ovl = np.minimum(px, pk)  # equals (p_k + p_x - |p_k - p_x|) / 2 without its rounding
    rx, rk = px - ovl, pk - ovl
    total_x, total_k = float(h_x.component_mass.sum()), float(h_k.component_mass.sum())
    shared = float(np.sum(h_x.centers * ovl))
    split = (total_x - shared, total_k - shared)
    residual = abs(total_x - total_k)
    rem = (float(rx.sum()), float(rk.sum()))
    return OverlapRecord(
        ovl, rx, rk, rem, split, residual, residual <= precondition_tol,
        abs(rem[0] - rem[1]) <= tol and abs(split[0] - split[1]) <= tol,
    )
