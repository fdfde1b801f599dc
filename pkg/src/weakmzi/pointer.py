"""Meter states and pointer distributions after post-selection.

The meter starts as a real Gaussian of width sigma. Coupling to the arm-1
projector shifts it by g on that arm only, so the post-selected meter is

    phi_f(x) = psi_rest * phi0(x) + psi1 * phi0(x - g)

with psi1 the amplitude of the meter-arm history and psi_rest that of the
other two. This is algebraically the familiar N[(1 - A_w) phi0 + A_w phi0(x-g)]
form but never divides by N, so it stays finite where N vanishes.

Bases: position x, wavenumber k, and rotated quadratures eta = a x + b k.
Fourier convention: phi(k) = (2 pi)^{-1/2} \\int e^{-ikx} phi(x) dx.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from .interferometer import (
    Detector,
    ExperimentConfig,
    HistoryAmplitudes,
    bare_probability,
    history_amplitudes,
    mode_network,
    MODE_D,
    MODE_SOURCE,
    MODE_X,
)
from .numerics import Grid1D, grid_integral, tabulate_cdf

DEFAULT_POINTS = 2048


@dataclass(frozen=True)
class Basis:
    """Measurement basis: ``position``, ``wavenumber`` or ``quadrature`` (eta = a x + b k)."""

    kind: str
    a: float = 0.0
    b: float = 0.0

    def __post_init__(self):
        if self.kind not in ("position", "wavenumber", "quadrature"):
            raise ValueError(f"unknown basis kind {self.kind!r}")
        if self.kind == "quadrature" and self.a == 0 and self.b == 0:
            raise ValueError("quadrature axis needs (a, b) != (0, 0)")

    @property
    def coefficients(self) -> tuple[float, float]:
        if self.kind == "position":
            return (1.0, 0.0)
        if self.kind == "wavenumber":
            return (0.0, 1.0)
        return (float(self.a), float(self.b))

    @property
    def label(self) -> str:
        if self.kind == "quadrature":
            return f"eta({self.a:g},{self.b:g})"
        return {"position": "x", "wavenumber": "k"}[self.kind]

    @classmethod
    def parse(cls, text: "str | Basis") -> "Basis":
        """Accept ``x``, ``k``, ``position``, ``wavenumber`` or ``eta:a,b``."""
        if isinstance(text, Basis):
            return text
        t = str(text).strip().lower()
        if t in ("x", "position"):
            return POSITION
        if t in ("k", "wavenumber", "p", "momentum"):
            return WAVENUMBER
        if t.startswith("eta"):
            body = t[3:].strip(":()= ")
            try:
                a, b = (float(s) for s in body.split(","))
            except ValueError:
                raise ValueError(f"quadrature basis must look like eta:a,b, got {text!r}") from None
            return quadrature(a, b)
        raise ValueError(f"unknown basis {text!r}")


POSITION = Basis("position")
WAVENUMBER = Basis("wavenumber")


def quadrature(a: float, b: float) -> Basis:
    return Basis("quadrature", float(a), float(b))


QuadratureAxis = Basis


@dataclass(frozen=True)
class Distribution:
    """A one-dimensional density over a labelled basis.

    ``pdf`` need not integrate to one; ``mass`` records its total weight
    (a click probability for post-selected densities).
    """

    basis: Basis
    pdf: Callable[[np.ndarray], np.ndarray]
    mass: float
    normalized: bool = False
    label: str = ""
    grid: Optional[Grid1D] = None

    def __call__(self, lam):
        return self.pdf(np.asarray(lam, dtype=float))

    def normalized_copy(self) -> "Distribution":
        if self.normalized:
            return self
        if self.mass <= 0:
            raise ZeroDivisionError(f"cannot normalize {self.label or 'distribution'} with zero mass")
        m, f = self.mass, self.pdf
        return replace(self, pdf=lambda lam: f(lam) / m, mass=1.0, normalized=True)

    def grid_mass(self, grid: Optional[Grid1D] = None) -> float:
        grid = grid or self.grid
        return float(grid_integral(self(grid.values), grid))

    def cdf(self, points: int = 16385) -> Callable[[np.ndarray], np.ndarray]:
        """Tabulated CDF on a refined copy of the default grid, scaled to end at ``mass``."""
        fine = Grid1D(self.grid.min, self.grid.max, points)
        x, c = tabulate_cdf(self, fine)
        c = c * (self.mass / c[-1]) if c[-1] > 0 else c
        return lambda lam: np.interp(lam, x, c, left=0.0, right=self.mass)


@dataclass(frozen=True)
class MeterWavefunction:
    """Post-selected (unnormalised) meter wavefunction.

    ``postselection_amplitude`` is <psi_f|T|psi_i>, the sum of the history
    amplitudes. ``support`` is an interval outside which |eval| is negligible.
    """

    basis: Basis
    eval: Callable[[np.ndarray], np.ndarray]
    postselection_amplitude: complex
    support: tuple[float, float]

    def __call__(self, lam):
        return self.eval(np.asarray(lam, dtype=float))


# ---------------------------------------------------------------------------
# grids


def default_grid(config: ExperimentConfig, basis: Basis = POSITION, points: int = DEFAULT_POINTS) -> Grid1D:
    """Grid covering every Gaussian envelope of the post-selected densities."""
    s, g = config.sigma, config.g
    if basis.kind == "position":
        return Grid1D(-8 * s + min(0.0, g), 8 * s + max(0.0, g), points)
    if basis.kind == "wavenumber":
        return Grid1D(-4.0 / s, 4.0 / s, points)
    a, b = basis.coefficients
    width = math.sqrt(b * b + 4 * a * a * s**4) / (2 * s)
    return Grid1D(min(0.0, a * g) - 8 * width, max(0.0, a * g) + 8 * width, points)


# ---------------------------------------------------------------------------
# wavefunctions


def _phi0(x, sigma, shift=0.0):
    return (2 * np.pi * sigma**2) ** -0.25 * np.exp(-((x - shift) ** 2) / (4 * sigma**2))


def initial_meter(sigma: float) -> MeterWavefunction:
    """Initial meter (2 pi sigma^2)^{-1/4} exp(-x^2 / 4 sigma^2)."""
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    return MeterWavefunction(POSITION, lambda x: _phi0(x, sigma) + 0j, 1.0 + 0j, (-8 * sigma, 8 * sigma))


def _amplitudes(config: ExperimentConfig, detector) -> HistoryAmplitudes:
    return history_amplitudes(Detector.parse(detector), config.phi)


def final_meter_x(config: ExperimentConfig, detector) -> MeterWavefunction:
    amps = _amplitudes(config, detector)
    s, g = config.sigma, config.g
    p1, pr = amps.psi1, amps.rest

    def ev(x):
        return pr * _phi0(x, s) + p1 * _phi0(x, s, g)

    grid = default_grid(config, POSITION)
    return MeterWavefunction(POSITION, ev, amps.total, (grid.min, grid.max))


def final_meter_k(config: ExperimentConfig, detector) -> MeterWavefunction:
    amps = _amplitudes(config, detector)
    s, g = config.sigma, config.g
    p1, pr = amps.psi1, amps.rest
    pref = (2 * s * s / np.pi) ** 0.25

    def ev(k):
        return pref * np.exp(-(k**2) * s * s) * (pr + p1 * np.exp(-1j * g * k))

    grid = default_grid(config, WAVENUMBER)
    return MeterWavefunction(WAVENUMBER, ev, amps.total, (grid.min, grid.max))


def fourier_transform(values: np.ndarray, grid: Grid1D, k: np.ndarray) -> np.ndarray:
    """Unitary transform (2 pi)^{-1/2} \\sum_x e^{-ikx} f(x) w_x of samples on ``grid``."""
    x = grid.values
    w = grid.trapezoid_weights()
    kernel = np.exp(-1j * np.outer(np.asarray(k, dtype=float), x))
    return kernel @ (w * values) / math.sqrt(2 * math.pi)


# ---------------------------------------------------------------------------
# densities


def click_probability(config: ExperimentConfig, detector) -> float:
    """Probability that ``detector`` clicks with the weak meter in place."""
    detector = Detector.parse(detector)
    c = math.cos(config.phi)
    e = config.damping
    if detector is Detector.D1:
        return (3 - c + 2 * e * (1 - c)) / 8
    if detector is Detector.D2:
        return (3 - c - 2 * e * (1 - c)) / 8
    return bare_probability(Detector.D3, config.phi)


def _gaussian(lam, mean, var):
    return np.exp(-((lam - mean) ** 2) / (2 * var)) / np.sqrt(2 * np.pi * var)


def _density_closed_x(config, detector):
    s, g, c = config.sigma, config.g, math.cos(config.phi)
    sign = 1.0 if detector is Detector.D1 else -1.0

    def pdf(x):
        phib = _gaussian(x, 0.0, s * s)
        # exp((x^2-(x-g)^2)/2s^2) and its square root, evaluated as one exponent
        # each so the far tails neither overflow nor lose the Gaussian envelope
        ea = np.exp(-((x - g) ** 2) / (2 * s * s)) / np.sqrt(2 * np.pi * s * s)
        cross = np.exp(-(x * x + (x - g) ** 2) / (4 * s * s)) / np.sqrt(2 * np.pi * s * s)
        return (2 * ea + (phib + sign * 2 * cross) * (1 - c)) / 8

    return pdf


def _density_closed_k(config, detector):
    s, g, phi = config.sigma, config.g, config.phi
    c = math.cos(phi)
    sign = 1.0 if detector is Detector.D1 else -1.0

    def pdf(k):
        env = s * math.sqrt(2 / np.pi) * np.exp(-2 * k * k * s * s)
        return env * (3 - c + sign * (2 * np.cos(g * k) - 2 * np.cos(phi + g * k))) / 8

    return pdf


def _density_closed_eta(config, detector, a, b):
    s, g, phi = config.sigma, config.g, config.phi
    c = math.cos(phi)
    sign = 1.0 if detector is Detector.D1 else -1.0
    D = b * b + 4 * a * a * s**4

    def pdf(eta):
        first = s / (4 * np.sqrt(2 * np.pi * D)) * (
            2 * np.exp(-2 * (eta - a * g) ** 2 * s * s / D) + np.exp(-2 * eta**2 * s * s / D) * (1 - c)
        )
        theta = b * g * (2 * eta - a * g) / (2 * D)
        second = s / np.sqrt(8 * np.pi * D) * np.exp(-(eta**2 + (eta - a * g) ** 2) * s * s / D) * (
            np.cos(theta) - np.cos(theta + phi)
        )
        return first + sign * second

    return pdf


def _density_born(config, detector, a, b):
    """|<eta|phi_f>|^2 for any (a, b) from the history amplitudes.

    A superposition alpha phi0 + beta phi0(. - g) has eta density
    |alpha|^2 G_0 + |beta|^2 G_{ag} + 2 Re(alpha* beta K), with Gaussians G
    of variance D / 4 sigma^2, D = b^2 + 4 a^2 sigma^4, and cross kernel K.
    """
    amps = _amplitudes(config, detector)
    s, g = config.sigma, config.g
    p1, pr = amps.psi1, amps.rest
    D = b * b + 4 * a * a * s**4
    var = D / (4 * s * s)
    norm = s * math.sqrt(2.0 / (math.pi * D))
    cross = np.conj(pr) * p1

    def pdf(eta):
        theta = b * g * (2 * eta - a * g) / (2 * D)
        k = norm * np.exp(-(eta**2 + (eta - a * g) ** 2) * s * s / D) * np.exp(-1j * theta)
        return (
            abs(pr) ** 2 * _gaussian(eta, 0.0, var)
            + abs(p1) ** 2 * _gaussian(eta, a * g, var)
            + 2 * np.real(cross * k)
        )

    return pdf


def density(config: ExperimentConfig, detector, basis: Basis | str = POSITION, method: str = "closed-form") -> Distribution:
    """Post-selected pointer density (unnormalised; mass = click probability).

    Args:
        config: experiment parameters.
        detector: D1, D2 or D3.
        basis: position, wavenumber or a quadrature axis. Axes with b = 0 or
            a = 0 are evaluated through the position or wavenumber forms,
            rescaled by 1/|a| or 1/|b|.
        method: ``"closed-form"`` (explicit D1/D2 expressions) or ``"born"``
            (squared modulus built from the history amplitudes).
    """
    detector = Detector.parse(detector)
    basis = Basis.parse(basis)
    mass = click_probability(config, detector)
    label = f"Phi_{detector.index}({basis.label})"
    grid = default_grid(config, basis)

    if basis.kind == "quadrature":
        a, b = basis.coefficients
        if b == 0 or a == 0:
            inner_basis, scale = (POSITION, a) if b == 0 else (WAVENUMBER, b)
            inner = density(config, detector, inner_basis, method)
            return Distribution(basis, lambda eta: inner.pdf(eta / scale) / abs(scale), mass, False, label, grid)

    a, b = basis.coefficients
    if method == "born":
        return Distribution(basis, _density_born(config, detector, a, b), mass, False, label, grid)
    if method != "closed-form":
        raise ValueError(f"unknown density method {method!r}")

    if detector is Detector.D3:
        var = (b * b + 4 * a * a * config.sigma**4) / (4 * config.sigma**2)
        return Distribution(basis, lambda lam: mass * _gaussian(lam, 0.0, var), mass, False, label, grid)
    if basis.kind == "position":
        pdf = _density_closed_x(config, detector)
    elif basis.kind == "wavenumber":
        pdf = _density_closed_k(config, detector)
    else:
        pdf = _density_closed_eta(config, detector, a, b)
    return Distribution(basis, pdf, mass, False, label, grid)


def normalized_density(config: ExperimentConfig, detector, basis: Basis | str = POSITION) -> Distribution:
    return density(config, detector, basis).normalized_copy()


# ---------------------------------------------------------------------------
# operator-exponential oracle


def _exp_series(z: np.ndarray, tol: float = 1e-17, max_terms: int = 64) -> np.ndarray:
    """Truncated Taylor series of exp(z) for |z| <= 0.5; raises if it needs more than ``max_terms``."""
    total = np.ones_like(z)
    term = np.ones_like(z)
    for n in range(1, max_terms + 1):
        term = term * z / n
        total = total + term
        if np.max(np.abs(term)) <= tol * np.max(np.abs(total)):
            return total
    raise ArithmeticError(f"power series did not converge within {max_terms} terms")


def operator_exponential_oracle(config: ExperimentConfig, detector, grid: Optional[Grid1D] = None) -> np.ndarray:
    """Final meter on ``grid`` from the power series of exp(-i g A (x) k).

    The joint state (three arms times meter wavenumber) is evolved by summing
    the Taylor series of the coupling generator with scaling and squaring,
    contracted with the pre- and post-selection amplitudes of the explicit
    beam-splitter network, and transformed back to position by quadrature.
    Nothing here uses the weak value or the closed-form wavefunction.
    """
    detector = Detector.parse(detector)
    grid = grid or default_grid(config, POSITION)
    s, g = config.sigma, config.g
    span = grid.max - grid.min
    kmax = 8.0 / s
    dk = math.pi / (2.0 * span)
    nk = 2 * int(math.ceil(kmax / dk)) + 1
    k = np.linspace(-kmax, kmax, nk)
    wk = np.full(nk, k[1] - k[0])
    wk[0] = wk[-1] = 0.5 * (k[1] - k[0])
    phi0_k = (2 * s * s / np.pi) ** 0.25 * np.exp(-(k**2) * s * s)

    # generator -i g A k with A = |x1><x1| acts only on the arm-1 component
    steps = max(1, int(math.ceil(abs(g) * kmax / 0.5)))
    step = _exp_series(-1j * (g / steps) * k)
    shift = step**steps

    u1, u2 = mode_network(config.phi)
    d = MODE_D[detector]
    arm_amp = [u2[d, MODE_X[j]] * u1[MODE_X[j], MODE_SOURCE] for j in (1, 2, 3)]
    meter_k = (arm_amp[0] * shift + arm_amp[1] + arm_amp[2]) * phi0_k

    x = grid.values
    kernel = np.exp(1j * np.outer(x, k))
    return kernel @ (wk * meter_k) / math.sqrt(2 * math.pi)
