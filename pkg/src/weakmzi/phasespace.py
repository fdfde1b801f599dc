"""Wigner functions, marginals, rotated-quadrature tomograms and negativity scans."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .interferometer import Detector, ExperimentConfig
from .numerics import Grid1D, grid_integral
from .pointer import (
    Basis,
    Distribution,
    MeterWavefunction,
    POSITION,
    WAVENUMBER,
    click_probability,
    default_grid,
)

LABELS = ("W_A", "W_B", "W_plus", "W_1", "W_2")


@dataclass(frozen=True)
class PhaseSpaceField:
    """A real function W(x, k) with its total mass and effective support.

    ``eval`` broadcasts over numpy arrays of x and k.
    """

    eval: Callable[[np.ndarray, np.ndarray], np.ndarray]
    label: str
    params: Optional[ExperimentConfig]
    mass: float
    x_support: tuple[float, float]
    k_support: tuple[float, float]

    def __call__(self, x, k):
        return self.eval(np.asarray(x, dtype=float), np.asarray(k, dtype=float))

    def on_grid(self, grid_x: Grid1D, grid_k: Grid1D) -> np.ndarray:
        """Values on the product grid, indexed ``[ix, ik]``."""
        return self(grid_x.values[:, None], grid_k.values[None, :])


@dataclass(frozen=True)
class NegativityReport:
    min_value: float
    argmin: tuple[float, float]
    negative_mass: float
    grid: tuple[Grid1D, Grid1D]


def _support(config: ExperimentConfig) -> tuple[tuple[float, float], tuple[float, float]]:
    gx = default_grid(config, POSITION)
    gk = default_grid(config, WAVENUMBER)
    return (gx.min, gx.max), (gk.min, gk.max)


def wigner_closed_form(label: str, config: ExperimentConfig) -> PhaseSpaceField:
    """Closed-form Wigner functions of the default, mixed and post-selected meters.

    Labels: ``W_A`` (meter shifted by g), ``W_B`` (unshifted), ``W_plus``
    (mixture reaching B2), ``W_1`` and ``W_2`` (after post-selection on D1, D2).
    """
    if label not in LABELS:
        raise ValueError(f"unknown Wigner label {label!r}; expected one of {LABELS}")
    s, g, phi = config.sigma, config.g, config.phi
    c = math.cos(phi)
    xs, ks = _support(config)

    def wa(x, k):
        return np.exp(-((x - g) ** 2) / (2 * s * s) - 2 * k * k * s * s) / np.pi

    def wb(x, k):
        return np.exp(-(x * x) / (2 * s * s) - 2 * k * k * s * s) / np.pi

    def wplus(x, k):
        return 0.5 * wa(x, k) + 0.25 * (1 - c) * wb(x, k)

    def interference(x, k):
        return (
            np.exp(-2 * k * k * s * s - (2 * x - g) ** 2 / (8 * s * s))
            * (np.cos(g * k) - np.cos(g * k + phi))
            / (4 * np.pi)
        )

    def common(x, k):
        return (
            np.exp(-2 * k * k * s * s)
            * (np.exp(-(x * x) / (2 * s * s)) * (1 - c) + 2 * np.exp(-((x - g) ** 2) / (2 * s * s)))
            / (8 * np.pi)
        )

    table = {
        "W_A": (wa, 1.0),
        "W_B": (wb, 1.0),
        "W_plus": (wplus, (3 - c) / 4),
        "W_1": (lambda x, k: common(x, k) + interference(x, k), click_probability(config, Detector.D1)),
        "W_2": (lambda x, k: common(x, k) - interference(x, k), click_probability(config, Detector.D2)),
    }
    f, mass = table[label]
    return PhaseSpaceField(f, label, config, mass, xs, ks)


def _auto_z(lo: float, hi: float, kmax: float, spacing: float) -> np.ndarray:
    zmax = hi - lo
    dz = min(spacing, math.pi / (8 * max(kmax, 1e-12)))
    n = 2 * int(math.ceil(zmax / dz)) + 1
    return np.linspace(-zmax, zmax, n)


def wigner_from_wavefunction(
    wavefunction: MeterWavefunction,
    grid_x: Grid1D,
    grid_k: Grid1D,
    z_points: Optional[int] = None,
    label: str = "custom",
    params: Optional[ExperimentConfig] = None,
) -> PhaseSpaceField:
    """Wigner function by direct quadrature of its defining integral.

    Position wavefunctions use (1/pi) \\int phi*(x+z) phi(x-z) e^{2ikz} dz;
    wavenumber wavefunctions use (1/pi) \\int phi*(k+z) phi(k-z) e^{-2ixz} dz.
    The integral is tabulated on ``grid_x`` times ``grid_k`` (trapezoid in z)
    and the returned field interpolates bilinearly between grid nodes.

    Args:
        wavefunction: the meter state; its ``support`` bounds the z range.
        grid_x, grid_k: tabulation grids.
        z_points: number of z nodes; chosen from the grids when omitted.
    """
    lo, hi = wavefunction.support
    x, k = grid_x.values, grid_k.values
    if wavefunction.basis.kind == "position":
        outer, inner, sign = x, k, 1.0
        z = _auto_z(lo, hi, float(np.max(np.abs(k))), grid_x.spacing)
    elif wavefunction.basis.kind == "wavenumber":
        outer, inner, sign = k, x, -1.0
        z = _auto_z(lo, hi, float(np.max(np.abs(x))), grid_k.spacing)
    else:
        raise ValueError("Wigner transform needs a position or wavenumber wavefunction")
    if z_points is not None:
        z = np.linspace(z[0], z[-1], z_points)
    dz = z[1] - z[0]
    wz = np.full(z.size, dz)
    wz[0] = wz[-1] = 0.5 * dz
    kernel = np.exp(sign * 2j * np.outer(z, inner)) * wz[:, None]
    rows = []
    for chunk in np.array_split(outer, max(1, outer.size // 128)):
        prod = np.conj(wavefunction(chunk[:, None] + z[None, :])) * wavefunction(chunk[:, None] - z[None, :])
        rows.append(np.real(prod @ kernel) / np.pi)
    table = np.vstack(rows)
    if wavefunction.basis.kind == "wavenumber":
        table = table.T  # index [ix, ik]
    mass = float(grid_integral(grid_integral(table, grid_k), grid_x))

    def ev(xq, kq):
        xq, kq = np.broadcast_arrays(xq, kq)
        return _bilinear(table, grid_x, grid_k, xq, kq)

    return PhaseSpaceField(ev, label, params, mass, (grid_x.min, grid_x.max), (grid_k.min, grid_k.max))


def _bilinear(table, gx: Grid1D, gk: Grid1D, xq, kq):
    fx = (xq - gx.min) / gx.spacing
    fk = (kq - gk.min) / gk.spacing
    inside = (fx >= 0) & (fx <= gx.points - 1) & (fk >= 0) & (fk <= gk.points - 1)
    ix = np.clip(np.floor(fx).astype(int), 0, gx.points - 2)
    ik = np.clip(np.floor(fk).astype(int), 0, gk.points - 2)
    tx = np.clip(fx - ix, 0, 1)
    tk = np.clip(fk - ik, 0, 1)
    v = (
        table[ix, ik] * (1 - tx) * (1 - tk)
        + table[ix + 1, ik] * tx * (1 - tk)
        + table[ix, ik + 1] * (1 - tx) * tk
        + table[ix + 1, ik + 1] * tx * tk
    )
    return np.where(inside, v, 0.0)


def _line_grid(support, points):
    lo, hi = support
    return Grid1D(lo, hi, points)


def marginal(field: PhaseSpaceField, axis: str, points: int = 2049) -> Distribution:
    """Integrate out one phase-space variable.

    Args:
        field: the phase-space function.
        axis: ``"x"`` keeps x (integrates over k); ``"k"`` keeps k.
        points: trapezoid nodes across the support of the integrated variable.
    """
    if axis == "x":
        other = _line_grid(field.k_support, points)
        kv, w = other.values, other.trapezoid_weights()

        def pdf(x):
            x = np.asarray(x, dtype=float)
            return field(x[..., None], kv) @ w

        basis, keep = POSITION, field.x_support
    elif axis == "k":
        other = _line_grid(field.x_support, points)
        xv, w = other.values, other.trapezoid_weights()

        def pdf(k):
            k = np.asarray(k, dtype=float)
            return field(xv, k[..., None]) @ w

        basis, keep = WAVENUMBER, field.k_support
    else:
        raise ValueError("axis must be 'x' or 'k'")
    return Distribution(basis, pdf, field.mass, False, f"marginal_{axis}({field.label})", Grid1D(*keep, DEFAULT_LINE))


DEFAULT_LINE = 2048


def radon_tomogram(field: PhaseSpaceField, axis: Basis, eta_grid: Optional[Grid1D] = None, points: int = 4097) -> Distribution:
    """Distribution of eta = a x + b k as the line integral \\int\\int delta(eta - a x - b k) W.

    The delta constraint is resolved by integrating along whichever variable
    the line is better parameterised by: along x with Jacobian 1/|b| when
    |b| sigma-scaled dominates, otherwise along k with Jacobian 1/|a|.
    """
    a, b = axis.coefficients
    if a == 0 and b == 0:
        raise ValueError("axis needs (a, b) != (0, 0)")
    xw = field.x_support[1] - field.x_support[0]
    kw = field.k_support[1] - field.k_support[0]
    if abs(b) * kw >= abs(a) * xw:
        line = _line_grid(field.x_support, points)
        t, w = line.values, line.trapezoid_weights()

        def pdf(eta):
            eta = np.asarray(eta, dtype=float)[..., None]
            return field(t, (eta - a * t) / b) @ w / abs(b)
    else:
        line = _line_grid(field.k_support, points)
        t, w = line.values, line.trapezoid_weights()

        def pdf(eta):
            eta = np.asarray(eta, dtype=float)[..., None]
            return field((eta - b * t) / a, t) @ w / abs(a)

    if eta_grid is None:
        if field.params is not None:
            eta_grid = default_grid(field.params, axis)
        else:
            corners = [a * x + b * k for x in field.x_support for k in field.k_support]
            eta_grid = Grid1D(min(corners), max(corners), DEFAULT_LINE)
    return Distribution(axis, pdf, field.mass, False, f"radon_{axis.label}({field.label})", eta_grid)


def default_scan_grids(config: ExperimentConfig, points: int = 512) -> tuple[Grid1D, Grid1D]:
    s, g = config.sigma, config.g
    return (
        Grid1D(-6 * s + min(0.0, g), max(0.0, g) + 6 * s, points),
        Grid1D(-3.0 / s, 3.0 / s, points),
    )


def negativity_scan(field: PhaseSpaceField, grid_x: Grid1D, grid_k: Grid1D) -> NegativityReport:
    """Minimum of W on the grid, where it occurs, and the integrated negative part."""
    values = field.on_grid(grid_x, grid_k)
    idx = np.unravel_index(int(np.argmin(values)), values.shape)
    neg = np.clip(-values, 0.0, None)
    negative_mass = float(grid_integral(grid_integral(neg, grid_k), grid_x))
    return NegativityReport(
        float(values[idx]),
        (float(grid_x.values[idx[0]]), float(grid_k.values[idx[1]])),
        negative_mass,
        (grid_x, grid_k),
    )
