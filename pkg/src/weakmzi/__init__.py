"""Weak values, pointer statistics and hidden-variable tests for a nested Mach-Zehnder interferometer.

Modules:
    numerics: grids, quadrature, root finding, seeded RNG streams, inverse-CDF sampling.
    interferometer: history amplitudes, weak values and click probabilities.
    pointer: post-selected meter wavefunctions and densities in any quadrature basis.
    phasespace: Wigner functions, marginals, tomograms and negativity scans.
    lhv: convex and split weights, bivariate-model checks, weight histograms.
    simulate: Monte Carlo harness with light-cone-checked strategies.
    cli: the ``weakmzi`` command.
"""

__version__ = "0.1.0"

from .interferometer import (  # noqa: E402
    DETECTORS,
    Detector,
    ExperimentConfig,
    SingularWeakValueError,
    bare_probability,
    history_amplitudes,
    spacelike_margin,
    weak_value,
)
from .pointer import POSITION, WAVENUMBER, Basis, click_probability, density, quadrature  # noqa: E402

__all__ = [
    "DETECTORS",
    "Detector",
    "ExperimentConfig",
    "SingularWeakValueError",
    "bare_probability",
    "history_amplitudes",
    "spacelike_margin",
    "weak_value",
    "POSITION",
    "WAVENUMBER",
    "Basis",
    "click_probability",
    "density",
    "quadrature",
    "__version__",
]
