"""Square nested Mach-Zehnder interferometer: history amplitudes and weak values.

The particle enters at the source S and meets beam splitter B1. One output
is Alice's arm ``x1`` (which carries the weak meter M); the other output
feeds an inner interferometer on Bob's side, split at Bi into arms ``x2``
and ``x3``. Bob's phase shifter sits on ``x3``. The inner arms recombine at
Bj, whose dark port goes to detector D3 and whose bright port meets Alice's
arm at B2, feeding detectors D1 and D2.

Units: hbar = 1 and the speed of light is 1.
"""

from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass

import numpy as np


class Detector(enum.Enum):
    D1 = "D1"
    D2 = "D2"
    D3 = "D3"

    @classmethod
    def parse(cls, value) -> "Detector":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).upper())
        except ValueError:
            raise ValueError(f"unknown detector {value!r}; expected one of D1, D2, D3") from None

    @property
    def index(self) -> int:
        return int(self.value[1])


DETECTORS = (Detector.D1, Detector.D2, Detector.D3)


class SingularWeakValueError(ZeroDivisionError):
    """The post-selection amplitude vanishes, so the weak value is undefined."""


def wrap_phase(phi: float) -> float:
    """Map an angle into (-pi, pi]."""
    w = math.remainder(float(phi), 2.0 * math.pi)
    return math.pi if w <= -math.pi else w


@dataclass(frozen=True)
class ExperimentConfig:
    """Tunable parameters of one experimental setting.

    Args:
        phi: Bob's phase in radians; wrapped into (-pi, pi].
        g: coupling strength of the weak meter, in pointer-position units.
        sigma: width of the initial Gaussian meter, > 0.
        arm_length_L: interferometer arm length.
        particle_speed_v: particle speed as a fraction of c, in (0, 1].
    """

    phi: float = math.pi / 2
    g: float = 1.0
    sigma: float = 1.0
    arm_length_L: float = 1.0
    particle_speed_v: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "phi", wrap_phase(self.phi))
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if not math.isfinite(self.g):
            raise ValueError("g must be finite")
        if not self.arm_length_L >= 0:
            raise ValueError("arm length must be non-negative")
        if not 0 < self.particle_speed_v <= 1:
            raise ValueError("particle speed must lie in (0, 1] (units of c)")

    @property
    def damping(self) -> float:
        """Overlap factor exp(-g^2 / 8 sigma^2) of the shifted and unshifted meter."""
        return math.exp(-self.g**2 / (8.0 * self.sigma**2))

    def as_dict(self) -> dict:
        return {
            "phi": self.phi,
            "g": self.g,
            "sigma": self.sigma,
            "arm_length_L": self.arm_length_L,
            "particle_speed_v": self.particle_speed_v,
        }


@dataclass(frozen=True)
class HistoryAmplitudes:
    """Amplitudes of the three histories S -> x_j -> D for one detector."""

    psi1: complex
    psi2: complex
    psi3: complex

    @property
    def total(self) -> complex:
        return self.psi1 + self.psi2 + self.psi3

    @property
    def rest(self) -> complex:
        """Amplitude of the histories that bypass the meter arm."""
        return self.psi2 + self.psi3

    def as_tuple(self) -> tuple[complex, complex, complex]:
        return (self.psi1, self.psi2, self.psi3)


@dataclass(frozen=True)
class WeakValue:
    re: float
    im: float

    @classmethod
    def from_complex(cls, z: complex) -> "WeakValue":
        return cls(float(z.real), float(z.imag))

    @property
    def modulus_squared(self) -> float:
        return self.re * self.re + self.im * self.im

    def __complex__(self) -> complex:
        return complex(self.re, self.im)


_SQRT8 = 2.0 * math.sqrt(2.0)


def history_amplitudes(detector: Detector | str, phi: float) -> HistoryAmplitudes:
    """Amplitudes (psi1, psi2, psi3) of the histories through x1, x2, x3.

    The D3 pair (psi2, psi3) = (i, i e^{i phi}) / (2 sqrt 2) comes from the
    beam-splitter network in :func:`mode_network`; only its combination
    |psi2 + psi3|^2 = (1 + cos phi)/4 is physically fixed.
    """
    detector = Detector.parse(detector)
    e = cmath.exp(1j * phi)
    if detector is Detector.D1:
        return HistoryAmplitudes(0.5j, 0.25j, -0.25j * e)
    if detector is Detector.D2:
        return HistoryAmplitudes(-0.5 + 0j, 0.25 + 0j, -0.25 * e)
    return HistoryAmplitudes(0j, 1j / _SQRT8, 1j * e / _SQRT8)


def _check_total(total: complex, detector: Detector, phi: float) -> None:
    if abs(total) <= 1e-14:
        raise SingularWeakValueError(
            f"post-selection on {detector.value} has zero amplitude at phi={phi!r}; weak value undefined"
        )


def weak_value(detector: Detector | str, phi: float, method: str = "closed-form") -> WeakValue:
    """Weak value of the arm-1 projector post-selected on ``detector``.

    Args:
        detector: D1, D2 or D3.
        phi: Bob's phase.
        method: ``"closed-form"`` uses 2/(3 - e^{i phi}), 2/(1 + e^{i phi}) = 1 - i tan(phi/2) and 0;
            ``"path-sum"`` divides psi1 by the sum of all three histories.

    Raises:
        SingularWeakValueError: for D2 at phi = pi, where nothing reaches D2.
    """
    detector = Detector.parse(detector)
    phi = wrap_phase(phi)
    amps = history_amplitudes(detector, phi)
    _check_total(amps.total, detector, phi)
    if method == "path-sum":
        return WeakValue.from_complex(amps.psi1 / amps.total)
    if method != "closed-form":
        raise ValueError(f"unknown weak-value method {method!r}")
    e = cmath.exp(1j * phi)
    if detector is Detector.D1:
        return WeakValue.from_complex(2.0 / (3.0 - e))
    if detector is Detector.D2:
        # 2 / (1 + e^{i phi}) = 1 - i tan(phi / 2), free of cancellation near phi = pi
        return WeakValue(1.0, -math.tan(phi / 2.0))
    return WeakValue(0.0, 0.0)


def bare_probability(detector: Detector | str, phi: float) -> float:
    """Click probability of ``detector`` without the weak meter."""
    detector = Detector.parse(detector)
    c = math.cos(phi)
    if detector is Detector.D1:
        return (5.0 - 3.0 * c) / 8.0
    if detector is Detector.D2:
        return (1.0 + c) / 8.0
    return (1.0 + c) / 4.0


def spacelike_margin(L: float, v: float) -> float:
    """Time by which Alice's readout precedes any luminal signal from Bob.

    Alice and Bob sit sqrt(2) L apart and Alice reads out L / v after Bob
    acts, so the margin is (sqrt 2 - 1/v) L in units where c = 1. A
    non-positive value means Bob's choice can reach Alice in time.
    """
    if not 0 < v <= 1:
        raise ValueError("v must lie in (0, 1] (units of c)")
    if not L >= 0:
        raise ValueError("L must be non-negative")
    return (math.sqrt(2.0) - 1.0 / v) * L


# ---------------------------------------------------------------------------
# explicit mode network used as an independent oracle

# mode labels: 0 = Alice's arm x1 / D1 output, 1 = source port, inner path,
# x2, B2 bright port and D2 output, 2 = x3 and D3 output
MODE_SOURCE = 1
MODE_X = {1: 0, 2: 1, 3: 2}
MODE_D = {Detector.D1: 0, Detector.D2: 1, Detector.D3: 2}

_T = 1.0 / math.sqrt(2.0)
_R = 1j / math.sqrt(2.0)


def beam_splitter(modes: int, a: int, b: int) -> np.ndarray:
    """50:50 splitter on modes (a, b): transmission 1/sqrt2, reflection i/sqrt2."""
    u = np.eye(modes, dtype=complex)
    u[np.ix_([a, b], [a, b])] = [[_T, _R], [_R, _T]]
    return u


def phase_shifter(modes: int, a: int, phi: float) -> np.ndarray:
    u = np.eye(modes, dtype=complex)
    u[a, a] = cmath.exp(1j * phi)
    return u


def mode_network(phi: float) -> tuple[np.ndarray, np.ndarray]:
    """Return (U1, U2): source to the arms, and arms to the detectors."""
    b1 = beam_splitter(3, 0, 1)  # source port 1 reflects into x1 (mode 0)
    bi = beam_splitter(3, 1, 2)  # inner path transmits to x2, reflects to x3
    u1 = bi @ b1
    ps = phase_shifter(3, 2, phi)
    bj = beam_splitter(3, 1, 2)  # x2, x3 recombine; mode 2 exits to D3
    b2 = beam_splitter(3, 0, 1)  # x1 meets the bright port; outputs D1, D2
    u2 = b2 @ bj @ ps
    return u1, u2


def network_history_amplitudes(detector: Detector | str, phi: float) -> HistoryAmplitudes:
    """Per-history amplitudes <D|U2|x_j><x_j|U1|S> read off the mode network."""
    detector = Detector.parse(detector)
    u1, u2 = mode_network(phi)
    d = MODE_D[detector]
    amps = [u2[d, MODE_X[j]] * u1[MODE_X[j], MODE_SOURCE] for j in (1, 2, 3)]
    return HistoryAmplitudes(*(complex(a) for a in amps))


def oracle_weak_value(detector: Detector | str, phi: float) -> WeakValue:
    """Weak value <D|U2 P_x1 U1|S> / <D|U2 U1|S> from explicit unitaries."""
    detector = Detector.parse(detector)
    phi = wrap_phase(phi)
    u1, u2 = mode_network(phi)
    proj = np.zeros((3, 3))
    proj[MODE_X[1], MODE_X[1]] = 1.0
    d = MODE_D[detector]
    numerator = (u2 @ proj @ u1)[d, MODE_SOURCE]
    total = (u2 @ u1)[d, MODE_SOURCE]
    _check_total(total, detector, phi)
    if numerator == 0:
        return WeakValue(0.0, 0.0)
    return WeakValue.from_complex(complex(numerator / total))
