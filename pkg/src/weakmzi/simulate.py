"""Monte Carlo harness: quantum ground truth, light-cone-checked LHV strategies, verdicts.

A strategy is a set of decision procedures, each attached to a site (a
spacetime event of the setup). When the harness calls a procedure it hands
over a :class:`LocalView` holding only the information items whose source
event lies in the site's past light cone; reading anything else raises
:class:`LocalityViolation`. Procedures work on whole batches of runs at
once, one array entry per run, which is how per-run memory is carried.

Coordinates use c = 1. Runs are vectorised; every site and every exogenous
choice draws from its own child RNG stream, so replays are bitwise exact.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Iterator, Mapping, Optional, Sequence

import numpy as np
from scipy import stats

from .interferometer import DETECTORS, Detector, ExperimentConfig, spacelike_margin
from .lhv import default_distribution, split_weights
from .numerics import RNG_ALGORITHM, RngStream, sample_inverse_cdf
from .pointer import POSITION, WAVENUMBER, Basis, click_probability, density

# arm codes in records
ARM_NONE, ARM_ALICE, ARM_BOB = 0, 1, 2
# basis codes in records
BASIS_X, BASIS_K, BASIS_ETA = 0, 1, 2


class LocalityViolation(RuntimeError):
    """A decision procedure read information outside its past light cone."""


class UnderpoweredWarning(UserWarning):
    """A comparison cell has fewer samples than the statistical tests are calibrated for."""


# ---------------------------------------------------------------------------
# geometry


@dataclass(frozen=True)
class Event:
    t: float
    x: float
    y: float


@dataclass(frozen=True)
class EventTimeline:
    """Spacetime events of one setup and what information each makes available.

    Args:
        events: named events with (t, x, y) stamps.
        items: information item -> the event that creates it.
        sites: ordered (site, event, produced item) triples for the strategy's
            decision procedures.
        exogenous: items supplied by the experimenters rather than the strategy.
    """

    events: Mapping[str, Event]
    items: Mapping[str, str]
    sites: tuple[tuple[str, str, str], ...]
    exogenous: tuple[str, ...]
    margin: float = float("nan")

    def accessible(self, item: str, site: str) -> bool:
        """True if ``item``'s source event lies in the past light cone of ``site``'s event."""
        src = self.events[self.items[item]]
        dst = self.events[self._site_event(site)]
        dt = dst.t - src.t
        dist = math.hypot(dst.x - src.x, dst.y - src.y)
        scale = max(1.0, abs(dst.t), abs(src.t), dist)
        return dt >= dist - 1e-12 * scale

    def _site_event(self, site: str) -> str:
        for name, ev, _ in self.sites:
            if name == site:
                return ev
        raise KeyError(site)

    def accessibility(self) -> dict[str, frozenset]:
        """Site -> the set of items it may read."""
        return {s: frozenset(i for i in self.items if self.accessible(i, s)) for s, _, _ in self.sites}

    def readout_spacelike_from_bob(self) -> bool:
        """True if Bob's phase choice cannot reach the meter readout at or below light speed."""
        bob = self.events["Bob-phase-choice"]
        ro = self.events["meter-readout"]
        return ro.t - bob.t < math.hypot(ro.x - bob.x, ro.y - bob.y)

    def order(self) -> list[tuple[str, str, str]]:
        """Sites sorted by event time, ties kept in declaration order."""
        return sorted(self.sites, key=lambda s: self.events[s[1]].t)


def nested_timeline(L: float = 1.0, v: float = 1.0) -> EventTimeline:
    """Square nested interferometer with B1 at the origin and B2 at (L, L).

    Alice's meter M sits at (0, L) and Bob's phase shifter at (L, 0). The
    particle reaches M and Bob at L/v; Bob sets phi then. B2, the detectors,
    Alice's basis choice and her readout all happen at 2L/v.
    """
    if not L > 0:
        raise ValueError("the timeline needs L > 0")
    t1, t2 = L / v, 2 * L / v
    events = {
        "emission": Event(0.0, 0.0, 0.0),
        "B1-passage": Event(0.0, 0.0, 0.0),
        "Bob-phase-choice": Event(t1, L, 0.0),
        "M-passage": Event(t1, 0.0, L),
        "B2-passage": Event(t2, L, L),
        "Alice-basis-choice": Event(t2, 0.0, L),
        "meter-readout": Event(t2, 0.0, L),
        "detector-click": Event(t2, L, L),
    }
    items = {
        "arm": "B1-passage",
        "phi": "Bob-phase-choice",
        "commitment": "M-passage",
        "detector": "B2-passage",
        "alice_basis": "Alice-basis-choice",
        "pointer": "meter-readout",
    }
    sites = (
        ("at_B1", "B1-passage", "arm"),
        ("commit_at_M", "M-passage", "commitment"),
        ("at_B2", "B2-passage", "detector"),
        ("readout", "meter-readout", "pointer"),
    )
    return EventTimeline(events, items, sites, ("phi", "alice_basis"), spacelike_margin(L, v))


def wheeler_timeline(L: float = 1.0, v: float = 1.0) -> EventTimeline:
    """Two-arm interferometer: path 1 via (0, L), path 2 via (L, 0), B2 at (L, L).

    Whether B2 is inserted is decided at B2's location at time L/v, after the
    particle has passed B1.
    """
    if not L > 0:
        raise ValueError("the timeline needs L > 0")
    t1, t2 = L / v, 2 * L / v
    events = {
        "B1": Event(0.0, 0.0, 0.0),
        "phase_1": Event(t1, 0.0, L),
        "phase_2": Event(t1, L, 0.0),
        "b2_choice": Event(t1, L, L),
        "B2": Event(t2, L, L),
    }
    items = {"arm": "B1", "phi1": "phase_1", "phi2": "phase_2", "b2_present": "b2_choice", "detector": "B2"}
    sites = (("at_B1", "B1", "arm"), ("at_B2", "B2", "detector"))
    return EventTimeline(events, items, sites, ("phi1", "phi2", "b2_present"))


def einstein_timeline(L: float = 1.0, v: float = 1.0) -> EventTimeline:
    """One beam splitter at the origin feeding D1 at (L, 0) and D2 at (0, L)."""
    if not L > 0:
        raise ValueError("the timeline needs L > 0")
    events = {"B": Event(0.0, 0.0, 0.0), "arrival": Event(L / v, L / math.sqrt(2), L / math.sqrt(2))}
    items = {"arm": "B", "detector": "arrival"}
    sites = (("at_B1", "B", "arm"), ("arrive", "arrival", "detector"))
    return EventTimeline(events, items, sites, ())


class LocalView(Mapping):
    """Read-only view of the information a site is allowed to see."""

    def __init__(self, site: str, available: Mapping[str, object], granted: frozenset):
        self._site = site
        self._available = available
        self._granted = granted

    def __getitem__(self, item):
        if item not in self._granted:
            raise LocalityViolation(f"site {self._site!r} may not read {item!r}: its source is outside the past light cone")
        if item not in self._available:
            raise LocalityViolation(f"site {self._site!r} asked for {item!r}, which does not exist yet")
        return self._available[item]

    def __iter__(self):
        return (k for k in self._available if k in self._granted)

    def __len__(self):
        return sum(1 for _ in self)


Procedure = Callable[[LocalView, np.random.Generator, int], np.ndarray]


@dataclass(frozen=True)
class LhvStrategy:
    """Named decision procedures keyed by site.

    Each procedure receives (view, rng, n) and returns an array of length n
    for the item its site produces (for ``commit_at_M`` a dict of arrays is
    allowed). Constants of the apparatus that are fixed before the run (g,
    sigma) may be baked in; anything chosen during the run must come through
    the view.
    """

    name: str
    procedures: Mapping[str, Procedure]
    timeline_factory: Callable[[float, float], EventTimeline] = nested_timeline


# ---------------------------------------------------------------------------
# records


@dataclass(frozen=True)
class RunRecord:
    run_id: int
    arm: int
    phi: float
    basis: int
    detector: int
    pointer: float
    strategy: str
    seed: int


@dataclass(frozen=True)
class BasisPolicy:
    """How Alice picks her basis per run: ``fixed``, ``alternating`` or ``random`` over ``choices``."""

    mode: str = "random"
    choices: tuple[str, ...] = ("x", "k")
    eta: tuple[float, float] = (1.0, 1.0)

    def __post_init__(self):
        if self.mode not in ("fixed", "alternating", "random"):
            raise ValueError(f"unknown basis policy {self.mode!r}")
        if not self.choices or any(c not in ("x", "k", "eta") for c in self.choices):
            raise ValueError("basis choices must be drawn from x, k, eta")

    @classmethod
    def fixed(cls, basis: str) -> "BasisPolicy":
        return cls("fixed", (basis,))

    def codes(self) -> np.ndarray:
        return np.array([{"x": BASIS_X, "k": BASIS_K, "eta": BASIS_ETA}[c] for c in self.choices], dtype=np.int8)

    def draw(self, n: int, rng: np.random.Generator) -> np.ndarray:
        codes = self.codes()
        if self.mode == "fixed":
            return np.full(n, codes[0], dtype=np.int8)
        if self.mode == "alternating":
            return codes[np.arange(n) % codes.size]
        return codes[rng.integers(0, codes.size, size=n)]

    def basis(self, code: int) -> Basis:
        if code == BASIS_X:
            return POSITION
        if code == BASIS_K:
            return WAVENUMBER
        return Basis("quadrature", *self.eta)


@dataclass
class RunRecords:
    """Columnar record of a batch of runs; iterate for :class:`RunRecord` rows."""

    run_id: np.ndarray
    arm: np.ndarray
    phi: np.ndarray
    basis: np.ndarray
    detector: np.ndarray
    pointer: np.ndarray
    strategy: str
    seed: int
    eta: tuple[float, float] = (1.0, 1.0)

    COLUMNS = ("run_id", "arm", "phi", "basis", "detector", "pointer")

    def __len__(self):
        return int(self.run_id.size)

    def __iter__(self) -> Iterator[RunRecord]:
        for i in range(len(self)):
            yield RunRecord(int(self.run_id[i]), int(self.arm[i]), float(self.phi[i]), int(self.basis[i]),
                            int(self.detector[i]), float(self.pointer[i]), self.strategy, self.seed)

    def identical(self, other: "RunRecords") -> bool:
        """Bitwise equality of every column (NaN pointer entries compare equal)."""
        return (
            self.strategy == other.strategy
            and self.seed == other.seed
            and all(
                np.array_equal(getattr(self, c).view(np.uint8), getattr(other, c).view(np.uint8))
                for c in self.COLUMNS
            )
        )

    def clicks(self) -> np.ndarray:
        """One-hot (n, 3) matrix of detector clicks."""
        out = np.zeros((len(self), 3), dtype=np.int8)
        out[np.arange(len(self)), self.detector - 1] = 1
        return out

    def counts(self) -> np.ndarray:
        return np.bincount(self.detector - 1, minlength=3)

    def columns(self) -> dict[str, np.ndarray]:
        return {c: getattr(self, c) for c in self.COLUMNS}


def _make_records(n, arm, phi, basis, detector, pointer, strategy, seed, eta=(1.0, 1.0)) -> RunRecords:
    return RunRecords(
        np.arange(n, dtype=np.int64),
        np.asarray(arm, dtype=np.int8),
        np.broadcast_to(np.asarray(phi, dtype=float), (n,)).copy(),
        np.asarray(basis, dtype=np.int8),
        np.asarray(detector, dtype=np.int8),
        np.asarray(pointer, dtype=float),
        strategy,
        int(seed),
        tuple(eta),
    )


# ---------------------------------------------------------------------------
# sampling helpers


def _sample_density(dist, rng, size):
    return sample_inverse_cdf(dist.normalized_copy(), dist.grid, rng, size)


def _sample_by_basis(config, policy: BasisPolicy, basis_codes, mask, dist_for_basis, rng, out):
    """Fill ``out[mask]`` with draws from ``dist_for_basis(basis)`` per basis code."""
    for code in np.unique(basis_codes[mask]):
        sel = mask & (basis_codes == code)
        out[sel] = _sample_density(dist_for_basis(policy.basis(int(code))), rng, int(sel.sum()))


def quantum_sampler(config: ExperimentConfig, n_runs: int, rng: RngStream | int,
                    basis_policy: BasisPolicy = BasisPolicy(), meter_on_d3: bool = False) -> RunRecords:
    """Born-rule ground truth: detector from the click probabilities, pointer from its density.

    Args:
        config: experiment parameters.
        n_runs: number of runs, >= 1.
        rng: stream (or plain seed) driving all draws.
        basis_policy: how Alice's basis is picked per run.
        meter_on_d3: also read the meter on runs that end at D3.
    """
    if n_runs < 1:
        raise ValueError("n_runs must be >= 1")
    stream = rng if isinstance(rng, RngStream) else RngStream(int(rng))
    probs = np.array([click_probability(config, d) for d in DETECTORS])
    det = (stream.child(0).generator().choice(3, size=n_runs, p=probs / probs.sum()) + 1).astype(np.int8)
    basis = basis_policy.draw(n_runs, stream.child(1).generator())
    pointer = np.full(n_runs, np.nan)
    prng = stream.child(2).generator()
    for d in DETECTORS:
        if d is Detector.D3 and not meter_on_d3:
            continue
        mask = det == d.index
        if np.any(mask):
            _sample_by_basis(config, basis_policy, basis, mask, lambda b, d=d: density(config, d, b), prng, pointer)
    return _make_records(n_runs, np.zeros(n_runs), config.phi, basis, det, pointer, "quantum", stream.seed,
                         basis_policy.eta)


def run_strategy(strategy: LhvStrategy, config, n_runs: int, timeline: Optional[EventTimeline] = None,
                 rng: RngStream | int = 0, basis_policy: BasisPolicy = BasisPolicy(),
                 meter_on_d3: bool = False) -> RunRecords:
    """Run a strategy under light-cone enforcement.

    Args:
        strategy: the decision procedures.
        config: :class:`ExperimentConfig` for the nested setup, or
            :class:`WheelerConfig` / :class:`EinsteinConfig`.
        n_runs: number of runs.
        timeline: geometry; defaults to the strategy's own factory at the
            config's L and v.
        rng: stream or seed.
        basis_policy: Alice's basis choice (nested setup only).
        meter_on_d3: read the meter on runs ending at D3 (nested setup only).

    Raises:
        LocalityViolation: if any procedure reads an item it may not see.
    """
    if n_runs < 1:
        raise ValueError("n_runs must be >= 1")
    stream = rng if isinstance(rng, RngStream) else RngStream(int(rng))
    L, v = getattr(config, "arm_length_L", 1.0), getattr(config, "particle_speed_v", 1.0)
    timeline = timeline or strategy.timeline_factory(L if L > 0 else 1.0, v)
    access = timeline.accessibility()

    available: dict[str, object] = {}
    for i, name in enumerate(timeline.exogenous):
        g = stream.child(1000 + i).generator()
        if name == "alice_basis":
            available[name] = basis_policy.draw(n_runs, g)
        else:
            available[name] = getattr(config, name)

    for i, (site, _, item) in enumerate(timeline.order()):
        proc = strategy.procedures.get(site)
        if proc is None:
            continue
        view = LocalView(site, available, access[site])
        result = proc(view, stream.child(i).generator(), n_runs)
        available[item] = result

    det = np.asarray(available["detector"], dtype=np.int8)
    if det.shape != (n_runs,) or np.any((det < 1) | (det > 3)):
        raise ValueError(f"strategy {strategy.name!r} must route every run to exactly one detector")
    pointer = np.asarray(available.get("pointer", np.full(n_runs, np.nan)), dtype=float)
    if "pointer" in available and not meter_on_d3:
        pointer = np.where(det == 3, np.nan, pointer)
    basis = available.get("alice_basis", np.zeros(n_runs, dtype=np.int8))
    phi = getattr(config, "phi", np.nan)
    return _make_records(n_runs, available.get("arm", np.zeros(n_runs)), phi, basis, det, pointer,
                         strategy.name, stream.seed, basis_policy.eta)


# ---------------------------------------------------------------------------
# strategies for the nested interferometer


def _coin_arm(view, rng, n):
    return np.where(rng.random(n) < 0.5, ARM_ALICE, ARM_BOB).astype(np.int8)


def _tag_commitment(view, rng, n):
    """Commit to the distribution Phi_A if the particle is on Alice's arm, else Phi_B."""
    return {"tag": np.asarray(view["arm"]).copy()}


def _readout_from_tag(config: ExperimentConfig, policy_eta=(1.0, 1.0)):
    def readout(view, rng, n):
        tag = view["commitment"]["tag"]
        basis = np.asarray(view["alice_basis"])
        out = np.full(n, np.nan)
        for code in np.unique(basis):
            b = BasisPolicy(eta=policy_eta).basis(int(code))
            for t, which in ((ARM_ALICE, "A"), (ARM_BOB, "B")):
                sel = (basis == code) & (tag == t)
                if np.any(sel):
                    out[sel] = _sample_density(default_distribution(config, which, b), rng, int(sel.sum()))
        return out

    return readout


def phi_zero_strategy(config: Optional[ExperimentConfig] = None) -> LhvStrategy:
    """Coin at B1; Bob's side always exits at D3, Alice's side splits 50/50 at B2.

    M commits to Phi_A when the particle passes and to Phi_B otherwise.
    Reproduces the quantum statistics exactly when phi = 0 and ignores phi.
    """
    config = config or ExperimentConfig(phi=0.0)

    def at_b2(view, rng, n):
        arm = np.asarray(view["arm"])
        coin = np.where(rng.random(n) < 0.5, 1, 2)
        return np.where(arm == ARM_BOB, 3, coin).astype(np.int8)

    return LhvStrategy("phi-zero", {"at_B1": _coin_arm, "commit_at_M": _tag_commitment, "at_B2": at_b2,
                                    "readout": _readout_from_tag(config)})


def committed_distribution_strategy(config: ExperimentConfig) -> LhvStrategy:
    """M commits to Phi_A or Phi_B; B2 mixes them with constant weights.

    Bob's side exits at D3 with probability (1 + cos phi)/2, read locally from
    Bob's setting. At B2 the routing weights towards D1 are
    r_A = 1/2 + (1 - cos phi) E / 4 and r_B = (1 + E)/2 with
    E = exp(-g^2 / 8 sigma^2), which reproduce the click probabilities
    exactly; the pointer distributions stay mixtures of Phi_A and Phi_B.
    """
    e = config.damping

    def at_b2(view, rng, n):
        arm = np.asarray(view["arm"])
        c = math.cos(view["phi"])
        u = rng.random(n)
        r_a = 0.5 + 0.25 * (1 - c) * e
        r_b = 0.5 * (1 + e)
        to_d1 = np.where(arm == ARM_ALICE, u < r_a, u < r_b)
        det = np.where(to_d1, 1, 2)
        d3 = (arm == ARM_BOB) & (rng.random(n) < 0.5 * (1 + c))
        return np.where(d3, 3, det).astype(np.int8)

    return LhvStrategy("committed-distribution", {"at_B1": _coin_arm, "commit_at_M": _tag_commitment,
                                                  "at_B2": at_b2, "readout": _readout_from_tag(config)})


def committed_outcome_strategy(config: ExperimentConfig, basis: str = "x") -> LhvStrategy:
    """M commits to one outcome in ``basis`` (``x``/``fixed-x`` or ``k``/``fixed-k``); B2 routes with w_1(outcome).

    The outcome is drawn from Phi_A or Phi_B according to the arm, so the
    outcomes reaching B2 follow Phi_+. B2 knows phi and routes towards D1
    with the quantum weight Phi_1 / Phi_+ at the committed value. If Alice
    reads the other basis the readout can only draw from Phi_A or Phi_B.
    """
    basis = basis.removeprefix("fixed-")
    if basis not in ("x", "k"):
        raise ValueError("committed basis must be 'x' or 'k'")
    committed = POSITION if basis == "x" else WAVENUMBER
    committed_code = BASIS_X if basis == "x" else BASIS_K
    g, sigma = config.g, config.sigma

    def commit(view, rng, n):
        arm = np.asarray(view["arm"])
        value = np.empty(n)
        for t, which in ((ARM_ALICE, "A"), (ARM_BOB, "B")):
            sel = arm == t
            value[sel] = _sample_density(default_distribution(config, which, committed), rng, int(sel.sum()))
        return {"tag": arm.copy(), "value": value}

    def at_b2(view, rng, n):
        arm = np.asarray(view["arm"])
        phi = view["phi"]
        c = math.cos(phi)
        value = view["commitment"]["value"]
        w1 = split_weights(ExperimentConfig(phi=phi, g=g, sigma=sigma), Detector.D1, committed).raw(value)
        det = np.where(rng.random(n) < w1, 1, 2)
        d3 = (arm == ARM_BOB) & (rng.random(n) < 0.5 * (1 + c))
        return np.where(d3, 3, det).astype(np.int8)

    fallback = _readout_from_tag(config)

    def readout(view, rng, n):
        out = fallback(view, rng, n)
        basis_codes = np.asarray(view["alice_basis"])
        same = basis_codes == committed_code
        out[same] = view["commitment"]["value"][same]
        return out

    return LhvStrategy(f"committed-outcome-{basis}", {"at_B1": _coin_arm, "commit_at_M": commit,
                                                      "at_B2": at_b2, "readout": readout})


def cheating_strategy(config: ExperimentConfig) -> LhvStrategy:
    """Reads Bob's phase at M, which the light cone forbids. Used to test enforcement."""
    honest = committed_distribution_strategy(config)

    def commit(view, rng, n):
        _ = view["phi"]
        return _tag_commitment(view, rng, n)

    procs = dict(honest.procedures)
    procs["commit_at_M"] = commit
    return LhvStrategy("cheating", procs)


# ---------------------------------------------------------------------------
# Wheeler and Einstein experiments


@dataclass(frozen=True)
class WheelerConfig:
    phi1: float = 0.0
    phi2: float = 0.0
    b2_present: bool = True
    arm_length_L: float = 1.0
    particle_speed_v: float = 1.0


@dataclass(frozen=True)
class EinsteinConfig:
    arm_length_L: float = 1.0
    particle_speed_v: float = 1.0


def wheeler_probabilities(config: WheelerConfig) -> tuple[float, float]:
    if not config.b2_present:
        return (0.5, 0.5)
    c = math.cos(config.phi1 - config.phi2)
    return ((1 - c) / 2, (1 + c) / 2)


def wheeler_strategy() -> LhvStrategy:
    """Take one path at random; at B2 use the hidden signal about the other phase.

    Without B2 the particle exits on its own path; with B2 it computes the
    interference probabilities from both phases and draws the detector.
    """

    def at_b2(view, rng, n):
        arm = np.asarray(view["arm"])
        if not view["b2_present"]:
            return np.where(arm == 1, 1, 2).astype(np.int8)
        c = math.cos(view["phi1"] - view["phi2"])
        return np.where(rng.random(n) < (1 - c) / 2, 1, 2).astype(np.int8)

    def at_b1(view, rng, n):
        return np.where(rng.random(n) < 0.5, 1, 2).astype(np.int8)

    return LhvStrategy("wheeler", {"at_B1": at_b1, "at_B2": at_b2}, wheeler_timeline)


def einstein_strategy() -> LhvStrategy:
    """Weighted random choice at the beam splitter; the particle then reaches one detector only."""

    def at_b1(view, rng, n):
        return np.where(rng.random(n) < 0.5, 1, 2).astype(np.int8)

    def arrive(view, rng, n):
        return np.asarray(view["arm"]).astype(np.int8)

    return LhvStrategy("einstein", {"at_B1": at_b1, "arrive": arrive}, einstein_timeline)


# ---------------------------------------------------------------------------
# statistics


@dataclass(frozen=True)
class TestResult:
    name: str
    statistic: float
    p_value: float
    threshold: float
    n: int
    dof: Optional[int] = None

    @property
    def passed(self) -> bool:
        return self.p_value >= self.threshold


@dataclass(frozen=True)
class ComparisonVerdict:
    """Chi-square on detector counts plus KS per (detector, basis) pointer sample.

    Each test uses a Bonferroni-corrected threshold so that ``significance``
    is the family-wise false-rejection rate.
    """

    chi_square: TestResult
    ks: tuple[TestResult, ...]
    significance: float
    skipped: tuple[str, ...] = ()

    @property
    def tests(self) -> tuple[TestResult, ...]:
        return (self.chi_square,) + self.ks

    @property
    def passed(self) -> bool:
        return all(t.passed for t in self.tests)

    def failed(self) -> list[str]:
        return [t.name for t in self.tests if not t.passed]


def _basis_label(policy_eta, code) -> str:
    return BasisPolicy(eta=tuple(policy_eta)).basis(int(code)).label


def compare(records: RunRecords, config: ExperimentConfig, significance: float = 0.01,
            min_cell: int = 1000) -> ComparisonVerdict:
    """Test a record batch against the quantum predictions for ``config``.

    Cells with fewer than ``min_cell`` pointer samples are skipped with an
    :class:`UnderpoweredWarning`.
    """
    probs = np.array([click_probability(config, d) for d in DETECTORS])
    counts = records.counts()
    n = len(records)
    cells = []
    skipped = []
    for d in DETECTORS:
        for code in np.unique(records.basis):
            sel = (records.detector == d.index) & (records.basis == code) & np.isfinite(records.pointer)
            m = int(sel.sum())
            label = f"KS {d.value} {_basis_label(records.eta, code)}"
            if m == 0:
                continue
            if m < min_cell:
                skipped.append(label)
                continue
            cells.append((d, int(code), sel, label))
    if skipped:
        warnings.warn(f"underpowered cells skipped: {', '.join(skipped)}", UnderpoweredWarning, stacklevel=2)
    if n < min_cell:
        warnings.warn(f"only {n} runs in total", UnderpoweredWarning, stacklevel=2)

    threshold = significance / (1 + len(cells))
    chi = _chi_square(counts, probs, threshold)

    ks = []
    for d, code, sel, label in cells:
        basis = BasisPolicy(eta=tuple(records.eta)).basis(code)
        dist = density(config, d, basis)
        cdf = dist.normalized_copy().cdf()
        res = stats.kstest(records.pointer[sel], cdf)
        ks.append(TestResult(label, float(res.statistic), float(res.pvalue), threshold, int(sel.sum())))
    return ComparisonVerdict(chi, tuple(ks), significance, tuple(skipped))


def compare_counts(records: RunRecords, probabilities: Sequence[float],
                   significance: float = 0.01) -> ComparisonVerdict:
    """Chi-square of detector counts against arbitrary click probabilities (no pointer tests)."""
    return ComparisonVerdict(_chi_square(records.counts(), np.asarray(probabilities, float), significance),
                             (), significance)


def _chi_square(counts: np.ndarray, probs: np.ndarray, threshold: float) -> TestResult:
    n = int(counts.sum())
    probs = np.concatenate([probs, np.zeros(counts.size - probs.size)])
    expected = probs * n
    live = expected > 0
    dof = int(live.sum()) - 1
    if np.any(counts[~live] > 0):
        return TestResult("chi-square detectors", float("inf"), 0.0, threshold, n, dof)
    if dof == 0:
        # a single allowed detector: the counts match exactly
        return TestResult("chi-square detectors", 0.0, 1.0, threshold, n, dof)
    res = stats.chisquare(counts[live], expected[live] * counts[live].sum() / expected[live].sum())
    return TestResult("chi-square detectors", float(res.statistic), float(res.pvalue), threshold, n, dof)


def binomial_within(count: int, n: int, p: float, sigmas: float = 3.0) -> bool:
    """True if ``count`` lies within ``sigmas`` binomial standard deviations of n p."""
    sd = math.sqrt(n * p * (1 - p))
    return abs(count - n * p) <= sigmas * sd if sd > 0 else count == round(n * p)


def metadata(seed: int, stream_id: int = 0) -> dict:
    return {"rng_algorithm": RNG_ALGORITHM, "seed": int(seed), "stream_id": int(stream_id)}
