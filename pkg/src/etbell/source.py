"""Pulsed photon-pair source model and locality audits of event streams.

A femtosecond pump split over a short/long path creates two possible
emission bins ``t0`` and ``t1 = t0 + delta_t``; two photon pairs are emitted
independently, each pair sharing one bin. Shortening the coincidence window
below the path difference discards the cross terms in which the pairs took
different bins, leaving the GHZ-type superposition over the remaining
fourfold coincidences.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import chi2_contingency

from .events import EventTable, all_equal
from .lhv import StrategyEnsemble
from .states import MultiPartyState

TIME_BINS = ("t0", "t1")


@dataclass(frozen=True)
class PumpConfig:
    """Pump path difference and coincidence window, in the same time units.

    The window must be shorter than the path difference, otherwise the
    coincidence filter cannot tell the emission bins apart.
    """

    delta_t: float
    window: float

    def __post_init__(self):
        if not self.delta_t > 0:
            raise ValueError("path difference must be positive")
        if not self.window > 0:
            raise ValueError("coincidence window must be positive")
        if not self.window < self.delta_t:
            raise ValueError(
                "coincidence window must be shorter than the pump path difference"
            )


def four_photon_state() -> MultiPartyState:
    """State of two independently emitted pairs over the two pump bins:
    equal amplitudes 1/2 on t0t0t0t0, t1t1t1t1, t0t0t1t1, and t1t1t0t0."""
    dims = (2, 2, 2, 2)
    amps = np.zeros(16, dtype=complex)
    for pattern in ((0, 0, 0, 0), (1, 1, 1, 1), (0, 0, 1, 1), (1, 1, 0, 0)):
        amps[np.ravel_multi_index(pattern, dims)] = 0.5
    return MultiPartyState(dims, amps, ((TIME_BINS),) * 4)


def coincidence_filter(state: MultiPartyState, cfg: PumpConfig):
    """Project onto all-equal time bins and renormalize.

    Returns ``(filtered_state, keep_probability)`` where the probability is
    the squared norm of the projected amplitudes. Idempotent.
    """
    psi = state.tensor_view()
    kept = np.zeros_like(psi)
    for idx in np.ndindex(*state.dims):
        if all_equal(idx):
            kept[idx] = psi[idx]
    weight = float(np.sum(np.abs(kept) ** 2))
    if weight <= 0.0:
        raise ValueError("postselection empty")
    filtered = MultiPartyState(
        state.dims, (kept / math.sqrt(weight)).reshape(-1), state.level_labels
    )
    return filtered, weight


def source_event_stream(cfg: PumpConfig, trials: int, seed: int = 0) -> EventTable:
    """Simulate detection times of the two pairs, trial by trial.

    Each pair draws one bin uniformly and independently of the other pair;
    both photons of a pair always share the bin. A trial is selected iff all
    four bins agree (the fourfold coincidence surviving the short window).
    """
    if trials < 1:
        raise ValueError("need at least one trial")
    rng = np.random.default_rng(seed)
    pair_bins = rng.integers(0, 2, size=(trials, 2), dtype=np.int8)
    bins = pair_bins[:, (0, 0, 1, 1)]
    selected = pair_bins[:, 0] == pair_bins[:, 1]
    settings = np.zeros((trials, 4), dtype=np.int8)
    signs = np.ones((trials, 4), dtype=np.int8)
    return EventTable(settings, bins, signs, selected, TIME_BINS)


@dataclass(frozen=True)
class PartyAudit:
    party: int
    counts: tuple[tuple[int, int], tuple[int, int]]  # [setting][rejected, selected]
    chi2: float
    p_value: float
    dependent: bool


@dataclass(frozen=True)
class LocalityAuditReport:
    """Outcome of the selection/setting independence tests.

    ``per_party`` and the joint test are frequency based (chi-square on the
    observed stream). ``counterfactual_dependent`` is the exact check on the
    generating ensemble, when one is supplied: does any positive-weight
    strategy change its selection status across setting combinations? A
    model can pass every frequency test while still being counterfactually
    setting-dependent; that invisibility is precisely the loophole.
    """

    per_party: tuple[PartyAudit, ...]
    joint_chi2: float
    joint_p_value: float
    joint_dependent: bool
    counterfactual_dependent: bool | None

    @property
    def setting_dependent(self) -> bool:
        return (
            any(p.dependent for p in self.per_party)
            or self.joint_dependent
            or bool(self.counterfactual_dependent)
        )


def _chi2(table: np.ndarray) -> tuple[float, float]:
    table = table[table.sum(axis=1) > 0][:, table.sum(axis=0) > 0]
    if table.shape[0] < 2 or table.shape[1] < 2:
        return 0.0, 1.0
    stat, p, _, _ = chi2_contingency(table, correction=False)
    return float(stat), float(p)


def counterfactual_selection_dependence(ensemble: StrategyEnsemble, rule=all_equal) -> bool:
    """Exact loophole check: is some strategy's selection setting-dependent?"""
    n = ensemble.n_parties
    for strategy, weight in ensemble.entries:
        if weight <= 0:
            continue
        outcomes = set()
        for combo in itertools.product((0, 1), repeat=n):
            bins = tuple(instr.bin(s) for instr, s in zip(strategy, combo))
            outcomes.add(bool(rule(bins)))
        if len(outcomes) > 1:
            return True
    return False


def locality_audit(
    events: EventTable,
    *,
    ensemble: StrategyEnsemble | None = None,
    rule=all_equal,
    significance: float = 1e-3,
) -> LocalityAuditReport:
    """Test whether selection frequencies depend on the measurement settings.

    Per party, a 2x2 chi-square of (local setting) x (selected); jointly, a
    chi-square of (full setting combination) x (selected). Degenerate tables
    (a constant margin, e.g. every event selected) count as independent.
    With ``ensemble`` given, the counterfactual dependence of the generating
    model is evaluated exactly as well.
    """
    per_party = []
    for p in range(events.n_parties):
        counts = np.zeros((2, 2), dtype=np.int64)
        for setting in (0, 1):
            mask = events.settings[:, p] == setting
            counts[setting, 0] = int((mask & ~events.selected).sum())
            counts[setting, 1] = int((mask & events.selected).sum())
        chi2, p_value = _chi2(counts)
        per_party.append(
            PartyAudit(
                party=p,
                counts=tuple(tuple(int(c) for c in row) for row in counts),
                chi2=chi2,
                p_value=p_value,
                dependent=p_value < significance,
            )
        )
    combo_code = events.settings.astype(np.int64) @ (
        1 << np.arange(events.n_parties, dtype=np.int64)
    )
    joint = np.zeros((2**events.n_parties, 2), dtype=np.int64)
    for code in range(joint.shape[0]):
        mask = combo_code == code
        joint[code, 0] = int((mask & ~events.selected).sum())
        joint[code, 1] = int((mask & events.selected).sum())
    joint_chi2, joint_p = _chi2(joint)
    counterfactual = (
        None if ensemble is None else counterfactual_selection_dependence(ensemble, rule)
    )
    return LocalityAuditReport(
        per_party=tuple(per_party),
        joint_chi2=joint_chi2,
        joint_p_value=joint_p,
        joint_dependent=joint_p < significance,
        counterfactual_dependent=counterfactual,
    )
