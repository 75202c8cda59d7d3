"""Deterministic local-hidden-variable strategies for the three-party
postselected Mermin test.

A strategy gives each party, for each of its two settings, an arrival bin
(``S`` or ``L``) and a detector sign. Ensembles mix strategies with
nonnegative weights; weights and conditional correlations stay exact
:class:`fractions.Fraction` values whenever the input weights are rational,
so the headline numbers come out exact rather than merely within tolerance:

* with the bare all-bins-equal coincidence rule, instructions whose bin may
  depend on the setting reach the algebraic maximum ``mu = 4``;
* once the bin is forced to be setting-independent
  (:class:`FixedBinInstruction`), exhaustive enumeration caps every mixture
  at the classical bound ``mu = 2``.

The gap between those two numbers is the postselection loophole this
package is built to exhibit.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .events import MERMIN_COMBOS, MERMIN_TERM_SIGNS, EventTable, all_equal
from .states import mermin_coefficients

BINS = ("S", "L")
SIGNS = (1, -1)


@dataclass(frozen=True, eq=False)
class LocalInstruction:
    """Per-setting bin and sign for one party: ``bins[s]``, ``signs[s]``.

    Equality is by field values, so a :class:`FixedBinInstruction` equals
    the unrestricted instruction with the same table.
    """

    bins: tuple[str, str]
    signs: tuple[int, int]

    def __eq__(self, other):
        if not isinstance(other, LocalInstruction):
            return NotImplemented
        return self.bins == other.bins and self.signs == other.signs

    def __hash__(self):
        return hash((self.bins, self.signs))

    def __post_init__(self):
        object.__setattr__(self, "bins", tuple(self.bins))
        object.__setattr__(self, "signs", tuple(int(s) for s in self.signs))
        if len(self.bins) != 2 or any(b not in BINS for b in self.bins):
            raise ValueError("bins must assign S or L to both settings")
        if len(self.signs) != 2 or any(s not in SIGNS for s in self.signs):
            raise ValueError("signs must assign +1 or -1 to both settings")

    def bin(self, setting: int) -> str:
        return self.bins[setting]

    def sign(self, setting: int) -> int:
        return self.signs[setting]

    def swap_bins(self):
        swapped = tuple("L" if b == "S" else "S" for b in self.bins)
        return type(self)(swapped, self.signs)

    def flip_signs(self):
        return type(self)(self.bins, tuple(-s for s in self.signs))

    def token(self, setting: int) -> str:
        return f"{self.bin(setting)}{'+' if self.sign(setting) > 0 else '-'}"


class FixedBinInstruction(LocalInstruction):
    """Instruction whose arrival bin does not depend on the setting."""

    def __post_init__(self):
        super().__post_init__()
        if self.bins[0] != self.bins[1]:
            raise ValueError("fixed-bin instruction cannot vary its bin")

    @classmethod
    def of(cls, bin: str, signs: tuple[int, int]) -> "FixedBinInstruction":
        return cls((bin, bin), signs)


def all_instructions() -> tuple[LocalInstruction, ...]:
    """All 16 per-party instructions (bin and sign free per setting)."""
    choices = tuple((b, s) for b in BINS for s in SIGNS)
    return tuple(
        LocalInstruction((b0, b1), (s0, s1))
        for (b0, s0) in choices
        for (b1, s1) in choices
    )


def fixed_bin_instructions() -> tuple[FixedBinInstruction, ...]:
    """All 8 per-party instructions with a setting-independent bin."""
    return tuple(
        FixedBinInstruction.of(b, (s0, s1))
        for b in BINS
        for s0 in SIGNS
        for s1 in SIGNS
    )


@dataclass(frozen=True)
class StrategyEnsemble:
    """Weighted mixture of joint deterministic strategies.

    ``entries`` pairs each strategy (one instruction per party) with its
    weight. Rational weights make every derived quantity exact.
    """

    entries: tuple[tuple[tuple[LocalInstruction, ...], Fraction | float], ...]

    def __post_init__(self):
        entries = tuple(
            (tuple(strategy), weight) for strategy, weight in self.entries
        )
        if not entries:
            raise ValueError("ensemble cannot be empty")
        n = len(entries[0][0])
        if any(len(strategy) != n for strategy, _ in entries):
            raise ValueError("all strategies must cover the same parties")
        if any(weight < 0 for _, weight in entries):
            raise ValueError("weights must be nonnegative")
        total = sum(weight for _, weight in entries)
        exact = all(isinstance(w, (Fraction, int)) for _, w in entries)
        if exact:
            if total != 1:
                raise ValueError(f"weights must sum to 1, got {total}")
        elif abs(total - 1.0) > 1e-12:
            raise ValueError(f"weights must sum to 1, got {total}")
        object.__setattr__(self, "entries", entries)

    @property
    def n_parties(self) -> int:
        return len(self.entries[0][0])

    @property
    def size(self) -> int:
        return len(self.entries)

    @classmethod
    def single(cls, strategy) -> "StrategyEnsemble":
        return cls(((tuple(strategy), Fraction(1)),))

    @classmethod
    def uniform(cls, strategies) -> "StrategyEnsemble":
        strategies = tuple(tuple(s) for s in strategies)
        w = Fraction(1, len(strategies))
        return cls(tuple((s, w) for s in strategies))

    def flip_party_signs(self, party: int) -> "StrategyEnsemble":
        entries = []
        for strategy, weight in self.entries:
            flipped = tuple(
                instr.flip_signs() if p == party else instr
                for p, instr in enumerate(strategy)
            )
            entries.append((flipped, weight))
        return StrategyEnsemble(tuple(entries))


@dataclass(frozen=True)
class PostselectedCorrelations:
    """Conditional Mermin terms given selection, with selection bookkeeping.

    A term whose setting combination selects nothing is ``None`` (undefined,
    never coerced to 0); ``mu`` is ``None`` whenever any term is undefined.
    ``selected_fractions`` holds the per-combination selected weight and
    ``selection_rate`` their average.
    """

    terms: tuple[Fraction | float | None, ...]
    mu: Fraction | float | None
    selection_rate: Fraction | float
    selected_fractions: tuple[Fraction | float, ...]

    @property
    def undefined_terms(self) -> tuple[int, ...]:
        return tuple(k for k, t in enumerate(self.terms) if t is None)


def evaluate_postselected(ensemble: StrategyEnsemble, rule=all_equal) -> PostselectedCorrelations:
    """Conditional expectations of the sign product given selection.

    For each Mermin setting combination the rule sees the joint bins the
    strategies would produce under those settings; selected weight and
    sign-product weight accumulate exactly for rational ensemble weights.
    """
    if ensemble.n_parties != len(MERMIN_COMBOS[0]):
        raise ValueError("postselected Mermin evaluation expects three parties")
    selected_weight = [0] * len(MERMIN_COMBOS)
    product_weight = [0] * len(MERMIN_COMBOS)
    for strategy, weight in ensemble.entries:
        for k, combo in enumerate(MERMIN_COMBOS):
            bins = tuple(instr.bin(s) for instr, s in zip(strategy, combo))
            if rule(bins):
                prod = 1
                for instr, s in zip(strategy, combo):
                    prod *= instr.sign(s)
                selected_weight[k] = selected_weight[k] + weight
                product_weight[k] = product_weight[k] + weight * prod
    terms = tuple(
        product_weight[k] / selected_weight[k] if selected_weight[k] > 0 else None
        for k in range(len(MERMIN_COMBOS))
    )
    mu = None
    if all(t is not None for t in terms):
        mu = abs(sum(s * t for s, t in zip(MERMIN_TERM_SIGNS, terms)))
    rate = sum(selected_weight) / len(MERMIN_COMBOS)
    return PostselectedCorrelations(
        terms=terms,
        mu=mu,
        selection_rate=rate,
        selected_fractions=tuple(selected_weight),
    )


# Instruction patterns of the saturating model, one row per pattern, columns
# (A0, A1, B0, B1, C0, C1). A signed token is fixed; a bare letter ranges
# over both signs; "L/S" ranges over all four outcomes. Each pattern is
# selected under exactly one Mermin setting combination and contributes a
# fixed sign there; the full model also contains every S<->L mirrored copy.
_SATURATING_PATTERNS = (
    ("S+", "L", "S+", "L", "L/S", "S+"),
    ("S+", "L", "S-", "L", "L/S", "S-"),
    ("S-", "L", "S+", "L", "L/S", "S-"),
    ("S-", "L", "S-", "L", "L/S", "S+"),
    ("S+", "L", "L", "S+", "S+", "L/S"),
    ("S+", "L", "L", "S-", "S-", "L/S"),
    ("S-", "L", "L", "S+", "S-", "L/S"),
    ("S-", "L", "L", "S-", "S+", "L/S"),
    ("L", "S+", "S+", "L", "S+", "L/S"),
    ("L", "S+", "S-", "L", "S-", "L/S"),
    ("L", "S-", "S+", "L", "S-", "L/S"),
    ("L", "S-", "S-", "L", "S+", "L/S"),
    ("L", "S+", "L", "S+", "L/S", "S-"),
    ("L", "S+", "L", "S-", "L/S", "S+"),
    ("L", "S-", "L", "S+", "L/S", "S+"),
    ("L", "S-", "L", "S-", "L/S", "S-"),
)


def _cell_options(token: str) -> tuple[tuple[str, int], ...]:
    if token == "L/S":
        return (("S", 1), ("S", -1), ("L", 1), ("L", -1))
    bin_, sign = token[0], token[1:]
    if sign == "+":
        return ((bin_, 1),)
    if sign == "-":
        return ((bin_, -1),)
    return ((bin_, 1), (bin_, -1))


def saturating_model() -> StrategyEnsemble:
    """Uniform instruction ensemble reaching ``mu = 4`` under bin coincidence.

    Expands the 16 patterns above plus their S<->L mirrors (512 strategies).
    Under the all-bins-equal rule each pattern family is selected for exactly
    one setting combination, where its fixed signs multiply to the designated
    +1, +1, +1, -1; a quarter of the weight survives selection and every
    single-party outcome S+, S-, L+, L- occurs with probability 1/4.
    """
    strategies = []
    for row in _SATURATING_PATTERNS:
        per_party = []
        for p in range(3):
            opts0 = _cell_options(row[2 * p])
            opts1 = _cell_options(row[2 * p + 1])
            per_party.append(
                tuple(
                    LocalInstruction((b0, b1), (s0, s1))
                    for (b0, s0) in opts0
                    for (b1, s1) in opts1
                )
            )
        strategies.extend(itertools.product(*per_party))
    mirrored = [
        tuple(instr.swap_bins() for instr in strategy) for strategy in strategies
    ]
    return StrategyEnsemble.uniform(tuple(strategies) + tuple(mirrored))


def marginal_distribution(ensemble: StrategyEnsemble):
    """Outcome weights per (party, setting) over the tokens S+, S-, L+, L-."""
    out: dict[tuple[int, int], dict[str, Fraction | float]] = {}
    for p in range(ensemble.n_parties):
        for s in (0, 1):
            out[(p, s)] = {}
    for strategy, weight in ensemble.entries:
        for p, instr in enumerate(strategy):
            for s in (0, 1):
                token = instr.token(s)
                bucket = out[(p, s)]
                bucket[token] = bucket.get(token, 0) + weight
    return out


def strategy_profile(strategy, rule=all_equal) -> tuple[int, ...]:
    """Per-combination outcome of one strategy: +1/-1 sign product if the
    combination is selected, 0 if it is rejected."""
    profile = []
    for combo in MERMIN_COMBOS:
        bins = tuple(instr.bin(s) for instr, s in zip(strategy, combo))
        if rule(bins):
            prod = 1
            for instr, s in zip(strategy, combo):
                prod *= instr.sign(s)
            profile.append(prod)
        else:
            profile.append(0)
    return tuple(profile)


@dataclass(frozen=True)
class SearchResult:
    mu_max: Fraction
    witness: StrategyEnsemble
    correlations: PostselectedCorrelations
    strategies_examined: int


def _profiles(strategies, rule, threads: int | None):
    if threads and threads > 1:
        bounds = np.linspace(0, len(strategies), threads + 1, dtype=int)
        chunks = [strategies[a:b] for a, b in zip(bounds, bounds[1:])]
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = pool.map(
                lambda chunk: [strategy_profile(s, rule) for s in chunk], chunks
            )
            out: list[tuple[int, ...]] = []
            for part in parts:
                out.extend(part)
            return out
    return [strategy_profile(s, rule) for s in strategies]


def max_mu_setting_dependent(threads: int | None = None) -> SearchResult:
    """Exhaustive maximum of postselected mu over unrestricted instructions.

    Enumerates all 16^3 joint deterministic strategies. Because each
    conditional term is bounded by 1 in magnitude, any ensemble realizing
    the term pattern (+1, +1, +1, -1) is maximal; the witness mixes, for
    each setting combination, one strategy selected exclusively there with
    the designated sign, which drives mu to exactly 4.
    """
    strategies = tuple(itertools.product(all_instructions(), repeat=3))
    profiles = _profiles(strategies, all_equal, threads)
    witnesses = []
    for k, target in enumerate(MERMIN_TERM_SIGNS):
        for strategy, profile in zip(strategies, profiles):
            if profile[k] == target and all(
                profile[m] == 0 for m in range(len(profile)) if m != k
            ):
                witnesses.append(strategy)
                break
        else:
            raise RuntimeError("no exclusive strategy for a Mermin combination")
    witness = StrategyEnsemble.uniform(witnesses)
    correlations = evaluate_postselected(witness)
    return SearchResult(
        mu_max=Fraction(correlations.mu),
        witness=witness,
        correlations=correlations,
        strategies_examined=len(strategies),
    )


def max_mu_setting_independent(threads: int | None = None) -> SearchResult:
    """Exhaustive maximum of postselected mu over fixed-bin instructions.

    With setting-independent bins a strategy is selected for all four
    combinations or none, so every mixture's mu is a weighted average of
    single-strategy values and the maximum over the 8^3 joint strategies is
    the maximum over all ensembles.
    """
    strategies = tuple(itertools.product(fixed_bin_instructions(), repeat=3))
    profiles = _profiles(strategies, all_equal, threads)
    best_mu = None
    best = None
    for strategy, profile in zip(strategies, profiles):
        if all(v == 0 for v in profile):
            continue
        mu = abs(sum(s * v for s, v in zip(MERMIN_TERM_SIGNS, profile)))
        if best_mu is None or mu > best_mu:
            best_mu, best = mu, strategy
    if best is None:
        raise RuntimeError("no fixed-bin strategy is ever selected")
    witness = StrategyEnsemble.single(best)
    correlations = evaluate_postselected(witness)
    return SearchResult(
        mu_max=Fraction(best_mu),
        witness=witness,
        correlations=correlations,
        strategies_examined=len(strategies),
    )


def scaled_model(target) -> StrategyEnsemble:
    """Ensemble whose postselected mu equals ``target`` (0 <= target <= 4).

    Mixes the saturating model with its sign-symmetrized copy (the 50/50
    blend of the model and its party-0 sign flip, whose conditional terms
    all vanish). Both components select exactly the same strategies' bins,
    so the conditional terms scale linearly: weight p = target/4 on the
    saturating part gives mu = 4p = target, exactly for rational targets.
    """
    t = Fraction(target)
    if not 0 <= t <= 4:
        raise ValueError("target must lie in [0, 4]")
    base = saturating_model()
    flipped = base.flip_party_signs(0)
    p = t / 4
    w_keep = (1 + p) / 2
    w_flip = (1 - p) / 2
    entries = tuple(
        (strategy, weight * w_keep) for strategy, weight in base.entries
    ) + tuple((strategy, weight * w_flip) for strategy, weight in flipped.entries)
    return StrategyEnsemble(entries)


def mermin_classical_bound(n: int) -> Fraction:
    """Deterministic (no-postselection) bound of the scaled Mermin
    polynomial, recomputed by exhaustive enumeration of local sign
    assignments rather than assumed."""
    coeffs = mermin_coefficients(n)
    best = Fraction(0)
    for assignment in itertools.product(((1, 1), (1, -1), (-1, 1), (-1, -1)), repeat=n):
        value = Fraction(0)
        for s, c in coeffs.items():
            prod = 1
            for j, bit in enumerate(s):
                prod *= assignment[j][bit]
            value += c * prod
        best = max(best, abs(2 * value))
    return best


def event_stream(
    ensemble: StrategyEnsemble,
    schedule,
    seed: int = 0,
    rule=all_equal,
) -> EventTable:
    """Seeded Monte-Carlo stream of measurement events from an ensemble.

    ``schedule`` is either a trial count (settings drawn uniformly) or an
    explicit (trials, parties) array of settings. Identical seeds produce
    identical streams; empirical postselected correlations converge to
    :func:`evaluate_postselected` at the usual 1/sqrt(trials) rate.
    """
    rng = np.random.default_rng(seed)
    n = ensemble.n_parties
    if np.isscalar(schedule):
        trials = int(schedule)
        if trials < 1:
            raise ValueError("need at least one trial")
        settings = rng.integers(0, 2, size=(trials, n), dtype=np.int8)
    else:
        settings = np.asarray(schedule, dtype=np.int8)
        if settings.ndim != 2 or settings.shape[1] != n:
            raise ValueError("schedule must be a (trials, parties) array")
        if settings.size and not np.isin(settings, (0, 1)).all():
            raise ValueError("settings must be 0 or 1")
        trials = settings.shape[0]
    weights = np.array([float(w) for _, w in ensemble.entries])
    weights = weights / weights.sum()
    picks = rng.choice(len(ensemble.entries), size=trials, p=weights)
    bin_lut = np.array(
        [
            [[BINS.index(instr.bin(s)) for s in (0, 1)] for instr in strategy]
            for strategy, _ in ensemble.entries
        ],
        dtype=np.int8,
    )
    sign_lut = np.array(
        [
            [[instr.sign(s) for s in (0, 1)] for instr in strategy]
            for strategy, _ in ensemble.entries
        ],
        dtype=np.int8,
    )
    party_idx = np.arange(n)[None, :]
    bins = bin_lut[picks[:, None], party_idx, settings]
    signs = sign_lut[picks[:, None], party_idx, settings]
    if rule is all_equal:
        selected = (bins == bins[:, :1]).all(axis=1)
    else:
        selected = np.fromiter(
            (bool(rule(tuple(BINS[b] for b in row))) for row in bins),
            dtype=bool,
            count=trials,
        )
    return EventTable(settings, bins, signs, selected, BINS)


def ensemble_to_json(ensemble: StrategyEnsemble) -> dict:
    entries = []
    for strategy, weight in ensemble.entries:
        entries.append(
            {
                "parties": [
                    {"bins": list(instr.bins), "signs": list(instr.signs)}
                    for instr in strategy
                ],
                "weight": str(weight) if isinstance(weight, Fraction) else weight,
            }
        )
    return {"entries": entries}


def ensemble_from_json(data: dict) -> StrategyEnsemble:
    entries = []
    for item in data["entries"]:
        strategy = tuple(
            LocalInstruction(tuple(p["bins"]), tuple(p["signs"]))
            for p in item["parties"]
        )
        raw = item["weight"]
        weight = Fraction(raw) if isinstance(raw, str) else float(raw)
        entries.append((strategy, weight))
    return StrategyEnsemble(tuple(entries))
