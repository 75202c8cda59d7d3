import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from etbell.events import all_equal, mermin_estimate
from etbell.lhv import (
    FixedBinInstruction,
    LocalInstruction,
    StrategyEnsemble,
    all_instructions,
    ensemble_from_json,
    ensemble_to_json,
    evaluate_postselected,
    event_stream,
    fixed_bin_instructions,
    marginal_distribution,
    max_mu_setting_dependent,
    max_mu_setting_independent,
    mermin_classical_bound,
    saturating_model,
    scaled_model,
    strategy_profile,
)

ALL_S_PLUS = FixedBinInstruction.of("S", (1, 1))


def test_instruction_enumerations():
    instructions = all_instructions()
    assert len(instructions) == 16
    assert len(set(instructions)) == 16
    fixed = fixed_bin_instructions()
    assert len(fixed) == 8
    assert all(instr.bins[0] == instr.bins[1] for instr in fixed)
    assert set(fixed) <= set(instructions)


def test_instruction_accessors_and_tokens():
    instr = LocalInstruction(("S", "L"), (1, -1))
    assert instr.bin(0) == "S" and instr.bin(1) == "L"
    assert instr.sign(0) == 1 and instr.sign(1) == -1
    assert instr.token(0) == "S+" and instr.token(1) == "L-"
    assert instr.swap_bins().bins == ("L", "S")
    assert instr.flip_signs().signs == (-1, 1)


def test_fixed_bin_invariant():
    with pytest.raises(ValueError):
        FixedBinInstruction(("S", "L"), (1, 1))
    assert FixedBinInstruction.of("L", (1, -1)).bins == ("L", "L")


def test_instruction_validation():
    with pytest.raises(ValueError):
        LocalInstruction(("S", "X"), (1, 1))
    with pytest.raises(ValueError):
        LocalInstruction(("S", "L"), (1, 2))


def test_ensemble_validation():
    with pytest.raises(ValueError):
        StrategyEnsemble(())
    strategy = (ALL_S_PLUS,) * 3
    with pytest.raises(ValueError):
        StrategyEnsemble(((strategy, Fraction(1, 2)),))
    with pytest.raises(ValueError):
        StrategyEnsemble(
            ((strategy, Fraction(3, 2)), (strategy, Fraction(-1, 2)))
        )


def test_saturating_model_exact_numbers():
    model = saturating_model()
    assert model.size == 512
    corr = evaluate_postselected(model)
    assert corr.terms == (Fraction(1), Fraction(1), Fraction(1), Fraction(-1))
    assert corr.mu == 4
    assert isinstance(corr.mu, Fraction)
    assert corr.selection_rate == Fraction(1, 4)
    assert 1 - corr.selection_rate == Fraction(3, 4)
    assert corr.selected_fractions == (Fraction(1, 4),) * 4
    assert corr.undefined_terms == ()


def test_saturating_model_uniform_marginals():
    marginals = marginal_distribution(saturating_model())
    assert set(marginals) == {(p, s) for p in range(3) for s in (0, 1)}
    for dist in marginals.values():
        assert set(dist) == {"S+", "S-", "L+", "L-"}
        assert all(weight == Fraction(1, 4) for weight in dist.values())


def test_evaluate_single_all_s_plus():
    corr = evaluate_postselected(StrategyEnsemble.single((ALL_S_PLUS,) * 3))
    assert corr.terms == (1, 1, 1, 1)
    assert corr.mu == 2
    assert corr.selection_rate == 1


def test_evaluate_uniform_signs_fixed_bins_vanishes():
    strategies = [
        (
            FixedBinInstruction.of("S", (sa, sa)),
            FixedBinInstruction.of("S", (sb, sb)),
            FixedBinInstruction.of("S", (sc, sc)),
        )
        for sa in (1, -1)
        for sb in (1, -1)
        for sc in (1, -1)
    ]
    corr = evaluate_postselected(StrategyEnsemble.uniform(strategies))
    assert corr.terms == (0, 0, 0, 0)
    assert corr.mu == 0
    assert corr.selection_rate == 1


def test_undefined_terms_are_flagged_not_zeroed():
    # C sits in S for setting 0 and L for setting 1: combos with c-setting 1
    # never coincide with the all-S parties, so terms 1 and 4 are undefined.
    c = LocalInstruction(("S", "L"), (1, 1))
    corr = evaluate_postselected(
        StrategyEnsemble.single((ALL_S_PLUS, ALL_S_PLUS, c))
    )
    assert corr.undefined_terms == (0, 3)
    assert corr.terms[0] is None
    assert corr.terms[1] == 1
    assert corr.mu is None


def test_strategy_profile_matches_evaluation():
    strategy = (ALL_S_PLUS, ALL_S_PLUS, ALL_S_PLUS)
    assert strategy_profile(strategy) == (1, 1, 1, 1)
    c = LocalInstruction(("S", "L"), (1, 1))
    assert strategy_profile((ALL_S_PLUS, ALL_S_PLUS, c)) == (0, 1, 1, 0)


def test_max_mu_setting_dependent():
    result = max_mu_setting_dependent()
    assert result.mu_max == 4
    assert result.strategies_examined == 16**3
    corr = result.correlations
    assert corr.terms == (1, 1, 1, -1)
    assert corr.mu == 4
    assert corr.selection_rate == Fraction(1, 4)


def test_max_mu_setting_independent():
    result = max_mu_setting_independent()
    assert result.mu_max == 2
    assert result.strategies_examined == 8**3
    assert result.correlations.mu == 2
    assert result.correlations.selection_rate == 1


def test_searches_independent_of_partitioning():
    serial_dep = max_mu_setting_dependent(threads=1)
    parallel_dep = max_mu_setting_dependent(threads=3)
    assert serial_dep.mu_max == parallel_dep.mu_max
    assert serial_dep.witness.entries == parallel_dep.witness.entries
    serial_ind = max_mu_setting_independent(threads=1)
    parallel_ind = max_mu_setting_independent(threads=4)
    assert serial_ind.mu_max == parallel_ind.mu_max
    assert serial_ind.witness.entries == parallel_ind.witness.entries


def test_deterministic_strategy_census():
    # Over all 4096 joint strategies: every defined term is +/-1, and any
    # strategy selected under all four combinations scores exactly mu = 2.
    all_selected_mu = set()
    for strategy in itertools.product(all_instructions(), repeat=3):
        profile = strategy_profile(strategy)
        assert set(profile) <= {-1, 0, 1}
        if all(v != 0 for v in profile):
            all_selected_mu.add(abs(profile[0] + profile[1] + profile[2] - profile[3]))
    assert all_selected_mu == {2}


def test_fixed_bin_enumeration_never_exceeds_two():
    for strategy in itertools.product(fixed_bin_instructions(), repeat=3):
        profile = strategy_profile(strategy)
        # selection is the same for every combination
        assert len({v == 0 for v in profile}) == 1
        if profile[0] != 0:
            mu = abs(profile[0] + profile[1] + profile[2] - profile[3])
            assert mu <= 2


def test_random_fixed_bin_mixtures_bounded_by_two():
    strategies = list(itertools.product(fixed_bin_instructions(), repeat=3))
    profiles = np.array([strategy_profile(s) for s in strategies])
    selected = profiles[:, 0] != 0
    mvals = profiles[:, 0] + profiles[:, 1] + profiles[:, 2] - profiles[:, 3]
    rng = np.random.default_rng(99)
    total = 0
    for _ in range(10):
        weights = rng.exponential(size=(10**4, len(strategies)))
        weights /= weights.sum(axis=1, keepdims=True)
        w_sel = weights[:, selected]
        mu = np.abs(w_sel @ mvals[selected]) / w_sel.sum(axis=1)
        assert (mu <= 2.0 + 1e-12).all()
        total += len(mu)
    assert total == 10**5


@pytest.mark.parametrize("target", [0, 1, 2, 2 * math.sqrt(2), 3, 4])
def test_scaled_model_hits_target(target):
    corr = evaluate_postselected(scaled_model(target))
    assert corr.mu is not None
    assert abs(float(corr.mu) - target) <= 1e-9


def test_scaled_model_extremes():
    with pytest.raises(ValueError):
        scaled_model(-0.1)
    with pytest.raises(ValueError):
        scaled_model(4.1)
    pure = scaled_model(4)
    base = saturating_model()
    # weight mass beyond the base model is exactly zero at target 4
    extra = sum(w for _, w in pure.entries[base.size:])
    assert extra == 0
    assert evaluate_postselected(pure).terms == evaluate_postselected(base).terms


def test_event_stream_deterministic():
    model = saturating_model()
    a = event_stream(model, 3000, seed=21)
    b = event_stream(model, 3000, seed=21)
    assert (a.settings == b.settings).all()
    assert (a.bins == b.bins).all()
    assert (a.signs == b.signs).all()
    assert (a.selected == b.selected).all()
    c = event_stream(model, 3000, seed=22)
    assert not (a.settings == c.settings).all()


def test_event_stream_all_s_always_selected():
    table = event_stream(StrategyEnsemble.single((ALL_S_PLUS,) * 3), 500, seed=0)
    assert table.selected.all()
    assert (table.signs == 1).all()


def test_event_stream_explicit_schedule():
    schedule = np.tile([0, 0, 1], (100, 1))
    table = event_stream(saturating_model(), schedule, seed=4)
    assert table.n_trials == 100
    assert (table.settings == schedule).all()
    with pytest.raises(ValueError):
        event_stream(saturating_model(), np.zeros((5, 2), dtype=int), seed=0)
    with pytest.raises(ValueError):
        event_stream(saturating_model(), 0, seed=0)


def test_event_stream_estimates_match_exact():
    model = saturating_model()
    table = event_stream(model, 50_000, seed=8)
    est = mermin_estimate(table)
    # conditional sign products of this model are deterministic
    assert est.terms == (1.0, 1.0, 1.0, -1.0)
    assert est.mu == 4.0
    rate = table.selection_rate()
    sigma = math.sqrt(0.25 * 0.75 / table.n_trials)
    assert abs(rate - 0.25) <= 3.0 * sigma + 1e-9


def test_event_stream_scaled_model_within_three_sigma():
    target = 2.0 * math.sqrt(2.0)
    model = scaled_model(target)
    exact = evaluate_postselected(model)
    table = event_stream(model, 100_000, seed=31)
    est = mermin_estimate(table)
    for got, want, n_sel in zip(est.terms, exact.terms, est.selected_counts):
        sigma = math.sqrt((1.0 - float(want) ** 2) / n_sel)
        assert abs(got - float(want)) <= 3.0 * sigma + 1e-12


def test_ensemble_json_round_trip():
    model = scaled_model(1)
    again = ensemble_from_json(ensemble_to_json(model))
    assert again.entries == model.entries
    corr = evaluate_postselected(again)
    assert float(corr.mu) == 1.0


@pytest.mark.parametrize("n,expected", [(2, 2), (3, 2), (4, 2), (5, 2)])
def test_mermin_classical_bound_enumeration(n, expected):
    assert mermin_classical_bound(n) == expected


@st.composite
def small_ensembles(draw):
    instructions = all_instructions()
    k = draw(st.integers(min_value=1, max_value=5))
    entries = []
    weights = []
    for _ in range(k):
        idx = draw(st.tuples(*(st.integers(0, 15) for _ in range(3))))
        strategy = tuple(instructions[i] for i in idx)
        weights.append(draw(st.integers(min_value=1, max_value=9)))
        entries.append(strategy)
    total = sum(weights)
    return StrategyEnsemble(
        tuple((s, Fraction(w, total)) for s, w in zip(entries, weights))
    )


@given(ensemble=small_ensembles())
@settings(max_examples=60, deadline=None)
def test_random_ensembles_respect_bounds(ensemble):
    corr = evaluate_postselected(ensemble)
    for term, fraction in zip(corr.terms, corr.selected_fractions):
        assert 0 <= fraction <= 1
        if term is not None:
            assert -1 <= term <= 1
    if corr.mu is not None:
        assert 0 <= corr.mu <= 4
    assert 0 <= corr.selection_rate <= 1
