"""Shared event plumbing: columnar event tables, the CSV wire format, and
empirical postselected-correlation estimates.

Both the hidden-variable simulators and the quantum samplers emit
:class:`EventTable`; downstream coincidence analysis is therefore identical
for every model. A table behaves as a sequence of :class:`EventRecord`
(one record per party per trial) while storing everything columnar, so
million-trial runs stay cheap.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterator, NamedTuple

import numpy as np

#: Setting combinations entering the three-party Mermin functional,
#: combined with term signs as ``|t1 + t2 + t3 - t4|``.
MERMIN_COMBOS = ((0, 0, 1), (0, 1, 0), (1, 0, 0), (1, 1, 1))
MERMIN_TERM_SIGNS = (1, 1, 1, -1)

CSV_COLUMNS = ("trial", "party", "setting", "bin", "sign", "selected")


def all_equal(values) -> bool:
    """Coincidence rule: keep a joint outcome iff all bins agree."""
    vals = tuple(values)
    return all(v == vals[0] for v in vals[1:])


class EventRecord(NamedTuple):
    trial: int
    party: int
    setting: int
    bin: str
    sign: int
    selected: bool


@dataclass(frozen=True, eq=False)
class EventTable:
    """Columnar event stream; indexable as a flat sequence of records."""

    settings: np.ndarray  # (trials, parties) int8
    bins: np.ndarray  # (trials, parties) int8, codes into bin_labels
    signs: np.ndarray  # (trials, parties) int8, values +1/-1
    selected: np.ndarray  # (trials,) bool
    bin_labels: tuple[str, ...] = ("S", "L")

    def __post_init__(self):
        settings = np.array(self.settings, dtype=np.int8)
        bins = np.array(self.bins, dtype=np.int8)
        signs = np.array(self.signs, dtype=np.int8)
        selected = np.array(self.selected, dtype=bool)
        if settings.ndim != 2:
            raise ValueError("settings must be a (trials, parties) array")
        if bins.shape != settings.shape or signs.shape != settings.shape:
            raise ValueError("settings, bins, and signs must share one shape")
        if selected.shape != (settings.shape[0],):
            raise ValueError("selected must have one flag per trial")
        if bins.size and bins.max(initial=0) >= len(self.bin_labels):
            raise ValueError("bin code outside bin_labels")
        for arr in (settings, bins, signs, selected):
            arr.setflags(write=False)
        object.__setattr__(self, "settings", settings)
        object.__setattr__(self, "bins", bins)
        object.__setattr__(self, "signs", signs)
        object.__setattr__(self, "selected", selected)
        object.__setattr__(self, "bin_labels", tuple(self.bin_labels))

    @property
    def n_trials(self) -> int:
        return self.settings.shape[0]

    @property
    def n_parties(self) -> int:
        return self.settings.shape[1]

    def record(self, trial: int, party: int) -> EventRecord:
        return EventRecord(
            trial=trial,
            party=party,
            setting=int(self.settings[trial, party]),
            bin=self.bin_labels[self.bins[trial, party]],
            sign=int(self.signs[trial, party]),
            selected=bool(self.selected[trial]),
        )

    def __len__(self) -> int:
        return self.n_trials * self.n_parties

    def __getitem__(self, index: int) -> EventRecord:
        if not isinstance(index, (int, np.integer)):
            raise TypeError("event tables index by flat integer position")
        n = len(self)
        if index < 0:
            index += n
        if not 0 <= index < n:
            raise IndexError("event index out of range")
        trial, party = divmod(int(index), self.n_parties)
        return self.record(trial, party)

    def __iter__(self) -> Iterator[EventRecord]:
        for trial in range(self.n_trials):
            for party in range(self.n_parties):
                yield self.record(trial, party)

    def selection_rate(self) -> float:
        if self.n_trials == 0:
            raise ValueError("empty event table has no selection rate")
        return float(self.selected.mean())

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(CSV_COLUMNS)
            for rec in self:
                writer.writerow(
                    (rec.trial, rec.party, rec.setting, rec.bin, rec.sign, int(rec.selected))
                )

    @classmethod
    def read_csv(cls, path, bin_labels: tuple[str, ...] | None = None) -> "EventTable":
        rows = []
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
                raise ValueError(f"unexpected CSV header in {path}")
            for row in reader:
                rows.append(row)
        if not rows:
            raise ValueError("event CSV contains no rows")
        parties = 1 + max(int(r["party"]) for r in rows)
        trials = 1 + max(int(r["trial"]) for r in rows)
        if len(rows) != parties * trials:
            raise ValueError("event CSV is not a dense trial/party grid")
        if bin_labels is None:
            seen: list[str] = []
            for r in rows:
                if r["bin"] not in seen:
                    seen.append(r["bin"])
            bin_labels = tuple(seen)
        code = {label: k for k, label in enumerate(bin_labels)}
        settings = np.zeros((trials, parties), dtype=np.int8)
        bins = np.zeros((trials, parties), dtype=np.int8)
        signs = np.zeros((trials, parties), dtype=np.int8)
        selected = np.zeros(trials, dtype=bool)
        for r in rows:
            t, p = int(r["trial"]), int(r["party"])
            settings[t, p] = int(r["setting"])
            bins[t, p] = code[r["bin"]]
            signs[t, p] = int(r["sign"])
            selected[t] = bool(int(r["selected"]))
        return cls(settings, bins, signs, selected, bin_labels)


@dataclass(frozen=True)
class EmpiricalCorrelations:
    """Monte-Carlo estimate of the postselected Mermin quantities."""

    terms: tuple[float | None, ...]
    mu: float | None
    combo_counts: tuple[int, ...]
    selected_counts: tuple[int, ...]
    selection_rates: tuple[float | None, ...]
    selection_rate: float | None


def mermin_estimate(table: EventTable) -> EmpiricalCorrelations:
    """Conditional sign-product means over the four Mermin setting combos.

    A combination with no selected trials yields ``None`` for its term
    (undefined, deliberately distinct from zero).
    """
    if table.n_parties != 3:
        raise ValueError("Mermin estimation expects three parties")
    prod = table.signs.prod(axis=1)
    terms: list[float | None] = []
    combo_counts: list[int] = []
    selected_counts: list[int] = []
    rates: list[float | None] = []
    for combo in MERMIN_COMBOS:
        mask = (table.settings == np.array(combo, dtype=np.int8)).all(axis=1)
        sel = mask & table.selected
        combo_counts.append(int(mask.sum()))
        selected_counts.append(int(sel.sum()))
        terms.append(float(prod[sel].mean()) if sel.any() else None)
        rates.append(float(sel.sum() / mask.sum()) if mask.any() else None)
    mu = None
    if all(t is not None for t in terms):
        mu = abs(sum(s * t for s, t in zip(MERMIN_TERM_SIGNS, terms)))
    rate = None
    if all(r is not None for r in rates):
        rate = float(sum(rates) / len(rates))
    return EmpiricalCorrelations(
        terms=tuple(terms),
        mu=mu,
        combo_counts=tuple(combo_counts),
        selected_counts=tuple(selected_counts),
        selection_rates=tuple(rates),
        selection_rate=rate,
    )
