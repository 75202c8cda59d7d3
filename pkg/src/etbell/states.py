"""Multiparty entangled states, expectation values, and Mermin functionals.

Time-bin qubits use the basis labels ``S`` (short, level 1) and ``L`` (long,
level 2); n-level systems use ``1..n``. The three-party Mermin functional is
``mu = |<A0 B0 C1> + <A0 B1 C0> + <A1 B0 C0> - <A1 B1 C1>|`` with dichotomic
settings; on the GHZ state with ``(A0, A1) = (sigma_y, sigma_x)`` per party
it reaches the algebraic maximum 4.

``prepare_postselected`` models the ideal simultaneous-emission source: one
photon per party propagates through that party's network, and only joint
arrival-bin outcomes passing the coincidence rule are kept.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .events import MERMIN_COMBOS, MERMIN_TERM_SIGNS, EventTable, all_equal
from .numerics import as_matrix
from .optics import InterferometerNetwork, compose

PAULI_X = as_matrix(((0, 1), (1, 0)))
PAULI_Y = as_matrix(((0, -1j), (1j, 0)))
PAULI_Z = as_matrix(((1, 0), (0, -1)))

QUBIT_LABELS = ("S", "L")

#: The GHZ correlation operators with eigenvalue -1: x y y, y x y, y y x,
#: and -(x x x), encoded as (sign, pauli string).
GHZ_STABILIZERS = (
    (1, "xyy"),
    (1, "yxy"),
    (1, "yyx"),
    (-1, "xxx"),
)

_PAULI = {"x": PAULI_X, "y": PAULI_Y, "z": PAULI_Z}


def _default_labels(dim: int) -> tuple[str, ...]:
    return tuple(str(k + 1) for k in range(dim))


@dataclass(frozen=True, eq=False)
class MultiPartyState:
    """Normalized amplitude vector over a labeled multi-party product basis."""

    dims: tuple[int, ...]
    amplitudes: np.ndarray
    level_labels: tuple[tuple[str, ...], ...] = ()

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if not dims or any(d < 1 for d in dims):
            raise ValueError("each party needs at least one level")
        amps = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if amps.size != math.prod(dims):
            raise ValueError("amplitude count must equal the product of dims")
        if not np.isfinite(amps).all():
            raise ValueError("amplitudes must be finite")
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > 1e-8:
            raise ValueError(f"state must be normalized (norm {norm})")
        labels = tuple(tuple(lv) for lv in self.level_labels) or tuple(
            _default_labels(d) for d in dims
        )
        if len(labels) != len(dims) or any(
            len(lv) != d for lv, d in zip(labels, dims)
        ):
            raise ValueError("level labels must match dims party by party")
        amps.setflags(write=False)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "level_labels", labels)

    @property
    def n_parties(self) -> int:
        return len(self.dims)

    def tensor_view(self) -> np.ndarray:
        return self.amplitudes.reshape(self.dims)

    def basis_index(self, levels: tuple[int, ...]) -> int:
        return int(np.ravel_multi_index(levels, self.dims))

    def amplitude(self, labels: tuple[str, ...]) -> complex:
        levels = tuple(
            self.level_labels[p].index(lab) for p, lab in enumerate(labels)
        )
        return complex(self.amplitudes[self.basis_index(levels)])

    def iter_amplitudes(self):
        """Yield ``(per-party label tuple, amplitude)`` for nonzero entries."""
        for levels in itertools.product(*(range(d) for d in self.dims)):
            amp = self.amplitudes[self.basis_index(levels)]
            if amp != 0:
                labels = tuple(
                    self.level_labels[p][lv] for p, lv in enumerate(levels)
                )
                yield labels, complex(amp)

    def allclose(self, other: "MultiPartyState", tol: float = 1e-12) -> bool:
        return (
            self.dims == other.dims
            and float(np.abs(self.amplitudes - other.amplitudes).max()) <= tol
        )


def ghz_state(n: int) -> MultiPartyState:
    """(|S...S> + |L...L>)/sqrt(2) over n time-bin qubits."""
    if n < 2:
        raise ValueError("GHZ state needs at least two parties")
    amps = np.zeros(2**n, dtype=complex)
    amps[0] = amps[-1] = 1.0 / math.sqrt(2.0)
    return MultiPartyState((2,) * n, amps, ((QUBIT_LABELS),) * n)


def qunit_state(n: int) -> MultiPartyState:
    """(sum_i |i...i>)/sqrt(n) over n parties with n levels each."""
    if n < 2:
        raise ValueError("qunit state needs at least two parties")
    dims = (n,) * n
    amps = np.zeros(n**n, dtype=complex)
    for i in range(n):
        amps[np.ravel_multi_index((i,) * n, dims)] = 1.0 / math.sqrt(n)
    return MultiPartyState(dims, amps, (_default_labels(n),) * n)


def expectation(state: MultiPartyState, observables, tol: float = 1e-12) -> float:
    """<psi| O_1 x ... x O_n |psi> for Hermitian per-party observables."""
    ops = [as_matrix(o) for o in observables]
    if len(ops) != state.n_parties:
        raise ValueError("need exactly one observable per party")
    for o, d in zip(ops, state.dims):
        if o.shape != (d, d):
            raise ValueError(f"observable shape {o.shape} does not match dim {d}")
        if float(np.abs(o - o.conj().T).max()) > tol:
            raise ValueError("observables must be Hermitian")
    full = ops[0]
    for o in ops[1:]:
        full = np.kron(full, o)
    value = complex(np.vdot(state.amplitudes, full @ state.amplitudes))
    if abs(value.imag) > tol:
        raise ArithmeticError(f"expectation has imaginary part {value.imag}")
    return value.real


def is_dichotomic(observable, tol: float = 1e-12) -> bool:
    """Hermitian with spectrum {+1, -1} (both eigenvalues present)."""
    o = as_matrix(observable)
    if o.shape[0] != o.shape[1]:
        return False
    if float(np.abs(o - o.conj().T).max()) > tol:
        return False
    eigs = np.linalg.eigvalsh(o)
    return (
        bool(np.all(np.abs(np.abs(eigs) - 1.0) <= tol))
        and eigs.min() < 0 < eigs.max()
    )


def stabilizer_expectations(state: MultiPartyState) -> tuple[float, ...]:
    """Expectations of the four signed GHZ correlation operators."""
    out = []
    for sign, word in GHZ_STABILIZERS:
        out.append(sign * expectation(state, [_PAULI[c] for c in word]))
    return tuple(out)


@dataclass(frozen=True)
class MerminResult:
    terms: tuple[float, float, float, float]
    mu: float


def standard_settings(n: int = 3):
    """Per party: setting 0 measures sigma_y, setting 1 measures sigma_x."""
    return ((PAULI_Y, PAULI_X),) * n


def mermin3(state, a0, a1, b0, b1, c0, c1, tol: float = 1e-12) -> MerminResult:
    """Three-party Mermin functional on dichotomic qubit settings."""
    pairs = ((a0, a1), (b0, b1), (c0, c1))
    for pair in pairs:
        for obs in pair:
            if not is_dichotomic(obs, tol):
                raise ValueError("Mermin settings must be dichotomic (+1/-1)")
    terms = tuple(
        expectation(state, [pairs[p][s] for p, s in enumerate(combo)], tol)
        for combo in MERMIN_COMBOS
    )
    mu = abs(sum(s * t for s, t in zip(MERMIN_TERM_SIGNS, terms)))
    return MerminResult(terms, mu)


def mermin_coefficients(n: int) -> dict[tuple[int, ...], Fraction]:
    """Exact coefficients of the n-party Mermin polynomial.

    Built by the recursion ``M_k = (M_{k-1} (B0 + B1) + M'_{k-1} (B0 - B1))/2``
    where the primed polynomial swaps every setting index; the base case is
    the single setting-0 observable. The returned map sends a setting string
    ``s in {0,1}^n`` to the coefficient of the product observable
    ``O_{1,s_1} x ... x O_{n,s_n}``. The whole functional is scaled by 2 at
    evaluation time so that n=3 reproduces the three-party layout above and
    n=2 is the CHSH combination.
    """
    if n < 1:
        raise ValueError("need at least one party")
    coeffs: dict[tuple[int, ...], Fraction] = {(0,): Fraction(1)}
    for _ in range(n - 1):
        support = set(coeffs) | {tuple(1 - x for x in s) for s in coeffs}
        nxt: dict[tuple[int, ...], Fraction] = {}
        for s in sorted(support):
            c = coeffs.get(s, Fraction(0))
            cp = coeffs.get(tuple(1 - x for x in s), Fraction(0))
            plus = (c + cp) / 2
            minus = (c - cp) / 2
            if plus:
                nxt[s + (0,)] = plus
            if minus:
                nxt[s + (1,)] = minus
        coeffs = nxt
    return coeffs


def mermin_n(state: MultiPartyState, settings=None, tol: float = 1e-12) -> float:
    """|value| of the scaled n-party Mermin polynomial on ``state``.

    ``settings`` gives each party its pair of dichotomic observables;
    defaults to (sigma_y, sigma_x) everywhere. For n=3 this equals
    :func:`mermin3`'s ``mu`` exactly.
    """
    n = state.n_parties
    settings = standard_settings(n) if settings is None else tuple(settings)
    if len(settings) != n:
        raise ValueError("need one setting pair per party")
    for pair in settings:
        for obs in pair:
            if not is_dichotomic(obs, tol):
                raise ValueError("Mermin settings must be dichotomic (+1/-1)")
    total = 0.0
    for s, c in mermin_coefficients(n).items():
        total += float(c) * expectation(
            state, [settings[j][s[j]] for j in range(n)], tol
        )
    return abs(2.0 * total)


def equatorial_observable(theta: float) -> np.ndarray:
    """cos(theta) sigma_y + sin(theta) sigma_x; theta=0 is the y setting."""
    return as_matrix(math.cos(theta) * PAULI_Y + math.sin(theta) * PAULI_X)


def rotated_settings(offsets):
    """Standard settings with party ``p``'s pair rotated by ``offsets[p]``."""
    return tuple(
        (equatorial_observable(d), equatorial_observable(d + math.pi / 2))
        for d in offsets
    )


def joint_outcome_distribution(state: MultiPartyState, analyzers) -> np.ndarray:
    """Probability tensor for measuring each party with its analyzer matrix.

    Row ``k`` of an analyzer is the bra of outcome ``k``, so the result has
    shape ``dims`` and sums to 1 for unitary analyzers.
    """
    analyzers = [as_matrix(m) for m in analyzers]
    if len(analyzers) != state.n_parties:
        raise ValueError("need one analyzer per party")
    psi = state.tensor_view()
    for p, m in enumerate(analyzers):
        if m.shape != (state.dims[p], state.dims[p]):
            raise ValueError("analyzer dimension mismatch")
        psi = np.moveaxis(np.tensordot(m, psi, axes=([1], [p])), 0, p)
    return np.abs(psi) ** 2


def prepare_postselected(
    networks,
    emission_amplitudes=None,
    rule=None,
    input_mode: int = 0,
):
    """Joint state of one photon per party after coincidence postselection.

    Each photon enters its party's network on ``input_mode``; the network
    column gives the amplitude over that photon's arrival bins. With a
    multi-bin emission superposition the arrival bin is emission bin plus
    path delay, and amplitudes reaching the same joint outcome add
    coherently. Outcomes failing ``rule`` (default: all bins equal) are
    discarded and the rest renormalized.

    Returns ``(state, selection_probability)``. Raises if nothing survives.
    """
    nets = list(networks)
    if not nets:
        raise ValueError("need at least one party network")
    rule = all_equal if rule is None else rule
    if emission_amplitudes is None:
        src = np.ones(1, dtype=complex)
    else:
        src = np.asarray(emission_amplitudes, dtype=complex).reshape(-1)
        norm = np.linalg.norm(src)
        if norm == 0:
            raise ValueError("emission superposition cannot be zero")
        src = src / norm
    columns = []
    for net in nets:
        u = compose(net)
        if not 0 <= input_mode < net.n_modes:
            raise ValueError("input mode outside network")
        columns.append(u[:, input_mode])
    n_emit = src.size
    dims = tuple(col.size + n_emit - 1 for col in columns)
    joint = np.zeros(dims, dtype=complex)
    for t in range(n_emit):
        padded = []
        for col, dim in zip(columns, dims):
            vec = np.zeros(dim, dtype=complex)
            vec[t : t + col.size] = col
            padded.append(vec)
        branch = padded[0]
        for vec in padded[1:]:
            branch = np.multiply.outer(branch, vec)
        joint = joint + src[t] * branch
    total = float(np.sum(np.abs(joint) ** 2))
    keep = np.zeros(dims, dtype=bool)
    for idx in np.ndindex(*dims):
        keep[idx] = bool(rule(idx))
    kept = np.where(keep, joint, 0.0)
    weight = float(np.sum(np.abs(kept) ** 2))
    if weight <= 0.0:
        raise ValueError("postselection empty")
    probability = weight / total
    labels = tuple(
        QUBIT_LABELS if d == 2 else _default_labels(d) for d in dims
    )
    state = MultiPartyState(dims, (kept / math.sqrt(weight)).reshape(-1), labels)
    return state, probability


def sample_measurement_events(
    state: MultiPartyState,
    settings=None,
    trials: int = 1000,
    seed: int = 0,
    bin_labels: tuple[str, str] = ("t0", "t1"),
) -> EventTable:
    """Simulate measurement rounds on qubits with setting-independent bins.

    Every trial draws uniform settings, samples the outcome signs from the
    quantum distribution for that setting combination, and tags all parties
    with one common random time bin; every trial is a coincidence, so the
    selection is independent of the settings by construction.
    """
    if trials < 1:
        raise ValueError("need at least one trial")
    n = state.n_parties
    if any(d != 2 for d in state.dims):
        raise ValueError("event sampling is defined for qubit states")
    settings = standard_settings(n) if settings is None else tuple(settings)
    cdfs = {}
    for combo in itertools.product((0, 1), repeat=n):
        analyzers = []
        for p, s in enumerate(combo):
            obs = as_matrix(settings[p][s])
            if not is_dichotomic(obs):
                raise ValueError("settings must be dichotomic")
            _, vecs = np.linalg.eigh(obs)  # ascending: index 0 -> sign -1
            analyzers.append(vecs.conj().T)
        probs = joint_outcome_distribution(state, analyzers).reshape(-1)
        cdfs[combo] = np.cumsum(probs)
    rng = np.random.default_rng(seed)
    setting_arr = rng.integers(0, 2, size=(trials, n), dtype=np.int8)
    uniforms = rng.random(trials)
    common_bins = rng.integers(0, 2, size=trials, dtype=np.int8)
    outcome_flat = np.zeros(trials, dtype=np.int64)
    for combo, cdf in cdfs.items():
        mask = (setting_arr == np.array(combo, dtype=np.int8)).all(axis=1)
        if mask.any():
            outcome_flat[mask] = np.searchsorted(cdf, uniforms[mask], side="right")
    outcome_flat = np.minimum(outcome_flat, 2**n - 1)
    levels = np.stack(np.unravel_index(outcome_flat, (2,) * n), axis=1)
    signs = (2 * levels - 1).astype(np.int8)
    bins = np.repeat(common_bins[:, None], n, axis=1)
    return EventTable(
        settings=setting_arr,
        bins=bins,
        signs=signs,
        selected=np.ones(trials, dtype=bool),
        bin_labels=bin_labels,
    )


def state_to_json(state: MultiPartyState) -> dict:
    """JSON form: dims, per-party labels, and the nonzero amplitudes."""
    compact = all(
        all(len(lab) == 1 for lab in party) for party in state.level_labels
    )
    sep = "" if compact else "|"
    return {
        "dims": list(state.dims),
        "level_labels": [list(p) for p in state.level_labels],
        "amplitudes": [
            [sep.join(labels), amp.real, amp.imag]
            for labels, amp in state.iter_amplitudes()
        ],
    }


def state_from_json(data: dict) -> MultiPartyState:
    dims = tuple(int(d) for d in data["dims"])
    labels = tuple(tuple(p) for p in data["level_labels"])
    amps = np.zeros(math.prod(dims), dtype=complex)
    for label_string, re, im in data["amplitudes"]:
        parts = tuple(label_string.split("|")) if "|" in label_string else tuple(label_string)
        levels = tuple(labels[p].index(lab) for p, lab in enumerate(parts))
        amps[np.ravel_multi_index(levels, dims)] = complex(re, im)
    return MultiPartyState(dims, amps, labels)
