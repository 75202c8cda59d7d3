"""Beam-splitter / phase-shifter networks, DFT analyzers, and the triangular
mesh decomposition of unitaries.

Conventions
-----------
A beam splitter with reflectivity ``R`` and phase ``phi`` on modes ``(i, j)``
acts as the identity outside the 2x2 block (rows/columns ``i``, ``j``)::

    [[sqrt(1-R),   exp(i*phi)*sqrt(R)  ],
     [sqrt(R),    -exp(i*phi)*sqrt(1-R)]]

so both output amplitudes derive from the single ``R`` and energy is
conserved by construction. A phase shifter multiplies one mode by
``exp(i*phase)``. Network elements are listed in propagation order, i.e.
``compose([e1, e2, e3]) == U(e3) @ U(e2) @ U(e1)``.

With this sign convention the three-mode analyzer cascade (50/50, R=1/3,
50/50) at phases ``(alpha, beta, gamma) = (pi/3, pi/3, -pi/6)`` composes to
the 3-mode discrete Fourier transform.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .numerics import DEFAULT_TOL, StateVector, as_matrix, is_unitary

BEAM_SPLITTER = "beam_splitter"
PHASE_SHIFTER = "phase_shifter"

#: Cascade phases at which the qutrit analyzer equals the 3-mode DFT.
DFT3_ALPHA = math.pi / 3
DFT3_BETA = math.pi / 3
DFT3_GAMMA = -math.pi / 6


@dataclass(frozen=True)
class OpticalElement:
    kind: str
    modes: tuple[int, ...]
    reflectivity: float = 0.0
    phase: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "modes", tuple(int(m) for m in self.modes))
        if any(m < 0 for m in self.modes):
            raise ValueError("mode indices must be nonnegative")
        if self.kind == BEAM_SPLITTER:
            if len(self.modes) != 2 or self.modes[0] == self.modes[1]:
                raise ValueError("beam splitter needs two distinct modes")
            if not 0.0 <= self.reflectivity <= 1.0:
                raise ValueError("reflectivity must lie in [0, 1]")
        elif self.kind == PHASE_SHIFTER:
            if len(self.modes) != 1:
                raise ValueError("phase shifter acts on exactly one mode")
        else:
            raise ValueError(f"unknown element kind {self.kind!r}")


def beam_splitter(i: int, j: int, reflectivity: float, phase: float = 0.0) -> OpticalElement:
    return OpticalElement(BEAM_SPLITTER, (i, j), reflectivity, phase)


def phase_shifter(mode: int, phase: float) -> OpticalElement:
    return OpticalElement(PHASE_SHIFTER, (mode,), 0.0, phase)


@dataclass(frozen=True)
class InterferometerNetwork:
    n_modes: int
    elements: tuple[OpticalElement, ...] = ()

    def __post_init__(self):
        if self.n_modes < 1:
            raise ValueError("network needs at least one mode")
        object.__setattr__(self, "elements", tuple(self.elements))
        for el in self.elements:
            if max(el.modes) >= self.n_modes:
                raise ValueError(
                    f"element on modes {el.modes} exceeds n_modes={self.n_modes}"
                )


def bs_unitary(reflectivity: float, phase: float, modes: tuple[int, int], n: int) -> np.ndarray:
    """n-mode unitary of a single beam splitter on ``modes``."""
    i, j = modes
    if i == j:
        raise ValueError("beam splitter needs two distinct modes")
    if not 0.0 <= reflectivity <= 1.0:
        raise ValueError("reflectivity must lie in [0, 1]")
    if max(i, j) >= n or min(i, j) < 0:
        raise ValueError("mode index out of range")
    t = math.sqrt(1.0 - reflectivity)
    r = math.sqrt(reflectivity)
    ph = np.exp(1j * phase)
    m = np.eye(n, dtype=complex)
    m[i, i] = t
    m[i, j] = ph * r
    m[j, i] = r
    m[j, j] = -ph * t
    m.setflags(write=False)
    return m


def phase_unitary(phase: float, mode: int, n: int) -> np.ndarray:
    if not 0 <= mode < n:
        raise ValueError("mode index out of range")
    m = np.eye(n, dtype=complex)
    m[mode, mode] = np.exp(1j * phase)
    m.setflags(write=False)
    return m


def element_unitary(element: OpticalElement, n: int) -> np.ndarray:
    if element.kind == BEAM_SPLITTER:
        return bs_unitary(element.reflectivity, element.phase, element.modes, n)
    return phase_unitary(element.phase, element.modes[0], n)


def compose(network: InterferometerNetwork) -> np.ndarray:
    """Total unitary of the network (elements applied in propagation order)."""
    u = np.eye(network.n_modes, dtype=complex)
    for el in network.elements:
        u = element_unitary(el, network.n_modes) @ u
    u.setflags(write=False)
    return u


def qutrit_analyzer_network(
    alpha: float = DFT3_ALPHA,
    beta: float = DFT3_BETA,
    gamma: float = DFT3_GAMMA,
    phi2: float = 0.0,
    phi3: float = 0.0,
) -> InterferometerNetwork:
    """Three-mode measurement cascade with measurement phases on the inputs.

    Two input phase shifters (``-phi2`` on mode 1, ``-phi3`` on mode 2) feed
    the splitter chain 50/50 on (1,2), R=1/3 on (0,2), 50/50 on (0,1).
    """
    elements = (
        phase_shifter(1, -phi2),
        phase_shifter(2, -phi3),
        beam_splitter(1, 2, 0.5, alpha),
        beam_splitter(0, 2, 1.0 / 3.0, beta),
        beam_splitter(0, 1, 0.5, gamma),
    )
    return InterferometerNetwork(3, elements)


def qutrit_analyzer(
    alpha: float = DFT3_ALPHA,
    beta: float = DFT3_BETA,
    gamma: float = DFT3_GAMMA,
    phi2: float = 0.0,
    phi3: float = 0.0,
) -> np.ndarray:
    """Composed unitary of :func:`qutrit_analyzer_network`.

    At the default cascade phases this is the 3-mode DFT with the columns
    2 and 3 multiplied by ``exp(-i*phi2)`` and ``exp(-i*phi3)``.
    """
    return compose(qutrit_analyzer_network(alpha, beta, gamma, phi2, phi3))


def dft_unitary(n: int) -> np.ndarray:
    """N-mode discrete Fourier transform, entries ``w^(jk)/sqrt(N)``."""
    if n < 2:
        raise ValueError("DFT needs dimension >= 2")
    k = np.arange(n)
    m = np.exp(2j * math.pi / n * np.outer(k, k)) / math.sqrt(n)
    m.setflags(write=False)
    return m


def analyzer_matrix(n: int, phis) -> np.ndarray:
    """DFT analyzer with measurement phases ``phis = (phi_2, ..., phi_N)``.

    Column ``j >= 2`` of the DFT is multiplied by ``exp(-i*phi_j)``; the
    first measurement phase is fixed to zero.
    """
    phis = np.asarray(phis, dtype=float).reshape(-1)
    if phis.size != n - 1:
        raise ValueError(f"need {n - 1} phases for dimension {n}, got {phis.size}")
    col_phase = np.exp(-1j * np.concatenate(([0.0], phis)))
    m = dft_unitary(n) * col_phase[None, :]
    m.setflags(write=False)
    return m


def measurement_basis(n: int, phis) -> list[StateVector]:
    """Orthonormal basis projected onto by the DFT analyzer.

    Vector ``k`` has components ``conj(w)^((k-1)(j-1)) exp(i*phi_j)/sqrt(N)``
    on level ``j``, i.e. the conjugated rows of :func:`analyzer_matrix`.
    """
    m = analyzer_matrix(n, phis)
    labels = tuple(str(j + 1) for j in range(n))
    return [StateVector(m[k].conj(), labels) for k in range(n)]


def generation_cascade(n: int) -> InterferometerNetwork:
    """Chain of ``n - 1`` splitters dividing one input into n equal outputs.

    Splitter ``k`` (k = 1..n-1) taps mode ``k`` off the carried beam on
    mode 0 with reflectivity ``1/(n - k + 1)``, so every output carries
    amplitude of modulus ``1/sqrt(n)``.
    """
    if n < 2:
        raise ValueError("cascade needs at least two outputs")
    elements = tuple(
        beam_splitter(0, k, 1.0 / (n - k + 1)) for k in range(1, n)
    )
    return InterferometerNetwork(n, elements)


@dataclass(frozen=True, eq=False)
class ReckDecomposition:
    """Triangular mesh realizing a unitary up to per-mode output phases.

    ``reconstruct()`` returns ``diag(exp(i*residual_phases)) @ compose(network)``,
    which matches the decomposed matrix.
    """

    network: InterferometerNetwork
    residual_phases: np.ndarray

    def __post_init__(self):
        phases = np.array(self.residual_phases, dtype=float).reshape(-1)
        phases.setflags(write=False)
        object.__setattr__(self, "residual_phases", phases)

    def residual_diagonal(self) -> np.ndarray:
        return np.diag(np.exp(1j * self.residual_phases))

    def reconstruct(self) -> np.ndarray:
        return self.residual_diagonal() @ compose(self.network)


def reck_decompose(u, tol: float = DEFAULT_TOL) -> ReckDecomposition:
    """Factor a unitary into a triangular beam-splitter/phase-shifter mesh.

    Entries above the diagonal are nulled row by row with Givens-style
    two-mode stages (an input phase shifter followed by a zero-phase beam
    splitter); what remains is a diagonal of unit-modulus residual phases,
    reported rather than forced to zero. The identity decomposes into an
    empty network.
    """
    u = as_matrix(u)
    if u.shape[0] != u.shape[1]:
        raise ValueError("can only decompose square matrices")
    if not is_unitary(u, tol):
        raise ValueError("input matrix is not unitary within tolerance")
    n = u.shape[0]
    w = np.array(u)
    elements: list[OpticalElement] = []
    for i in range(n - 1):
        for j in range(n - 2, i - 1, -1):
            a = w[i, j]
            b = w[i, j + 1]
            if b == 0:
                continue
            psi = float(np.angle(b) - np.angle(a))
            h = math.hypot(abs(a), abs(b))
            t = abs(a) / h
            r = abs(b) / h
            w[:, j + 1] *= np.exp(-1j * psi)
            cj = w[:, j].copy()
            ck = w[:, j + 1].copy()
            w[:, j] = cj * t + ck * r
            w[:, j + 1] = cj * r - ck * t
            w[i, j + 1] = 0.0
            if psi != 0.0:
                elements.append(phase_shifter(j + 1, psi))
            elements.append(beam_splitter(j, j + 1, r * r))
    phases = np.angle(np.diag(w))
    return ReckDecomposition(InterferometerNetwork(n, tuple(elements)), phases)


def element_to_json(element: OpticalElement) -> dict:
    item: dict = {"kind": element.kind, "modes": list(element.modes), "phase": element.phase}
    if element.kind == BEAM_SPLITTER:
        item["R"] = element.reflectivity
    return item


def element_from_json(data: dict) -> OpticalElement:
    return OpticalElement(
        data["kind"],
        tuple(data["modes"]),
        float(data.get("R", 0.0)),
        float(data.get("phase", 0.0)),
    )


def network_to_json(network: InterferometerNetwork) -> dict:
    return {
        "n_modes": network.n_modes,
        "elements": [element_to_json(el) for el in network.elements],
    }


def network_from_json(data: dict) -> InterferometerNetwork:
    return InterferometerNetwork(
        int(data["n_modes"]),
        tuple(element_from_json(el) for el in data["elements"]),
    )
