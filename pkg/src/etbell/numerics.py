"""Minimal dense complex linear algebra shared by the optics and state modules.

Matrices are plain ``numpy`` arrays of ``complex128``; the functions here add
the validation the rest of the package leans on (finite entries, shape
discipline, unitarity checks). :class:`StateVector` pairs an amplitude vector
with basis labels so states stay self-describing when subsystems combine.

All values are immutable after construction (arrays are marked read-only)
and safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

#: Default tolerance for unitarity and normalization checks. Every matrix in
#: this package comes from closed-form entries, far from conditioning limits,
#: so a fixed default is safe; all checks accept an override.
DEFAULT_TOL = 1e-10


def as_matrix(values) -> np.ndarray:
    """Return ``values`` as a read-only, finite, 2-d complex array."""
    m = np.array(values, dtype=complex)
    if m.ndim != 2:
        raise ValueError(f"expected a matrix, got array of shape {m.shape}")
    if not np.isfinite(m).all():
        raise ValueError("matrix entries must be finite")
    m.setflags(write=False)
    return m


def matmul(a, b) -> np.ndarray:
    """Matrix product with an explicit dimension check."""
    a = as_matrix(a)
    b = as_matrix(b)
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"dimension mismatch: {a.shape} @ {b.shape}")
    out = a @ b
    out.setflags(write=False)
    return out


def tensor(a, b):
    """Kronecker product of two matrices or of two labeled state vectors.

    For :class:`StateVector` operands the basis labels concatenate pairwise
    (``"S" x "L" -> "SL"``).
    """
    if isinstance(a, StateVector) and isinstance(b, StateVector):
        labels = tuple(la + lb for la in a.labels for lb in b.labels)
        return StateVector(np.kron(a.amplitudes, b.amplitudes), labels)
    if isinstance(a, StateVector) or isinstance(b, StateVector):
        raise TypeError("tensor requires two matrices or two StateVectors")
    return as_matrix(np.kron(as_matrix(a), as_matrix(b)))


def unitarity_defect(m) -> float:
    """Largest entry of ``|m^dag m - I|``; zero for an exact unitary."""
    m = as_matrix(m)
    if m.shape[0] != m.shape[1]:
        raise ValueError("unitarity is defined for square matrices only")
    residual = m.conj().T @ m - np.eye(m.shape[0])
    return float(np.abs(residual).max())


def is_unitary(m, tol: float = DEFAULT_TOL) -> bool:
    return unitarity_defect(m) <= tol


@dataclass(frozen=True, eq=False)
class StateVector:
    """Amplitude vector over a labeled basis.

    ``labels`` defaults to ``("1", "2", ...)``. Amplitudes are stored
    read-only; ``normalize`` returns a fresh vector.
    """

    amplitudes: np.ndarray
    labels: tuple[str, ...] = ()

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=complex)
        if amps.ndim != 1 or amps.size == 0:
            raise ValueError("amplitudes must form a nonempty 1-d vector")
        if not np.isfinite(amps).all():
            raise ValueError("amplitudes must be finite")
        amps.setflags(write=False)
        labels = tuple(self.labels) or tuple(str(k + 1) for k in range(amps.size))
        if len(labels) != amps.size:
            raise ValueError("need exactly one basis label per amplitude")
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "labels", labels)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalize(self) -> "StateVector":
        n = self.norm()
        if n == 0.0:
            raise ValueError("cannot normalize the zero vector")
        return StateVector(self.amplitudes / n, self.labels)

    def inner(self, other: "StateVector") -> complex:
        """Hermitian inner product ``<self|other>``."""
        if other.dim != self.dim:
            raise ValueError("dimension mismatch in inner product")
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def allclose(self, other: "StateVector", tol: float = 1e-12) -> bool:
        return (
            self.dim == other.dim
            and float(np.abs(self.amplitudes - other.amplitudes).max()) <= tol
        )


def apply(m, state):
    """Apply a matrix to a vector, preserving labels on a StateVector."""
    m = as_matrix(m)
    if isinstance(state, StateVector):
        if m.shape[1] != state.dim:
            raise ValueError("matrix/vector dimension mismatch")
        return StateVector(m @ state.amplitudes, state.labels)
    vec = np.asarray(state, dtype=complex).reshape(-1)
    if m.shape[1] != vec.size:
        raise ValueError("matrix/vector dimension mismatch")
    return m @ vec


def matrix_to_json(m) -> dict:
    """Row-major JSON form: ``{rows, cols, entries: [[re, im], ...]}``."""
    m = as_matrix(m)
    return {
        "rows": int(m.shape[0]),
        "cols": int(m.shape[1]),
        "entries": [[float(z.real), float(z.imag)] for z in m.ravel()],
    }


def matrix_from_json(data: dict) -> np.ndarray:
    rows, cols = int(data["rows"]), int(data["cols"])
    entries = data["entries"]
    if len(entries) != rows * cols:
        raise ValueError("entry count does not match rows*cols")
    flat = np.array([complex(re, im) for re, im in entries])
    return as_matrix(flat.reshape(rows, cols))
