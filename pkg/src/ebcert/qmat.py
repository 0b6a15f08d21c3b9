"""Hermitian-operator primitives shared by every other module.

All quantum objects (states, effects, witnesses, Choi operators) are carried
by :class:`HermOp`, a validated dense complex Hermitian matrix.  Values are
immutable after construction: the wrapped arrays are marked read-only, so
instances are safe to share between threads and all operations here are pure
functions.

Inputs outside tolerance are rejected rather than silently repaired; the
symmetry tolerance is ``HERM_TOL`` and the eigenvalue floor for positivity
checks is ``PSD_FLOOR``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

HERM_TOL = 1e-12
PSD_FLOOR = 1e-9
POVM_TOL = 1e-9
# Large enough for the n-round game strategies (input 2^n, output 4^n, n <= 4).
MAX_DIM = 4096


class ValidationError(ValueError):
    """An input violates a structural invariant (Hermiticity, normalization, ...)."""


def _read_only(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, dtype=complex, order="C")
    out.setflags(write=False)
    return out


def _min_eig_above(mat: np.ndarray, floor: float) -> bool:
    """Cheap PSD-with-floor check; Cholesky shortcut for large matrices."""
    n = mat.shape[0]
    if n <= 512:
        return float(np.linalg.eigvalsh(mat)[0]) >= floor
    scale = max(1.0, abs(np.trace(mat).real) / n)
    try:
        np.linalg.cholesky(mat + (-floor) * scale * np.eye(n))
        return True
    except np.linalg.LinAlgError:
        return False


@dataclass(frozen=True)
class HermOp:
    """Finite-dimensional complex Hermitian operator."""

    mat: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.mat, dtype=complex)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ValidationError(f"operator must be square, got shape {arr.shape}")
        if not 1 <= arr.shape[0] <= MAX_DIM:
            raise ValidationError(f"dimension {arr.shape[0]} outside [1, {MAX_DIM}]")
        if np.max(np.abs(arr - arr.conj().T)) > HERM_TOL:
            raise ValidationError("matrix is not Hermitian to within 1e-12")
        object.__setattr__(self, "mat", _read_only((arr + arr.conj().T) / 2.0))

    @property
    def dim(self) -> int:
        return self.mat.shape[0]

    def trace(self) -> float:
        return float(np.trace(self.mat).real)

    def inner(self, other: "HermOp") -> float:
        """Hilbert-Schmidt inner product tr(AB); real for Hermitian A, B."""
        return float(np.tensordot(self.mat, other.mat, axes=([0, 1], [1, 0])).real)

    def expval(self, state: np.ndarray) -> float:
        v = np.asarray(state, dtype=complex).reshape(-1)
        return float((v.conj() @ self.mat @ v).real)

    def __add__(self, other: "HermOp") -> "HermOp":
        return HermOp(self.mat + other.mat)

    def __sub__(self, other: "HermOp") -> "HermOp":
        return HermOp(self.mat - other.mat)

    def __neg__(self) -> "HermOp":
        return HermOp(-self.mat)

    def __mul__(self, scalar: float) -> "HermOp":
        return HermOp(self.mat * float(scalar))

    __rmul__ = __mul__

    def is_psd(self, floor: float = PSD_FLOOR) -> bool:
        return _min_eig_above(self.mat, -floor)

    def min_eig(self) -> float:
        return float(np.linalg.eigvalsh(self.mat)[0])


@dataclass(frozen=True)
class PureState:
    """Normalized state vector; squared amplitudes sum to 1 within 1e-12."""

    amps: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.amps, dtype=complex).reshape(-1)
        if not 1 <= v.size <= MAX_DIM:
            raise ValidationError(f"state dimension {v.size} outside [1, {MAX_DIM}]")
        if abs(float(np.vdot(v, v).real) - 1.0) > 1e-12:
            raise ValidationError("state vector is not normalized to within 1e-12")
        object.__setattr__(self, "amps", _read_only(v))

    @property
    def dim(self) -> int:
        return self.amps.size

    def projector(self) -> HermOp:
        return HermOp(np.outer(self.amps, self.amps.conj()))

    def overlap(self, other: "PureState") -> complex:
        return complex(np.vdot(self.amps, other.amps))


@dataclass(frozen=True)
class Povm:
    """Positive effects summing to the identity."""

    effects: tuple[HermOp, ...]

    def __post_init__(self) -> None:
        effects = tuple(self.effects)
        if not effects:
            raise ValidationError("POVM needs at least one effect")
        d = effects[0].dim
        total = np.zeros((d, d), dtype=complex)
        for e in effects:
            if e.dim != d:
                raise ValidationError("POVM effects have mismatched dimensions")
            if not e.is_psd():
                raise ValidationError("POVM effect has eigenvalue below -1e-9")
            total = total + e.mat
        if np.max(np.abs(total - np.eye(d))) > POVM_TOL:
            raise ValidationError("POVM effects do not sum to the identity within 1e-9")
        object.__setattr__(self, "effects", effects)

    @property
    def dim(self) -> int:
        return self.effects[0].dim

    @property
    def outcomes(self) -> int:
        return len(self.effects)


@dataclass(frozen=True)
class MeasurementFamily:
    """Indexed set of POVMs on a common space, one per measurement setting."""

    povms: tuple[Povm, ...]

    def __post_init__(self) -> None:
        povms = tuple(self.povms)
        if not povms:
            raise ValidationError("measurement family needs at least one setting")
        d = povms[0].dim
        if any(p.dim != d for p in povms):
            raise ValidationError("family POVMs have mismatched dimensions")
        object.__setattr__(self, "povms", povms)

    @property
    def dim(self) -> int:
        return self.povms[0].dim

    @property
    def settings(self) -> int:
        return len(self.povms)

    @property
    def outcome_counts(self) -> tuple[int, ...]:
        return tuple(p.outcomes for p in self.povms)

    def effect(self, b: int, y: int) -> HermOp:
        return self.povms[y].effects[b]


@dataclass(frozen=True)
class Ensemble:
    """Sub-normalized states whose traces are the selection priors."""

    states: tuple[HermOp, ...]

    def __post_init__(self) -> None:
        states = tuple(self.states)
        if not states:
            raise ValidationError("ensemble needs at least one state")
        d = states[0].dim
        total = 0.0
        for s in states:
            if s.dim != d:
                raise ValidationError("ensemble states have mismatched dimensions")
            if not s.is_psd():
                raise ValidationError("ensemble state is not positive semidefinite")
            total += s.trace()
        if abs(total - 1.0) > POVM_TOL:
            raise ValidationError("ensemble traces do not sum to 1 within 1e-9")
        object.__setattr__(self, "states", states)

    @property
    def dim(self) -> int:
        return self.states[0].dim

    @property
    def size(self) -> int:
        return len(self.states)


@dataclass(frozen=True)
class ConditionalDistribution:
    """Probability table p(output | inputs); axis 0 indexes the output."""

    table: np.ndarray

    def __post_init__(self) -> None:
        t = np.asarray(self.table, dtype=float)
        if t.ndim < 1:
            raise ValidationError("distribution table needs at least the output axis")
        if np.min(t) < -1e-12:
            raise ValidationError("distribution has negative entries")
        sums = t.sum(axis=0)
        if np.max(np.abs(sums - 1.0)) > 1e-12:
            raise ValidationError("distribution does not sum to 1 over outputs")
        arr = np.array(t, dtype=float, order="C")
        arr.setflags(write=False)
        object.__setattr__(self, "table", arr)

    @property
    def outputs(self) -> int:
        return self.table.shape[0]


# ---------------------------------------------------------------------------
# Operations


def identity(d: int) -> HermOp:
    return HermOp(np.eye(d))


def zero(d: int) -> HermOp:
    return HermOp(np.zeros((d, d)))


def tensor(a: HermOp, b: HermOp) -> HermOp:
    return HermOp(np.kron(a.mat, b.mat))


def _split_dims(op: HermOp, dims: tuple[int, int]) -> tuple[int, int]:
    da, db = int(dims[0]), int(dims[1])
    if da * db != op.dim:
        raise ValidationError(f"dims {da}x{db} do not match operator dimension {op.dim}")
    return da, db


def partial_trace(op: HermOp, dims: tuple[int, int], keep: str) -> HermOp:
    """Trace out one tensor factor; ``keep`` selects the surviving factor A or B."""
    da, db = _split_dims(op, dims)
    t = op.mat.reshape(da, db, da, db)
    if keep == "A":
        return HermOp(np.einsum("aibi->ab", t))
    if keep == "B":
        return HermOp(np.einsum("iaib->ab", t))
    raise ValidationError(f"keep must be 'A' or 'B', got {keep!r}")


def partial_transpose(op: HermOp, dims: tuple[int, int], subsystem: str) -> HermOp:
    """Transpose one tensor factor in place; involutive and Hermiticity-preserving."""
    da, db = _split_dims(op, dims)
    t = op.mat.reshape(da, db, da, db)
    if subsystem == "A":
        t = t.transpose(2, 1, 0, 3)
    elif subsystem == "B":
        t = t.transpose(0, 3, 2, 1)
    else:
        raise ValidationError(f"subsystem must be 'A' or 'B', got {subsystem!r}")
    return HermOp(t.reshape(da * db, da * db))


def trace_norm(op: HermOp) -> float:
    """Sum of absolute eigenvalues."""
    return float(np.sum(np.abs(np.linalg.eigvalsh(op.mat))))


def operator_norm(op: HermOp) -> float:
    """Largest absolute eigenvalue."""
    return float(np.max(np.abs(np.linalg.eigvalsh(op.mat))))


def norm(op: HermOp, kind: str = "operator") -> float:
    if kind == "operator":
        return operator_norm(op)
    if kind == "trace":
        return trace_norm(op)
    raise ValidationError(f"unknown norm kind {kind!r}")


def eig(op: HermOp) -> tuple[np.ndarray, np.ndarray]:
    """Ascending eigenvalues and the matching orthonormal eigenvector columns."""
    vals, vecs = np.linalg.eigh(op.mat)
    return vals, vecs


def psd_sqrt(op: HermOp) -> HermOp:
    """Principal square root of a PSD operator (tiny negatives are clipped)."""
    vals, vecs = np.linalg.eigh(op.mat)
    if vals[0] < -PSD_FLOOR:
        raise ValidationError("operator is not PSD; square root undefined")
    root = vecs * np.sqrt(np.clip(vals, 0.0, None)) @ vecs.conj().T
    return HermOp(root)


# ---------------------------------------------------------------------------
# Qubit helpers

PAULI_X = HermOp(np.array([[0, 1], [1, 0]], dtype=complex))
PAULI_Y = HermOp(np.array([[0, -1j], [1j, 0]], dtype=complex))
PAULI_Z = HermOp(np.array([[1, 0], [0, -1]], dtype=complex))


def basis_state(d: int, i: int) -> PureState:
    v = np.zeros(d, dtype=complex)
    v[i] = 1.0
    return PureState(v)


def bloch_operator(r) -> HermOp:
    """r . sigma for a real 3-vector r."""
    r = np.asarray(r, dtype=float).reshape(3)
    return HermOp(r[0] * PAULI_X.mat + r[1] * PAULI_Y.mat + r[2] * PAULI_Z.mat)


def qubit_effect(bloch, weight: float = 0.5) -> HermOp:
    """Unbiased qubit effect weight*(I + r.sigma) with |r| <= 1."""
    return HermOp(weight * (np.eye(2) + bloch_operator(bloch).mat))


def bloch_of_effect(e: HermOp) -> tuple[float, np.ndarray]:
    """Decompose a qubit effect as E = c*I + (r . sigma)/2; returns (c, r).

    The unbiased dichotomic form (I + a.sigma)/2 corresponds to c = 1/2 and
    r = a; sharp effects have |r| = 1.
    """
    if e.dim != 2:
        raise ValidationError("Bloch decomposition is defined for qubit effects only")
    c = e.trace() / 2.0
    r = np.array(
        [e.inner(PAULI_X), e.inner(PAULI_Y), e.inner(PAULI_Z)],
        dtype=float,
    )
    return c, r


def projective_qubit_pair(axis_a, axis_b) -> MeasurementFamily:
    """Two binary sharp qubit measurements along the given Bloch axes."""
    povms = []
    for ax in (axis_a, axis_b):
        v = np.asarray(ax, dtype=float).reshape(3)
        n = np.linalg.norm(v)
        if n == 0:
            raise ValidationError("measurement axis must be nonzero")
        v = v / n
        povms.append(
            Povm((qubit_effect(v), qubit_effect(-v)))
        )
    return MeasurementFamily(tuple(povms))


def xz_family() -> MeasurementFamily:
    """The sharp X and Z measurements on a qubit."""
    return projective_qubit_pair((1, 0, 0), (0, 0, 1))
