"""Truncated Fock bases and bosonic operator matrices for the cascade system.

The system is three atomic modes (momentum levels m = 0, 1, 2) holding a
fixed number N of atoms, plus one cavity photon mode truncated at n_max.
Basis states are occupation tuples (n0, n1, n2, n) with n0 + n1 + n2 = N,
ordered lexicographically so that serialized matrices are reproducible
bit-for-bit across runs.

Because the atom number is fixed, a bare single-mode annihilator c_j maps
the N-atom sector to the (N-1)-atom sector; it is represented here as a
rectangular matrix between two bases (a ModeOperator).  Atom-conserving
bilinears c_i^dag c_j, the photon ladder, and the collective lowering
operator S^- = c_1^dag c_0 + eps * c_2^dag c_1 are ordinary square matrices
on one basis and are what the dynamics is built from.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

ATOMIC_SLOTS = ("0", "1", "2")
PHOTON_SLOT = "photon"

HERMITICITY_TOL = 1e-12
TRACE_TOL = 1e-12
POSITIVITY_TOL = 1e-10


class BasisError(ValueError):
    """Raised for invalid basis construction or mismatched bases."""


@dataclass(frozen=True)
class FockBasis:
    """Ordered collection of occupation tuples with a bidirectional index.

    The sector constructors (`full`, `atomic`) enforce n0+n1+n2 = N.  Reduced
    and enlarged bases (from partial traces and partial transposes) reuse the
    container without the sector constraint; for those `N` is None.
    """

    slots: tuple[str, ...]
    states: tuple[tuple[int, ...], ...]
    N: int | None = None
    n_max: int | None = None
    index: dict[tuple[int, ...], int] = field(repr=False, compare=False, default=None)

    def __post_init__(self):
        if self.index is None:
            object.__setattr__(
                self, "index", {s: i for i, s in enumerate(self.states)}
            )
        if len(self.index) != len(self.states):
            raise BasisError("basis states are not unique")

    @classmethod
    def full(cls, N: int, n_max: int) -> "FockBasis":
        """Sector basis |n0,n1,n2,n> with n0+n1+n2 = N and 0 <= n <= n_max."""
        if N < 1:
            raise BasisError(f"atom number must be >= 1, got {N}")
        if n_max < 0:
            raise BasisError(f"photon truncation must be >= 0, got {n_max}")
        states = tuple(
            a + (n,) for a in _atomic_tuples(N) for n in range(n_max + 1)
        )
        return cls(slots=ATOMIC_SLOTS + (PHOTON_SLOT,), states=states, N=N, n_max=n_max)

    @classmethod
    def atomic(cls, N: int) -> "FockBasis":
        """Sector basis |n0,n1,n2> with n0+n1+n2 = N (no photon slot)."""
        if N < 1:
            raise BasisError(f"atom number must be >= 1, got {N}")
        return cls(slots=ATOMIC_SLOTS, states=_atomic_tuples(N), N=N)

    @property
    def dim(self) -> int:
        return len(self.states)

    @property
    def has_photon(self) -> bool:
        return PHOTON_SLOT in self.slots

    def slot_position(self, slot: str | int) -> int:
        label = str(slot)
        if label not in self.slots:
            raise BasisError(f"slot {slot!r} not in basis slots {self.slots}")
        return self.slots.index(label)

    def state_index(self, state: Sequence[int]) -> int:
        key = tuple(state)
        if key not in self.index:
            raise BasisError(f"state {key} not in basis")
        return self.index[key]

    def basis_vector(self, state: Sequence[int]) -> np.ndarray:
        vec = np.zeros(self.dim, dtype=complex)
        vec[self.state_index(state)] = 1.0
        return vec

    def atomic_part(self) -> "FockBasis":
        """The atomic-only basis underlying a full (photon-carrying) basis."""
        if not self.has_photon:
            return self
        return FockBasis.atomic(self.N)

    def charges(self) -> np.ndarray:
        """Q = 2 n0 + n1 (+ n) per state; conserved by the Hamiltonian and
        only decreased by photon loss."""
        q = np.array([2 * s[0] + s[1] for s in self.states])
        if self.has_photon:
            q = q + np.array([s[self.slot_position(PHOTON_SLOT)] for s in self.states])
        return q

    def descriptor(self) -> dict:
        return {
            "N": self.N,
            "n_max": self.n_max,
            "slots": list(self.slots),
            "states": [list(s) for s in self.states],
        }

    @classmethod
    def from_descriptor(cls, desc: dict) -> "FockBasis":
        return cls(
            slots=tuple(desc["slots"]),
            states=tuple(tuple(s) for s in desc["states"]),
            N=desc.get("N"),
            n_max=desc.get("n_max"),
        )


def _atomic_tuples(N: int) -> tuple[tuple[int, int, int], ...]:
    out = []
    for n0 in range(N + 1):
        for n1 in range(N - n0 + 1):
            out.append((n0, n1, N - n0 - n1))
    return tuple(sorted(out))


@dataclass(frozen=True)
class ModeOperator:
    """A linear map between two Fock bases (rectangular in general).

    For the photon mode, source and target coincide.  For an atomic mode the
    annihilator maps the N-atom sector onto the (N-1)-atom sector.
    """

    matrix: np.ndarray
    source: FockBasis
    target: FockBasis

    def dag(self) -> "ModeOperator":
        return ModeOperator(self.matrix.conj().T, source=self.target, target=self.source)

    def __matmul__(self, other: "ModeOperator") -> "ModeOperator":
        if other.target is not self.source and other.target != self.source:
            raise BasisError("mode operator composition: bases do not match")
        return ModeOperator(self.matrix @ other.matrix, source=other.source, target=self.target)

    def apply(self, vec: np.ndarray) -> np.ndarray:
        return self.matrix @ vec


@dataclass
class DensityMatrix:
    """Hermitian unit-trace positive operator on a FockBasis."""

    matrix: np.ndarray
    basis: FockBasis

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=complex)
        if self.matrix.shape != (self.basis.dim, self.basis.dim):
            raise BasisError(
                f"matrix shape {self.matrix.shape} does not match basis dim {self.basis.dim}"
            )

    @classmethod
    def pure(cls, vec: np.ndarray, basis: FockBasis) -> "DensityMatrix":
        vec = np.asarray(vec, dtype=complex)
        return cls(np.outer(vec, vec.conj()), basis)

    @classmethod
    def fock_state(cls, state: Sequence[int], basis: FockBasis) -> "DensityMatrix":
        return cls.pure(basis.basis_vector(state), basis)

    def validate(
        self,
        hermiticity_tol: float = HERMITICITY_TOL,
        trace_tol: float = TRACE_TOL,
        positivity_tol: float = POSITIVITY_TOL,
    ) -> None:
        herm = np.max(np.abs(self.matrix - self.matrix.conj().T))
        if herm > hermiticity_tol:
            raise ValueError(f"not Hermitian: max asymmetry {herm:.3e}")
        tr = abs(np.trace(self.matrix) - 1.0)
        if tr > trace_tol:
            raise ValueError(f"trace deviates from 1 by {tr:.3e}")
        lo = float(np.linalg.eigvalsh(self.matrix).min())
        if lo < -positivity_tol:
            raise ValueError(f"negative eigenvalue {lo:.3e}")

    def trace(self) -> float:
        return float(np.real(np.trace(self.matrix)))

    def purity(self) -> float:
        return float(np.real(np.trace(self.matrix @ self.matrix)))

    def expectation(self, op: np.ndarray) -> float:
        return float(np.real(np.trace(op @ self.matrix)))


# ---------------------------------------------------------------------------
# operator construction
# ---------------------------------------------------------------------------

def build_basis(N: int, n_max: int) -> FockBasis:
    """Full sector basis including the photon slot; see FockBasis.full."""
    return FockBasis.full(N, n_max)


def mode_annihilator(basis: FockBasis, mode: str | int) -> ModeOperator:
    """Single-mode annihilator with matrix element sqrt(m) on its slot.

    Photon mode: square matrix on `basis` (truncated at n_max).  Atomic mode
    j: rectangular map onto the companion basis with one atom fewer.
    """
    pos = basis.slot_position(mode)
    label = basis.slots[pos]
    if label == PHOTON_SLOT:
        mat = np.zeros((basis.dim, basis.dim), dtype=complex)
        for col, s in enumerate(basis.states):
            n = s[pos]
            if n > 0:
                t = s[:pos] + (n - 1,) + s[pos + 1:]
                mat[basis.state_index(t), col] = math.sqrt(n)
        return ModeOperator(mat, source=basis, target=basis)
    if basis.N is None:
        raise BasisError("atomic annihilator needs a sector basis (fixed N)")
    if basis.N == 1 and not basis.has_photon:
        target = FockBasis(slots=ATOMIC_SLOTS, states=((0, 0, 0),), N=0)
    elif basis.N == 1:
        target = FockBasis(
            slots=basis.slots,
            states=tuple((0, 0, 0, n) for n in range(basis.n_max + 1)),
            N=0,
            n_max=basis.n_max,
        )
    elif basis.has_photon:
        target = FockBasis.full(basis.N - 1, basis.n_max)
    else:
        target = FockBasis.atomic(basis.N - 1)
    mat = np.zeros((target.dim, basis.dim), dtype=complex)
    for col, s in enumerate(basis.states):
        m = s[pos]
        if m > 0:
            t = s[:pos] + (m - 1,) + s[pos + 1:]
            mat[target.state_index(t), col] = math.sqrt(m)
    return ModeOperator(mat, source=basis, target=target)


def transition_operator(basis: FockBasis, i: int, j: int) -> np.ndarray:
    """Atom-conserving bilinear c_i^dag c_j as a square matrix on `basis`.

    On the sector bases the target tuple always exists; on truncated product
    bases transitions that would leave the basis are clipped (standard
    truncated-ladder convention).
    """
    pi = basis.slot_position(i)
    pj = basis.slot_position(j)
    mat = np.zeros((basis.dim, basis.dim), dtype=complex)
    for col, s in enumerate(basis.states):
        if s[pj] == 0:
            continue
        amp = math.sqrt(s[pj])
        t = list(s)
        t[pj] -= 1
        amp *= math.sqrt(t[pi] + 1)
        t[pi] += 1
        row = basis.index.get(tuple(t))
        if row is not None:
            mat[row, col] = amp
    return mat


def number_operator(basis: FockBasis, slot: str | int) -> np.ndarray:
    pos = basis.slot_position(slot)
    return np.diag([float(s[pos]) for s in basis.states]).astype(complex)


def collective_lowering(basis: FockBasis, epsilon: float) -> np.ndarray:
    """S^- = c_1^dag c_0 + eps * c_2^dag c_1 (moves atoms down the cascade)."""
    return transition_operator(basis, 1, 0) + epsilon * transition_operator(basis, 2, 1)


def charge_operator(basis: FockBasis) -> np.ndarray:
    """Diagonal matrix of Q = 2 n0 + n1 (+ n)."""
    return np.diag(basis.charges().astype(float)).astype(complex)


def embed_with_vacuum(vec: np.ndarray, atomic_basis: FockBasis, full_basis: FockBasis) -> np.ndarray:
    """Embed an atomic state vector as |psi> (x) |0 photons> in the full basis."""
    if full_basis.N != atomic_basis.N:
        raise BasisError("atom numbers differ between bases")
    out = np.zeros(full_basis.dim, dtype=complex)
    for s, amp in zip(atomic_basis.states, vec):
        if amp != 0:
            out[full_basis.state_index(s + (0,))] = amp
    return out


# ---------------------------------------------------------------------------
# partial trace / partial transpose
# ---------------------------------------------------------------------------

def partial_trace(rho: DensityMatrix, keep: Iterable[str | int]) -> DensityMatrix:
    """Trace out all slots not in `keep`; trace is preserved exactly.

    The result lives on a reduced basis whose states are the kept sub-tuples
    actually occurring, in sorted order.
    """
    keep_labels = [str(k) for k in keep]
    if not keep_labels:
        raise BasisError("keep set must not be empty")
    basis = rho.basis
    keep_pos = [basis.slot_position(k) for k in keep_labels]
    keep_pos_sorted = sorted(keep_pos)
    drop_pos = [p for p in range(len(basis.slots)) if p not in keep_pos_sorted]

    def split(state):
        kept = tuple(state[p] for p in keep_pos_sorted)
        dropped = tuple(state[p] for p in drop_pos)
        return kept, dropped

    kept_states = tuple(sorted({split(s)[0] for s in basis.states}))
    reduced = FockBasis(
        slots=tuple(basis.slots[p] for p in keep_pos_sorted),
        states=kept_states,
        N=basis.N if all(basis.slots[p] in ATOMIC_SLOTS for p in keep_pos_sorted)
        and len(keep_pos_sorted) == 3 else None,
        n_max=basis.n_max if any(basis.slots[p] == PHOTON_SLOT for p in keep_pos_sorted) else None,
    )
    out = np.zeros((reduced.dim, reduced.dim), dtype=complex)
    splits = [split(s) for s in basis.states]
    for i, (ki, di) in enumerate(splits):
        for j, (kj, dj) in enumerate(splits):
            if di == dj:
                out[reduced.state_index(ki), reduced.state_index(kj)] += rho.matrix[i, j]
    return DensityMatrix(out, reduced)


def partial_transpose(rho: DensityMatrix, slot: str | int) -> tuple[np.ndarray, FockBasis]:
    """Partial transpose on one atomic mode, done index-wise on tuple pairs.

    On the atom-number-constrained basis the transposed operator is supported
    outside the sector, so the result is returned on an enlarged basis that
    closes the swapped tuples.  Hermiticity and trace are preserved; for
    entangled states the output may have negative eigenvalues.
    """
    basis = rho.basis
    pos = basis.slot_position(slot)
    if basis.has_photon:
        raise BasisError("partial transpose expects an atomic-only state")

    def swapped(a, b):
        t = list(a)
        t[pos] = b[pos]
        return tuple(t)

    enlarged_states = tuple(
        sorted({swapped(a, b) for a in basis.states for b in basis.states})
    )
    enlarged = FockBasis(slots=basis.slots, states=enlarged_states)
    out = np.zeros((enlarged.dim, enlarged.dim), dtype=complex)
    for i, a in enumerate(basis.states):
        for j, b in enumerate(basis.states):
            out[enlarged.state_index(swapped(a, b)), enlarged.state_index(swapped(b, a))] = \
                rho.matrix[i, j]
    return out, enlarged


# ---------------------------------------------------------------------------
# JSON serialization
# ---------------------------------------------------------------------------

def matrix_to_json(matrix: np.ndarray, basis: FockBasis, kind: str = "operator") -> dict:
    """Serializable record: basis descriptor + row-major [re, im] entries."""
    mat = np.asarray(matrix, dtype=complex)
    return {
        "kind": kind,
        "basis": basis.descriptor(),
        "entries": [[[float(z.real), float(z.imag)] for z in row] for row in mat],
    }


def matrix_from_json(obj: dict) -> tuple[np.ndarray, FockBasis]:
    basis = FockBasis.from_descriptor(obj["basis"])
    mat = np.array(
        [[complex(re, im) for re, im in row] for row in obj["entries"]], dtype=complex
    )
    if mat.shape != (basis.dim, basis.dim):
        raise BasisError("entry block does not match basis dimension")
    return mat, basis


def save_matrix(path, matrix: np.ndarray, basis: FockBasis, kind: str = "operator") -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(matrix_to_json(matrix, basis, kind), fh)


def load_matrix(path) -> tuple[np.ndarray, FockBasis]:
    with open(path, encoding="utf-8") as fh:
        return matrix_from_json(json.load(fh))
