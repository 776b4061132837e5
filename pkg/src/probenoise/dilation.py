"""Indirect-measurement unitaries and the POVMs they induce.

A unitary on ``C^{N+1} (probe) x C^d (system)`` is stored as the
``(N+1)d x (N+1)d`` block matrix whose block ``(i, j)`` is the system
operator ``U_ij``, i.e. the probe index is the outer (slow) index. With the
probe prepared in ``beta`` and measured in its computational basis, outcome
``i`` has effect

    A_i^beta = sum_{c,k} beta_ck U_ik^* U_ic .
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import DEFAULT
from .errors import BadParameter, DimensionMismatch, InvalidPovm, NonUnitaryParam, NotUnitary
from .linalg import complete_isometry, dag, hermitian_sqrt, is_unitary, max_abs
from .povm import Povm, QuantumState, check_density


@dataclass(frozen=True, eq=False)
class BlockUnitary:
    matrix: np.ndarray
    d: int

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] % self.d:
            raise DimensionMismatch(f"matrix of shape {m.shape} is not a block matrix with {self.d}x{self.d} blocks")
        if not is_unitary(m, DEFAULT.unitary):
            raise NotUnitary(f"unitarity defect {max_abs(dag(m) @ m - np.eye(m.shape[0])):.3e}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def levels(self) -> int:
        """Number of probe levels N+1."""
        return self.matrix.shape[0] // self.d

    def block(self, i: int, j: int) -> np.ndarray:
        d = self.d
        return self.matrix[i * d:(i + 1) * d, j * d:(j + 1) * d]

    @property
    def blocks(self) -> np.ndarray:
        """Array of shape (N+1, N+1, d, d) with ``blocks[i, j] = U_ij``."""
        n, d = self.levels, self.d
        return self.matrix.reshape(n, d, n, d).transpose(0, 2, 1, 3)

    @classmethod
    def from_blocks(cls, blocks) -> "BlockUnitary":
        b = np.asarray(blocks, dtype=complex)
        n, _, d, _ = b.shape
        return cls(b.transpose(0, 2, 1, 3).reshape(n * d, n * d), d)


@dataclass(frozen=True, eq=False)
class TwoOutcomeDilationParams:
    """The three unitaries ``(V, W, Z)`` parameterising the two-outcome dilations."""

    v: np.ndarray
    w: np.ndarray
    z: np.ndarray

    def __post_init__(self):
        for name in ("v", "w", "z"):
            m = np.asarray(getattr(self, name), dtype=complex)
            if not is_unitary(m, 1e-10):
                raise NonUnitaryParam(f"{name.upper()} is not unitary")
            object.__setattr__(self, name, m)

    @classmethod
    def identity(cls, d: int) -> "TwoOutcomeDilationParams":
        return cls(np.eye(d), np.eye(d), np.eye(d))


def _require_povm(povm) -> Povm:
    if isinstance(povm, Povm):
        return povm
    try:
        return Povm(povm)
    except InvalidPovm:
        raise
    except ValueError as exc:
        raise InvalidPovm(str(exc)) from exc


def build_two_outcome_unitary(a0, a1, params: TwoOutcomeDilationParams | None = None) -> BlockUnitary:
    """Assemble ``[[V sqrt(A0), V sqrt(A1) Z^*], [W sqrt(A1), -W sqrt(A0) Z^*]]``."""
    povm = _require_povm([a0, a1])
    d = povm.dim
    if params is None:
        params = TwoOutcomeDilationParams.identity(d)
    if params.v.shape != (d, d):
        raise DimensionMismatch(f"dilation parameters are {params.v.shape[0]}-dimensional, POVM is {d}-dimensional")
    s0, s1 = hermitian_sqrt(povm[0]), hermitian_sqrt(povm[1])
    v, w, zs = params.v, params.w, dag(params.z)
    return BlockUnitary(np.block([[v @ s0, v @ s1 @ zs], [w @ s1, -w @ s0 @ zs]]), d)


def membership_check(u: BlockUnitary, povm: Povm, tol: float = 1e-9) -> bool:
    """Whether ``U_{i0}^* U_{i0} = A_i`` for every outcome ``i``."""
    if u.d != povm.dim or u.levels != povm.n_outcomes:
        raise DimensionMismatch(
            f"unitary has {u.levels} blocks of size {u.d}, POVM has {povm.n_outcomes} effects on C^{povm.dim}"
        )
    col = u.blocks[:, 0]
    return max_abs(dag(col) @ col - povm.effects) <= tol


def complete_dilation(povm: Povm, seed: int | None = None) -> BlockUnitary:
    """A unitary whose first block column is ``(sqrt(A_0), ..., sqrt(A_N))``."""
    povm = _require_povm(povm)
    col = np.vstack([hermitian_sqrt(e) for e in povm])
    return BlockUnitary(complete_isometry(col, seed=seed), povm.dim)


def induced_povm(u: BlockUnitary) -> Povm:
    col = u.blocks[:, 0]
    return Povm(dag(col) @ col)


@dataclass(frozen=True, eq=False)
class ProbeState:
    matrix: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "matrix", check_density(self.matrix))

    @property
    def levels(self) -> int:
        return self.matrix.shape[0]

    @property
    def beta00(self) -> float:
        return float(self.matrix[0, 0].real)


def probe_state(kind: str, t=None, levels: int = 2) -> ProbeState:
    """Named probe states.

    ``basis``          |0><0| on ``levels`` levels
    ``probabilistic``  (1-t)|0><0| + t|1><1|
    ``cat``            |l_t><l_t| with |l_t> = sqrt(1-t)|0> + sqrt(t)|1>
    ``custom``         ``t`` is the density matrix itself
    """
    if kind == "custom":
        if t is None:
            raise BadParameter("custom probe needs a density matrix")
        return ProbeState(t)
    if kind == "basis":
        m = np.zeros((levels, levels), dtype=complex)
        m[0, 0] = 1.0
        return ProbeState(m)
    if kind not in ("probabilistic", "cat"):
        raise BadParameter(f"unknown probe kind {kind!r}")
    if t is None or not 0.0 <= float(t) <= 1.0:
        raise BadParameter(f"probe parameter t={t} outside [0, 1]")
    t = float(t)
    if kind == "probabilistic":
        return ProbeState(np.diag([1.0 - t, t]).astype(complex))
    lam = np.array([np.sqrt(1.0 - t), np.sqrt(t)], dtype=complex)
    return ProbeState(np.outer(lam, lam.conj()))


def _as_probe(beta) -> ProbeState:
    return beta if isinstance(beta, ProbeState) else ProbeState(beta)


def effective_effects(blocks: np.ndarray, beta: np.ndarray) -> np.ndarray:
    """Batched ``A_i^beta``; ``blocks`` has shape (..., n, n, d, d), result (..., n, d, d)."""
    # A_i[a, y] = sum_{c,k,x} beta[c, k] conj(U_ik[x, a]) U_ic[x, y]
    return np.einsum("ck,...ikxa,...icxy->...iay", beta, blocks.conj(), blocks, optimize=True)


def effective_noisy_povm(u: BlockUnitary, beta) -> Povm:
    beta = _as_probe(beta)
    if beta.levels != u.levels:
        raise DimensionMismatch(f"probe has {beta.levels} levels, unitary has {u.levels} blocks")
    return Povm(effective_effects(u.blocks, beta.matrix))


def outcome_probabilities(u: BlockUnitary, state: QuantumState, beta) -> np.ndarray:
    """Probe outcome distribution from the full evolution ``U (beta x rho) U^*``."""
    beta = _as_probe(beta)
    if state.dim != u.d or beta.levels != u.levels:
        raise DimensionMismatch("state or probe does not match the unitary")
    big = u.matrix @ np.kron(beta.matrix, state.matrix) @ dag(u.matrix)
    d = u.d
    return np.array([np.trace(big[i * d:(i + 1) * d, i * d:(i + 1) * d]).real for i in range(u.levels)])
