"""POVMs, joint POVMs, noise models and the Born rule."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import DEFAULT
from .errors import (
    DimensionMismatch,
    EffectNotPSD,
    InvalidDensityMatrix,
    InvalidJoint,
    LevelOutOfRange,
    NotHermitian,
    NotQubit,
    NotUnbiased,
    PhysicalNeedsTwoPlusOutcomes,
    SumNotIdentity,
)
from .linalg import dag, hermitian_defect, hermitian_sqrt, max_abs

NOISE_KINDS = ("uniform", "depolarizing", "physical")


def _as_stack(effects) -> np.ndarray:
    try:
        arr = np.array([np.asarray(e, dtype=complex) for e in effects])
    except ValueError as exc:
        raise DimensionMismatch(f"effects have inconsistent shapes: {exc}") from None
    if arr.ndim != 3 or arr.shape[0] == 0 or arr.shape[1] != arr.shape[2]:
        raise DimensionMismatch(f"expected a nonempty list of square matrices, got shape {arr.shape}")
    return arr


@dataclass(frozen=True, eq=False)
class Povm:
    """An ordered tuple of PSD effects on C^d summing to the identity.

    Construction validates the effects; use :func:`validate_povm` to choose
    the tolerance explicitly.
    """

    effects: np.ndarray
    tol: float = field(default=DEFAULT.povm, repr=False)

    def __post_init__(self):
        arr = _as_stack(self.effects)
        for i, e in enumerate(arr):
            if hermitian_defect(e) > self.tol:
                raise NotHermitian(f"effect {i} is not Hermitian (defect {hermitian_defect(e):.3e})")
        arr = (arr + dag(arr)) / 2
        for i, e in enumerate(arr):
            w = np.linalg.eigvalsh(e)[0]
            if w < -self.tol:
                raise EffectNotPSD(i, w)
        dev = max_abs(arr.sum(axis=0) - np.eye(arr.shape[1]))
        if dev > self.tol:
            raise SumNotIdentity(dev)
        arr.setflags(write=False)
        object.__setattr__(self, "effects", arr)

    @property
    def dim(self) -> int:
        return self.effects.shape[1]

    @property
    def n_outcomes(self) -> int:
        return self.effects.shape[0]

    def __len__(self):
        return self.n_outcomes

    def __getitem__(self, i):
        return self.effects[i]

    def __iter__(self):
        return iter(self.effects)

    def traces(self) -> np.ndarray:
        return np.trace(self.effects, axis1=1, axis2=2).real

    def allclose(self, other: "Povm", tol: float = 1e-9) -> bool:
        return self.effects.shape == other.effects.shape and max_abs(self.effects - other.effects) <= tol


def validate_povm(effects, tol: float = DEFAULT.povm) -> Povm:
    return Povm(effects, tol=tol)


@dataclass(frozen=True, eq=False)
class JointPovm:
    """Grid ``C[i, j]`` of effects whose row sums and column sums are two POVMs."""

    grid: np.ndarray
    psd_tol: float = field(default=DEFAULT.joint_psd, repr=False)
    sum_tol: float = field(default=DEFAULT.joint_sum, repr=False)

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=complex)
        if g.ndim != 4 or g.shape[2] != g.shape[3]:
            raise DimensionMismatch(f"joint grid must have shape (Na, Nb, d, d), got {g.shape}")
        g = (g + dag(g)) / 2
        na, nb = g.shape[:2]
        for i in range(na):
            for j in range(nb):
                w = np.linalg.eigvalsh(g[i, j])[0]
                if w < -self.psd_tol:
                    raise InvalidJoint(f"C[{i},{j}] has eigenvalue {w:.3e}")
        dev = max_abs(g.sum(axis=(0, 1)) - np.eye(g.shape[2]))
        if dev > self.sum_tol:
            raise InvalidJoint(f"joint effects sum to identity only within {dev:.3e}")
        g.setflags(write=False)
        object.__setattr__(self, "grid", g)

    @property
    def dim(self) -> int:
        return self.grid.shape[2]

    @property
    def shape(self) -> tuple[int, int]:
        return self.grid.shape[:2]

    def marginals(self) -> tuple[np.ndarray, np.ndarray]:
        return self.grid.sum(axis=1), self.grid.sum(axis=0)


@dataclass(frozen=True)
class NoiseModel:
    """Which trivial POVM is mixed in by :func:`apply_noise`.

    ``uniform``       t_i = 1/n
    ``depolarizing``  t_i = Tr A_i / d
    ``physical``      t_i = (1 - Tr A_i / d) / (n - 1)

    For two outcomes the physical weights are the swapped traces
    ``Tr A_{1-i} / d``.
    """

    kind: str

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ValueError(f"unknown noise model {self.kind!r}; expected one of {NOISE_KINDS}")

    def weights(self, povm: Povm) -> np.ndarray:
        n = povm.n_outcomes
        if self.kind == "uniform":
            return np.full(n, 1.0 / n)
        tr = povm.traces() / povm.dim
        if self.kind == "depolarizing":
            return tr
        if n < 2:
            raise PhysicalNeedsTwoPlusOutcomes("the physical noise model needs at least two outcomes")
        return (1.0 - tr) / (n - 1)

    def __str__(self):
        return self.kind


def as_model(model) -> NoiseModel:
    return model if isinstance(model, NoiseModel) else NoiseModel(str(model))


def trivial_povm(weights, d: int) -> Povm:
    return Povm([w * np.eye(d) for w in weights])


def apply_noise(povm: Povm, model, level: float) -> Povm:
    """Mix ``povm`` with the model's trivial POVM: ``level * A_i + (1 - level) * t_i * I``.

    ``level`` is the weight kept on the original POVM (the probe's
    ``beta_00`` for the physical model); the amount of noise is ``1 - level``.
    """
    model = as_model(model)
    if not 0.0 <= level <= 1.0:
        raise LevelOutOfRange(f"noise level {level} outside [0, 1]")
    t = model.weights(povm)
    eye = np.eye(povm.dim)
    return Povm(level * povm.effects + (1.0 - level) * t[:, None, None] * eye)


@dataclass(frozen=True, eq=False)
class QuantumState:
    matrix: np.ndarray
    tol: float = field(default=DEFAULT.state, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "matrix", check_density(self.matrix, self.tol))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def pure(cls, vec) -> "QuantumState":
        v = np.asarray(vec, dtype=complex)
        v = v / np.linalg.norm(v)
        return cls(np.outer(v, v.conj()))

    @classmethod
    def maximally_mixed(cls, d: int) -> "QuantumState":
        return cls(np.eye(d) / d)


def check_density(m, tol: float = DEFAULT.state) -> np.ndarray:
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise InvalidDensityMatrix(f"density matrix must be square, got shape {m.shape}")
    if hermitian_defect(m) > tol:
        raise InvalidDensityMatrix("density matrix is not Hermitian")
    m = (m + dag(m)) / 2
    if abs(np.trace(m).real - 1.0) > tol:
        raise InvalidDensityMatrix(f"trace is {np.trace(m).real}, expected 1")
    if np.linalg.eigvalsh(m)[0] < -tol:
        raise InvalidDensityMatrix("density matrix is not positive semidefinite")
    m.setflags(write=False)
    return m


def born_probabilities(povm: Povm, state: QuantumState) -> np.ndarray:
    if povm.dim != state.dim:
        raise DimensionMismatch(f"POVM acts on C^{povm.dim}, state on C^{state.dim}")
    return np.einsum("ij,kji->k", state.matrix, povm.effects).real


@dataclass(frozen=True)
class MarginalReport:
    row_deviation: float
    col_deviation: float
    tol: float

    @property
    def max_deviation(self) -> float:
        return max(self.row_deviation, self.col_deviation)

    @property
    def passed(self) -> bool:
        return self.max_deviation <= self.tol


def check_marginals(joint: JointPovm, a: Povm, b: Povm, tol: float = 1e-6) -> MarginalReport:
    """Compare the row sums of ``joint`` with ``a`` and its column sums with ``b``."""
    if joint.dim != a.dim or joint.dim != b.dim:
        raise DimensionMismatch("joint and marginal POVMs act on different spaces")
    if joint.shape != (a.n_outcomes, b.n_outcomes):
        raise DimensionMismatch(f"joint grid {joint.shape} vs outcome counts {(a.n_outcomes, b.n_outcomes)}")
    rows, cols = joint.marginals()
    return MarginalReport(max_abs(rows - a.effects), max_abs(cols - b.effects), tol)


PAULI = np.array(
    [
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)


def qubit_effect(bloch) -> np.ndarray:
    """The effect ``(I + r.sigma) / 2``."""
    r = np.asarray(bloch, dtype=float)
    return (np.eye(2) + np.einsum("k,kij->ij", r, PAULI)) / 2


def unbiased_qubit_povm(bloch) -> Povm:
    e = qubit_effect(bloch)
    return Povm([e, np.eye(2) - e])


def bloch_vector(povm: Povm) -> np.ndarray:
    """Bloch vector of the first effect of an unbiased two-outcome qubit POVM."""
    if povm.dim != 2 or povm.n_outcomes != 2:
        raise NotQubit(f"need a two-outcome qubit POVM, got d={povm.dim}, n={povm.n_outcomes}")
    tr = povm.traces()
    if abs(tr[0] - 1.0) > 1e-9:
        raise NotUnbiased(f"Tr A_0 = {tr[0]:.12f}, expected 1")
    return np.einsum("kij,ji->k", PAULI, povm.effects[0]).real


def busch_compatibility(a: Povm, b: Povm) -> bool:
    """Closed-form joint measurability test for two unbiased qubit POVMs.

    Compatible iff ``|r_a + r_b| + |r_a - r_b| <= 2``.
    """
    ra, rb = bloch_vector(a), bloch_vector(b)
    return busch_margin(ra, rb) >= -1e-12


def busch_margin(ra, rb) -> float:
    ra, rb = np.asarray(ra, float), np.asarray(rb, float)
    return 2.0 - np.linalg.norm(ra + rb) - np.linalg.norm(ra - rb)


def random_povm(d: int, n: int, rng: np.random.Generator) -> Povm:
    """Random full-rank POVM: ``S^{-1/2} G_i S^{-1/2}`` for Wishart ``G_i``, ``S = sum G_i``."""
    g = rng.standard_normal((n, d, d)) + 1j * rng.standard_normal((n, d, d))
    g = g @ dag(g)
    s_inv_half = np.linalg.inv(hermitian_sqrt(g.sum(axis=0)))
    effects = s_inv_half @ g @ s_inv_half
    effects = (effects + dag(effects)) / 2
    # fold the rounding error of the normalisation into the last effect
    effects[-1] += np.eye(d) - effects.sum(axis=0)
    return Povm(effects)


def povm_corpus(count: int, seed: int = 0, max_dim: int = 4, max_outcomes: int = 4) -> list[Povm]:
    """Seeded random POVMs with dimension and outcome count drawn from ``[2, max]``."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        d = int(rng.integers(2, max_dim + 1))
        n = int(rng.integers(2, max_outcomes + 1))
        out.append(random_povm(d, n, rng))
    return out
