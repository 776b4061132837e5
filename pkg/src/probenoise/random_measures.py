"""Random unitaries and Monte Carlo checks of the probe-averaged noise model.

Samples are drawn in fixed-size chunks. Chunk ``k`` uses the ``k``-th child
of ``numpy.random.SeedSequence(seed)``, so a run is reproducible from its
seed alone and chunks can be evaluated in any order (or in parallel) and
merged by summation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dilation import (
    BlockUnitary,
    ProbeState,
    TwoOutcomeDilationParams,
    _as_probe,
    build_two_outcome_unitary,
    effective_effects,
    membership_check,
    probe_state,
)
from .errors import BadParameter, DimensionMismatch, NotMember
from .linalg import dag, hermitian_sqrt
from .povm import NoiseModel, Povm, apply_noise

CHUNK = 5000


def sample_haar_unitary(d: int, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Haar unitaries via QR of a complex Ginibre matrix with the phases of diag(R) removed."""
    shape = (d, d) if size is None else (size, d, d)
    g = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)
    q, r = np.linalg.qr(g)
    diag = np.diagonal(r, axis1=-2, axis2=-1)
    ph = diag / np.abs(diag)
    return q * ph[..., None, :]


def sample_nice_unitary(u0: BlockUnitary, rng: np.random.Generator, size: int | None = None, povm: Povm | None = None):
    """Draw ``U0 (I + V_1 + ... + V_N)`` (direct sum) with independent Haar ``V_c``.

    The first block column of ``U0`` is untouched, so every draw induces
    the same POVM as ``U0``. If ``povm`` is given, membership of ``u0`` is
    checked first. Returns a :class:`BlockUnitary`, or an array of ``size``
    full matrices when ``size`` is given.
    """
    if povm is not None and not membership_check(u0, povm):
        raise NotMember("u0 does not induce the given POVM")
    n, d = u0.levels, u0.d
    if n == 1:
        return u0 if size is None else np.broadcast_to(u0.matrix, (size,) + u0.matrix.shape).copy()
    k = 1 if size is None else size
    vs = sample_haar_unitary(d, rng, size=k * (n - 1)).reshape(k, n - 1, d, d)
    m = np.empty((k,) + u0.matrix.shape, dtype=complex)
    m[:, :, :d] = u0.matrix[:, :d]
    for c in range(1, n):
        m[:, :, c * d:(c + 1) * d] = u0.matrix[:, c * d:(c + 1) * d] @ vs[:, c - 1]
    if size is None:
        return BlockUnitary(m[0], d)
    return m


def _blocks(mats: np.ndarray, d: int) -> np.ndarray:
    k, big, _ = mats.shape
    n = big // d
    return mats.reshape(k, n, d, n, d).transpose(0, 1, 3, 2, 4)


@dataclass
class UnitarySampler:
    """Source of random dilations.

    ``kind="haar"``: two-outcome scheme. ``Z`` is Haar on ``U(d)`` and the
    dilation is :func:`build_two_outcome_unitary` with ``V, W`` fixed
    (drawn once from the seed), or redrawn per sample if ``randomize_vw``.

    ``kind="nice"``: ``U = U0 (I + V_1 + ... + V_N)`` around a base
    dilation ``u0``.
    """

    kind: str
    d: int
    seed: int = 0
    u0: BlockUnitary | None = None
    randomize_vw: bool = False

    def __post_init__(self):
        if self.kind not in ("haar", "nice"):
            raise BadParameter(f"unknown sampler kind {self.kind!r}")
        if self.kind == "nice" and self.u0 is None:
            raise BadParameter("the nice sampler needs a base unitary u0")

    @classmethod
    def haar(cls, d: int, seed: int = 0, randomize_vw: bool = False) -> "UnitarySampler":
        return cls("haar", d, seed, randomize_vw=randomize_vw)

    @classmethod
    def nice(cls, u0: BlockUnitary, seed: int = 0) -> "UnitarySampler":
        return cls("nice", u0.d, seed, u0=u0)

    def fixed_vw(self) -> tuple[np.ndarray, np.ndarray]:
        rng = np.random.default_rng(np.random.SeedSequence(self.seed).spawn(1)[0])
        return sample_haar_unitary(self.d, rng), sample_haar_unitary(self.d, rng)

    def child_rngs(self, n_chunks: int) -> list[np.random.Generator]:
        # child 0 of the top-level SeedSequence is reserved for fixed_vw
        kids = np.random.SeedSequence(self.seed).spawn(n_chunks + 1)[1:]
        return [np.random.default_rng(k) for k in kids]

    def draw_dilations(self, povm: Povm, count: int, rng: np.random.Generator) -> np.ndarray:
        """``count`` dilations of ``povm`` as an array (count, n, n, d, d) of blocks."""
        if povm.dim != self.d:
            raise DimensionMismatch(f"sampler is {self.d}-dimensional, POVM acts on C^{povm.dim}")
        if self.kind == "nice":
            if not membership_check(self.u0, povm):
                raise NotMember("base unitary does not induce the POVM")
            return _blocks(sample_nice_unitary(self.u0, rng, size=count), self.d)
        if povm.n_outcomes != 2:
            raise BadParameter("the Haar (two-outcome) scheme needs a two-outcome POVM")
        s0, s1 = hermitian_sqrt(povm[0]), hermitian_sqrt(povm[1])
        if self.randomize_vw:
            v = sample_haar_unitary(self.d, rng, size=count)
            w = sample_haar_unitary(self.d, rng, size=count)
        else:
            v, w = self.fixed_vw()
        zs = dag(sample_haar_unitary(self.d, rng, size=count))
        out = np.empty((count, 2, 2, self.d, self.d), dtype=complex)
        out[:, 0, 0] = v @ s0
        out[:, 0, 1] = v @ s1 @ zs
        out[:, 1, 0] = w @ s1
        out[:, 1, 1] = -(w @ s0) @ zs
        return out

    def example_dilation(self, povm: Povm) -> BlockUnitary:
        if self.kind == "nice":
            return self.u0
        v, w = self.fixed_vw()
        return build_two_outcome_unitary(povm[0], povm[1], TwoOutcomeDilationParams(v, w, np.eye(self.d)))


@dataclass
class _Moments:
    """Running first and second moments of a complex array-valued statistic."""

    total: np.ndarray | None = None
    sq: np.ndarray | None = None
    count: int = 0

    def add(self, x: np.ndarray):
        s, q = x.sum(axis=0), (np.abs(x) ** 2).sum(axis=0)
        if self.total is None:
            self.total, self.sq = s, q
        else:
            self.total, self.sq = self.total + s, self.sq + q
        self.count += x.shape[0]

    @property
    def mean(self) -> np.ndarray:
        return self.total / self.count

    @property
    def stderr(self) -> np.ndarray:
        var = np.clip(self.sq / self.count - np.abs(self.mean) ** 2, 0.0, None)
        return np.sqrt(var * self.count / max(self.count - 1, 1) / self.count)


def _chunks(m: int) -> list[int]:
    return [min(CHUNK, m - s) for s in range(0, m, CHUNK)]


@dataclass
class MonteCarloReport:
    samples: int
    mean_effects: np.ndarray
    stderr: np.ndarray
    expected: np.ndarray
    tolerance: np.ndarray
    gamma_hat: np.ndarray
    label: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def deviations(self) -> np.ndarray:
        return np.abs(self.mean_effects - self.expected)

    @property
    def max_deviation(self) -> float:
        return float(self.deviations.max())

    @property
    def per_effect_deviations(self) -> list[float]:
        return [float(x) for x in self.deviations.reshape(self.deviations.shape[0], -1).max(axis=1)]

    @property
    def passed(self) -> bool:
        return bool(np.all(self.deviations <= self.tolerance))

    def to_json(self) -> dict:
        out = {
            "label": self.label,
            "M": self.samples,
            "max_deviation": self.max_deviation,
            "tolerance": float(np.max(self.tolerance)),
            "pass": self.passed,
            "per_effect_deviations": self.per_effect_deviations,
            "max_stderr": float(self.stderr.max()),
            "gamma_hat": self.gamma_hat.tolist(),
        }
        out.update(self.extra)
        return out


def _tolerance(stderr: np.ndarray, tol, n_sigma: float) -> np.ndarray:
    if tol is not None:
        return np.full(stderr.shape, float(tol))
    # the floor keeps deterministic (zero-variance) entries from failing on rounding
    return n_sigma * stderr + 1e-12


def physical_average(povm: Povm, beta: ProbeState) -> np.ndarray:
    """Closed-form average effect ``beta_00 A_i + (1 - beta_00) t_i I`` (physical weights)."""
    return apply_noise(povm, NoiseModel("physical"), beta.beta00).effects


def monte_carlo_average(
    sampler: UnitarySampler,
    beta,
    povm: Povm,
    samples: int,
    tol: float | None = None,
    n_sigma: float = 4.0,
    label: str = "",
) -> MonteCarloReport:
    """Average the probe-perturbed effective POVM over random dilations.

    The empirical mean is compared entrywise with the physical noise model at
    level ``beta_00``. With ``tol=None`` each entry is allowed ``n_sigma``
    standard errors; otherwise ``tol`` is an absolute bound.
    """
    beta = _as_probe(beta)
    if samples < 1:
        raise BadParameter("need at least one sample")
    if beta.levels != povm.n_outcomes:
        raise DimensionMismatch(f"probe has {beta.levels} levels, POVM has {povm.n_outcomes} outcomes")
    n = povm.n_outcomes
    effects = _Moments()
    gamma = np.zeros((n, n))
    sizes = _chunks(samples)
    for size, rng in zip(sizes, sampler.child_rngs(len(sizes))):
        blocks = sampler.draw_dilations(povm, size, rng)
        effects.add(effective_effects(blocks, beta.matrix))
        # Gamma_ic = Tr[U_ic^* U_ic] / d
        gamma += np.einsum("bicxy,bicxy->ic", blocks.conj(), blocks).real
    gamma /= samples * povm.dim
    expected = physical_average(povm, beta)
    return MonteCarloReport(
        samples=samples,
        mean_effects=effects.mean,
        stderr=effects.stderr,
        expected=expected,
        tolerance=_tolerance(effects.stderr, tol, n_sigma),
        gamma_hat=gamma,
        label=label,
    )


@dataclass
class ProbeEquivalenceReport:
    t: float
    samples: int
    mean_probabilistic: np.ndarray
    mean_cat: np.ndarray
    stderr: np.ndarray
    tol: float

    @property
    def max_difference(self) -> float:
        return float(np.abs(self.mean_probabilistic - self.mean_cat).max())

    @property
    def passed(self) -> bool:
        return bool(self.max_difference <= self.tol)

    def to_json(self) -> dict:
        return {
            "t": self.t,
            "M": self.samples,
            "max_difference": self.max_difference,
            "tolerance": self.tol,
            "pass": self.passed,
        }


def probe_equivalence_check(
    povm: Povm,
    t: float,
    samples: int,
    seed: int = 0,
    tol: float | None = None,
    n_sigma: float = 4.0,
) -> ProbeEquivalenceReport:
    """Average the effective POVM for the probabilistic and the cat probe.

    Both averages use the same draws of ``Z``, so their difference is the
    mean of the off-diagonal probe terms alone.
    """
    sampler = UnitarySampler.haar(povm.dim, seed)
    sigma = probe_state("probabilistic", t).matrix
    gamma = probe_state("cat", t).matrix
    mp, mc, diff = _Moments(), _Moments(), _Moments()
    sizes = _chunks(samples)
    for size, rng in zip(sizes, sampler.child_rngs(len(sizes))):
        blocks = sampler.draw_dilations(povm, size, rng)
        ep, ec = effective_effects(blocks, sigma), effective_effects(blocks, gamma)
        mp.add(ep)
        mc.add(ec)
        diff.add(ep - ec)
    if tol is None:
        tol = float(n_sigma * diff.stderr.max()) + 1e-12
    return ProbeEquivalenceReport(float(t), samples, mp.mean, mc.mean, diff.stderr, tol)


@dataclass
class MomentReport:
    label: str
    samples: int
    value: float
    bound: float

    @property
    def passed(self) -> bool:
        return bool(self.value <= self.bound)

    def to_json(self) -> dict:
        return {"label": self.label, "M": self.samples, "value": self.value, "bound": self.bound, "pass": self.passed}


def nice_zero_moments(u0: BlockUnitary, samples: int, seed: int = 0) -> np.ndarray:
    """Empirical ``E[U_ik^* U_i0]`` under the nice measure, shape (n, n, d, d) indexed [i, k]."""
    sampler = UnitarySampler.nice(u0, seed)
    acc = np.zeros((u0.levels, u0.levels, u0.d, u0.d), dtype=complex)
    sizes = _chunks(samples)
    for size, rng in zip(sizes, sampler.child_rngs(len(sizes))):
        b = _blocks(sample_nice_unitary(u0, rng, size=size), u0.d)
        acc += np.einsum("bikxa,bixy->ikay", b.conj(), b[:, :, 0])
    return acc / samples


def zero_moment_check(u0: BlockUnitary, samples: int, seed: int = 0, scale: float = 5.0) -> MomentReport:
    """``max_{i, k != 0} ||E[U_ik^* U_i0]||_max`` against ``scale / sqrt(M)``."""
    m = nice_zero_moments(u0, samples, seed)
    value = float(np.abs(m[:, 1:]).max()) if u0.levels > 1 else 0.0
    return MomentReport("nice zero moments", samples, value, scale / np.sqrt(samples))


def haar_design_moments(d: int, samples: int, seed: int = 0, x: np.ndarray | None = None) -> dict[str, float]:
    """Empirical centred 1-design defects of the Haar sampler.

    Returns the max-entry norms of ``E[Z]``, ``E[Z X]``, ``E[Z^* X]`` and
    ``E[Z X Z^*] - Tr(X)/d I``.
    """
    if x is None:
        x = np.diag(np.arange(1.0, d + 1.0))
    rng_list = UnitarySampler.haar(d, seed).child_rngs(len(_chunks(samples)))
    ez = np.zeros((d, d), dtype=complex)
    ezxz = np.zeros((d, d), dtype=complex)
    for size, rng in zip(_chunks(samples), rng_list):
        z = sample_haar_unitary(d, rng, size=size)
        ez += z.sum(axis=0)
        ezxz += (z @ x @ dag(z)).sum(axis=0)
    ez /= samples
    ezxz /= samples
    return {
        "E[Z]": float(np.abs(ez).max()),
        "E[ZX]": float(np.abs(ez @ x).max()),
        "E[Z*X]": float(np.abs(dag(ez) @ x).max()),
        "E[ZXZ*]-Tr(X)/d I": float(np.abs(ezxz - np.trace(x) / d * np.eye(d)).max()),
    }
