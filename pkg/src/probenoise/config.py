"""Numerical tolerances shared across the package."""

from dataclasses import dataclass


@dataclass(frozen=True)
class Tolerances:
    # Hermiticity check: max |M_ij - conj(M_ji)| <= hermitian * (1 + ||M||)
    hermitian: float = 1e-12
    # eigenvalues in [-psd_clamp, 0) are treated as 0 in square roots
    psd_clamp: float = 1e-10
    # eigenvalues below -psd_error are rejected
    psd_error: float = 1e-8
    isometry: float = 1e-8
    unitary: float = 1e-9
    povm: float = 1e-9
    joint_psd: float = 1e-8
    joint_sum: float = 1e-7
    state: float = 1e-10
    # relative singular-value cutoff when computing the orthogonal complement
    completion: float = 1e-8


DEFAULT = Tolerances()
