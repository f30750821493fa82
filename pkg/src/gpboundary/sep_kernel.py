"""Squared-exponential periodic kernel on [0, 1] and its Karhunen-Loeve basis.

The kernel ``G_a(t1, t2) = exp(-4 a^2 sin^2(pi (t1 - t2)))`` has the Fourier
expansion ``exp(-2a^2) sum_n I_n(2a^2) cos(2 pi n (t1 - t2))``, so with the
orthonormal basis ``{1, sqrt2 cos 2 pi j t, sqrt2 sin 2 pi j t}`` its
eigenvalues are ``v_1 = e^{-2a^2} I_0(2a^2)`` and
``v_{2j} = v_{2j+1} = e^{-2a^2} I_j(2a^2)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bessel import scaled_bessel_values

EIGENVALUE_FLOOR = 1e-300
DEFAULT_J = 10
SQRT2 = np.sqrt(2.0)


@dataclass(frozen=True)
class KernelSpec:
    a: float = 1.0
    tau: float = 500.0
    J: int = DEFAULT_J

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError(f"scale a must be positive, got {self.a}")
        if not self.tau > 0:
            raise ValueError(f"precision tau must be positive, got {self.tau}")
        if int(self.J) != self.J or self.J < 1:
            raise ValueError(f"J must be a positive integer, got {self.J}")

    @property
    def L(self) -> int:
        return 2 * self.J + 1


@dataclass(frozen=True)
class EigenSystem:
    eigenvalues: np.ndarray
    a: float

    @property
    def L(self) -> int:
        return len(self.eigenvalues)


def kernel_value(a, t1, t2):
    """Exact kernel; broadcasts over array arguments."""
    s = np.sin(np.pi * (np.asarray(t1, dtype=float) - np.asarray(t2, dtype=float)))
    out = np.exp(-4.0 * a * a * s * s)
    return float(out) if np.ndim(out) == 0 else out


def expand_eigenvalues(harmonics: np.ndarray) -> np.ndarray:
    """Map per-harmonic values ``[h_0, h_1, .., h_J]`` to ``[h_0, h_1, h_1, .., h_J, h_J]``."""
    out = np.empty(2 * len(harmonics) - 1)
    out[0] = harmonics[0]
    out[1::2] = harmonics[1:]
    out[2::2] = harmonics[1:]
    return out


def eigenvalues(a: float, J: int) -> np.ndarray:
    """Eigenvalues ``v_1..v_L`` of the scale-``a`` kernel, ``L = 2J + 1``."""
    return expand_eigenvalues(scaled_bessel_values(2.0 * a * a, J))


def eigen_system(spec: KernelSpec) -> EigenSystem:
    values = eigenvalues(spec.a, spec.J)
    values.setflags(write=False)
    return EigenSystem(eigenvalues=values, a=spec.a)


def basis_matrix(omegas, L: int) -> np.ndarray:
    """Orthonormal Fourier basis at angles ``omegas`` (radians), shape ``(n, L)``.

    Columns are ordered ``1, sqrt2 cos(w), sqrt2 sin(w), sqrt2 cos(2w), ...``,
    matching the eigenvalue ordering of :func:`eigenvalues`.
    """
    if L < 1 or L % 2 == 0:
        raise ValueError(f"L must be a positive odd integer, got {L}")
    omegas = np.atleast_1d(np.asarray(omegas, dtype=float))
    J = (L - 1) // 2
    out = np.empty((omegas.size, L))
    out[:, 0] = 1.0
    if J:
        phase = np.outer(omegas, np.arange(1, J + 1))
        out[:, 1::2] = SQRT2 * np.cos(phase)
        out[:, 2::2] = SQRT2 * np.sin(phase)
    return out


def pve(a: float, J: int) -> float:
    """Fraction of the (unit) total kernel variance captured by ``2J + 1`` terms."""
    if a < 0:
        raise ValueError(f"a must be >= 0, got {a}")
    if a == 0:
        return 1.0
    return min(1.0, float(eigenvalues(a, J).sum()))


def tail_mass(a: float, J: int, extra: int = 200) -> float:
    """``sum_{j=J+1}^{J+extra} e^{-2a^2} I_j(2a^2)``, one side of the truncated spectrum."""
    values = scaled_bessel_values(2.0 * a * a, J + extra)
    return float(values[J + 1 :].sum())


def truncated_kernel(spec: KernelSpec, t1, t2):
    """Kernel rebuilt from the first ``L`` eigenpairs; ``t`` in [0, 1]."""
    t1 = np.atleast_1d(np.asarray(t1, dtype=float))
    t2 = np.atleast_1d(np.asarray(t2, dtype=float))
    v = eigenvalues(spec.a, spec.J)
    psi1 = basis_matrix(2.0 * np.pi * t1, spec.L)
    psi2 = basis_matrix(2.0 * np.pi * t2, spec.L)
    out = (psi1 * v) @ psi2.T
    return float(out[0, 0]) if out.size == 1 else out
