"""Finite-dimensional one-particle space with analytic generator ``A``.

Vectors are kept in the undeformed standard coordinates. The conjugation ``I``
is entrywise complex conjugation, so real vectors are exactly the fixed points
of ``I``. The deformed inner product is ``<x|y>_U = <x, D y>`` with
``D = 2A(1+A)^{-1}``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import InvalidArgument


@dataclass(frozen=True)
class BlockSpec:
    """``A`` as a direct sum of rotation blocks and identity entries.

    Each ``s`` in ``rotation_params`` gives the 2x2 block
    ``[[cosh s, i sinh s], [-i sinh s, cosh s]]`` with spectrum ``{e^s, e^-s}``.
    """

    rotation_params: tuple[float, ...] = ()
    fixed_count: int = 0

    def __post_init__(self):
        object.__setattr__(self, "rotation_params", tuple(float(s) for s in self.rotation_params))
        if any(s == 0 for s in self.rotation_params):
            raise InvalidArgument("rotation parameters must be nonzero")
        if self.fixed_count < 0:
            raise InvalidArgument("fixed_count must be nonnegative")

    @property
    def n(self) -> int:
        return 2 * len(self.rotation_params) + self.fixed_count

    @classmethod
    def tracial(cls, n: int) -> BlockSpec:
        return cls((), n)

    @classmethod
    def from_dict(cls, data: dict) -> BlockSpec:
        return cls(tuple(data.get("rotation_params", ())), int(data.get("fixed_count", 0)))

    def to_dict(self) -> dict:
        return {"rotation_params": list(self.rotation_params), "fixed_count": self.fixed_count}

    @classmethod
    def load(cls, path) -> BlockSpec:
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True, eq=False)
class DeformedSpace:
    A: np.ndarray
    spec: BlockSpec | None = field(default=None, compare=False)

    def __post_init__(self):
        A = np.array(self.A, dtype=complex)
        A.setflags(write=False)
        object.__setattr__(self, "A", A)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise InvalidArgument("A must be square")
        if not np.allclose(A, A.conj().T, atol=1e-12):
            raise InvalidArgument("A must be self-adjoint")
        if np.linalg.eigvalsh(A).min() <= 0:
            raise InvalidArgument("A must be positive definite")
        if not np.allclose(A.conj() @ A, np.eye(len(A)), atol=1e-10):
            raise InvalidArgument("conj(A) A must be the identity")

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @cached_property
    def _eig(self):
        w, V = np.linalg.eigh(self.A)
        return w, V

    @cached_property
    def D(self) -> np.ndarray:
        w, V = self._eig
        D = (V * (2 * w / (1 + w))) @ V.conj().T
        D = (D + D.conj().T) / 2
        D.setflags(write=False)
        return D

    @property
    def is_tracial(self) -> bool:
        return np.allclose(self.A, np.eye(self.n), atol=1e-14)

    def power(self, z: complex) -> np.ndarray:
        """The matrix ``A^{-iz}``."""
        w, V = self._eig
        return (V * np.exp(-1j * z * np.log(w))) @ V.conj().T

    def tensor_identity(self, m: int) -> DeformedSpace:
        """The space ``H (x) C^m`` with generator ``A (x) 1``."""
        return DeformedSpace(np.kron(self.A, np.eye(m)))


def build(spec: BlockSpec) -> DeformedSpace:
    n = spec.n
    A = np.eye(n, dtype=complex)
    for j, s in enumerate(spec.rotation_params):
        i = 2 * j
        A[i:i + 2, i:i + 2] = [[np.cosh(s), 1j * np.sinh(s)], [-1j * np.sinh(s), np.cosh(s)]]
    return DeformedSpace(A, spec)


def _check_vector(sp: DeformedSpace, x) -> np.ndarray:
    x = np.asarray(x, dtype=complex)
    if x.shape != (sp.n,):
        raise InvalidArgument(f"expected a vector of length {sp.n}, got shape {x.shape}")
    return x


def deformed_inner(sp: DeformedSpace, xi, eta) -> complex:
    """``<xi|eta>_U``, conjugate-linear in ``xi``."""
    xi, eta = _check_vector(sp, xi), _check_vector(sp, eta)
    return complex(xi.conj() @ sp.D @ eta)


def deformed_norm(sp: DeformedSpace, xi) -> float:
    return float(np.sqrt(max(deformed_inner(sp, xi, xi).real, 0.0)))


def apply_power(sp: DeformedSpace, z: complex, xi) -> np.ndarray:
    """``A^{-iz} xi``; ``z = -i`` gives ``A^{-1} xi``."""
    return sp.power(z) @ _check_vector(sp, xi)


def conjugate(xi) -> np.ndarray:
    return np.conj(np.asarray(xi, dtype=complex))


def is_real(xi, atol: float = 1e-12) -> bool:
    return bool(np.all(np.abs(np.imag(xi)) <= atol))
