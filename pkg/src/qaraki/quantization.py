"""First and second quantization, C(q), and finite-rank approximants of the identity."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .deformed_space import DeformedSpace
from .errors import InvalidArgument
from .fock import FockOperator, TruncatedFock, first_quantization_matrix, operator_norm
from .wick import RadialSymbol, WickDecomposition, radial_apply, wick_decompose


def c_of_q(q: float, tol: float = 1e-14) -> float:
    """``prod_{n >= 1} (1 - q^n)^{-1}``, stopped once the next factor is within ``tol`` of 1."""
    if not -1 < q < 1:
        raise InvalidArgument(f"q must lie in (-1, 1), got {q}")
    out, qn = 1.0, q
    while abs(qn) >= tol:
        out /= 1 - qn
        qn *= q
    return out


def cb_constant(q: float) -> float:
    """``C(|q|)``, the bound for ``||U_{n,k}||_cb`` used in every norm estimate.

    For ``q < 0`` the product ``C(q)`` drops below 1 while ``U_{0,0}`` is the
    identity, so the estimates need the absolute value.
    """
    return c_of_q(abs(q))


@dataclass(frozen=True, eq=False)
class RealContraction:
    """A real matrix of norm at most one (so it commutes with the conjugation)."""

    T: np.ndarray

    def __post_init__(self):
        T = np.asarray(self.T)
        if T.ndim != 2 or T.shape[0] != T.shape[1]:
            raise InvalidArgument("T must be square")
        if np.iscomplexobj(T):
            if np.abs(T.imag).max(initial=0) > 1e-12:
                raise InvalidArgument("T must have real entries")
            T = T.real
        T = np.array(T, dtype=float)
        T.setflags(write=False)
        if np.linalg.norm(T, 2) > 1 + 1e-12:
            raise InvalidArgument("T is not a contraction")
        object.__setattr__(self, "T", T)

    @classmethod
    def identity(cls, n: int) -> RealContraction:
        return cls(np.eye(n))

    def scaled(self, c: float) -> RealContraction:
        return RealContraction(c * self.T)

    def __matmul__(self, other: RealContraction) -> RealContraction:
        return RealContraction(self.T @ other.T)


def deformed_operator_norm(space: DeformedSpace, T) -> float:
    """Norm of ``T`` with respect to the deformed inner product."""
    w, V = np.linalg.eigh(space.D)
    half = (V * np.sqrt(w)) @ V.conj().T
    ihalf = (V / np.sqrt(w)) @ V.conj().T
    return float(np.linalg.norm(half @ np.asarray(T) @ ihalf, 2))


def _check_deformed(space: DeformedSpace, T: RealContraction):
    if T.T.shape != (space.n, space.n):
        raise InvalidArgument("T does not act on the one-particle space")
    if deformed_operator_norm(space, T.T) > 1 + 1e-10:
        raise InvalidArgument("T is not a contraction for the deformed inner product")


def first_quantization(f: TruncatedFock, T: RealContraction) -> FockOperator:
    """``F_q(T)``: ``T^{(x)k}`` on level ``k``."""
    _check_deformed(f.space, T)
    return FockOperator(f, first_quantization_matrix(f, T.T))


def apply_tensor_power(T, xi) -> np.ndarray:
    """``T^{(x)d} xi`` for a tensor of shape ``(n,)*d``."""
    out = np.asarray(xi, dtype=complex)
    for axis in range(out.ndim):
        out = np.moveaxis(np.tensordot(T, out, axes=([1], [axis])), 0, axis)
    return out


def second_quantization_components(T: RealContraction, x: WickDecomposition) -> WickDecomposition:
    return WickDecomposition({d: apply_tensor_power(T.T, t) for d, t in x.components.items()})


def second_quantization(f: TruncatedFock, T: RealContraction, x) -> FockOperator:
    """``Gamma_q(T)``: ``W(xi) -> W(T^{(x)d} xi)``; ``x`` is an operator or a decomposition."""
    _check_deformed(f.space, T)
    dec = x if isinstance(x, WickDecomposition) else wick_decompose(f, x)
    return second_quantization_components(T, dec).reassemble(f)


def is_psd_in_orthonormal(f: TruncatedFock, x: FockOperator, max_level: int | None = None,
                          tol: float = 1e-9) -> tuple[bool, float]:
    """Whether ``x`` compressed to levels ``<= max_level`` is positive semidefinite.

    Returns the verdict and the smallest eigenvalue of the Hermitian part in
    orthonormalized coordinates.
    """
    lv = f.levels <= (f.L if max_level is None else max_level)
    B = (f.ortho @ (x.M @ f.ortho_inv))[np.ix_(lv, lv)]
    herm = (B + B.conj().T) / 2
    scale = max(np.abs(B).max(initial=0.0), 1.0)
    anti = np.abs(B - B.conj().T).max(initial=0.0) / scale
    lam = float(np.linalg.eigvalsh(herm).min())
    return bool(anti < tol and lam > -tol * scale), lam


def _tail_bound(K: int, t: float) -> float:
    """Bound for ``sum_{k > K} e^{-kt} (k+1)^2``; infinite if the ratio test fails."""
    r = ((K + 3) / (K + 2)) ** 2 * math.exp(-t)
    if r >= 1:
        return math.inf
    return math.exp(-(K + 1) * t) * (K + 2) ** 2 / (1 - r)


def cmap_bound(q: float, n: int, t: float, tol: float = 1e-14) -> float:
    """``1 + C(|q|)^2 sum_{k > n} e^{-kt} (k+1)^2`` with the series cut once the tail is below ``tol``."""
    if t <= 0:
        raise InvalidArgument("t must be positive")
    if n < 0:
        raise InvalidArgument("n must be nonnegative")
    c2 = cb_constant(q) ** 2
    K = max(n + 1, 8)
    while c2 * _tail_bound(K, t) >= tol:
        K *= 2
    k = np.arange(n + 1, K + 1, dtype=float)
    return 1.0 + c2 * math.fsum(np.exp(-k * t) * (k + 1) ** 2)


def cmap_approximant(f: TruncatedFock, n: int, t: float, T: RealContraction, x) -> FockOperator:
    """``Gamma_q(e^{-t} T) Q_n (x)``."""
    if t < 0:
        raise InvalidArgument("t must be nonnegative")
    dec = x if isinstance(x, WickDecomposition) else wick_decompose(f, x)
    cut = WickDecomposition({d: c for d, c in dec.components.items() if d <= n})
    return second_quantization(f, T.scaled(math.exp(-t)), cut)


def minimal_degree(q: float, t: float, eps: float, n_max: int = 10_000) -> int:
    """Smallest ``n`` with ``cmap_bound(q, n, t) < 1 + eps``."""
    lo, hi = 0, 1
    while cmap_bound(q, hi, t) >= 1 + eps:
        hi *= 2
        if hi > n_max:
            raise InvalidArgument(f"no n <= {n_max} reaches 1 + {eps} at t = {t}")
    if cmap_bound(q, lo, t) < 1 + eps:
        return lo
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if cmap_bound(q, mid, t) < 1 + eps:
            hi = mid
        else:
            lo = mid
    return hi


def cmap_schedule(q: float, eps: float, ts=(1.0, 0.5, 0.25, 0.125, 0.0625)) -> list[dict]:
    """For decreasing ``t``, the least ``n`` whose bound is below ``1 + eps``."""
    rows = []
    for t in ts:
        n = minimal_degree(q, t, eps)
        rows.append({"eps": eps, "t": t, "n": n, "bound": cmap_bound(q, n, t)})
    return rows


def pointwise_residual(f: TruncatedFock, n: int, t: float, x: WickDecomposition,
                       T: RealContraction | None = None) -> float:
    """``||Gamma_{n,t}(x) - x||`` (truncated norm)."""
    T = T or RealContraction.identity(f.n)
    diff = cmap_approximant(f, n, t, T, x) - x.reassemble(f)
    return operator_norm(diff)


def coordinate_projection(space: DeformedSpace, indices) -> RealContraction:
    """Orthogonal projection onto the span of the chosen standard basis vectors.

    It must commute with ``A`` so that it contracts the deformed norm; a
    selection that splits a rotation block is refused.
    """
    idx = sorted(set(int(i) for i in indices))
    if any(not 0 <= i < space.n for i in idx):
        raise InvalidArgument("coordinate index out of range")
    P = np.zeros((space.n, space.n))
    P[idx, idx] = 1
    if not np.allclose(P @ space.A, space.A @ P, atol=1e-12):
        raise InvalidArgument("projection splits a rotation block of A")
    return RealContraction(P)


def radial_cut(f: TruncatedFock, n: int, x) -> FockOperator:
    """``Q_n``: keep the Wick components of degree at most ``n``."""
    return radial_apply(f, RadialSymbol.indicator(n), x)
