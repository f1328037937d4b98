"""Split tensors, the maps R*_{n,k} and U_{n,k}, and Khintchine checks.

A :class:`SplitTensor` holds coefficients ``Z[a, b]`` of ``e_a (x) e_b`` with
``a`` a word of length ``n - k`` and ``b`` a word of length ``k``. After
:func:`apply_conjugation` the same numbers are read as coefficients of
``e_a (x) conj(e_b)`` in the conjugate space. Since the standard basis is
fixed by the conjugation, the map is the identity on coefficients and only
the interpretation of the right leg changes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument, TruncationExceeded
from .fock import FockOperator, TruncatedFock, amplified_norm, normal_ordered, operator_norm
from .partitions import split_indices, split_inversions


@dataclass(frozen=True, eq=False)
class SplitTensor:
    """Coefficients in ``H^{(x)(n-k)} (x) H^{(x)k}``.

    ``Z`` has shape ``(P, K)`` for scalar coefficients or ``(N, N, P, K)`` with
    ``N x N`` matrix coefficients, where ``P = dim^(n-k)`` and ``K = dim^k``.
    """

    n: int
    k: int
    Z: np.ndarray
    conjugated: bool = False

    def __post_init__(self):
        if not 0 <= self.k <= self.n:
            raise InvalidArgument(f"need 0 <= k <= n, got k={self.k}, n={self.n}")
        Z = np.asarray(self.Z, dtype=complex)
        if Z.ndim not in (2, 4) or (Z.ndim == 4 and Z.shape[0] != Z.shape[1]):
            raise InvalidArgument("Z must have shape (P, K) or (N, N, P, K)")
        object.__setattr__(self, "Z", Z)

    @property
    def N(self) -> int | None:
        return self.Z.shape[0] if self.Z.ndim == 4 else None

    def right_leg_view(self) -> np.ndarray:
        """Coefficients of the vectors written under the bar of the right leg.

        For a conjugated tensor ``c e_a (x) conj(e_b) = e_a (x) conj(conj(c) e_b)``.
        """
        return self.Z.conj() if self.conjugated else self.Z

    def __add__(self, other: SplitTensor) -> SplitTensor:
        if (self.n, self.k, self.conjugated) != (other.n, other.k, other.conjugated):
            raise InvalidArgument("split tensors of different type")
        return SplitTensor(self.n, self.k, self.Z + other.Z, self.conjugated)

    def __mul__(self, c) -> SplitTensor:
        return SplitTensor(self.n, self.k, c * self.Z, self.conjugated)

    __rmul__ = __mul__


def as_tensor(dim: int, xi, degree: int | None = None, amplified: bool = False) -> np.ndarray:
    """Normalize a degree-d tensor to shape ``(dim,)*d`` (prefixed by ``(N, N)`` if amplified).

    Accepts an array already in that shape, a flat array of length ``dim^d``
    or a list of ``d`` vectors (read as their simple tensor).
    """
    if isinstance(xi, (list, tuple)) and not amplified:
        vecs = [np.asarray(v, dtype=complex) for v in xi]
        out = np.ones((), dtype=complex)
        for v in vecs:
            if v.shape != (dim,):
                raise InvalidArgument(f"expected vectors of length {dim}")
            out = np.multiply.outer(out, v)
        return out
    xi = np.asarray(xi, dtype=complex)
    lead = xi.shape[:2] if amplified else ()
    body = xi.shape[2:] if amplified else xi.shape
    if degree is None:
        if any(s != dim for s in body):
            raise InvalidArgument(f"cannot infer the degree of a tensor with shape {xi.shape}")
        degree = len(body)
    if int(np.prod(body, dtype=int)) != dim**degree:
        raise InvalidArgument(f"tensor of shape {xi.shape} is not of degree {degree} over dimension {dim}")
    return xi.reshape(lead + (dim,) * degree)


def r_star(f: TruncatedFock, n: int, k: int, xi) -> SplitTensor:
    """``R*_{n,k}``: sum over splits of ``[n]`` of ``q^{i(I1,I2)} (entries in I1) (x) (entries in I2)``."""
    if not 0 <= k <= n:
        raise InvalidArgument(f"need 0 <= k <= n, got k={k}, n={n}")
    if n > f.L:
        raise TruncationExceeded(f"degree {n} exceeds truncation {f.L}")
    amplified = isinstance(xi, np.ndarray) and xi.ndim == n + 2
    T = as_tensor(f.n, xi, n, amplified=amplified)
    lead = T.shape[:2] if amplified else ()
    off = len(lead)
    P, K = f.n ** (n - k), f.n**k
    Z = np.zeros(lead + (P, K), dtype=complex)
    for s in split_indices(n, k):
        axes = list(range(off)) + [off + i - 1 for i in s.I1 + s.I2]
        Z += f.q ** split_inversions(s) * T.transpose(axes).reshape(lead + (P, K))
    return SplitTensor(n, k, Z)


def apply_conjugation(s: SplitTensor) -> SplitTensor:
    """``(1 (x) I)``: reinterpret the right leg in the conjugate space (an involution)."""
    return SplitTensor(s.n, s.k, s.Z, not s.conjugated)


def u_nk(f: TruncatedFock, s: SplitTensor):
    """``e_a (x) conj(e_b) -> a*(e_{a_1})...a*(e_{a_p}) a(e_{b_1})...a(e_{b_k})``, extended linearly.

    Returns a :class:`FockOperator`, or an ``N x N`` nested list of them for
    matrix coefficients.
    """
    p = s.n - s.k
    if s.N is None:
        return normal_ordered(f, s.Z, p, s.k)
    return [[normal_ordered(f, s.Z[i, j], p, s.k) for j in range(s.N)] for i in range(s.N)]


def haagerup_norm(f: TruncatedFock, s: SplitTensor) -> float:
    """Column-row norm of ``s`` via the identification with operators ``H^k -> H^(n-k)``.

    Computed as ``||(1 (x) G_{n-k}^{1/2}) Z (1 (x) G_k^{1/2})||``.
    """
    Z = s.Z if s.N is not None else s.Z[None, None]
    N, _, P, K = Z.shape
    Zhat = Z.transpose(0, 2, 1, 3).reshape(N * P, N * K)
    left = np.kron(np.eye(N), f.gram_sqrt(s.n - s.k))
    right = np.kron(np.eye(N), f.gram_sqrt(s.k))
    return float(np.linalg.norm(left @ Zhat @ right, 2))


def wick_from_splits(f: TruncatedFock, n: int, xi):
    """``sum_k U_{n,k} (1 (x) I) R*_{n,k}(xi)``."""
    parts = [u_nk(f, apply_conjugation(r_star(f, n, k, xi))) for k in range(n + 1)]
    if isinstance(parts[0], FockOperator):
        out = parts[0]
        for p in parts[1:]:
            out = out + p
        return out
    N = len(parts[0])
    return [[_sum(p[i][j] for p in parts) for j in range(N)] for i in range(N)]


def _sum(ops):
    ops = list(ops)
    out = ops[0]
    for o in ops[1:]:
        out = out + o
    return out


def khintchine_check(f: TruncatedFock, n: int, xi, rel_tol: float = 1e-9) -> dict:
    """Compare ``||W(xi)||`` with the column-row norms of its splits.

    The minorization ``max_k ||(1 (x) I) R*_{n,k} xi|| <= ||W(xi)||`` is asserted.
    The ratio against ``C(|q|)(n+1)`` is only reported because the truncated
    Wick norm is a lower bound of the true norm.
    """
    from .quantization import cb_constant

    if n > f.L:
        raise TruncationExceeded(f"degree {n} exceeds truncation {f.L}")
    splits = [apply_conjugation(r_star(f, n, k, xi)) for k in range(n + 1)]
    kwise = [haagerup_norm(f, s) for s in splits]
    lhs = max(kwise)
    W = wick_from_splits(f, n, xi)
    wick_norm = operator_norm(W) if isinstance(W, FockOperator) else amplified_norm(f, W)
    cq = cb_constant(f.q)
    bound = cq * (n + 1)
    ratio = wick_norm / lhs if lhs > 0 else 0.0
    return {
        "n": n,
        "L": f.L,
        "N": splits[0].N or 1,
        "q": f.q,
        "kwise_norms": kwise,
        "lhs_max": lhs,
        "wick_norm": wick_norm,
        "C_q": cq,
        "minorization_ok": bool(lhs <= wick_norm * (1 + rel_tol) + rel_tol),
        "minorization_slack": wick_norm - lhs,
        "majorization_ratio": ratio,
        "majorization_bound": bound,
        "majorization_slack": bound - ratio,
    }
