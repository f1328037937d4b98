"""Finite-m approximants of the ultraproduct embedding.

The ambient space is ``F_{q0}(R^m) (x) F_{q1}(H (x) C^m)``. Operators on it
are kept as finite sums of elementary tensors :class:`TensorOperator`; a
vector is a ``dimL x dimR`` matrix ``X`` and ``A (x) B`` acts as
``X -> A X B^T`` (row-major ``kron`` convention). The vector ``xi (x) e_k`` of
the right one-particle space is ``kron(xi, e_k)``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sps
from scipy.sparse.linalg import LinearOperator, svds
from scipy.sparse.linalg import norm as sparse_norm

from .deformed_space import BlockSpec, DeformedSpace, build
from .errors import InvalidArgument, MemoryBudgetExceeded, TruncationExceeded
from .fock import (
    FockOperator,
    TruncatedFock,
    build_fock,
    first_quantization_matrix,
    identity,
    wick_one,
)
from .partitions import crossings, enumerate_pair_partitions, join
from .wick import RadialSymbol, moment, radial_apply, wick_decompose, wick_word

DEFAULT_MAX_CELLS = 2**26
DENSE_NORM_LIMIT = 500
NORM_WORK_ARRAYS = 6


@dataclass(frozen=True)
class FactorizationChoice:
    """``q = q0 q1`` with ``|q| < q0 < 1``."""

    q0: float
    q1: float

    def __post_init__(self):
        q = self.q0 * self.q1
        if not (abs(q) < self.q0 < 1 and abs(self.q1) < 1):
            raise InvalidArgument(f"need |q0 q1| < q0 < 1 and |q1| < 1, got q0={self.q0}, q1={self.q1}")

    @property
    def q(self) -> float:
        return self.q0 * self.q1

    @classmethod
    def default(cls, q: float) -> FactorizationChoice:
        if not -1 < q < 1:
            raise InvalidArgument(f"q must lie in (-1, 1), got {q}")
        if q == 0:
            return cls(0.5, 0.0)
        q0 = math.sqrt(abs(q))
        return cls(q0, q / q0)

    @classmethod
    def with_q0(cls, q: float, q0: float) -> FactorizationChoice:
        if q0 == 0:
            raise InvalidArgument("q0 must be nonzero")
        return cls(q0, q / q0)


class TensorFock:
    """The pair of truncated Fock spaces carrying ``u_m`` and ``W^s``."""

    def __init__(self, space: DeformedSpace, fact: FactorizationChoice, m: int, L0: int, L1: int,
                 max_cells: int = DEFAULT_MAX_CELLS, max_gram_level: int = 5):
        if m < 1:
            raise InvalidArgument("m must be positive")
        self.space = space
        self.fact = fact
        self.m = m
        self.max_cells = max_cells
        self.left_space = build(BlockSpec.tracial(m))
        self.right_space = space.tensor_identity(m)
        self.left = build_fock(self.left_space, fact.q0, L0, max_gram_level)
        self.right = build_fock(self.right_space, fact.q1, L1, max_gram_level)

    @property
    def q(self) -> float:
        return self.fact.q

    @property
    def n(self) -> int:
        return self.space.n

    @property
    def cells(self) -> int:
        return self.left.dim * self.right.dim

    def check_budget(self, n_terms: int = 1):
        need = self.cells * max(n_terms, 1)
        if need > self.max_cells:
            raise MemoryBudgetExceeded(f"{need} cells needed, budget is {self.max_cells}")

    def with_levels(self, L0: int, L1: int) -> TensorFock:
        out = object.__new__(TensorFock)
        out.__dict__.update(self.__dict__)
        out.left = self.left.with_level(L0)
        out.right = self.right.with_level(L1)
        return out

    def left_basis(self, k: int) -> np.ndarray:
        e = np.zeros(self.m)
        e[k] = 1
        return e

    def right_vector(self, xi, k: int) -> np.ndarray:
        """``xi (x) e_k`` in the right one-particle space."""
        return np.kron(np.asarray(xi, dtype=complex), self.left_basis(k))

    def vacuum(self) -> np.ndarray:
        X = np.zeros((self.left.dim, self.right.dim), dtype=complex)
        X[0, 0] = 1
        return X


class TensorOperator:
    """``sum_i c_i A_i (x) B_i`` with ``A_i`` on the left and ``B_i`` on the right space."""

    def __init__(self, tf: TensorFock, terms):
        self.tf = tf
        self.terms = [(complex(c), A, B) for c, A, B in terms]

    def __len__(self):
        return len(self.terms)

    def __add__(self, other: TensorOperator) -> TensorOperator:
        return TensorOperator(self.tf, self.terms + other.terms)

    def __sub__(self, other: TensorOperator) -> TensorOperator:
        return self + (-1) * other

    def __mul__(self, c) -> TensorOperator:
        return TensorOperator(self.tf, [(c * a, A, B) for a, A, B in self.terms])

    __rmul__ = __mul__

    def __matmul__(self, other: TensorOperator) -> TensorOperator:
        return TensorOperator(self.tf, [(a * b, A @ C, B @ E) for a, A, B in self.terms for b, C, E in other.terms])

    def compress(self, tf: TensorFock) -> TensorOperator:
        return TensorOperator(tf, [(c, A.compress(tf.left), B.compress(tf.right)) for c, A, B in self.terms])

    def apply(self, X) -> np.ndarray:
        """Act on a vector given as a ``dimL x dimR`` matrix."""
        X = np.asarray(X, dtype=complex)
        out = np.zeros_like(X)
        for c, A, B in self.terms:
            out += c * (B.M @ (A.M @ X).T).T
        return out

    def dense(self) -> np.ndarray:
        self.tf.check_budget(self.tf.cells)
        out = None
        for c, A, B in self.terms:
            t = c * sps.kron(A.M, B.M, format="csr")
            out = t if out is None else out + t
        if out is None:
            return np.zeros((self.tf.cells, self.tf.cells), dtype=complex)
        return out.toarray()

    def vacuum_expectation(self) -> complex:
        return complex(self.apply(self.tf.vacuum())[0, 0])


def _ortho_pair(tf: TensorFock):
    return tf.left.ortho, tf.left.ortho_inv, tf.right.ortho, tf.right.ortho_inv


def tensor_norm(x: TensorOperator) -> float:
    """Norm in orthonormalized coordinates; ARPACK above a size threshold."""
    tf = x.tf
    if not x.terms:
        return 0.0
    tf.check_budget(NORM_WORK_ARRAYS)
    SL, SLi, SR, SRi = _ortho_pair(tf)
    nL, nR = tf.left.dim, tf.right.dim
    if nL * nR <= DENSE_NORM_LIMIT:
        M = x.dense()
        S = np.kron(SL, SR)
        Si = np.kron(SLi, SRi)
        return float(np.linalg.norm(S @ M @ Si, 2))

    terms = x.terms

    def mv(v):
        X = SLi @ v.reshape(nL, nR) @ SRi.T
        Y = np.zeros((nL, nR), dtype=complex)
        for c, A, B in terms:
            Y += c * (B.M @ (A.M @ X).T).T
        return (SL @ Y @ SR.T).reshape(-1)

    def rmv(v):
        X = SL.conj().T @ v.reshape(nL, nR) @ SR.conj()
        Y = np.zeros((nL, nR), dtype=complex)
        for c, A, B in terms:
            Y += np.conj(c) * (B.M.conj().T @ (A.M.conj().T @ X).T).T
        return (SLi.conj().T @ Y @ SRi.conj()).reshape(-1)

    op = LinearOperator((nL * nR, nL * nR), matvec=mv, rmatvec=rmv, dtype=complex)
    s = svds(op, k=1, return_singular_vectors=False, random_state=0)
    return float(s[0])


# -- building blocks --------------------------------------------------------

def _left_word(tf: TensorFock, ks) -> FockOperator:
    return wick_word(tf.left, [tf.left_basis(k) for k in ks])


def _right_word(tf: TensorFock, vecs, ks) -> FockOperator:
    return wick_word(tf.right, [tf.right_vector(v, k) for v, k in zip(vecs, ks)])


def _field_product(f: TruncatedFock, vectors) -> FockOperator:
    out = identity(f)
    for v in vectors:
        out = out @ wick_one(f, v)
    return out


def u_m(tf: TensorFock, xi) -> TensorOperator:
    """``m^{-1/2} sum_k W(e_k) (x) W(xi (x) e_k)``."""
    c = 1 / math.sqrt(tf.m)
    terms = [(c, wick_one(tf.left, tf.left_basis(k)), wick_one(tf.right, tf.right_vector(xi, k)))
             for k in range(tf.m)]
    return TensorOperator(tf, terms)


def injective_maps(d: int, m: int):
    return itertools.permutations(range(m), d)


def ws_word(tf: TensorFock, vectors, literal: bool = False) -> TensorOperator:
    """``m^{-d/2} sum_{k injective} W(e_{k(1)} ... e_{k(d)}) (x) W((xi_1 (x) e_{k(1)}) ... )``.

    Because the ``e_{k(j)}`` are distinct, both legs are Wick words. With
    ``literal=True`` the legs are built as plain products of degree-one words
    instead (exact only away from the top levels).
    """
    vecs = [np.asarray(v, dtype=complex) for v in vectors]
    d = len(vecs)
    if tf.m < d:
        raise InvalidArgument(f"need m >= d for injective maps, got m={tf.m}, d={d}")
    if d > min(tf.left.L, tf.right.L):
        raise TruncationExceeded(f"degree {d} exceeds the truncation levels")
    c = tf.m ** (-d / 2)
    terms = []
    for ks in injective_maps(d, tf.m):
        if literal:
            A = _field_product(tf.left, [tf.left_basis(k) for k in ks])
            B = _field_product(tf.right, [tf.right_vector(v, k) for v, k in zip(vecs, ks)])
        else:
            A, B = _left_word(tf, ks), _right_word(tf, vecs, ks)
        terms.append((c, A, B))
    return TensorOperator(tf, terms)


# -- mixed moments ----------------------------------------------------------

def mixed_moment_matrix(tf: TensorFock, vectors) -> complex:
    """``(chi_0 (x) chi_1)(u_m(xi_1) ... u_m(xi_d))`` by applying the factors to the vacuum.

    Paths that return to the vacuum never climb above level ``d/2``, so the
    truncation levels only need to reach ``ceil(d/2)``.
    """
    d = len(vectors)
    need = (d + 1) // 2
    if min(tf.left.L, tf.right.L) < need:
        raise TruncationExceeded(f"moment of degree {d} needs truncation levels >= {need}")
    if d % 2:
        return 0j
    tf.check_budget(tf.m)
    X = tf.vacuum()
    for xi in reversed(vectors):
        X = u_m(tf, xi).apply(X)
    return complex(X[0, 0])


def _pair_weights(tf_or_fact, space: DeformedSpace, vectors):
    fact = tf_or_fact.fact if isinstance(tf_or_fact, TensorFock) else tf_or_fact
    vecs = [np.asarray(v, dtype=complex) for v in vectors]
    D = space.D
    pairs = enumerate_pair_partitions(len(vecs))
    for s in pairs:
        for sp in pairs:
            w = fact.q0 ** crossings(s) * fact.q1 ** crossings(sp)
            for r, t in sp.pairs:
                w *= vecs[r - 1] @ D @ vecs[t - 1]
            yield s, sp, complex(w), len(join(s, sp))


def mixed_moment_closed(tf: TensorFock, vectors, m: int | None = None) -> complex:
    """The double pair-partition sum weighted by ``m^{-d/2 + |s v s'|}``."""
    m = tf.m if m is None else m
    d = len(vectors)
    if d % 2:
        return 0j
    return complex(sum(w * float(m) ** (-d / 2 + blocks) for _, _, w, blocks in _pair_weights(tf, tf.space, vectors)))


def limit_moment(space: DeformedSpace, q: float, vectors) -> complex:
    """The ``m -> infinity`` value ``sum_s q^{cr(s)} prod <I xi_r | xi_t>_U``."""
    d = len(vectors)
    if d % 2:
        return 0j
    D = space.D
    vecs = [np.asarray(v, dtype=complex) for v in vectors]
    total = 0j
    for s in enumerate_pair_partitions(d):
        w = q ** crossings(s)
        for r, t in s.pairs:
            w *= vecs[r - 1] @ D @ vecs[t - 1]
        total += w
    return complex(total)


def convergence_constant(fact: FactorizationChoice, space: DeformedSpace, vectors) -> float:
    """``sum_{s != s'} |weight|``: bounds ``m |closed(m) - limit|`` since off-diagonal exponents are <= -1."""
    return float(sum(abs(w) for s, sp, w, _ in _pair_weights(fact, space, vectors) if s != sp))


def convergence_table(space: DeformedSpace, fact: FactorizationChoice, vectors, ms,
                      with_matrix: bool = True, max_cells: int = DEFAULT_MAX_CELLS) -> list[dict]:
    d = len(vectors)
    L = max((d + 1) // 2, 1)
    limit = limit_moment(space, fact.q, vectors)
    c = convergence_constant(fact, space, vectors)
    rows = []
    for m in ms:
        tf = TensorFock(space, fact, m, L, L, max_cells=max_cells)
        closed = mixed_moment_closed(tf, vectors)
        row = {"d": d, "m": m, "q0": fact.q0, "q1": fact.q1, "moment_closed": closed, "chi_limit": limit,
               "abs_error": abs(closed - limit), "bound": c / m}
        if with_matrix:
            row["moment_matrix"] = mixed_moment_matrix(tf, vectors)
        rows.append(row)
    return rows


# -- products and remainders ------------------------------------------------

def _contraction(space: DeformedSpace, a, b) -> complex:
    """``<I a | b>_U``, bilinear in ``a`` and ``b``."""
    return complex(np.asarray(a) @ space.D @ np.asarray(b))


def ws_product(tf: TensorFock, vectors) -> TensorOperator:
    """``W^s(xi_0) W^s(xi_1 ... xi_d)`` computed one level higher and compressed (exact)."""
    aux = tf.with_levels(tf.left.L + 1, tf.right.L + 1)
    prod = ws_word(aux, vectors[:1]) @ ws_word(aux, vectors[1:])
    return prod.compress(tf)


def product_expansion_main(tf: TensorFock, vectors) -> TensorOperator:
    """``W^s(xi_0 ... xi_d) + sum_l q^{l-1} <I xi_0|xi_l>_U W^s(xi without 0 and l)``."""
    out = ws_word(tf, vectors)
    for l in range(1, len(vectors)):
        c = tf.q ** (l - 1) * _contraction(tf.space, vectors[0], vectors[l])
        rest = [v for j, v in enumerate(vectors[1:], start=1) if j != l]
        out = out + c * ws_word(tf, rest)
    return out


def remainder_terms(tf: TensorFock, l: int, vectors) -> tuple[TensorOperator, TensorOperator, TensorOperator]:
    """``(R_{1,l}, R_{2,l}, R_{3,l})`` at ``m = tf.m`` for ``vectors = (xi_0, ..., xi_d)``.

    The sums run over ``k: {0..d} -> [m]`` injective on ``{1..d}`` with
    ``k(l) = k(0)``. In the contraction terms both ``xi_0`` and ``xi_l`` drop out.
    """
    vecs = [np.asarray(v, dtype=complex) for v in vectors]
    d = len(vecs) - 1
    if not 1 <= l <= d:
        raise InvalidArgument(f"l must lie in 1..{d}, got {l}")
    if tf.m < d:
        raise InvalidArgument(f"need m >= d, got m={tf.m}, d={d}")
    if d + 1 > min(tf.left.L, tf.right.L):
        raise TruncationExceeded(f"remainder words of degree {d + 1} exceed the truncation levels")
    R1, R2, R3 = [], [], []
    others = [j for j in range(1, d + 1) if j != l]
    for ks in injective_maps(d, tf.m):
        k = (ks[l - 1],) + ks
        full_left = _left_word(tf, k)
        full_right = _right_word(tf, vecs, k)
        R1.append((1, full_left, full_right))
        R2.append((1, full_left, _right_word(tf, [vecs[j] for j in others], [k[j] for j in others])))
        R3.append((1, _left_word(tf, [k[j] for j in others]), full_right))
    return TensorOperator(tf, R1), TensorOperator(tf, R2), TensorOperator(tf, R3)


def remainder_sum(tf: TensorFock, vectors) -> TensorOperator:
    """``m^{-(d+1)/2} sum_l (R_1 + <I xi_0|xi_l> q1^{l-1} R_2 + q0^{l-1} R_3)``."""
    d = len(vectors) - 1
    scale = tf.m ** (-(d + 1) / 2)
    out = TensorOperator(tf, [])
    for l in range(1, d + 1):
        R1, R2, R3 = remainder_terms(tf, l, vectors)
        c = _contraction(tf.space, vectors[0], vectors[l])
        out = out + scale * (R1 + (c * tf.fact.q1 ** (l - 1)) * R2 + tf.fact.q0 ** (l - 1) * R3)
    return out


def exact_product_identity(tf: TensorFock, vectors) -> TensorOperator:
    """Right-hand side of the finite-m product formula.

    Counting the free index ``k(l)`` gives the contraction terms the factor
    ``1 - (d - 1)/m``; everything else sits in :func:`remainder_sum`.
    """
    d = len(vectors) - 1
    out = ws_word(tf, vectors)
    for l in range(1, d + 1):
        c = tf.q ** (l - 1) * _contraction(tf.space, vectors[0], vectors[l]) * (1 - (d - 1) / tf.m)
        rest = [v for j, v in enumerate(vectors[1:], start=1) if j != l]
        out = out + c * ws_word(tf, rest)
    return out + remainder_sum(tf, vectors)


def product_defect(tf: TensorFock, vectors) -> dict:
    """Norm of ``R = W^s(xi_0)W^s(xi_1..d) - W^s(xi_0..d) - sum_l q^{l-1}<I xi_0|xi_l> W^s(...)``."""
    d = len(vectors) - 1
    if tf.m < d + 1:
        raise InvalidArgument(f"need m >= d + 1, got m={tf.m}")
    R = ws_product(tf, vectors) - product_expansion_main(tf, vectors)
    return {"d": d, "m": tf.m, "defect_norm": tensor_norm(R)}


def decay_table(space: DeformedSpace, fact: FactorizationChoice, vectors, ms, L: int | None = None,
                max_cells: int = DEFAULT_MAX_CELLS) -> list[dict]:
    """Rows ``{d, l, i, m, scaled_remainder_norm}`` with ``m^{-(d+1)/2} ||R_{i,l}(m)||``."""
    d = len(vectors) - 1
    L = d + 1 if L is None else L
    rows = []
    for m in ms:
        tf = TensorFock(space, fact, m, L, L, max_cells=max_cells)
        for l in range(1, d + 1):
            for i, R in enumerate(remainder_terms(tf, l, vectors), start=1):
                rows.append({"d": d, "l": l, "i": i, "m": m,
                             "scaled_remainder_norm": m ** (-(d + 1) / 2) * tensor_norm(R)})
    return rows


def decay_slopes(rows) -> dict[tuple[int, int], float]:
    """Least-squares log-log slope per ``(i, l)``."""
    out = {}
    for key in sorted({(r["i"], r["l"]) for r in rows}):
        sel = [r for r in rows if (r["i"], r["l"]) == key]
        x = np.log([r["m"] for r in sel])
        y = np.log([r["scaled_remainder_norm"] for r in sel])
        out[key] = float(np.polyfit(x, y, 1)[0])
    return out


# -- intertwining and modular covariance ------------------------------------

def intertwining_residual(tf: TensorFock, vectors, n: int) -> float:
    """Bound on ``||(P_n (x) Id) W^s - delta_{n,d} W^s||_F`` on exact columns.

    The left legs are built as literal products of fields (so the Wick
    grading has to be recovered by decomposition). ``tf.left`` must sit at
    least ``d + 1`` so that the degree-``d`` component is below the top level;
    comparison uses left columns of level ``<= L0 - d``.
    """
    vecs = [np.asarray(v, dtype=complex) for v in vectors]
    d = len(vecs)
    L0 = tf.left.L
    if L0 < d + 1:
        raise TruncationExceeded(f"left truncation must be at least {d + 1}")
    ws = ws_word(tf, vecs, literal=False)
    cols = tf.left.levels <= L0 - d
    total = 0.0
    for ks, (c, _, B) in zip(injective_maps(d, tf.m), ws.terms):
        A = _field_product(tf.left, [tf.left_basis(k) for k in ks])
        PA = radial_apply(tf.left, RadialSymbol.delta(n), wick_decompose(tf.left, A, check_below=L0 - d))
        target = A if n == d else None
        diff = PA.M[:, cols].toarray() - (target.M[:, cols].toarray() if target is not None else 0)
        total += abs(c) * np.linalg.norm(diff) * sparse_norm(B.M)
    return float(total)


def _maxabs(x: FockOperator) -> float:
    return float(abs(x.M).max()) if x.M.nnz else 0.0


def right_rotation(tf: TensorFock, t: float) -> tuple[FockOperator, FockOperator]:
    """First quantization of ``A^{-it} (x) 1`` and of its inverse on the right space."""
    V = np.kron(tf.space.power(t), np.eye(tf.m))
    Vi = np.kron(tf.space.power(-t), np.eye(tf.m))
    return (FockOperator(tf.right, first_quantization_matrix(tf.right, V)),
            FockOperator(tf.right, first_quantization_matrix(tf.right, Vi)))


def modular_covariance_residual(tf: TensorFock, xi, t: float) -> float:
    """Largest entrywise gap between ``u_m(A^{-it} xi)`` and the rotated ``u_m(xi)``, termwise."""
    F, Fi = right_rotation(tf, t)
    lhs = u_m(tf, tf.space.power(t) @ np.asarray(xi, dtype=complex))
    rhs = u_m(tf, xi)
    worst = 0.0
    for (c1, A1, B1), (c2, A2, B2) in zip(lhs.terms, rhs.terms):
        worst = max(worst, abs(c1 - c2) + _maxabs(A1 - A2), _maxabs(B1 - F @ B2 @ Fi))
    return float(worst)


def u_m_norm_bound(tf: TensorFock, xi) -> float:
    """``2 (1 - q0)^{-1/2} ||W(xi (x) e_1)||`` with the truncated norm on the right."""
    from .fock import operator_norm

    return 2 / math.sqrt(1 - tf.fact.q0) * operator_norm(wick_one(tf.right, tf.right_vector(xi, 0)))
