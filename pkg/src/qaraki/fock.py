"""Level-truncated q-Fock space in monomial (word) coordinates.

Basis ordering is level-major: the vacuum, then the words of length 1 in
lexicographic order, then the words of length 2, and so on up to the
truncation level ``L``. A word ``(i_1, ..., i_k)`` stands for
``e_{i_1} (x) ... (x) e_{i_k}`` with ``e_i`` the standard basis of the
one-particle space. Inner products between words are given by the q-Gram
matrices ``G_k``; all operators are stored as sparse matrices in the word
coordinates and only :func:`operator_norm` passes to orthonormal coordinates.

Creation into level ``L + 1`` maps to zero. Sums of normal-ordered products
(creations to the left of annihilations) are then exactly the compressions
``P_L X P_L`` of the untruncated operators, while general products of
truncated matrices are only exact on columns far enough below ``L``.
"""

from __future__ import annotations

import itertools
from functools import cached_property, lru_cache

import numpy as np
import scipy.sparse as sps

from .deformed_space import DeformedSpace, is_real
from .errors import InvalidArgument, TruncationExceeded
from .partitions import inversions

DEFAULT_MAX_GRAM_LEVEL = 5


class TruncatedFock:
    """q-Fock space over ``space`` truncated at level ``L``.

    Immutable; Gram matrices and sparsity patterns are computed lazily and
    cached.
    """

    def __init__(self, space: DeformedSpace, q: float, L: int, max_gram_level: int = DEFAULT_MAX_GRAM_LEVEL):
        if not -1 < q < 1:
            raise InvalidArgument(f"q must lie in (-1, 1), got {q}")
        if L < 0:
            raise InvalidArgument("truncation level must be nonnegative")
        self.space = space
        self.q = float(q)
        self.L = int(L)
        self.max_gram_level = max_gram_level
        self.n = space.n
        self.level_dims = tuple(self.n**k for k in range(L + 1))
        self.offsets = tuple(int(x) for x in np.concatenate([[0], np.cumsum(self.level_dims)]))
        self.dim = self.offsets[-1]

    def __repr__(self):
        return f"TruncatedFock(n={self.n}, q={self.q}, L={self.L})"

    def with_level(self, L: int) -> TruncatedFock:
        return _fock_cache(self.space, self.q, L, self.max_gram_level)

    def level_slice(self, k: int) -> slice:
        return slice(self.offsets[k], self.offsets[k + 1])

    @cached_property
    def levels(self) -> np.ndarray:
        return np.repeat(np.arange(self.L + 1), self.level_dims)

    def vacuum(self) -> np.ndarray:
        v = np.zeros(self.dim, dtype=complex)
        v[0] = 1
        return v

    @lru_cache(maxsize=None)
    def words(self, k: int) -> np.ndarray:
        if k == 0:
            return np.zeros((1, 0), dtype=int)
        return np.indices((self.n,) * k).reshape(k, -1).T

    def word_index(self, word) -> int:
        k = len(word)
        if k > self.L:
            raise TruncationExceeded(f"word of length {k} exceeds truncation {self.L}")
        idx = int(np.ravel_multi_index(tuple(word), (self.n,) * k)) if k else 0
        return self.offsets[k] + idx

    @lru_cache(maxsize=None)
    def reversal(self, k: int) -> np.ndarray:
        """Index of the reversed word, for each word of length ``k``."""
        w = self.words(k)[:, ::-1]
        if k == 0:
            return np.zeros(1, dtype=int)
        return np.ravel_multi_index(tuple(w.T), (self.n,) * k)

    # -- Gram matrices -------------------------------------------------

    @lru_cache(maxsize=None)
    def gram(self, k: int) -> np.ndarray:
        """``G_k[i, j] = sum_{s in S_k} q^{inv(s)} prod_l <e_{i_l}|e_{j_s(l)}>_U``."""
        if k > self.max_gram_level:
            raise InvalidArgument(
                f"Gram level {k} exceeds the cap {self.max_gram_level}; "
                "raise max_gram_level explicitly to assemble it by the S_k sum")
        if k == 0:
            return np.ones((1, 1), dtype=complex)
        D = self.space.D
        T = D
        for _ in range(k - 1):
            T = np.kron(T, D)
        N = self.n**k
        T = T.reshape((self.n,) * (2 * k))
        G = np.zeros((N, N), dtype=complex)
        for perm in itertools.permutations(range(k)):
            inv = np.argsort(perm)
            axes = list(range(k)) + [k + int(inv[p]) for p in range(k)]
            G += self.q ** inversions(perm) * T.transpose(axes).reshape(N, N)
        G = (G + G.conj().T) / 2
        G.setflags(write=False)
        return G

    @lru_cache(maxsize=None)
    def _gram_eig(self, k: int):
        w, V = np.linalg.eigh(self.gram(k))
        if w.min() <= 0:
            raise ArithmeticError(f"Gram matrix at level {k} is not positive definite")
        return w, V

    def gram_sqrt(self, k: int) -> np.ndarray:
        w, V = self._gram_eig(k)
        return (V * np.sqrt(w)) @ V.conj().T

    def gram_isqrt(self, k: int) -> np.ndarray:
        w, V = self._gram_eig(k)
        return (V / np.sqrt(w)) @ V.conj().T

    @cached_property
    def gram_full(self) -> sps.csr_array:
        return sps.block_diag([self.gram(k) for k in range(self.L + 1)], format="csr")

    @cached_property
    def ortho(self) -> np.ndarray:
        return _block_diag_dense([self.gram_sqrt(k) for k in range(self.L + 1)])

    @cached_property
    def ortho_inv(self) -> np.ndarray:
        return _block_diag_dense([self.gram_isqrt(k) for k in range(self.L + 1)])

    def inner(self, u, v) -> complex:
        """q-inner product of two Fock vectors given in word coordinates."""
        return complex(np.conj(u) @ (self.gram_full @ v))

    # -- sparsity patterns ---------------------------------------------

    @lru_cache(maxsize=None)
    def _removal_pattern(self, j: int):
        """For each position l in words of length j: (index of word with l removed, letter at l)."""
        W = self.words(j)
        out = []
        for l in range(j):
            rest = np.delete(W, l, axis=1)
            dst = np.ravel_multi_index(tuple(rest.T), (self.n,) * (j - 1)) if j > 1 else np.zeros(len(W), dtype=int)
            out.append((dst, W[:, l]))
        return out

    @lru_cache(maxsize=None)
    def annihilation_string(self, k: int, j: int) -> sps.csr_array:
        """All k-fold annihilations by basis vectors on level j.

        Rows are ``(b_k, ..., b_1, w)`` and columns are words of length j, where
        ``a(e_{b_1}) ... a(e_{b_k})`` maps the column word to ``w``.
        """
        n = self.n
        if k == 0:
            return sps.identity(n**j, dtype=complex, format="csr")
        if k == 1:
            D = self.space.D
            rows, cols, data = [], [], []
            src = np.arange(n**j)
            for l, (dst, letter) in enumerate(self._removal_pattern(j)):
                for b in range(n):
                    coeff = self.q**l * D[b, letter]
                    mask = coeff != 0
                    rows.append(b * n ** (j - 1) + dst[mask])
                    cols.append(src[mask])
                    data.append(coeff[mask])
            return _csr(data, rows, cols, (n**j, n**j))
        inner = sps.kron(sps.identity(n, format="csr"), self.annihilation_string(k - 1, j - 1), format="csr")
        return (inner @ self.annihilation_string(1, j)).tocsr()


@lru_cache(maxsize=64)
def _fock_cache(space, q, L, max_gram_level):
    return TruncatedFock(space, q, L, max_gram_level)


def build_fock(space: DeformedSpace, q: float, L: int, max_gram_level: int = DEFAULT_MAX_GRAM_LEVEL) -> TruncatedFock:
    return _fock_cache(space, float(q), int(L), max_gram_level)


def _csr(data, rows, cols, shape) -> sps.csr_array:
    if data:
        data, rows, cols = np.concatenate(data), np.concatenate(rows), np.concatenate(cols)
    else:
        data, rows, cols = np.zeros(0, complex), np.zeros(0, int), np.zeros(0, int)
    return sps.csr_array((data.astype(complex), (rows, cols)), shape=shape)


def _block_diag_dense(blocks) -> np.ndarray:
    n = sum(b.shape[0] for b in blocks)
    out = np.zeros((n, n), dtype=complex)
    i = 0
    for b in blocks:
        out[i:i + len(b), i:i + len(b)] = b
        i += len(b)
    return out


class FockOperator:
    """A (sparse) matrix acting on a :class:`TruncatedFock` in word coordinates."""

    __array_priority__ = 1000

    def __init__(self, fock: TruncatedFock, M):
        M = sps.csr_array(M, dtype=complex) if not sps.issparse(M) else sps.csr_array(M, dtype=complex)
        if M.shape != (fock.dim, fock.dim):
            raise InvalidArgument(f"matrix shape {M.shape} does not match Fock dimension {fock.dim}")
        self.fock = fock
        self.M = M

    def __repr__(self):
        return f"FockOperator({self.fock!r}, nnz={self.M.nnz})"

    def _check(self, other):
        if other.fock.dim != self.fock.dim or other.fock.space is not self.fock.space or other.fock.q != self.fock.q:
            raise InvalidArgument("operators live on different Fock spaces")

    def __add__(self, other):
        if isinstance(other, FockOperator):
            self._check(other)
            return FockOperator(self.fock, self.M + other.M)
        return NotImplemented

    def __sub__(self, other):
        if isinstance(other, FockOperator):
            self._check(other)
            return FockOperator(self.fock, self.M - other.M)
        return NotImplemented

    def __neg__(self):
        return FockOperator(self.fock, -self.M)

    def __mul__(self, c):
        if np.isscalar(c):
            return FockOperator(self.fock, self.M * c)
        return NotImplemented

    __rmul__ = __mul__

    def __matmul__(self, other):
        if isinstance(other, FockOperator):
            self._check(other)
            return FockOperator(self.fock, self.M @ other.M)
        return self.M @ np.asarray(other)

    def dense(self) -> np.ndarray:
        return self.M.toarray()

    def apply(self, v) -> np.ndarray:
        return self.M @ np.asarray(v, dtype=complex)

    def adjoint(self) -> FockOperator:
        """Adjoint with respect to the q-inner product: ``G^{-1} M^H G``."""
        G = self.fock.gram_full
        Ginv = sps.block_diag([np.linalg.inv(self.fock.gram(k)) for k in range(self.fock.L + 1)], format="csr")
        return FockOperator(self.fock, Ginv @ self.M.conj().T @ G)

    def compress(self, fock: TruncatedFock) -> FockOperator:
        """Restriction to the levels of a smaller truncation of the same space."""
        if fock.space is not self.fock.space or fock.q != self.fock.q or fock.L > self.fock.L:
            raise InvalidArgument("can only compress to a lower truncation of the same space")
        return FockOperator(fock, self.M[: fock.dim, : fock.dim])

    def lift(self, fock: TruncatedFock) -> FockOperator:
        """Zero-padded embedding into a higher truncation (inverse of compress on its range)."""
        if fock.space is not self.fock.space or fock.q != self.fock.q or fock.L < self.fock.L:
            raise InvalidArgument("can only lift to a higher truncation of the same space")
        M = sps.csr_array((self.M.tocoo().data, (self.M.tocoo().row, self.M.tocoo().col)), shape=(fock.dim, fock.dim))
        return FockOperator(fock, M)

    def block(self, row_level: int, col_level: int) -> np.ndarray:
        f = self.fock
        return self.M[f.level_slice(row_level), f.level_slice(col_level)].toarray()


def identity(f: TruncatedFock) -> FockOperator:
    return FockOperator(f, sps.identity(f.dim, dtype=complex, format="csr"))


def zero(f: TruncatedFock) -> FockOperator:
    return FockOperator(f, sps.csr_array((f.dim, f.dim), dtype=complex))


def _vector(f: TruncatedFock, xi) -> np.ndarray:
    xi = np.asarray(xi, dtype=complex)
    if xi.shape != (f.n,):
        raise InvalidArgument(f"expected a one-particle vector of length {f.n}, got shape {xi.shape}")
    return xi


def creation(f: TruncatedFock, xi) -> FockOperator:
    """``a*(xi)``: prepends ``xi``; the top level ``L`` is killed."""
    xi = _vector(f, xi)
    rows, cols, data = [], [], []
    for j in range(f.L):
        nj = f.level_dims[j]
        base = np.arange(nj)
        for i in np.flatnonzero(xi):
            rows.append(f.offsets[j + 1] + i * nj + base)
            cols.append(f.offsets[j] + base)
            data.append(np.full(nj, xi[i]))
    return FockOperator(f, _csr(data, rows, cols, (f.dim, f.dim)))


def annihilation(f: TruncatedFock, xi) -> FockOperator:
    """``a(xi)`` by the explicit sum over removed positions.

    ``a(xi) e_{i_1} (x) ... (x) e_{i_k} = sum_l q^{l-1} <xi|e_{i_l}>_U (word without l)``;
    conjugate-linear in ``xi``.
    """
    xi = _vector(f, xi)
    c = xi.conj() @ f.space.D
    rows, cols, data = [], [], []
    for j in range(1, f.L + 1):
        src = f.offsets[j] + np.arange(f.level_dims[j])
        for l, (dst, letter) in enumerate(f._removal_pattern(j)):
            coeff = f.q**l * c[letter]
            mask = coeff != 0
            rows.append(f.offsets[j - 1] + dst[mask])
            cols.append(src[mask])
            data.append(coeff[mask])
    return FockOperator(f, _csr(data, rows, cols, (f.dim, f.dim)))


def field(f: TruncatedFock, xi) -> FockOperator:
    """``s_q(xi) = a*(xi) + a(xi)`` for real ``xi``."""
    xi = _vector(f, xi)
    if not is_real(xi):
        raise InvalidArgument("field operators need a real (I-fixed) vector")
    return creation(f, xi) + annihilation(f, xi)


def wick_one(f: TruncatedFock, xi) -> FockOperator:
    """Degree-one Wick word ``W(xi) = a*(xi) + a(I xi)`` for complex ``xi``."""
    xi = _vector(f, xi)
    return creation(f, xi) + annihilation(f, xi.conj())


def normal_ordered(f: TruncatedFock, Z, p: int, k: int) -> FockOperator:
    """``sum_{a, b} Z[a, b] a*(e_{a_1}) ... a*(e_{a_p}) a(e_{b_1}) ... a(e_{b_k})``.

    ``Z`` has shape ``(n^p, n^k)`` with rows indexed by creation words and
    columns by annihilation words.
    """
    n = f.n
    Z = np.asarray(Z, dtype=complex).reshape(n**p, n**k)
    Zrev = sps.csr_array(Z[:, f.reversal(k)])
    rows, cols, data = [], [], []
    for j in range(k, f.L + 1):
        target = p + j - k
        if target > f.L:
            break
        block = sps.kron(Zrev, sps.identity(n ** (j - k), format="csr"), format="csr") @ f.annihilation_string(k, j)
        block = block.tocoo()
        rows.append(f.offsets[target] + block.row)
        cols.append(f.offsets[j] + block.col)
        data.append(block.data)
    return FockOperator(f, _csr(data, rows, cols, (f.dim, f.dim)))


def first_quantization_matrix(f: TruncatedFock, T) -> sps.csr_array:
    """Levelwise ``T^{(x)k}`` in word coordinates."""
    T = np.asarray(T, dtype=complex)
    blocks = [np.ones((1, 1), dtype=complex)]
    cur = np.ones((1, 1), dtype=complex)
    for _ in range(f.L):
        cur = np.kron(T, cur) if cur.size > 1 else T.copy()
        blocks.append(cur)
    return sps.block_diag(blocks, format="csr")


def vacuum_expectation(x: FockOperator) -> complex:
    return complex(x.M[0, 0])


def operator_norm(x: FockOperator) -> float:
    """Largest singular value in orthonormalized coordinates.

    A lower bound for the norm of the untruncated operator whenever ``x`` is a
    compression.
    """
    f = x.fock
    B = f.ortho @ (x.M @ f.ortho_inv)
    return float(np.linalg.norm(B, 2))


def amplified_norm(f: TruncatedFock, blocks) -> float:
    """Norm of an ``N x N`` block matrix of operators on ``f``."""
    N = len(blocks)
    M = sps.bmat([[b.M for b in row] for row in blocks], format="csr")
    S = np.kron(np.eye(N), f.ortho)
    Si = np.kron(np.eye(N), f.ortho_inv)
    return float(np.linalg.norm(S @ (M @ Si), 2))


def level_components(f: TruncatedFock, v) -> list[np.ndarray]:
    v = np.asarray(v)
    return [v[f.level_slice(k)] for k in range(f.L + 1)]


def vector_norm(f: TruncatedFock, v) -> float:
    return float(np.sqrt(max(f.inner(v, v).real, 0.0)))
