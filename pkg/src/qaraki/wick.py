"""Wick words, pair-partition moments, Wick decompositions and radial multipliers.

Three routes lead to a Wick word ``W(xi)``:

* :func:`wick_direct` sums products of creation and annihilation matrices over
  all splits of the index set;
* :func:`wick_recursive` runs the product recursion on a higher auxiliary
  truncation and compresses back;
* :func:`wick_word` assembles the normal-ordered blocks from the split tensors
  directly and is the one used by everything downstream.

All three return exact compressions of the untruncated operator.
"""

from __future__ import annotations

from dataclasses import dataclass
from dataclasses import field as dc_field
from typing import Callable, Mapping

import numpy as np

from .deformed_space import is_real
from .errors import InvalidArgument, NotInWickSpan, TruncationExceeded
from .fock import (
    FockOperator,
    TruncatedFock,
    amplified_norm,
    annihilation,
    creation,
    identity,
    wick_one,
    zero,
)
from .khintchine import as_tensor, wick_from_splits
from .partitions import crossings, enumerate_pair_partitions, split_indices, split_inversions


def _degree_of(f: TruncatedFock, xi) -> int:
    if isinstance(xi, (list, tuple)):
        return len(xi)
    return as_tensor(f.n, xi).ndim


def _check_degree(f: TruncatedFock, d: int):
    if d > f.L:
        raise TruncationExceeded(f"Wick word of degree {d} exceeds truncation level {f.L}")


def _product(ops, f):
    out = None
    for op in ops:
        out = op if out is None else out @ op
    return identity(f) if out is None else out


def wick_direct(f: TruncatedFock, xi) -> FockOperator:
    """Literal split sum ``sum q^{i(I1,I2)} a*(e_{I1}) a(I e_{I2})``.

    ``xi`` is a list of vectors (a simple tensor) or a coefficient tensor, in
    which case the formula is applied to every basis word and summed.
    """
    d = _degree_of(f, xi)
    _check_degree(f, d)
    if isinstance(xi, (list, tuple)):
        vecs = [np.asarray(v, dtype=complex) for v in xi]
        cre = [creation(f, v) for v in vecs]
        ann = [annihilation(f, v.conj()) for v in vecs]
        return _split_sum(f, d, cre, ann)
    T = as_tensor(f.n, xi)
    if d == 0:
        return complex(T) * identity(f)
    basis = np.eye(f.n)
    cre_b = [creation(f, e) for e in basis]
    ann_b = [annihilation(f, e) for e in basis]
    out = zero(f)
    for word in zip(*np.nonzero(T)):
        cre = [cre_b[i] for i in word]
        ann = [ann_b[i] for i in word]
        out = out + complex(T[word]) * _split_sum(f, d, cre, ann)
    return out


def _split_sum(f, d, cre, ann):
    out = zero(f)
    for k in range(d + 1):
        for s in split_indices(d, k):
            ops = [cre[i - 1] for i in s.I1] + [ann[j - 1] for j in s.I2]
            out = out + f.q ** split_inversions(s) * _product(ops, f)
    return out


def wick_recursive(f: TruncatedFock, vectors) -> FockOperator:
    """Build ``W(xi_0 ... xi_d)`` by peeling off the first vector.

    Products of truncated matrices lose exactness near the top level, so the
    recursion runs on the truncation ``L + d`` and the result is compressed.
    """
    vecs = [np.asarray(v, dtype=complex) for v in vectors]
    d = len(vecs)
    _check_degree(f, d)
    aux = f.with_level(f.L + d)
    D = f.space.D
    ones = {i: wick_one(aux, v) for i, v in enumerate(vecs)}
    memo: dict[tuple[int, ...], FockOperator] = {(): identity(aux)}

    def W(idx: tuple[int, ...]) -> FockOperator:
        if idx in memo:
            return memo[idx]
        if len(idx) == 1:
            memo[idx] = ones[idx[0]]
            return memo[idx]
        head, rest = idx[0], idx[1:]
        out = ones[head] @ W(rest)
        for l in range(1, len(idx)):
            c = complex(vecs[head] @ D @ vecs[idx[l]])
            if c != 0:
                out = out - (f.q ** (l - 1) * c) * W(rest[: l - 1] + rest[l:])
        memo[idx] = out
        return out

    return W(tuple(range(d))).compress(f)


def wick_word(f: TruncatedFock, xi) -> FockOperator:
    """``W(xi)`` assembled block by block from the split tensors of ``xi``."""
    d = _degree_of(f, xi)
    _check_degree(f, d)
    return wick_from_splits(f, d, as_tensor(f.n, xi) if isinstance(xi, (list, tuple)) else xi)


def amplified_wick(f: TruncatedFock, xi) -> list[list[FockOperator]]:
    """``(Id (x) W)(xi)`` for a tensor with ``N x N`` matrix coefficients (shape ``(N, N, n, ..., n)``)."""
    xi = np.asarray(xi, dtype=complex)
    d = xi.ndim - 2
    _check_degree(f, d)
    return wick_from_splits(f, d, xi)


def moment(f: TruncatedFock, vectors) -> complex:
    """Vacuum moment of fields by the pair-partition sum (no matrices involved)."""
    vecs = [np.asarray(v, dtype=complex) for v in vectors]
    if not all(is_real(v) for v in vecs):
        raise InvalidArgument("moments of fields need real vectors")
    D = f.space.D
    total = 0j
    for sigma in enumerate_pair_partitions(len(vecs)):
        w = f.q ** crossings(sigma)
        for r, t in sigma.pairs:
            w *= vecs[r - 1] @ D @ vecs[t - 1]
        total += w
    return complex(total)


@dataclass
class WickDecomposition:
    """Degree-homogeneous coefficient tensors, each of shape ``(n,)*d``."""

    components: dict[int, np.ndarray] = dc_field(default_factory=dict)

    @property
    def degrees(self) -> list[int]:
        return sorted(self.components)

    @property
    def max_degree(self) -> int:
        return max(self.components, default=0)

    def reassemble(self, f: TruncatedFock) -> FockOperator:
        out = zero(f)
        for d in self.degrees:
            out = out + wick_word(f, self.components[d])
        return out

    def vacuum_vector(self, f: TruncatedFock) -> np.ndarray:
        v = np.zeros(f.dim, dtype=complex)
        for d, t in self.components.items():
            v[f.level_slice(d)] = t.reshape(-1)
        return v

    def scaled(self, phi: Callable[[int], complex]) -> WickDecomposition:
        return WickDecomposition({d: phi(d) * t for d, t in self.components.items() if phi(d) != 0})

    def __add__(self, other: WickDecomposition) -> WickDecomposition:
        out = dict(self.components)
        for d, t in other.components.items():
            out[d] = out[d] + t if d in out else t
        return WickDecomposition(out)

    def to_json(self) -> dict:
        return {str(d): {"re": t.real.reshape(-1).tolist(), "im": t.imag.reshape(-1).tolist()}
                for d, t in self.components.items()}


def decomposition_from_vector(f: TruncatedFock, v, atol: float = 1e-14) -> WickDecomposition:
    """Split ``x Omega`` by level; negligible levels are dropped."""
    v = np.asarray(v, dtype=complex)
    scale = max(np.abs(v).max(initial=0.0), 1.0)
    comps = {}
    for d in range(f.L + 1):
        block = v[f.level_slice(d)]
        if np.abs(block).max(initial=0.0) > atol * scale:
            comps[d] = block.reshape((f.n,) * d)
    return WickDecomposition(comps)


def wick_decompose(f: TruncatedFock, x: FockOperator, check_below: int | None = None,
                   rel_tol: float = 1e-8) -> WickDecomposition:
    """Recover ``{xi_d}`` with ``x = sum_d W(xi_d)`` from ``x Omega``.

    The reassembly is compared on the columns of level at most ``check_below``
    (default ``L - max degree``); a truncated product of ``r`` factors is only
    exact on columns of level ``<= L - r``.
    """
    if x.fock is not f and x.fock.dim != f.dim:
        raise InvalidArgument("operator lives on a different Fock space")
    dec = decomposition_from_vector(f, x.M[:, [0]].toarray().ravel())
    limit = f.L - dec.max_degree if check_below is None else check_below
    cols = f.levels <= limit
    X = x.M[:, cols].toarray()
    R = dec.reassemble(f).M[:, cols].toarray()
    scale = max(np.linalg.norm(X), 1e-300)
    residual = np.linalg.norm(X - R) / scale
    if residual > rel_tol:
        raise NotInWickSpan(f"reassembly residual {residual:.3e} exceeds {rel_tol:.1e}")
    return dec


def wick_product(f: TruncatedFock, x: WickDecomposition, y: WickDecomposition) -> WickDecomposition:
    """Decomposition of ``W(x) W(y)`` computed exactly from ``W(x) (y Omega)``.

    Uses an auxiliary truncation high enough that nothing is cut off.
    """
    top = x.max_degree + y.max_degree
    if top > f.L:
        raise TruncationExceeded(f"product of degree {top} exceeds truncation {f.L}")
    aux = f.with_level(max(top, 1))
    v = x.reassemble(aux).apply(y.vacuum_vector(aux))
    dec = decomposition_from_vector(aux, v)
    return WickDecomposition({d: t for d, t in dec.components.items()})


def wick_adjoint(x: WickDecomposition) -> WickDecomposition:
    """``W(xi)^* = W(conj(reverse(xi)))`` degreewise."""
    return WickDecomposition({d: np.conj(t.transpose(tuple(range(d))[::-1])) for d, t in x.components.items()})


@dataclass(frozen=True)
class RadialSymbol:
    """A bounded function ``phi`` on degrees."""

    phi: Callable[[int], complex]
    name: str = "phi"

    def __call__(self, d: int) -> complex:
        return self.phi(d)

    @classmethod
    def delta(cls, n: int) -> RadialSymbol:
        return cls(lambda d: 1.0 if d == n else 0.0, f"delta_{n}")

    @classmethod
    def indicator(cls, n: int) -> RadialSymbol:
        return cls(lambda d: 1.0 if d <= n else 0.0, f"indicator_{n}")

    @classmethod
    def ones(cls) -> RadialSymbol:
        return cls(lambda d: 1.0, "ones")

    @classmethod
    def from_values(cls, values: Mapping[int, complex], default: complex = 0.0) -> RadialSymbol:
        values = dict(values)
        return cls(lambda d: values.get(d, default), "table")


def radial_apply(f: TruncatedFock, phi: RadialSymbol, x) -> FockOperator:
    """``sum_d phi(d) W(xi_d)``; ``x`` is an operator or a decomposition.

    Components of degree ``L`` are refused: at the top level they cannot be
    told apart from truncation loss.
    """
    dec = x if isinstance(x, WickDecomposition) else wick_decompose(f, x)
    if f.L in dec.components:
        raise TruncationExceeded(f"component of degree {f.L} sits at the truncation level")
    return dec.scaled(phi).reassemble(f)


# -- amplified samples and multiplier ratios -------------------------------

@dataclass
class AmplifiedSample:
    """``sum_d c_d (x) W(xi_d)`` stored as ``{d: tensor of shape (N, N, n, ..., n)}``."""

    terms: dict[int, np.ndarray]
    label: str = ""

    @property
    def N(self) -> int:
        return next(iter(self.terms.values())).shape[0]

    def entry(self, i: int, j: int) -> WickDecomposition:
        return WickDecomposition({d: t[i, j] for d, t in self.terms.items() if np.any(t[i, j])})

    def operator_blocks(self, f: TruncatedFock) -> list[list[FockOperator]]:
        N = self.N
        return [[self.entry(i, j).reassemble(f) for j in range(N)] for i in range(N)]


def basis_samples(f: TruncatedFock, max_degree: int, N: int = 1) -> list[AmplifiedSample]:
    """Every basis Wick word up to ``max_degree``, with identity coefficients."""
    out = []
    for d in range(max_degree + 1):
        for word in f.words(d):
            t = np.zeros((N, N) + (f.n,) * d, dtype=complex)
            for i in range(N):
                t[(i, i) + tuple(word)] = 1
            out.append(AmplifiedSample({d: t}, "basis:" + "".join(map(str, word))))
    return out


def random_samples(f: TruncatedFock, rng: np.random.Generator, count: int, max_degree: int,
                   N: int = 1) -> list[AmplifiedSample]:
    """Complex Gaussian Wick polynomials with matrix coefficients."""
    out = []
    for c in range(count):
        terms = {}
        for d in range(max_degree + 1):
            shape = (N, N) + (f.n,) * d
            terms[d] = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        out.append(AmplifiedSample(terms, f"random:{c}"))
    return out


def multiplier_ratio(f: TruncatedFock, phi: RadialSymbol, sample: AmplifiedSample) -> float:
    """``||(Id (x) m_phi)(x)|| / ||x||`` with ``m_phi`` applied entrywise through decompositions."""
    blocks = sample.operator_blocks(f)
    N = len(blocks)
    image = [[radial_apply(f, phi, blocks[i][j]) for j in range(N)] for i in range(N)]
    denom = amplified_norm(f, blocks)
    return amplified_norm(f, image) / denom if denom > 0 else 0.0


def sampled_multiplier_ratio(f: TruncatedFock, phi: RadialSymbol, samples, N: int | None = None) -> float:
    """Maximum of :func:`multiplier_ratio` over ``samples``."""
    if N is not None and N < 1:
        raise InvalidArgument("amplification must be at least 1")
    return max(multiplier_ratio(f, phi, s) for s in samples)
