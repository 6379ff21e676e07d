"""Linear algebra over GF(2).

Dense matrices are stored row-major and bit-packed into ``uint64`` words.
Vectors are plain ``numpy`` arrays of 0/1 (``uint8``).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

WORD = 64


class InconsistentSystemError(ValueError):
    """Raised when ``m @ e = s`` has no solution over GF(2)."""


def _n_words(cols: int) -> int:
    return (cols + WORD - 1) // WORD


def pack_rows(dense: np.ndarray) -> np.ndarray:
    """Pack a 2-D 0/1 array into ``uint64`` words, little-endian within a word."""
    dense = np.asarray(dense, dtype=np.uint8) & 1
    rows, cols = dense.shape
    nw = _n_words(cols)
    padded = np.zeros((rows, nw * WORD), dtype=np.uint8)
    padded[:, :cols] = dense
    packed = np.packbits(padded, axis=1, bitorder="little")
    return np.ascontiguousarray(packed).view(np.uint64).reshape(rows, nw)


def unpack_rows(words: np.ndarray, cols: int) -> np.ndarray:
    rows = words.shape[0]
    as_bytes = np.ascontiguousarray(words).view(np.uint8).reshape(rows, -1)
    return np.unpackbits(as_bytes, axis=1, bitorder="little")[:, :cols]


class BitMatrix:
    """Bit-packed binary matrix.

    ``words`` has shape ``(rows, ceil(cols / 64))`` and all padding bits are
    zero. Instances are treated as immutable; every operation returns a new
    matrix.
    """

    __slots__ = ("rows", "cols", "words")

    def __init__(self, rows: int, cols: int, words: np.ndarray | None = None):
        self.rows = int(rows)
        self.cols = int(cols)
        nw = _n_words(self.cols)
        if words is None:
            words = np.zeros((self.rows, nw), dtype=np.uint64)
        words = np.asarray(words, dtype=np.uint64)
        if words.shape != (self.rows, nw):
            raise ValueError(f"payload shape {words.shape} != {(self.rows, nw)}")
        self.words = words

    # construction -----------------------------------------------------
    @classmethod
    def from_dense(cls, dense) -> "BitMatrix":
        dense = np.atleast_2d(np.asarray(dense))
        if dense.ndim != 2:
            raise ValueError("expected a 2-D array")
        return cls(dense.shape[0], dense.shape[1], pack_rows(dense))

    @classmethod
    def zeros(cls, rows: int, cols: int) -> "BitMatrix":
        return cls(rows, cols)

    @classmethod
    def identity(cls, n: int) -> "BitMatrix":
        return cls.from_dense(np.eye(n, dtype=np.uint8))

    @classmethod
    def from_supports(cls, cols: int, supports: Iterable[Sequence[int]]) -> "BitMatrix":
        supports = list(supports)
        dense = np.zeros((len(supports), cols), dtype=np.uint8)
        for r, s in enumerate(supports):
            for c in s:
                dense[r, c] ^= 1
        return cls.from_dense(dense)

    # views ------------------------------------------------------------
    def to_dense(self) -> np.ndarray:
        if self.rows == 0:
            return np.zeros((0, self.cols), dtype=np.uint8)
        return unpack_rows(self.words, self.cols)

    @property
    def shape(self) -> tuple[int, int]:
        return self.rows, self.cols

    def row(self, i: int) -> np.ndarray:
        return unpack_rows(self.words[i : i + 1], self.cols)[0]

    def row_support(self, i: int) -> list[int]:
        return np.flatnonzero(self.row(i)).tolist()

    def transpose(self) -> "BitMatrix":
        return BitMatrix.from_dense(self.to_dense().T)

    @property
    def T(self) -> "BitMatrix":
        return self.transpose()

    def is_zero(self) -> bool:
        return not self.words.any()

    def weight(self) -> np.ndarray:
        """Hamming weight of every row."""
        return self.to_dense().sum(axis=1)

    def vstack(self, other: "BitMatrix") -> "BitMatrix":
        if other.cols != self.cols:
            raise ValueError("column mismatch")
        return BitMatrix(self.rows + other.rows, self.cols, np.vstack([self.words, other.words]))

    def hstack(self, other: "BitMatrix") -> "BitMatrix":
        if other.rows != self.rows:
            raise ValueError("row mismatch")
        return BitMatrix.from_dense(np.hstack([self.to_dense(), other.to_dense()]))

    def take_columns(self, cols: Sequence[int]) -> "BitMatrix":
        return BitMatrix.from_dense(self.to_dense()[:, list(cols)])

    def take_rows(self, rows: Sequence[int]) -> "BitMatrix":
        rows = list(rows)
        return BitMatrix(len(rows), self.cols, self.words[rows].copy())

    def __matmul__(self, other: "BitMatrix") -> "BitMatrix":
        return matmul(self, other)

    def __eq__(self, other) -> bool:
        if not isinstance(other, BitMatrix):
            return NotImplemented
        return self.shape == other.shape and np.array_equal(self.words, other.words)

    def __hash__(self):
        return hash((self.rows, self.cols, self.words.tobytes()))

    def __repr__(self) -> str:
        return f"BitMatrix({self.rows}x{self.cols})"


def matmul(a: BitMatrix, b: BitMatrix) -> BitMatrix:
    if a.cols != b.rows:
        raise ValueError(f"dimension mismatch: {a.shape} @ {b.shape}")
    # float BLAS is exact here: inner sums stay far below 2**53
    prod = a.to_dense().astype(np.float64) @ b.to_dense().astype(np.float64)
    return BitMatrix.from_dense(np.fmod(prod, 2.0).astype(np.uint8))


def mat_vec(a: BitMatrix, v) -> np.ndarray:
    v = np.asarray(v, dtype=np.uint8) & 1
    if v.shape != (a.cols,):
        raise ValueError("vector length mismatch")
    return (a.to_dense().astype(np.int64) @ v.astype(np.int64) % 2).astype(np.uint8)


def rref(m: BitMatrix) -> tuple[BitMatrix, list[int]]:
    """Reduced row echelon form with leftmost-pivot selection.

    Returns the reduced matrix (zero rows last) and the pivot column of each
    nonzero row.
    """
    w = m.words.copy()
    pivots: list[int] = []
    r = 0
    for c in range(m.cols):
        if r == m.rows:
            break
        word, bit = c // WORD, np.uint64(1 << (c % WORD))
        col = (w[:, word] & bit) != 0
        below = np.flatnonzero(col[r:])
        if below.size == 0:
            continue
        p = r + below[0]
        if p != r:
            w[[r, p]] = w[[p, r]]
            col[[r, p]] = col[[p, r]]
        col[r] = False
        if col.any():
            w[col] ^= w[r]
        pivots.append(c)
        r += 1
    return BitMatrix(m.rows, m.cols, w), pivots


def rank(m: BitMatrix) -> int:
    return len(rref(m)[1])


def nullspace_basis(m: BitMatrix) -> BitMatrix:
    """Basis of the right kernel ``{v : m v = 0}``, one vector per row."""
    red, pivots = rref(m)
    dense = red.to_dense()
    free = [c for c in range(m.cols) if c not in set(pivots)]
    basis = np.zeros((len(free), m.cols), dtype=np.uint8)
    for i, f in enumerate(free):
        basis[i, f] = 1
        for r, pc in enumerate(pivots):
            basis[i, pc] = dense[r, f]
    return BitMatrix.from_dense(basis) if free else BitMatrix(0, m.cols)


def row_basis(m: BitMatrix) -> BitMatrix:
    """Independent rows spanning the row space of ``m`` (in RREF)."""
    red, pivots = rref(m)
    return red.take_rows(range(len(pivots)))


def solve_affine(m: BitMatrix, s) -> np.ndarray:
    """Return some ``e`` with ``m @ e == s``.

    Free variables are set to zero.

    Raises:
        InconsistentSystemError: if ``s`` is outside the column space.
    """
    s = np.asarray(s, dtype=np.uint8) & 1
    if s.shape != (m.rows,):
        raise ValueError("syndrome length mismatch")
    aug = BitMatrix.from_dense(np.hstack([m.to_dense(), s[:, None]]))
    red, pivots = rref(aug)
    if pivots and pivots[-1] == m.cols:
        raise InconsistentSystemError("right-hand side is not in the column space")
    dense = red.to_dense()
    e = np.zeros(m.cols, dtype=np.uint8)
    for r, pc in enumerate(pivots):
        e[pc] = dense[r, m.cols]
    return e


def inverse(m: BitMatrix) -> BitMatrix:
    n = m.rows
    if m.cols != n:
        raise ValueError("matrix is not square")
    aug = BitMatrix.from_dense(np.hstack([m.to_dense(), np.eye(n, dtype=np.uint8)]))
    red, pivots = rref(aug)
    if pivots[:n] != list(range(n)) or len(pivots) < n:
        raise ValueError("matrix is singular")
    return BitMatrix.from_dense(red.to_dense()[:, n:])


def in_row_space(basis: BitMatrix, vectors: BitMatrix) -> np.ndarray:
    """For each row of ``vectors``, whether it lies in the row space of ``basis``."""
    r0 = rank(basis)
    out = np.zeros(vectors.rows, dtype=bool)
    for i in range(vectors.rows):
        out[i] = rank(basis.vstack(vectors.take_rows([i]))) == r0
    return out


@dataclass(frozen=True)
class SparseIndexMatrix:
    """Binary matrix as per-row sorted column indices (CSR layout)."""

    rows: int
    cols: int
    indptr: np.ndarray
    indices: np.ndarray

    def __post_init__(self):
        if len(self.indptr) != self.rows + 1:
            raise ValueError("indptr length must be rows + 1")
        for r in range(self.rows):
            seg = self.indices[self.indptr[r] : self.indptr[r + 1]]
            if seg.size and (np.any(np.diff(seg) <= 0) or seg[-1] >= self.cols or seg[0] < 0):
                raise ValueError(f"row {r} indices must be strictly increasing and < cols")

    @classmethod
    def from_rows(cls, cols: int, rows: Sequence[Iterable[int]]) -> "SparseIndexMatrix":
        indptr = [0]
        indices: list[int] = []
        for r in rows:
            seg = sorted(set(int(c) for c in r))
            indices.extend(seg)
            indptr.append(len(indices))
        return cls(len(indptr) - 1, cols, np.asarray(indptr, dtype=np.int64), np.asarray(indices, dtype=np.int64))

    @classmethod
    def from_dense(cls, dense) -> "SparseIndexMatrix":
        dense = np.asarray(dense) & 1
        return cls.from_rows(dense.shape[1], [np.flatnonzero(r) for r in dense])

    def row(self, r: int) -> np.ndarray:
        return self.indices[self.indptr[r] : self.indptr[r + 1]]

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.rows, self.cols), dtype=np.uint8)
        for r in range(self.rows):
            out[r, self.row(r)] = 1
        return out

    def transpose(self) -> "SparseIndexMatrix":
        cols: list[list[int]] = [[] for _ in range(self.cols)]
        for r in range(self.rows):
            for c in self.row(r):
                cols[c].append(r)
        return SparseIndexMatrix.from_rows(self.rows, cols)

    def to_bitmatrix(self) -> BitMatrix:
        return BitMatrix.from_dense(self.to_dense())

    @property
    def nnz(self) -> int:
        return int(self.indptr[-1])
