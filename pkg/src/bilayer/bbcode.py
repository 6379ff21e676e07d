"""Bivariate bicycle codes: construction, logical operators, distance search.

A code is fixed by two cyclic orders ``ell`` and ``em`` and two polynomials
``A = A1 + A2 + A3`` and ``B = B1 + B2 + B3`` whose terms are powers of the
commuting shifts ``x = S_ell (x) I_em`` and ``y = I_ell (x) S_em``. Qubits
``0 .. ell*em - 1`` form the left ("L") block acted on by ``A`` in the X
checks, the rest form the right ("R") block.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import gf2
from .gf2 import BitMatrix

Element = tuple[int, int]


@dataclass(frozen=True)
class MonomialTerm:
    axis: str
    exponent: int

    def __post_init__(self):
        if self.axis not in ("x", "y"):
            raise ValueError(f"axis must be 'x' or 'y', got {self.axis!r}")
        if self.exponent < 0:
            raise ValueError("exponent must be non-negative")

    def element(self, ell: int, em: int) -> Element:
        """The term as an element of Z_ell x Z_em."""
        if self.axis == "x":
            return (self.exponent % ell, 0)
        return (0, self.exponent % em)

    def reduced(self, ell: int, em: int) -> "MonomialTerm":
        order = ell if self.axis == "x" else em
        return MonomialTerm(self.axis, self.exponent % order)

    def __str__(self) -> str:
        return "1" if self.exponent == 0 else f"{self.axis}{self.exponent}"


def _parse_term(tok: str) -> MonomialTerm:
    tok = tok.strip().replace("^", "")
    if tok == "1":
        return MonomialTerm("x", 0)
    m = re.fullmatch(r"([xy])(\d*)", tok)
    if not m:
        raise ValueError(f"cannot parse monomial {tok!r}")
    return MonomialTerm(m.group(1), int(m.group(2) or 1))


@dataclass(frozen=True)
class BBCodeSpec:
    ell: int
    em: int
    a_terms: tuple[MonomialTerm, MonomialTerm, MonomialTerm]
    b_terms: tuple[MonomialTerm, MonomialTerm, MonomialTerm]

    def __post_init__(self):
        if self.ell < 1 or self.em < 1:
            raise ValueError("ell and em must be positive")
        a = tuple(t.reduced(self.ell, self.em) for t in self.a_terms)
        b = tuple(t.reduced(self.ell, self.em) for t in self.b_terms)
        if len(a) != 3 or len(b) != 3:
            raise ValueError("each polynomial needs exactly three terms")
        object.__setattr__(self, "a_terms", a)
        object.__setattr__(self, "b_terms", b)
        for name, terms in (("A", a), ("B", b)):
            elems = [t.element(self.ell, self.em) for t in terms]
            if len(set(elems)) != 3:
                raise ValueError(f"terms of {name} collide after reduction: {' + '.join(map(str, terms))}")

    @classmethod
    def parse(cls, text: str) -> "BBCodeSpec":
        """Parse ``ell=12 m=3 A=x9+y1+y2 B=1+x1+x11``."""
        fields = dict(tok.split("=", 1) for tok in text.split())
        try:
            ell = int(fields["ell"])
            em = int(fields.get("m", fields.get("em")))
            a = tuple(_parse_term(t) for t in fields["A"].split("+"))
            b = tuple(_parse_term(t) for t in fields["B"].split("+"))
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed code spec {text!r}") from exc
        return cls(ell, em, a, b)

    def format(self) -> str:
        a = "+".join(str(t) for t in self.a_terms)
        b = "+".join(str(t) for t in self.b_terms)
        return f"ell={self.ell} m={self.em} A={a} B={b}"

    def __str__(self) -> str:
        return self.format()

    @property
    def a_elements(self) -> list[Element]:
        return [t.element(self.ell, self.em) for t in self.a_terms]

    @property
    def b_elements(self) -> list[Element]:
        return [t.element(self.ell, self.em) for t in self.b_terms]


# --- group helpers on Z_ell x Z_em ------------------------------------------


def g_add(a: Element, b: Element, ell: int, em: int) -> Element:
    return ((a[0] + b[0]) % ell, (a[1] + b[1]) % em)


def g_neg(a: Element, ell: int, em: int) -> Element:
    return ((-a[0]) % ell, (-a[1]) % em)


def g_sub(a: Element, b: Element, ell: int, em: int) -> Element:
    return g_add(a, g_neg(b, ell, em), ell, em)


def g_order(a: Element, ell: int, em: int) -> int:
    from math import gcd

    ox = ell // gcd(a[0], ell) if a[0] else 1
    oy = em // gcd(a[1], em) if a[1] else 1
    return ox * oy // gcd(ox, oy)


def label(e: Element, em: int) -> int:
    """Row/column index of group element ``e``."""
    return e[0] * em + e[1]


def element_of(idx: int, em: int) -> Element:
    return (idx // em, idx % em)


def shift_matrix(e: Element, ell: int, em: int) -> np.ndarray:
    """Permutation matrix of ``x**e[0] y**e[1]``: row ``g`` has its 1 at ``g + e``."""
    n0 = ell * em
    i, j = np.divmod(np.arange(n0), em)
    cols = ((i + e[0]) % ell) * em + (j + e[1]) % em
    out = np.zeros((n0, n0), dtype=np.uint8)
    out[np.arange(n0), cols] = 1
    return out


@dataclass(frozen=True, eq=False)
class BBCode:
    spec: BBCodeSpec
    n: int
    h_x: BitMatrix
    h_z: BitMatrix
    k: int
    logical_x: BitMatrix = field(repr=False)
    logical_z: BitMatrix = field(repr=False)

    @property
    def n_checks(self) -> int:
        return self.spec.ell * self.spec.em

    @cached_property
    def x_supports(self) -> list[list[int]]:
        return [self.h_x.row_support(r) for r in range(self.h_x.rows)]

    @cached_property
    def z_supports(self) -> list[list[int]]:
        return [self.h_z.row_support(r) for r in range(self.h_z.rows)]

    def __repr__(self) -> str:
        return f"BBCode([[{self.n},{self.k}]], {self.spec})"


def poly_matrix(elements: list[Element], ell: int, em: int) -> np.ndarray:
    out = np.zeros((ell * em, ell * em), dtype=np.uint8)
    for e in elements:
        out ^= shift_matrix(e, ell, em)
    return out


def build_code(spec: BBCodeSpec) -> BBCode:
    if spec.ell < 2 or spec.em < 2:
        raise ValueError("ell and em must be at least 2")
    a = poly_matrix(spec.a_elements, spec.ell, spec.em)
    b = poly_matrix(spec.b_elements, spec.ell, spec.em)
    h_x = BitMatrix.from_dense(np.hstack([a, b]))
    h_z = BitMatrix.from_dense(np.hstack([b.T, a.T]))
    n = 2 * spec.ell * spec.em
    k = n - gf2.rank(h_x) - gf2.rank(h_z)
    lx, lz = css_logicals(h_x, h_z) if k else (BitMatrix(0, n), BitMatrix(0, n))
    return BBCode(spec, n, h_x, h_z, k, lx, lz)


def quotient_basis(sub: BitMatrix, space: BitMatrix) -> BitMatrix:
    """Rows of ``space`` (reduced) that are independent modulo ``rowspace(sub)``."""
    # eliminate the subspace's pivot columns, then whatever survives is new
    dense = gf2.row_basis(sub).to_dense()
    cand = space.to_dense().copy()
    for r in dense:
        pc = int(np.flatnonzero(r)[0])
        hit = cand[:, pc] == 1
        cand[hit] ^= r
    reduced, cpiv = gf2.rref(BitMatrix.from_dense(cand))
    return reduced.take_rows(range(len(cpiv)))


def css_logicals(h_x: BitMatrix, h_z: BitMatrix) -> tuple[BitMatrix, BitMatrix]:
    """Symplectically paired logical bases ``(L_X, L_Z)`` with ``L_X L_Z^T = I``."""
    lz = quotient_basis(h_z, gf2.nullspace_basis(h_x))
    lx = quotient_basis(h_x, gf2.nullspace_basis(h_z))
    gram = lx @ lz.T
    lz = gf2.inverse(gram).T @ lz
    return lx, lz


def logical_operators(code: BBCode) -> tuple[BitMatrix, BitMatrix]:
    if code.k < 1:
        raise ValueError("code encodes no logical qubits")
    return code.logical_x, code.logical_z


@dataclass(frozen=True)
class DistanceEstimate:
    upper_bound: int
    iterations: int
    seed: int
    witness: np.ndarray = field(repr=False, compare=False, default=None)
    witness_type: str = ""


def _min_logical_in_kernel(kernel: np.ndarray, dual_logicals: np.ndarray, perm: np.ndarray):
    """Information-set step: RREF of ``kernel`` with columns visited in ``perm`` order."""
    g = kernel[:, perm].copy()
    r = 0
    rows = g.shape[0]
    for c in range(g.shape[1]):
        if r == rows:
            break
        nz = np.flatnonzero(g[r:, c])
        if nz.size == 0:
            continue
        p = r + nz[0]
        if p != r:
            g[[r, p]] = g[[p, r]]
        hit = g[:, c] == 1
        hit[r] = False
        g[hit] ^= g[r]
        r += 1
    words = np.empty_like(g)
    words[:, perm] = g
    logical = (words.astype(np.int64) @ dual_logicals.T.astype(np.int64) % 2).any(axis=1)
    if not logical.any():
        return None, None
    w = words.sum(axis=1)
    w = np.where(logical, w, np.iinfo(np.int64).max)
    best = int(np.argmin(w))
    return int(w[best]), words[best]


def estimate_distance(code: BBCode, iterations: int = 1000, seed: int = 0) -> DistanceEstimate:
    """Randomised information-set search for low-weight logical operators.

    Both Z-type (kernel of ``h_x``) and X-type (kernel of ``h_z``) codewords
    are searched; the lighter one wins. Iteration ``i`` draws its column
    permutation from ``seed + i`` so longer runs extend shorter ones.
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    if code.k == 0:
        raise ValueError("code encodes no logical qubits")
    sectors = [
        ("Z", gf2.nullspace_basis(code.h_x).to_dense(), code.logical_x.to_dense()),
        ("X", gf2.nullspace_basis(code.h_z).to_dense(), code.logical_z.to_dense()),
    ]
    best_w = code.n + 1
    best_vec = None
    best_type = ""
    for it in range(iterations):
        rng = np.random.default_rng(seed + it)
        perm = rng.permutation(code.n)
        for name, kernel, dual in sectors:
            w, vec = _min_logical_in_kernel(kernel, dual, perm)
            if w is not None and w < best_w:
                best_w, best_vec, best_type = w, vec, name
    return DistanceEstimate(best_w, iterations, seed, best_vec, best_type)
