"""Toric layouts of BB codes on a planar grid.

A layout picks two group elements, ``u = a_j - a_i`` (one horizontal unit
cell) and ``w = b_g - b_h`` (one vertical unit cell). When they generate the
whole group ``Z_ell x Z_m`` with ``ord(u) * ord(w) = ell*m``, the checks tile a
``2*ord(w)`` by ``2*ord(u)`` grid so that every check sits next to four of its
six qubits. The remaining two couplings either stay inside the planar grid
or wrap around it; wrapping checks along the long axis are "long-range".

Each unit cell ``(r, c)`` holds four sites::

    X(alpha)        L(alpha + a_j)
    R(alpha + b_g)  Z(alpha + a_j + b_g)

with ``alpha = c*u + r*w``. The planar cut is taken one row below the cell
boundary, so grid row 0 carries R qubits and Z checks.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .bbcode import BBCode, Element, element_of, g_add, g_order, g_sub, label

ROW_OFFSET = 1


@dataclass(frozen=True)
class ToricLayout:
    """A candidate embedding ``<A_i A_j^T, B_g B_h^T>`` (indices 1-based).

    Attributes:
        i, j, g, h: Term indices into ``A`` and ``B``.
        horizontal: Group step between horizontally adjacent unit cells.
        vertical: Group step between vertically adjacent unit cells.
        mu: Number of unit cells per grid row, ``ord(horizontal)``.
        lam: Number of unit cells per grid column, ``ord(vertical)``.
    """

    i: int
    j: int
    g: int
    h: int
    horizontal: Element
    vertical: Element
    mu: int
    lam: int

    @property
    def height(self) -> int:
        return 2 * self.lam

    @property
    def width(self) -> int:
        return 2 * self.mu

    @property
    def indices(self) -> tuple[int, int, int, int]:
        return (self.i, self.j, self.g, self.h)

    def __str__(self) -> str:
        return f"<A{self.i}A{self.j}^T, B{self.g}B{self.h}^T> on {self.height}x{self.width}"


class InvalidLayoutError(ValueError):
    pass


def _steps(code: BBCode, i: int, j: int, g: int, h: int) -> tuple[Element, Element]:
    s = code.spec
    a, b = s.a_elements, s.b_elements
    return g_sub(a[j - 1], a[i - 1], s.ell, s.em), g_sub(b[g - 1], b[h - 1], s.ell, s.em)


def _reachable(u: Element, w: Element, ell: int, em: int) -> int:
    """Number of labels reached by ``w^b u^a`` applied to the identity."""
    seen = {(0, 0)}
    frontier = [(0, 0)]
    while frontier:
        e = frontier.pop()
        for step in (u, w):
            nxt = g_add(e, step, ell, em)
            if nxt not in seen:
                seen.add(nxt)
                frontier.append(nxt)
    return len(seen)


def toric_conditions(code: BBCode, i: int, j: int, g: int, h: int) -> tuple[bool, bool]:
    """Return (condition 1, condition 2) of the toric-layout criterion.

    Condition 1: the two generators act transitively on the ``ell*m`` labels.
    Condition 2: the product of their orders equals ``ell*m``.
    """
    s = code.spec
    u, w = _steps(code, i, j, g, h)
    n0 = s.ell * s.em
    cond1 = _reachable(u, w, s.ell, s.em) == n0
    cond2 = g_order(u, s.ell, s.em) * g_order(w, s.ell, s.em) == n0
    return cond1, cond2


def make_layout(code: BBCode, i: int, j: int, g: int, h: int) -> ToricLayout:
    """Validate ``(i, j, g, h)`` and build the layout.

    Raises:
        InvalidLayoutError: if either toric-layout condition fails.
    """
    if not all(1 <= t <= 3 for t in (i, j, g, h)):
        raise InvalidLayoutError("term indices must be in 1..3")
    c1, c2 = toric_conditions(code, i, j, g, h)
    if not (c1 and c2) or i == j or g == h:
        raise InvalidLayoutError(
            f"({i},{j},{g},{h}) is not a toric layout of {code!r} (transitive={c1}, orders={c2})"
        )
    s = code.spec
    u, w = _steps(code, i, j, g, h)
    return ToricLayout(i, j, g, h, u, w, g_order(u, s.ell, s.em), g_order(w, s.ell, s.em))


def enumerate_toric_layouts(code: BBCode) -> list[ToricLayout]:
    """All valid ``(i, j, g, h)`` with ``i != j`` and ``g != h``."""
    out = []
    for i, j, g, h in itertools.product((1, 2, 3), repeat=4):
        if i == j or g == h:
            continue
        if all(toric_conditions(code, i, j, g, h)):
            out.append(make_layout(code, i, j, g, h))
    return out


@dataclass(frozen=True, eq=False)
class Placement:
    """Grid coordinates of every qubit and check.

    Data qubit ``q`` (0..n-1, L block first) sits at ``qubit_pos[q]``; X check
    ``c`` at ``x_pos[c]`` and Z check ``c`` at ``z_pos[c]``. ``x_support`` and
    ``z_support`` list the six data qubits of each check in term order
    (``A1, A2, A3, B1, B2, B3``).
    """

    code: BBCode = field(repr=False)
    layout: ToricLayout
    height: int
    width: int
    qubit_pos: np.ndarray = field(repr=False)
    x_pos: np.ndarray = field(repr=False)
    z_pos: np.ndarray = field(repr=False)
    x_support: np.ndarray = field(repr=False)
    z_support: np.ndarray = field(repr=False)

    @cached_property
    def grid(self) -> np.ndarray:
        """``(height, width)`` array of site codes ``kind*N + index`` (kind 0=Q, 1=X, 2=Z)."""
        g = np.full((self.height, self.width), -1, dtype=np.int64)
        big = self.code.n
        for kind, pos in enumerate((self.qubit_pos, self.x_pos, self.z_pos)):
            for idx, (r, c) in enumerate(pos):
                g[r, c] = kind * big + idx
        return g

    def site(self, r: int, c: int) -> tuple[str, int]:
        v = int(self.grid[r, c])
        kind, idx = divmod(v, self.code.n)
        return "QXZ"[kind], idx

    def check_pos(self, kind: str) -> np.ndarray:
        return self.x_pos if kind == "X" else self.z_pos

    def check_support(self, kind: str) -> np.ndarray:
        return self.x_support if kind == "X" else self.z_support

    def export(self) -> str:
        lines = [f"Q {q} {r} {c}" for q, (r, c) in enumerate(self.qubit_pos)]
        lines += [f"XC {q} {r} {c}" for q, (r, c) in enumerate(self.x_pos)]
        lines += [f"ZC {q} {r} {c}" for q, (r, c) in enumerate(self.z_pos)]
        return "\n".join(lines) + "\n"

    def translated(self, dr: int, dc: int) -> "Placement":
        """Cyclically shift every site by ``(dr, dc)``."""
        shift = np.array([dr, dc])
        mod = np.array([self.height, self.width])
        return Placement(
            self.code, self.layout, self.height, self.width,
            (self.qubit_pos + shift) % mod, (self.x_pos + shift) % mod, (self.z_pos + shift) % mod,
            self.x_support, self.z_support,
        )


def embed(code: BBCode, layout: ToricLayout, row_offset: int = ROW_OFFSET) -> Placement:
    """Place ``code`` on the grid described by ``layout``."""
    if not isinstance(layout, ToricLayout) or not all(toric_conditions(code, *layout.indices)):
        raise InvalidLayoutError("embed needs a validated layout (use make_layout)")
    s = code.spec
    ell, em = s.ell, s.em
    n0 = ell * em
    a, b = s.a_elements, s.b_elements
    aj, bg = a[layout.j - 1], b[layout.g - 1]
    H, W = layout.height, layout.width

    qubit_pos = np.full((2 * n0, 2), -1, dtype=np.int64)
    x_pos = np.full((n0, 2), -1, dtype=np.int64)
    z_pos = np.full((n0, 2), -1, dtype=np.int64)
    row_start: Element = (0, 0)
    for r in range(layout.lam):
        alpha = row_start
        for c in range(layout.mu):
            rr = (2 * r + row_offset) % H
            rr1 = (2 * r + 1 + row_offset) % H
            x_pos[label(alpha, em)] = (rr, 2 * c)
            qubit_pos[label(g_add(alpha, aj, ell, em), em)] = (rr, 2 * c + 1)
            qubit_pos[n0 + label(g_add(alpha, bg, ell, em), em)] = (rr1, 2 * c)
            z_pos[label(g_add(g_add(alpha, aj, ell, em), bg, ell, em), em)] = (rr1, 2 * c + 1)
            alpha = g_add(alpha, layout.horizontal, ell, em)
        row_start = g_add(row_start, layout.vertical, ell, em)
    assert (qubit_pos >= 0).all() and (x_pos >= 0).all() and (z_pos >= 0).all()

    x_support = np.empty((n0, 6), dtype=np.int64)
    z_support = np.empty((n0, 6), dtype=np.int64)
    for idx in range(n0):
        alpha = element_of(idx, em)
        x_support[idx, :3] = [label(g_add(alpha, t, ell, em), em) for t in a]
        x_support[idx, 3:] = [n0 + label(g_add(alpha, t, ell, em), em) for t in b]
        z_support[idx, :3] = [n0 + label(g_sub(alpha, t, ell, em), em) for t in a]
        z_support[idx, 3:] = [label(g_sub(alpha, t, ell, em), em) for t in b]
    return Placement(code, layout, H, W, qubit_pos, x_pos, z_pos, x_support, z_support)


@dataclass(frozen=True)
class GeneratorClassification:
    """Short/long split of all checks plus size statistics.

    ``gamma`` is ``log(diameter) / log(M)`` with the Chebyshev diameter of the
    check's planar footprint and ``M`` the larger grid dimension.
    """

    x_long: np.ndarray = field(repr=False)
    z_long: np.ndarray = field(repr=False)
    mask_percent: float
    x_diameter: np.ndarray = field(repr=False)
    z_diameter: np.ndarray = field(repr=False)
    gamma: np.ndarray = field(repr=False)
    size_histogram: dict[float, float]
    beta: float
    grid_m: int
    long_axis: str

    @property
    def n_long(self) -> int:
        return int(self.x_long.sum())

    def long_checks(self, kind: str) -> np.ndarray:
        return np.flatnonzero(self.x_long if kind == "X" else self.z_long)


def _toroidal_delta(a: np.ndarray, b: np.ndarray, period: int) -> np.ndarray:
    return (b - a + period // 2) % period - period // 2


def classify_generators(p: Placement) -> GeneratorClassification:
    H, W = p.height, p.width
    axis = 1 if W >= H else 0
    period = W if axis == 1 else H
    result = {}
    diam = {}
    for kind in ("X", "Z"):
        chk = p.check_pos(kind)
        q = p.qubit_pos[p.check_support(kind)]  # (n_checks, 6, 2)
        d = _toroidal_delta(chk[:, None, axis], q[:, :, axis], period)
        unwrapped = chk[:, None, axis] + d
        result[kind] = ((unwrapped < 0) | (unwrapped >= period)).any(axis=1)
        # planar diameter (Chebyshev) over the check and its qubits, no wraparound
        pts = np.concatenate([chk[:, None, :], q], axis=1)
        ext = pts.max(axis=1) - pts.min(axis=1)
        diam[kind] = ext.max(axis=1)
    n0 = len(p.x_pos)
    grid_m = max(H, W)
    all_d = np.concatenate([diam["X"], diam["Z"]])
    gamma = np.log(np.maximum(all_d, 1)) / math.log(grid_m)
    counts = Counter(np.round(gamma, 12).tolist())
    hist = {g: c / len(gamma) for g, c in sorted(counts.items())}
    beta = math.log(2 * n0) / (2 * math.log(grid_m))
    return GeneratorClassification(
        result["X"], result["Z"], float(result["X"].sum()) / n0,
        diam["X"], diam["Z"], gamma, hist, beta, grid_m, "horizontal" if axis == 1 else "vertical",
    )


def path_length_estimate(c: GeneratorClassification, grid_m: float, gamma_cutoff: float | None = None) -> float:
    """Discrete total-path-length integral ``M^2 * sum_gamma f(gamma) M^gamma``."""
    if not c.size_histogram:
        raise ValueError("empty size histogram")
    return grid_m**2 * sum(
        f * grid_m**g for g, f in c.size_histogram.items() if gamma_cutoff is None or g <= gamma_cutoff
    )


def histogram_from_gammas(gammas) -> dict[float, float]:
    counts = Counter(float(g) for g in gammas)
    total = sum(counts.values())
    return {g: k / total for g, k in sorted(counts.items())}
