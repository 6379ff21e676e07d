"""Min-sum belief propagation with ordered-statistics post-processing.

The decoding graph is the detector error model: error classes are variable
nodes, detectors are check nodes. BP runs first; shots where it does not
reproduce the syndrome go through OSD with a combination sweep, which always
returns a syndrome-consistent error.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numba
import numpy as np

from . import gf2
from .circuit import CircuitIR
from .detector import DetectorModel, build_detector_model, sample_shots

_THREADS_ENV = "BILAYER_THREADS"
numba.config.THREADING_LAYER = "workqueue"


def _configure_threads() -> None:
    n = os.environ.get(_THREADS_ENV)
    if n:
        numba.set_num_threads(max(1, min(int(n), numba.config.NUMBA_NUM_THREADS)))


@dataclass(frozen=True)
class BPConfig:
    max_iterations: int = 100
    scaling: float = 0.625
    schedule: str = "flooding"

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not 0 < self.scaling <= 1:
            raise ValueError("scaling must lie in (0, 1]")
        if self.schedule not in ("flooding", "serial"):
            raise ValueError("schedule must be 'flooding' or 'serial'")


@dataclass(frozen=True)
class OSDConfig:
    order: int = 10
    strategy: str = "combination-sweep"

    def __post_init__(self):
        if self.order < 0:
            raise ValueError("order must be >= 0")
        if self.strategy != "combination-sweep":
            raise ValueError("only the combination sweep is implemented")


class BPResult(NamedTuple):
    marginals: np.ndarray  # posterior log-likelihood ratios, negative = likely flipped
    hard: np.ndarray
    converged: bool
    iterations: int


@dataclass(frozen=True)
class DecodeOutcome:
    classes: np.ndarray
    observables: np.ndarray
    converged: bool
    iterations: int


# --- numba kernels -----------------------------------------------------------------


@numba.njit(cache=True)
def _syndrome_ok(hard, syn, chk_ptr, edge_var):
    for c in range(len(chk_ptr) - 1):
        par = syn[c]
        for e in range(chk_ptr[c], chk_ptr[c + 1]):
            par ^= hard[edge_var[e]]
        if par:
            return False
    return True


@numba.njit(cache=True)
def _bp(syn, prior, chk_ptr, edge_var, var_ptr, var_edges, max_iter, scaling, serial):
    n_chk = len(chk_ptr) - 1
    n_var = len(prior)
    n_edge = len(edge_var)
    c2v = np.zeros(n_edge)
    v2c = np.empty(n_edge)
    post = prior.copy()
    hard = np.zeros(n_var, dtype=np.uint8)
    for e in range(n_edge):
        v2c[e] = prior[edge_var[e]]
    for it in range(1, max_iter + 1):
        for c in range(n_chk):
            lo, hi = chk_ptr[c], chk_ptr[c + 1]
            if serial:
                for e in range(lo, hi):
                    v2c[e] = post[edge_var[e]] - c2v[e]
            sgn = syn[c]
            min1 = np.inf
            min2 = np.inf
            arg = -1
            for e in range(lo, hi):
                m = v2c[e]
                if m < 0:
                    sgn ^= 1
                    m = -m
                if m < min1:
                    min2 = min1
                    min1 = m
                    arg = e
                elif m < min2:
                    min2 = m
            for e in range(lo, hi):
                a = min2 if e == arg else min1
                s = sgn ^ (1 if v2c[e] < 0 else 0)
                new = -scaling * a if s else scaling * a
                if serial:
                    post[edge_var[e]] = v2c[e] + new
                c2v[e] = new
        if not serial:
            for v in range(n_var):
                total = prior[v]
                for k in range(var_ptr[v], var_ptr[v + 1]):
                    total += c2v[var_edges[k]]
                post[v] = total
                for k in range(var_ptr[v], var_ptr[v + 1]):
                    e = var_edges[k]
                    v2c[e] = total - c2v[e]
        for v in range(n_var):
            hard[v] = 1 if post[v] < 0 else 0
        if _syndrome_ok(hard, syn, chk_ptr, edge_var):
            return post, hard, True, it
    return post, hard, False, max_iter


@numba.njit(cache=True)
def _osd(syn, post, weight, var_ptr, var_chk, n_chk, rank, order):
    """Order-``order`` combination-sweep OSD. Returns the error vector, or all 2s if infeasible."""
    n_var = len(post)
    perm = np.argsort(post, kind="mergesort")
    n_words = (n_var + 63) // 64
    rows = np.zeros((n_chk, n_words), dtype=np.uint64)
    for j in range(n_var):
        v = perm[j]
        w = j >> 6
        bit = np.uint64(1) << np.uint64(j & 63)
        for k in range(var_ptr[v], var_ptr[v + 1]):
            rows[var_chk[k], w] ^= bit
    s = syn.copy()
    pivots = np.empty(rank, dtype=np.int64)
    is_pivot = np.zeros(n_var, dtype=np.uint8)
    r = 0
    for j in range(n_var):
        if r == rank:
            break
        w = j >> 6
        bit = np.uint64(1) << np.uint64(j & 63)
        found = -1
        for i in range(r, n_chk):
            if rows[i, w] & bit:
                found = i
                break
        if found < 0:
            continue
        if found != r:
            for q in range(n_words):
                tmp = rows[r, q]
                rows[r, q] = rows[found, q]
                rows[found, q] = tmp
            t = s[r]
            s[r] = s[found]
            s[found] = t
        for i in range(n_chk):
            if i != r and (rows[i, w] & bit):
                for q in range(w, n_words):
                    rows[i, q] ^= rows[r, q]
                s[i] ^= s[r]
        pivots[r] = j
        is_pivot[j] = 1
        r += 1
    out = np.zeros(n_var, dtype=np.uint8)
    for i in range(r, n_chk):
        if s[i]:
            out[:] = 2
            return out
    wp = np.empty(r)
    sign = np.empty(r)
    base = 0.0
    for k in range(r):
        wp[k] = weight[perm[pivots[k]]]
        sign[k] = -1.0 if s[k] else 1.0
        if s[k]:
            base += wp[k]
    best = base
    best_a = -1
    best_b = -1
    # non-pivot positions in reliability order
    n_free = n_var - r
    free = np.empty(n_free, dtype=np.int64)
    f = 0
    for j in range(n_var):
        if not is_pivot[j]:
            free[f] = j
            f += 1
    col = np.zeros(r, dtype=np.uint8)
    for a in range(n_free):
        j = free[a]
        w = j >> 6
        bit = np.uint64(1) << np.uint64(j & 63)
        delta = weight[perm[j]]
        for k in range(r):
            if rows[k, w] & bit:
                delta += sign[k] * wp[k]
        if base + delta < best:
            best = base + delta
            best_a = a
            best_b = -1
    lim = min(order, n_free)
    cols = np.zeros((lim, r), dtype=np.uint8)
    for a in range(lim):
        j = free[a]
        w = j >> 6
        bit = np.uint64(1) << np.uint64(j & 63)
        for k in range(r):
            cols[a, k] = 1 if rows[k, w] & bit else 0
    for a in range(lim):
        for b in range(a + 1, lim):
            delta = weight[perm[free[a]]] + weight[perm[free[b]]]
            for k in range(r):
                if cols[a, k] ^ cols[b, k]:
                    delta += sign[k] * wp[k]
            if base + delta < best:
                best = base + delta
                best_a = a
                best_b = b
    for k in range(r):
        col[k] = s[k]
    for sel in (best_a, best_b):
        if sel >= 0:
            j = free[sel]
            w = j >> 6
            bit = np.uint64(1) << np.uint64(j & 63)
            out[perm[j]] ^= 1
            for k in range(r):
                if rows[k, w] & bit:
                    col[k] ^= 1
    for k in range(r):
        if col[k]:
            out[perm[pivots[k]]] ^= 1
    return out


@numba.njit(cache=True, parallel=True)
def _decode_batch(syndromes, prior, weight, chk_ptr, edge_var, var_ptr, var_edges, var_chk,
                  obs_ptr, obs_idx, n_obs, rank, max_iter, scaling, serial, order):
    shots = syndromes.shape[0]
    n_chk = len(chk_ptr) - 1
    pred = np.zeros((shots, n_obs), dtype=np.uint8)
    conv = np.zeros(shots, dtype=np.uint8)
    for i in numba.prange(shots):
        syn = syndromes[i]
        post, hard, ok, _ = _bp(syn, prior, chk_ptr, edge_var, var_ptr, var_edges, max_iter, scaling, serial)
        if ok:
            err = hard
            conv[i] = 1
        else:
            err = _osd(syn, post, weight, var_ptr, var_chk, n_chk, rank, order)
        for v in range(len(err)):
            if err[v] == 1:
                for k in range(obs_ptr[v], obs_ptr[v + 1]):
                    pred[i, obs_idx[k]] ^= 1
    return pred, conv


# --- python API --------------------------------------------------------------------


class BPOSDDecoder:
    """Precomputed graph arrays for repeated decoding against one model."""

    def __init__(self, model: DetectorModel, bp: BPConfig = BPConfig(), osd: OSDConfig = OSDConfig()):
        _configure_threads()
        self.model = model
        self.bp = bp
        self.osd = osd
        p = np.clip(model.probabilities, 1e-15, 0.5 - 1e-15)
        self.prior = np.log((1 - p) / p)
        self.weight = self.prior.copy()
        H = model.check_matrix  # detectors x classes
        self.chk_ptr = H.indptr.astype(np.int64)
        self.edge_var = H.indices.astype(np.int64)
        # per variable: its edge ids (in check-major order) and check ids
        n_var = model.n_classes
        order = np.argsort(self.edge_var, kind="stable")
        self.var_edges = order.astype(np.int64)
        counts = np.bincount(self.edge_var, minlength=n_var)
        self.var_ptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
        edge_chk = np.repeat(np.arange(H.rows), np.diff(self.chk_ptr))
        self.var_chk = edge_chk[order].astype(np.int64)
        obs = model.class_observables
        self.obs_ptr = obs.indptr.astype(np.int64)
        self.obs_idx = obs.indices.astype(np.int64)
        self.rank = gf2.rank(H.to_bitmatrix()) if H.rows else 0

    def bp_minsum(self, syndrome) -> BPResult:
        syn = self._syndrome(syndrome)
        post, hard, ok, it = _bp(syn, self.prior, self.chk_ptr, self.edge_var, self.var_ptr,
                                 self.var_edges, self.bp.max_iterations, self.bp.scaling,
                                 self.bp.schedule == "serial")
        return BPResult(post, hard, bool(ok), int(it))

    def osd_postprocess(self, syndrome, marginals, iterations: int = 0, converged: bool = False) -> DecodeOutcome:
        syn = self._syndrome(syndrome)
        hard = (np.asarray(marginals) < 0).astype(np.uint8)
        if _syndrome_ok(hard, syn, self.chk_ptr, self.edge_var):
            err = hard
        else:
            err = _osd(syn, np.asarray(marginals, dtype=float), self.weight, self.var_ptr, self.var_chk,
                       self.model.n_detectors, self.rank, self.osd.order)
            if err.size and err[0] == 2:
                raise ValueError("syndrome is not produced by any combination of error classes")
        return DecodeOutcome(err, self.model.observables_of(err), converged, iterations)

    def decode(self, syndrome) -> DecodeOutcome:
        res = self.bp_minsum(syndrome)
        if res.converged:
            return DecodeOutcome(res.hard, self.model.observables_of(res.hard), True, res.iterations)
        return self.osd_postprocess(syndrome, res.marginals, res.iterations, False)

    def decode_batch(self, syndromes: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Predicted observable flips and BP convergence flags for a stack of syndromes."""
        syn = np.ascontiguousarray(syndromes, dtype=np.uint8)
        if syn.ndim != 2 or syn.shape[1] != self.model.n_detectors:
            raise ValueError("syndrome batch has the wrong shape")
        pred, conv = _decode_batch(
            syn, self.prior, self.weight, self.chk_ptr, self.edge_var, self.var_ptr, self.var_edges,
            self.var_chk, self.obs_ptr, self.obs_idx, self.model.n_observables, self.rank,
            self.bp.max_iterations, self.bp.scaling, self.bp.schedule == "serial", self.osd.order)
        return pred, conv.astype(bool)

    def _syndrome(self, syndrome) -> np.ndarray:
        syn = np.asarray(syndrome, dtype=np.uint8).ravel()
        if syn.shape != (self.model.n_detectors,):
            raise ValueError(f"syndrome length {syn.size} != {self.model.n_detectors}")
        return syn


def bp_minsum(model: DetectorModel, syndrome, cfg: BPConfig = BPConfig()) -> BPResult:
    return BPOSDDecoder(model, cfg).bp_minsum(syndrome)


def osd_postprocess(model: DetectorModel, syndrome, marginals, cfg: OSDConfig = OSDConfig()) -> DecodeOutcome:
    return BPOSDDecoder(model, osd=cfg).osd_postprocess(syndrome, marginals)


# --- experiments -------------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentResult:
    shots: int
    failures: int
    realizations: int
    bp_converged: float

    @property
    def p_log(self) -> float:
        return self.failures / self.shots

    @property
    def stderr(self) -> float:
        p = self.p_log
        return math.sqrt(p * (1 - p) / self.shots)


def run_experiment(build: Callable[[int], CircuitIR], shots: int, seed: int = 0, batch: int = 1000,
                   sectors: Sequence[str] = ("Z",), bp: BPConfig = BPConfig(),
                   osd: OSDConfig = OSDConfig()) -> ExperimentResult:
    """Sample, decode and count logical failures.

    ``build(circuit_seed)`` returns one circuit realization; masking outcomes
    are fixed per realization, so shots are drawn in batches of ``batch``,
    each from a freshly seeded realization. A shot fails if any observable
    prediction is wrong.
    """
    if shots < 1:
        raise ValueError("shots must be >= 1")
    if batch < 1:
        raise ValueError("batch must be >= 1")
    failures = 0
    converged = 0
    n_real = -(-shots // batch)
    for r in range(n_real):
        c_seed, s_seed = np.random.SeedSequence([seed, r]).generate_state(2)
        circ = build(int(c_seed))
        model = build_detector_model(circ, sectors)
        n = min(batch, shots - r * batch)
        dets, obs = sample_shots(circ, model, n, int(s_seed), sectors)
        pred, conv = BPOSDDecoder(model, bp, osd).decode_batch(dets)
        failures += int((pred != obs).any(axis=1).sum())
        converged += int(conv.sum())
    return ExperimentResult(shots, failures, n_real, converged / shots)


# --- rate fits ---------------------------------------------------------------------


def fit_epsilon(points: Sequence[tuple[float, float]]) -> float:
    """Least-squares per-round rate from ``p_log = 1 - (1 - eps)^t``.

    The fit is a line through the origin in ``log(1 - p_log)`` against ``t``.
    A single point is allowed and inverts the model exactly.
    """
    pts = [(float(t), float(p)) for t, p in points]
    if not pts:
        raise ValueError("need at least one point")
    if any(not 0 <= p < 1 for _, p in pts):
        raise ValueError("p_log must lie in [0, 1)")
    if all(p == 0 for _, p in pts):
        return 0.0
    t = np.array([a for a, _ in pts])
    y = np.log1p(-np.array([b for _, b in pts]))
    slope = float((t * y).sum() / (t * t).sum())
    return float(-math.expm1(slope))


def combine_surface_copies(p_single: float, k: int) -> float:
    """Rate of at least one failure among ``k`` independent copies."""
    if not 0 <= p_single <= 1:
        raise ValueError("p_single must lie in [0, 1]")
    return 1.0 - (1.0 - p_single) ** k


def split_surface_copies(p_k: float, k: int) -> float:
    """Inverse of :func:`combine_surface_copies`."""
    return 1.0 - (1.0 - p_k) ** (1.0 / k)
