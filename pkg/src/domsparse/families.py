"""Concrete weighted families: DPPs, matroid bases, k-matchings, blow-ups,
and the adversarial instances (paired, Reed-Solomon, singleton blow-up).

Every constructor returns a :class:`~domsparse.core.WeightedFamily`.  The
JSON family-spec format read by the CLI is handled by :func:`family_from_spec`.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .core import (
    NEG_INF,
    DomainError,
    WeightedFamily,
    as_set_array,
    combination_positions,
    ksubset,
    lexsort_rows,
)
from .rng import RngStream, as_generator

MAX_MATCHING_VERTICES = 24
MINOR_TOL = 1e-9
# All-minor validation of a DPP kernel is skipped above this many k-subsets.
MINOR_CHECK_LIMIT = 100_000


class FamilySpecError(ValueError):
    """Malformed or unsupported family specification."""


# ---------------------------------------------------------------------------
# table


class TableFamily(WeightedFamily):
    """Arbitrary family given by an explicit table of weights."""

    def __init__(self, n: int, k: int, table: Mapping):
        self.n, self.k = int(n), int(k)
        lw = {}
        for S, w in table.items():
            S = ksubset(S, self.n, self.k)
            w = float(w)
            if w < 0 or math.isnan(w):
                raise DomainError(f"weight of {S} must be >= 0, got {w}")
            if w > 0:
                lw[S] = math.log(w)
        if not lw:
            raise DomainError("table family needs at least one positive weight")
        self._lw = lw
        keys = as_set_array(list(lw), self.k)
        self._keys = keys[lexsort_rows(keys)]
        self._keys.setflags(write=False)
        used = np.unique(self._keys)
        self.domain = None if len(used) == self.n else used

    @classmethod
    def from_log_weights(cls, n, k, table: Mapping) -> "TableFamily":
        items = {ksubset(S, n, k): float(v) for S, v in table.items() if v > NEG_INF}
        shift = max(items.values())
        return cls(n, k, {S: math.exp(v - shift) for S, v in items.items()})

    def _log_weights(self, sets):
        get = self._lw.get
        return np.fromiter((get(tuple(r), NEG_INF) for r in sets.tolist()), float, sets.shape[0])

    def candidates(self):
        return self._keys

    def initial_state(self, rng):
        rng = as_generator(rng)
        return tuple(self._keys[rng.integers(len(self._keys))].tolist())

    def __repr__(self):
        return f"TableFamily(n={self.n}, k={self.k}, |supp|={len(self._lw)})"


def make_paired(n: int) -> TableFamily:
    """Uniform distribution over the pairs ``{i, n/2 + i}``."""
    if n < 2 or n % 2:
        raise DomainError(f"paired instance needs an even n >= 2, got {n}")
    h = n // 2
    return TableFamily(n, 2, {(i, h + i): 1.0 for i in range(h)})


def make_uniform(n: int, k: int) -> WeightedFamily:
    """Uniform distribution on all of ``C([n], k)`` (a uniform matroid)."""
    return make_matroid(MatroidSpec.partition([list(range(n))], [k]))


def make_singleton_blowup(n: int, k: int) -> TableFamily:
    """Uniform over the ``n // k`` parts ``{i, i + p, ..., i + (k-1)p}``, ``p = n // k``.

    When ``k`` does not divide ``n`` the leftover ``n mod k`` elements are
    kept in the ground set with zero marginal.
    """
    p = n // k
    if p < 1:
        raise DomainError("need n >= k")
    return TableFamily(n, k, {tuple(i + j * p for j in range(k)): 1.0 for i in range(p)})


# ---------------------------------------------------------------------------
# determinantal point processes


@dataclass(frozen=True)
class DppKernel:
    L: np.ndarray
    k: int


class DppFamily(WeightedFamily):
    """``mu(S) = det(L[S, S])`` for a kernel with ``L + L^T`` PSD."""

    def __init__(self, L, k: int, check: bool = True):
        L = np.array(L, dtype=float)
        if L.ndim != 2 or L.shape[0] != L.shape[1]:
            raise DomainError("DPP kernel must be square")
        self.L = L
        self.L.setflags(write=False)
        self.n, self.k = L.shape[0], int(k)
        if not 0 <= self.k <= self.n:
            raise DomainError("DPP set size out of range")
        self.clamped = 0
        if check:
            self._validate()

    def _validate(self):
        sym = 0.5 * (self.L + self.L.T)
        lo = float(np.linalg.eigvalsh(sym)[0])
        if lo < -MINOR_TOL:
            raise DomainError(f"L + L^T is not PSD: eigenvalue {lo:.3e} of the symmetric part")
        if math.comb(self.n, self.k) <= MINOR_CHECK_LIMIT:
            sets = combination_positions(self.n, self.k)
            dets = self._dets(sets)
            bad = int(np.argmin(dets))
            if dets[bad] < -MINOR_TOL:
                raise DomainError(
                    f"principal minor of {tuple(sets[bad].tolist())} is {dets[bad]:.3e} < 0"
                )

    def _dets(self, sets):
        sub = self.L[sets[:, :, None], sets[:, None, :]]
        sign, logdet = np.linalg.slogdet(sub)
        return sign * np.exp(logdet)

    def _log_weights(self, sets):
        sub = self.L[sets[:, :, None], sets[:, None, :]]
        sign, logdet = np.linalg.slogdet(sub)
        out = np.where(sign > 0, logdet, NEG_INF)
        neg = sign < 0
        if neg.any():
            mags = np.exp(logdet[neg])
            if (mags > MINOR_TOL).any():
                worst = np.flatnonzero(neg)[int(np.argmax(mags))]
                raise DomainError(
                    f"negative minor {-mags.max():.3e} at {tuple(sets[worst].tolist())}"
                )
            self.clamped += int(neg.sum())
        return out

    def initial_state(self, rng):
        rng = as_generator(rng)
        chosen: list = []
        for c in rng.permutation(self.n).tolist():
            trial = sorted(chosen + [c])
            if self._log_weights(np.asarray([trial]))[0] > NEG_INF:
                chosen = trial
                if len(chosen) == self.k:
                    return tuple(chosen)
        return None

    def __repr__(self):
        return f"DppFamily(n={self.n}, k={self.k})"


class LowRankDppFamily(WeightedFamily):
    """Symmetric DPP with kernel ``V V^T`` kept in factored form, for large ``n``."""

    def __init__(self, V, k: int):
        V = np.array(V, dtype=float)
        if V.ndim != 2 or not 0 <= k <= min(V.shape):
            raise DomainError("need an (n, r) factor with k <= r")
        self.V = V
        self.V.setflags(write=False)
        self.n, self.k = V.shape[0], int(k)

    def _log_weights(self, sets):
        rows = self.V[sets]
        sign, logdet = np.linalg.slogdet(rows @ rows.transpose(0, 2, 1))
        return np.where(sign > 0, logdet, NEG_INF)

    def initial_state(self, rng):
        rng = as_generator(rng)
        chosen: list = []
        for c in rng.permutation(self.n).tolist():
            trial = sorted(chosen + [c])
            if self._log_weights(np.asarray([trial]))[0] > -30:
                chosen = trial
                if len(chosen) == self.k:
                    return tuple(chosen)
        return None


def make_dpp(L, k: int, check: bool = True) -> DppFamily:
    return DppFamily(L, k, check=check)


def random_psd_kernel(n: int, rng, rank: Optional[int] = None) -> np.ndarray:
    """Symmetric PSD ``V V^T / rank`` with Gaussian ``V``."""
    rng = as_generator(rng)
    rank = n if rank is None else rank
    V = rng.standard_normal((n, rank))
    return V @ V.T / rank


def random_nonsymmetric_kernel(n: int, rng, skew: float = 1.0) -> np.ndarray:
    """``A A^T / n + skew * (B - B^T)``: PSD symmetric part, nonzero skew part."""
    rng = as_generator(rng)
    A = rng.standard_normal((n, n))
    B = rng.standard_normal((n, n))
    return A @ A.T / n + skew * (B - B.T) / 2


# ---------------------------------------------------------------------------
# matroids


class _UnionFind:
    def __init__(self, size):
        self.parent = list(range(size))

    def find(self, a):
        parent = self.parent
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def union(self, a, b) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        self.parent[ra] = rb
        return True


@dataclass(frozen=True)
class MatroidSpec:
    kind: str
    blocks: tuple = ()
    quotas: tuple = ()
    edges: tuple = ()
    vertices: int = 0

    @classmethod
    def partition(cls, blocks, quotas) -> "MatroidSpec":
        return cls("partition", tuple(tuple(int(i) for i in b) for b in blocks), tuple(int(q) for q in quotas))

    @classmethod
    def graphic(cls, edges, vertices: Optional[int] = None) -> "MatroidSpec":
        edges = tuple((int(u), int(v)) for u, v in edges)
        if vertices is None:
            vertices = 1 + max(max(e) for e in edges)
        return cls("graphic", edges=edges, vertices=int(vertices))


def _check_partition(n: int, blocks, quotas, k: Optional[int]):
    if len(blocks) != len(quotas):
        raise DomainError("one quota per block is required")
    seen = sorted(i for b in blocks for i in b)
    if seen != list(range(n)):
        raise DomainError("blocks must be disjoint and cover the ground set")
    if any(q < 0 for q in quotas):
        raise DomainError("quotas must be nonnegative")
    if k is not None and sum(quotas) != k:
        raise DomainError(f"quotas sum to {sum(quotas)}, expected k = {k}")


class PartitionMatroidFamily(WeightedFamily):
    def __init__(self, blocks, quotas):
        self.n = sum(len(b) for b in blocks)
        self.k = int(sum(quotas))
        _check_partition(self.n, blocks, quotas, None)
        if any(q > len(b) for b, q in zip(blocks, quotas)):
            raise DomainError("a quota exceeds its block size, so the matroid has no bases")
        self.blocks = [np.asarray(sorted(b), dtype=np.int64) for b in blocks]
        self.quotas = np.asarray(quotas, dtype=np.int64)
        self.block_of = np.empty(self.n, dtype=np.int64)
        for b, members in enumerate(self.blocks):
            self.block_of[members] = b

    def _log_weights(self, sets):
        counts = np.zeros((sets.shape[0], len(self.blocks)), dtype=np.int64)
        np.add.at(counts, (np.arange(sets.shape[0])[:, None], self.block_of[sets]), 1)
        return np.where((counts == self.quotas).all(axis=1), 0.0, NEG_INF)

    def initial_state(self, rng):
        rng = as_generator(rng)
        if any(q > len(b) for b, q in zip(self.blocks, self.quotas)):
            return None
        picks = [rng.choice(b, size=q, replace=False) for b, q in zip(self.blocks, self.quotas) if q]
        return tuple(sorted(int(i) for p in picks for i in p))

    def __repr__(self):
        return f"PartitionMatroidFamily(n={self.n}, k={self.k}, blocks={len(self.blocks)})"


class GraphicMatroidFamily(WeightedFamily):
    """Uniform over spanning trees; the ground set is the edge list."""

    def __init__(self, edges, vertices: int):
        self.edges = [tuple(e) for e in edges]
        self.vertices = int(vertices)
        self.n, self.k = len(self.edges), self.vertices - 1
        uf = _UnionFind(self.vertices)
        for u, v in self.edges:
            if not (0 <= u < self.vertices and 0 <= v < self.vertices) or u == v:
                raise DomainError(f"bad edge {(u, v)}")
            uf.union(u, v)
        if len({uf.find(v) for v in range(self.vertices)}) != 1:
            raise DomainError("graphic matroid needs a connected graph")

    def _log_weight(self, S):
        uf = _UnionFind(self.vertices)
        for e in S:
            if not uf.union(*self.edges[e]):
                return NEG_INF
        return 0.0

    def initial_state(self, rng):
        rng = as_generator(rng)
        uf = _UnionFind(self.vertices)
        tree = [e for e in rng.permutation(self.n).tolist() if uf.union(*self.edges[e])]
        return tuple(sorted(tree))

    def __repr__(self):
        return f"GraphicMatroidFamily(V={self.vertices}, E={self.n})"


def make_matroid(spec: MatroidSpec) -> WeightedFamily:
    if spec.kind == "partition":
        return PartitionMatroidFamily(spec.blocks, spec.quotas)
    if spec.kind == "graphic":
        return GraphicMatroidFamily(spec.edges, spec.vertices)
    raise FamilySpecError(f"unknown matroid kind {spec.kind!r}")


def complete_graph_edges(v: int) -> list:
    return list(itertools.combinations(range(v), 2))


# ---------------------------------------------------------------------------
# k-matchings


@dataclass(frozen=True)
class MatchingSpec:
    vertices: int
    edges: tuple
    k: int


def count_perfect_matchings(adj: Sequence[int], mask: int, memo: dict) -> int:
    """Perfect matchings of the subgraph induced by ``mask`` (bitmask DP).

    ``adj[v]`` is the neighbour bitmask of ``v``.  The lowest vertex in the
    mask is matched to each available neighbour in turn.
    """
    if mask == 0:
        return 1
    hit = memo.get(mask)
    if hit is not None:
        return hit
    low = (mask & -mask).bit_length() - 1
    rest = mask & ~(1 << low)
    total = 0
    nbrs = adj[low] & rest
    while nbrs:
        bit = nbrs & -nbrs
        total += count_perfect_matchings(adj, rest & ~bit, memo)
        nbrs ^= bit
    memo[mask] = total
    return total


class MatchingFamily(WeightedFamily):
    """Vertex sets of size 2k weighted by perfect matchings of the induced graph."""

    def __init__(self, spec: MatchingSpec):
        if spec.vertices > MAX_MATCHING_VERTICES:
            raise DomainError(
                f"exact matching counts support at most {MAX_MATCHING_VERTICES} vertices, got {spec.vertices}"
            )
        if 2 * spec.k > spec.vertices or spec.k < 0:
            raise DomainError("need 0 <= 2k <= |V|")
        self.spec = spec
        self.n, self.k = spec.vertices, 2 * spec.k
        adj = [0] * spec.vertices
        for u, v in spec.edges:
            if u == v or not (0 <= u < self.n and 0 <= v < self.n):
                raise DomainError(f"bad edge {(u, v)}")
            adj[u] |= 1 << v
            adj[v] |= 1 << u
        self.adj = adj
        self._memo: dict = {}

    def matchings(self, S) -> int:
        mask = 0
        for v in S:
            mask |= 1 << v
        return count_perfect_matchings(self.adj, mask, self._memo)

    def _log_weight(self, S):
        c = self.matchings(S)
        return math.log(c) if c else NEG_INF

    def initial_state(self, rng):
        rng = as_generator(rng)
        edges = list(self.spec.edges)
        for _ in range(64):
            used, picked = set(), 0
            for e in rng.permutation(len(edges)).tolist():
                u, v = edges[e]
                if u not in used and v not in used:
                    used.update((u, v))
                    picked += 1
                    if picked == self.spec.k:
                        return tuple(sorted(used))
        return None

    def __repr__(self):
        return f"MatchingFamily(V={self.n}, k={self.spec.k})"


def make_matchings(spec: MatchingSpec) -> MatchingFamily:
    return MatchingFamily(spec)


# ---------------------------------------------------------------------------
# blow-up and partition constraints


class BlowupFamily(WeightedFamily):
    """Each element ``i`` becomes ``m`` perfectly correlated copies ``i + j*n``."""

    def __init__(self, base: WeightedFamily, m: int):
        if m < 1:
            raise DomainError("blow-up factor must be >= 1")
        self.base, self.m = base, int(m)
        self.n, self.k = base.n * self.m, base.k * self.m
        if base.domain is None:
            self.domain = None
        else:
            self.domain = np.sort((base.domain[None, :] + base.n * np.arange(self.m)[:, None]).ravel())

    def _log_weights(self, sets):
        orig = np.sort(sets % self.base.n, axis=1).reshape(sets.shape[0], self.base.k, self.m)
        ok = (orig == orig[:, :, :1]).all(axis=2)
        reps = orig[:, :, 0]
        ok = ok.all(axis=1)
        if self.base.k > 1:
            ok &= (np.diff(reps, axis=1) > 0).all(axis=1)
        out = np.full(sets.shape[0], NEG_INF)
        if ok.any():
            out[ok] = self.base.log_weights(reps[ok])
        return out

    def lift(self, S) -> tuple:
        return tuple(sorted(i + j * self.base.n for i in S for j in range(self.m)))

    def candidates(self):
        c = self.base.candidates()
        if c is None:
            return None
        return as_set_array([self.lift(S) for S in c.tolist()], self.k)

    def initial_state(self, rng):
        S = self.base.initial_state(rng)
        return None if S is None else self.lift(S)


def make_blowup(mu: WeightedFamily, m: int) -> BlowupFamily:
    return BlowupFamily(mu, m)


class PartitionConstrainedFamily(WeightedFamily):
    def __init__(self, base: WeightedFamily, blocks, quotas):
        _check_partition(base.n, blocks, [int(q) for q in quotas], base.k)
        self.base = base
        self.n, self.k = base.n, base.k
        self.domain = base.domain
        self.quotas = np.asarray(quotas, dtype=np.int64)
        self.block_of = np.empty(self.n, dtype=np.int64)
        for b, members in enumerate(blocks):
            self.block_of[list(members)] = b
        self.nblocks = len(blocks)

    def _log_weights(self, sets):
        counts = np.zeros((sets.shape[0], self.nblocks), dtype=np.int64)
        np.add.at(counts, (np.arange(sets.shape[0])[:, None], self.block_of[sets]), 1)
        ok = (counts == self.quotas).all(axis=1)
        out = np.full(sets.shape[0], NEG_INF)
        if ok.any():
            out[ok] = self.base.log_weights(sets[ok])
        return out

    def candidates(self):
        c = self.base.candidates()
        if c is None:
            return None
        return c[np.isfinite(self._log_weights(c))] if len(c) else c


def make_partition_constrained(mu0: WeightedFamily, blocks, quotas) -> PartitionConstrainedFamily:
    return PartitionConstrainedFamily(mu0, blocks, quotas)


# ---------------------------------------------------------------------------
# Reed-Solomon lower-bound instance


def is_prime(q: int) -> bool:
    if q < 2:
        return False
    if q % 2 == 0:
        return q == 2
    r = int(math.isqrt(q))
    return all(q % f for f in range(3, r + 1, 2))


@dataclass(frozen=True)
class ReedSolomonSpec:
    q: int
    k: int
    d: int
    points: tuple = ()
    seed: int = 0

    def __post_init__(self):
        if not is_prime(self.q):
            raise DomainError(f"q = {self.q} is not prime")
        if not 0 <= self.d <= self.k - 1:
            raise DomainError("need 0 <= d <= k - 1")
        pts = self.points or tuple(range(self.k))
        if len(pts) != self.k or len(set(p % self.q for p in pts)) != self.k:
            raise DomainError("need k distinct evaluation points in F_q")
        object.__setattr__(self, "points", tuple(int(p) % self.q for p in pts))


class ReedSolomonFamily(WeightedFamily):
    """Uniform over sets ``{(x_i, y_i)}`` with ``p(x_i) = pi_i(y_i)``, ``deg p <= d``.

    Element ``(x_i, y)`` has flat index ``i * q + y``.
    """

    # enumerate all q^(d+1) polynomials only below this count
    CANDIDATE_LIMIT = 1_000_000

    def __init__(self, spec: ReedSolomonSpec):
        self.spec = spec
        q, k = spec.q, spec.k
        self.n, self.k = k * q, k
        rng = RngStream(spec.seed, (0x5253,)).generator()
        self.perms = np.stack([rng.permutation(q) for _ in range(k)])
        self.inverse = np.argsort(self.perms, axis=1)
        xs = spec.points
        d1 = spec.d + 1
        # Lagrange basis through the first d+1 points, evaluated at every x_j
        basis = np.zeros((k, d1), dtype=np.int64)
        for j in range(k):
            for a in range(d1):
                num, den = 1, 1
                for b in range(d1):
                    if b != a:
                        num = num * (xs[j] - xs[b]) % q
                        den = den * (xs[a] - xs[b]) % q
                basis[j, a] = num * pow(den, q - 2, q) % q
        self.basis = basis

    def _log_weights(self, sets):
        q, d1 = self.spec.q, self.spec.d + 1
        transversal = (sets // q == np.arange(self.k)).all(axis=1)
        vals = self.perms[np.arange(self.k)[None, :], sets % q]
        interp = (vals[:, :d1] @ self.basis.T) % q
        ok = transversal & (interp == vals).all(axis=1)
        return np.where(ok, 0.0, NEG_INF)

    def set_of_polynomial(self, coeffs) -> tuple:
        q = self.spec.q
        xs = np.asarray(self.spec.points)
        vals = np.zeros(self.k, dtype=np.int64)
        for c in reversed(list(coeffs)):
            vals = (vals * xs + int(c)) % q
        ys = self.inverse[np.arange(self.k), vals]
        return tuple((np.arange(self.k) * q + ys).tolist())

    def candidates(self):
        q, d1 = self.spec.q, self.spec.d + 1
        if q**d1 > self.CANDIDATE_LIMIT:
            return None
        return as_set_array(
            [self.set_of_polynomial(c) for c in itertools.product(range(q), repeat=d1)], self.k
        )

    def initial_state(self, rng):
        rng = as_generator(rng)
        return self.set_of_polynomial(rng.integers(self.spec.q, size=self.spec.d + 1).tolist())

    def contains_support_set(self, T) -> bool:
        """Does the element set ``T`` contain some support set?"""
        q = self.spec.q
        by_block = [[] for _ in range(self.k)]
        for e in T:
            by_block[int(e) // q].append(int(e))
        if any(not b for b in by_block):
            return False
        rows = as_set_array(list(itertools.product(*by_block)), self.k)
        return bool(np.isfinite(self._log_weights(rows)).any())

    def __repr__(self):
        s = self.spec
        return f"ReedSolomonFamily(q={s.q}, k={s.k}, d={s.d}, seed={s.seed})"


def make_reed_solomon(spec: ReedSolomonSpec) -> ReedSolomonFamily:
    return ReedSolomonFamily(spec)


# ---------------------------------------------------------------------------
# JSON family specs

_FAMILY_KEYS = {
    "table": ({"n", "k", "sets"}, {"weights"}),
    "dpp": ({"k"}, {"L", "n", "kernel", "rank"}),
    "matroid": ({"kind"}, {"blocks", "quotas", "edges", "vertices"}),
    "matchings": ({"vertices", "edges", "k"}, set()),
    "blowup": ({"base", "m"}, set()),
    "paired": ({"n"}, set()),
    "reed_solomon": ({"q", "k", "d"}, {"points"}),
    "partition_constrained": ({"base", "blocks", "quotas"}, set()),
}


def _check_keys(spec: Mapping, required: set, optional: set, where: str):
    keys = set(spec) - {"family", "seed"}
    missing = required - keys
    unknown = keys - required - optional
    if missing:
        raise FamilySpecError(f"{where}: missing keys {sorted(missing)}")
    if unknown:
        raise FamilySpecError(f"{where}: unknown keys {sorted(unknown)}")


def family_from_spec(spec: Mapping, seed: Optional[int] = None) -> WeightedFamily:
    """Build a family from a parsed JSON spec; unknown keys are rejected."""
    if not isinstance(spec, Mapping) or "family" not in spec:
        raise FamilySpecError("family spec must be an object with a 'family' key")
    name = spec["family"]
    if name not in _FAMILY_KEYS:
        raise FamilySpecError(f"unknown family {name!r}; expected one of {sorted(_FAMILY_KEYS)}")
    _check_keys(spec, *_FAMILY_KEYS[name], where=name)
    seed = int(spec.get("seed", 0 if seed is None else seed))

    if name == "table":
        weights = spec.get("weights") or [1.0] * len(spec["sets"])
        if len(weights) != len(spec["sets"]):
            raise FamilySpecError("table: sets and weights differ in length")
        return TableFamily(spec["n"], spec["k"], {tuple(S): w for S, w in zip(spec["sets"], weights)})
    if name == "dpp":
        if "L" in spec:
            return make_dpp(np.asarray(spec["L"], dtype=float), spec["k"])
        if "n" not in spec:
            raise FamilySpecError("dpp: give either 'L' or 'n' (random kernel)")
        rng = RngStream(seed, (0x4450,)).generator()
        kind = spec.get("kernel", "symmetric")
        if kind == "symmetric":
            L = random_psd_kernel(spec["n"], rng, spec.get("rank"))
        elif kind == "nonsymmetric":
            L = random_nonsymmetric_kernel(spec["n"], rng)
        else:
            raise FamilySpecError(f"dpp: unknown kernel kind {kind!r}")
        return make_dpp(L, spec["k"])
    if name == "matroid":
        if spec["kind"] == "partition":
            _check_keys(spec, {"kind", "blocks", "quotas"}, set(), "matroid/partition")
            return make_matroid(MatroidSpec.partition(spec["blocks"], spec["quotas"]))
        if spec["kind"] == "graphic":
            _check_keys(spec, {"kind", "edges"}, {"vertices"}, "matroid/graphic")
            return make_matroid(MatroidSpec.graphic(spec["edges"], spec.get("vertices")))
        raise FamilySpecError(f"matroid: unknown kind {spec['kind']!r}")
    if name == "matchings":
        return make_matchings(
            MatchingSpec(int(spec["vertices"]), tuple(tuple(e) for e in spec["edges"]), int(spec["k"]))
        )
    if name == "blowup":
        return make_blowup(family_from_spec(spec["base"], seed), int(spec["m"]))
    if name == "paired":
        return make_paired(int(spec["n"]))
    if name == "reed_solomon":
        return make_reed_solomon(
            ReedSolomonSpec(int(spec["q"]), int(spec["k"]), int(spec["d"]), tuple(spec.get("points", ())), seed)
        )
    if name == "partition_constrained":
        return make_partition_constrained(family_from_spec(spec["base"], seed), spec["blocks"], spec["quotas"])
    raise AssertionError(name)


def spec_fingerprint(spec: Mapping) -> str:
    """Hex SHA-256 of the canonical JSON encoding of a family spec."""
    blob = json.dumps(spec, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()
