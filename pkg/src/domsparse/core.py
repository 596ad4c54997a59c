"""Domain types and structure-preserving transforms for k-homogeneous set
distributions.

A distribution over size-k subsets of ``{0, ..., n-1}`` is represented lazily
by a :class:`WeightedFamily`: an object that maps a sorted index tuple to a
log-weight, with ``-inf`` standing for weight zero.  Transforms (external
fields, restriction, complement, subdivision) return new lazy views; nothing
is enumerated unless an oracle in :mod:`domsparse.analysis` asks for it.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

NEG_INF = -math.inf

#: Refuse to enumerate more candidate sets than this without an override.
ENUMERATION_GUARD = 5_000_000


class DomainError(ValueError):
    """Raised on dimension mismatches and malformed index sets."""


class EnumerationSizeError(RuntimeError):
    """Raised when an exact oracle would exceed the desk-scale guard."""


class EmptySupportError(RuntimeError):
    """Raised when a family turns out to have no positive-weight set."""


class WeightContractError(RuntimeError):
    """Raised when a log-weight oracle returns NaN."""


def ksubset(indices: Iterable[int], n: Optional[int] = None, k: Optional[int] = None) -> tuple:
    """Canonicalize ``indices`` into a sorted tuple and validate it."""
    s = tuple(sorted(int(i) for i in indices))
    if len(set(s)) != len(s):
        raise DomainError(f"repeated index in {s}")
    if n is not None and s and (s[0] < 0 or s[-1] >= n):
        raise DomainError(f"index out of range [0, {n}) in {s}")
    if k is not None and len(s) != k:
        raise DomainError(f"expected a set of size {k}, got {s}")
    return s


def as_set_array(sets, k: int) -> np.ndarray:
    """Return ``sets`` as an ``(m, k)`` int64 array (one set per row)."""
    arr = np.asarray(sets, dtype=np.int64)
    if arr.ndim == 2 and arr.shape[1] == k:
        return arr
    if arr.size == 0:
        return arr.reshape(0, k)
    return arr.reshape(-1, k)


def lexsort_rows(sets: np.ndarray) -> np.ndarray:
    """Indices that sort the rows of ``sets`` lexicographically."""
    if sets.shape[1] == 0:
        return np.arange(sets.shape[0])
    return np.lexsort(sets.T[::-1])


@lru_cache(maxsize=256)
def combination_positions(r: int, k: int) -> np.ndarray:
    """All k-subsets of ``range(r)`` as a read-only ``(C(r,k), k)`` array."""
    if k == 0:
        out = np.zeros((1, 0), dtype=np.int64)
    else:
        count = math.comb(r, k)
        out = np.fromiter(
            itertools.chain.from_iterable(itertools.combinations(range(r), k)),
            dtype=np.int64,
            count=count * k,
        ).reshape(count, k)
    out.setflags(write=False)
    return out


def _check_nan(values: np.ndarray) -> np.ndarray:
    if np.isnan(values).any():
        raise WeightContractError("log-weight oracle returned NaN")
    return values


class WeightedFamily:
    """Lazy nonnegative weight function on size-``k`` subsets of ``[n]``.

    Subclasses implement either :meth:`_log_weight` (one sorted tuple at a
    time) or override :meth:`_log_weights` for a vectorized batch path.

    ``domain`` is a sorted array of the elements that can appear in a
    positive-weight set, or ``None`` for all of ``[n]``.  Sets reaching
    outside the domain must evaluate to ``-inf``; samplers use the domain to
    avoid enumerating hopeless candidates.
    """

    n: int
    k: int
    domain: Optional[np.ndarray] = None

    def _log_weight(self, S: tuple) -> float:
        raise NotImplementedError

    def _log_weights(self, sets: np.ndarray) -> np.ndarray:
        return np.fromiter(
            (self._log_weight(tuple(row)) for row in sets.tolist()),
            dtype=float,
            count=sets.shape[0],
        )

    def log_weight(self, S) -> float:
        S = ksubset(S, self.n, self.k)
        return float(self.log_weights(np.asarray([S], dtype=np.int64).reshape(1, self.k))[0])

    def log_weights(self, sets) -> np.ndarray:
        """Vectorized log-weights for an ``(m, k)`` array of sorted rows."""
        sets = as_set_array(sets, self.k)
        if sets.shape[0] == 0:
            return np.empty(0)
        return _check_nan(np.asarray(self._log_weights(sets), dtype=float))

    def ground(self) -> np.ndarray:
        if self.domain is None:
            return np.arange(self.n, dtype=np.int64)
        return self.domain

    def candidates(self) -> Optional[np.ndarray]:
        """A small explicit superset of the support, if the family has one."""
        return None

    def initial_state(self, rng) -> Optional[tuple]:
        """Family-specific way to find a positive-weight set, or ``None``."""
        return None

    def domain_mask(self) -> np.ndarray:
        mask = np.zeros(self.n, dtype=bool)
        mask[self.ground()] = True
        return mask


def _filter_rows(sets: Optional[np.ndarray], mask: np.ndarray) -> Optional[np.ndarray]:
    if sets is None:
        return None
    if sets.shape[0] == 0 or sets.shape[1] == 0:
        return sets
    return sets[mask[sets].all(axis=1)]


# ---------------------------------------------------------------------------
# external fields


@dataclass(frozen=True)
class ExternalField:
    """Per-element nonnegative multipliers ``lambda_i`` stored sparsely.

    ``default`` is the value of every index absent from ``entries``: ``1.0``
    for a multiplicative reweighting, ``0.0`` for a restriction field whose
    support is exactly the stored entries.
    """

    n: int
    entries: Mapping[int, float] = field(default_factory=dict)
    default: float = 1.0

    def __post_init__(self):
        clean = {}
        for i, v in dict(self.entries).items():
            i, v = int(i), float(v)
            if not 0 <= i < self.n:
                raise DomainError(f"field index {i} outside [0, {self.n})")
            if not v >= 0 or math.isnan(v):
                raise DomainError(f"field value at {i} must be >= 0, got {v}")
            clean[i] = v
        if self.default < 0:
            raise DomainError("field default must be >= 0")
        object.__setattr__(self, "entries", clean)

    @classmethod
    def multiplicative(cls, n: int, entries: Mapping[int, float] = None) -> "ExternalField":
        return cls(n, entries or {}, default=1.0)

    @classmethod
    def restriction(cls, n: int, entries: Mapping[int, float]) -> "ExternalField":
        return cls(n, entries, default=0.0)

    @classmethod
    def from_vector(cls, values) -> "ExternalField":
        values = np.asarray(values, dtype=float)
        return cls(len(values), {i: v for i, v in enumerate(values) if v != 1.0}, default=1.0)

    def value(self, i: int) -> float:
        return self.entries.get(int(i), self.default)

    def values(self) -> np.ndarray:
        out = np.full(self.n, self.default, dtype=float)
        for i, v in self.entries.items():
            out[i] = v
        return out

    def nnz(self) -> int:
        return sum(1 for v in self.entries.values() if v != self.default)

    def support(self) -> np.ndarray:
        return np.flatnonzero(self.values() > 0)

    def product(self, other: "ExternalField") -> "ExternalField":
        if other.n != self.n:
            raise DomainError("field dimension mismatch")
        keys = set(self.entries) | set(other.entries)
        return ExternalField(
            self.n,
            {i: self.value(i) * other.value(i) for i in keys},
            default=self.default * other.default,
        )


class FieldedFamily(WeightedFamily):
    def __init__(self, base: WeightedFamily, lam: ExternalField):
        self.base, self.field = base, lam
        self.n, self.k = base.n, base.k
        vals = lam.values()
        with np.errstate(divide="ignore"):
            self._log_lam = np.log(vals)
        mask = base.domain_mask() & (vals > 0)
        self.domain = None if mask.all() else np.flatnonzero(mask)

    def _log_weights(self, sets):
        return self.base.log_weights(sets) + self._log_lam[sets].sum(axis=1)

    def candidates(self):
        return _filter_rows(self.base.candidates(), self.domain_mask())


def apply_external_field(mu: WeightedFamily, lam: ExternalField) -> WeightedFamily:
    """The reweighted family ``lambda * mu`` (unnormalized, lazy)."""
    if lam.n != mu.n:
        raise DomainError(f"field has n={lam.n}, family has n={mu.n}")
    return FieldedFamily(mu, lam)


class RestrictedFamily(WeightedFamily):
    def __init__(self, base: WeightedFamily, R):
        self.base = base
        self.n, self.k = base.n, base.k
        mask = np.zeros(self.n, dtype=bool)
        R = np.asarray(sorted(set(int(i) for i in R)), dtype=np.int64)
        if R.size and (R[0] < 0 or R[-1] >= self.n):
            raise DomainError("restriction set outside the ground set")
        mask[R] = True
        mask &= base.domain_mask()
        self._mask = mask
        self.domain = np.flatnonzero(mask)

    def _log_weights(self, sets):
        inside = self._mask[sets].all(axis=1) if self.k else np.ones(len(sets), bool)
        out = np.full(sets.shape[0], NEG_INF)
        if inside.any():
            out[inside] = self.base.log_weights(sets[inside])
        return out

    def candidates(self):
        return _filter_rows(self.base.candidates(), self._mask)

    def initial_state(self, rng):
        S = self.base.initial_state(rng)
        if S is not None and self._mask[list(S)].all():
            return S
        return None


def restrict(mu: WeightedFamily, R) -> WeightedFamily:
    """``mu`` with every set not contained in ``R`` given weight zero."""
    return RestrictedFamily(mu, R)


class ReindexedFamily(WeightedFamily):
    """``mu`` restricted to ``R`` and relabeled so that ``R[j]`` becomes ``j``."""

    def __init__(self, base: WeightedFamily, R):
        self.base = base
        self.labels = np.asarray(sorted(set(int(i) for i in R)), dtype=np.int64)
        if self.labels.size and (self.labels[0] < 0 or self.labels[-1] >= base.n):
            raise DomainError("reindexing set outside the ground set")
        self.n, self.k = len(self.labels), base.k
        keep = base.domain_mask()[self.labels]
        self.domain = None if keep.all() else np.flatnonzero(keep)
        self._local = np.full(base.n, -1, dtype=np.int64)
        self._local[self.labels] = np.arange(self.n)

    def _log_weights(self, sets):
        return self.base.log_weights(self.labels[sets])

    def candidates(self):
        c = self.base.candidates()
        if c is None:
            return None
        inside = self._local[c].min(axis=1) >= 0 if c.shape[1] else np.ones(len(c), bool)
        return self._local[c[inside]]

    def initial_state(self, rng):
        S = self.base.initial_state(rng)
        if S is not None and (self._local[list(S)] >= 0).all():
            return tuple(self._local[list(S)].tolist())
        return None

    def lift(self, S) -> tuple:
        return tuple(self.labels[list(S)].tolist())


def reindex(mu: WeightedFamily, R) -> ReindexedFamily:
    return ReindexedFamily(mu, R)


class ComplementFamily(WeightedFamily):
    """Complement taken inside the base family's domain."""

    def __init__(self, base: WeightedFamily):
        self.base = base
        self.n = base.n
        g = base.ground()
        self.k = len(g) - base.k
        self.domain = None if base.domain is None else base.domain
        self._ground = g
        self._mask = base.domain_mask()

    def _flip(self, sets: np.ndarray, k_out: int) -> np.ndarray:
        member = np.zeros((sets.shape[0], self.n), dtype=bool)
        if sets.shape[1]:
            np.put_along_axis(member, sets, True, axis=1)
        member = ~member[:, self._ground]
        flipped = np.broadcast_to(self._ground, member.shape)[member]
        return flipped.reshape(sets.shape[0], k_out)

    def _log_weights(self, sets):
        inside = self._mask[sets].all(axis=1) if self.k else np.ones(len(sets), bool)
        out = np.full(sets.shape[0], NEG_INF)
        if inside.any():
            out[inside] = self.base.log_weights(self._flip(sets[inside], self.base.k))
        return out

    def candidates(self):
        c = self.base.candidates()
        if c is None:
            return None
        return self._flip(c, self.k)

    def initial_state(self, rng):
        S = self.base.initial_state(rng)
        if S is None:
            return None
        return tuple(sorted(set(self._ground.tolist()) - set(S)))


def complement(mu: WeightedFamily) -> WeightedFamily:
    """Family on ``(|G|-k)``-sets with weight ``mu(G \\ S)``, ``G`` the domain.

    For an unrestricted family ``G = [n]``; for a restricted one the
    complement is relative to the restriction set, which is what the
    complement trick for down-sampling inside ``S0 | T`` needs.
    """
    if isinstance(mu, ComplementFamily):
        return mu.base
    return ComplementFamily(mu)


# ---------------------------------------------------------------------------
# subdivision


class SubdivisionMap:
    """Copy counts ``t_i >= 1`` and the flat indexing of the copy universe U.

    Copy ``j`` (0-based) of original ``i`` has flat index ``offsets[i] + j``.
    """

    def __init__(self, counts: Sequence[int]):
        counts = np.asarray(counts, dtype=np.int64)
        if counts.ndim != 1 or (counts < 1).any():
            raise DomainError("subdivision counts must be a vector of integers >= 1")
        self.counts = counts
        self.counts.setflags(write=False)
        self.offsets = np.concatenate([[0], np.cumsum(counts)[:-1]]).astype(np.int64)
        self.size = int(counts.sum())
        self.original = np.repeat(np.arange(len(counts), dtype=np.int64), counts)

    @property
    def n(self) -> int:
        return len(self.counts)

    def to_flat(self, i: int, j: int) -> int:
        if not 0 <= j < self.counts[i]:
            raise DomainError(f"copy {j} of element {i} does not exist")
        return int(self.offsets[i] + j)

    def from_flat(self, f: int) -> tuple:
        i = int(self.original[f])
        return i, int(f - self.offsets[i])

    def is_trivial(self) -> bool:
        return bool((self.counts == 1).all())

    def __repr__(self):
        return f"SubdivisionMap(n={self.n}, |U|={self.size})"


class SubdividedFamily(WeightedFamily):
    def __init__(self, base: WeightedFamily, smap: SubdivisionMap):
        if smap.n != base.n:
            raise DomainError("subdivision map length must equal the ground size")
        self.base, self.map = base, smap
        self.n, self.k = smap.size, base.k
        self._log_t = np.log(smap.counts.astype(float))
        if base.domain is None:
            self.domain = None
        else:
            self.domain = np.flatnonzero(base.domain_mask()[smap.original])

    def _log_weights(self, sets):
        orig = self.map.original[sets]
        orig.sort(axis=1)
        out = np.full(sets.shape[0], NEG_INF)
        distinct = (np.diff(orig, axis=1) > 0).all(axis=1) if self.k > 1 else np.ones(len(sets), bool)
        if distinct.any():
            o = orig[distinct]
            out[distinct] = self.base.log_weights(o) - self._log_t[o].sum(axis=1)
        return out

    def candidates(self):
        c = self.base.candidates()
        if c is None:
            return None
        rows = []
        for S in c.tolist():
            choices = [range(self.map.offsets[i], self.map.offsets[i] + self.map.counts[i]) for i in S]
            rows.extend(itertools.product(*choices))
        return as_set_array(rows, self.k)


def subdivide(mu: WeightedFamily, smap: SubdivisionMap) -> WeightedFamily:
    """Split element ``i`` into ``t_i`` interchangeable copies of mass ``1/t_i``."""
    return SubdividedFamily(mu, smap)


# ---------------------------------------------------------------------------
# explicit distributions


@dataclass(frozen=True, eq=False)
class ExplicitDistribution:
    """Fully enumerated table of (set, probability), rows sorted lexicographically."""

    n: int
    k: int
    sets: np.ndarray
    probs: np.ndarray
    log_Z: float = 0.0

    def __post_init__(self):
        sets = as_set_array(self.sets, self.k)
        probs = np.asarray(self.probs, dtype=float)
        if sets.shape[0] != probs.shape[0]:
            raise DomainError("sets and probabilities differ in length")
        if sets.shape[0] == 0:
            raise EmptySupportError("explicit distribution with empty support")
        if (probs <= 0).any():
            raise DomainError("explicit distributions store positive probabilities only")
        if abs(probs.sum() - 1.0) > 1e-12:
            raise DomainError(f"probabilities sum to {probs.sum()!r}")
        order = lexsort_rows(sets)
        sets, probs = sets[order], probs[order]
        if sets.shape[0] > 1 and (np.diff(sets, axis=0) == 0).all(axis=1).any():
            raise DomainError("duplicate set in explicit distribution")
        sets.setflags(write=False)
        probs.setflags(write=False)
        object.__setattr__(self, "sets", sets)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "_index", {tuple(r): i for i, r in enumerate(sets.tolist())})

    @classmethod
    def from_log_weights(cls, n, k, sets, log_weights) -> "ExplicitDistribution":
        sets = as_set_array(sets, k)
        lw = np.asarray(log_weights, dtype=float)
        keep = np.isfinite(lw)
        if not keep.any():
            raise EmptySupportError("every candidate set has weight zero")
        sets, lw = sets[keep], lw[keep]
        shift = lw.max()
        w = np.exp(lw - shift)
        total = w.sum()
        return cls(n, k, sets, w / total, float(shift + math.log(total)))

    @classmethod
    def from_dict(cls, n, k, table: Mapping) -> "ExplicitDistribution":
        items = [(ksubset(S, n, k), float(p)) for S, p in table.items() if p > 0]
        total = sum(p for _, p in items)
        return cls(n, k, [S for S, _ in items], [p / total for _, p in items])

    @property
    def Z(self) -> float:
        return math.exp(self.log_Z)

    def __len__(self):
        return self.sets.shape[0]

    @property
    def entries(self) -> list:
        return [(tuple(S), float(p)) for S, p in zip(self.sets.tolist(), self.probs)]

    def index(self, S) -> int:
        return self._index[tuple(S)]

    def prob(self, S) -> float:
        i = self._index.get(tuple(sorted(S)))
        return 0.0 if i is None else float(self.probs[i])

    def as_dict(self) -> dict:
        return dict(self.entries)

    def incidence(self) -> np.ndarray:
        """Boolean ``(m, n)`` membership matrix of the support."""
        inc = np.zeros((len(self), self.n), dtype=bool)
        if self.k:
            np.put_along_axis(inc, self.sets, True, axis=1)
        return inc

    def reweight(self, lam) -> "ExplicitDistribution":
        """Exact ``lambda * nu`` for a positive vector (or field) ``lam``."""
        vals = lam.values() if isinstance(lam, ExternalField) else np.asarray(lam, dtype=float)
        with np.errstate(divide="ignore"):
            lw = np.log(self.probs) + np.log(vals)[self.sets].sum(axis=1)
        return ExplicitDistribution.from_log_weights(self.n, self.k, self.sets, lw)


def down_operator(nu: ExplicitDistribution, ell: int) -> ExplicitDistribution:
    """Project ``nu`` through ``D_{k->ell}``: drop to a uniform ell-subset."""
    if not 1 <= ell <= nu.k:
        raise DomainError(f"ell must lie in [1, {nu.k}], got {ell}")
    if ell == nu.k:
        return nu
    pos = combination_positions(nu.k, ell)
    sub = nu.sets[:, pos].reshape(-1, ell)
    mass = np.repeat(nu.probs / math.comb(nu.k, ell), pos.shape[0])
    uniq, inv = np.unique(sub, axis=0, return_inverse=True)
    out = np.bincount(inv.ravel(), weights=mass, minlength=uniq.shape[0])
    out = out / out.sum()
    return ExplicitDistribution(nu.n, ell, uniq, out)
