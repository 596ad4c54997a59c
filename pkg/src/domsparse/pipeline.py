"""End-to-end sparsified sampling and counting.

The flow is: estimate marginals once, subdivide elements into
``ceil((n/k) p_i)`` interchangeable copies, then for every chain step draw a
sparse domain of ``t`` copies and downsample from the correspondingly
reweighted restriction of the original family.  The subdivided family is
never materialized; copies of one element only show up as the field value
``c_i / t_i``.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from statistics import NormalDist
from typing import Callable, Optional

import numpy as np

from .core import (
    DomainError,
    ExternalField,
    SubdivisionMap,
    WeightedFamily,
    apply_external_field,
    combination_positions,
    reindex,
    restrict,
    subdivide,
)
from .rng import RngStream, as_generator
from .samplers import (
    ChainConfig,
    SamplerError,
    choose_t,
    downsample,
    find_initial_state,
    steps_for_target,
    uniform_subset_excluding,
)

DEFAULT_ETA = 0.5
COUNT_BASE_GUARD = 100_000


class MarginalCacheError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# marginal estimates


@dataclass(frozen=True)
class MarginalEstimates:
    p: np.ndarray
    sample_count: int
    eta: float
    k: int

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        object.__setattr__(self, "p", p)
        n = len(p)
        if abs(p.sum() - self.k) > 1e-9:
            raise DomainError(f"estimates sum to {p.sum()}, expected {self.k}")
        if (p < self.eta * self.k / n - 1e-12).any():
            raise DomainError("an estimate falls below the eta * k / n floor")

    @property
    def n(self) -> int:
        return len(self.p)

    @classmethod
    def from_marginals(cls, marginals, k: int, eta: float = DEFAULT_ETA, sample_count: int = 0):
        """Blend given marginals with the uniform vector."""
        m = np.asarray(marginals, dtype=float)
        n = len(m)
        freq = m * (k / m.sum())
        return cls((1 - eta) * freq + eta * (k / n), sample_count, eta, k)


def default_sample_count(n: int, k: int, delta: float = 0.01) -> int:
    return math.ceil(8 * (n / k) * math.log(2 * n / delta))


def estimate_marginals(mu: WeightedFamily, sampler: Callable, N: int, eta: float = DEFAULT_ETA, rng=None) -> MarginalEstimates:
    """Frequency estimates from ``N`` draws of ``sampler(rng)``, blended with uniform.

    ``sampler`` may also be an object with a ``samples(count)`` method, in
    which case ``rng`` is ignored.
    """
    if N < 1:
        raise DomainError("need at least one sample")
    if not 0 < eta < 1:
        raise DomainError("eta must lie in (0, 1)")
    counts = np.zeros(mu.n, dtype=np.int64)
    if hasattr(sampler, "samples"):
        draws = sampler.samples(N)
    else:
        rng = as_generator(rng)
        draws = (sampler(rng) for _ in range(N))
    for S in draws:
        counts[list(S)] += 1
    return MarginalEstimates.from_marginals(counts, mu.k, eta, N)


def isotropic_transform(mu: WeightedFamily, est: MarginalEstimates):
    """Copy counts ``t_i = ceil((n/k) p_i)`` and the lazily subdivided family."""
    if est.n != mu.n or est.k != mu.k:
        raise DomainError("estimates do not match the family's n and k")
    scaled = est.p * (mu.n / mu.k)
    counts = np.maximum(np.ceil(scaled - 1e-9), 1).astype(np.int64)
    smap = SubdivisionMap(counts)
    return smap, subdivide(mu, smap)


# ---------------------------------------------------------------------------
# sparse domains


@dataclass(frozen=True)
class SparseDomain:
    """Originals ``R`` touched by the drawn copies, with field ``c_i / t_i`` on them."""

    R: np.ndarray
    field: ExternalField
    counts: np.ndarray

    def family(self, mu: WeightedFamily) -> WeightedFamily:
        if (self.field.values()[self.R] == 1).all():
            return restrict(mu, self.R)
        return restrict(apply_external_field(mu, self.field), self.R)


def draw_sparse_domain(smap: SubdivisionMap, S0, t: int, rng, k: Optional[int] = None) -> SparseDomain:
    """Uniform ``(t-k)`` copies outside the copies standing for ``S0``, plus ``S0`` itself.

    ``S0`` occupies copy 0 of each of its elements; by interchangeability of
    copies this loses nothing.  Copies are drawn as flat indices with Floyd's
    algorithm, so ``U`` is never built.
    """
    S0 = np.asarray(sorted(S0), dtype=np.int64)
    k = len(S0) if k is None else k
    if not 2 * k <= t <= smap.size:
        raise DomainError(f"need 2k <= t <= |U|, got t={t}, |U|={smap.size}")
    occupied = smap.offsets[S0]
    flat = uniform_subset_excluding(smap.size, occupied, t - k, rng)
    originals = np.searchsorted(smap.offsets, flat, side="right") - 1
    c = np.bincount(originals, minlength=smap.n)
    c[S0] += 1
    R = np.flatnonzero(c)
    lam = ExternalField.restriction(smap.n, {int(i): c[i] / smap.counts[i] for i in R})
    return SparseDomain(R, lam, c[R])


def sparsified_step(mu: WeightedFamily, smap: SubdivisionMap, S0, cfg: ChainConfig, rng) -> tuple:
    dom = draw_sparse_domain(smap, S0, cfg.t, rng, mu.k)
    try:
        return downsample(dom.family(mu), tuple(S0), cfg, rng)
    except SamplerError as exc:
        exc.witness.setdefault("S0", list(S0))
        exc.witness.setdefault("R", dom.R.tolist())
        raise


def sparsified_sample(mu: WeightedFamily, est: Optional[MarginalEstimates], cfg: ChainConfig, rng, S0=None) -> tuple:
    """``cfg.steps`` sparsified chain steps from ``S0`` (found if not given)."""
    rng = as_generator(rng)
    smap = _subdivision(mu, est)
    state = tuple(S0) if S0 is not None else find_initial_state(mu, rng)
    for _ in range(cfg.steps):
        state = sparsified_step(mu, smap, state, cfg, rng)
    return state


def _subdivision(mu, est) -> SubdivisionMap:
    if est is None:
        return SubdivisionMap(np.ones(mu.n, dtype=np.int64))
    return isotropic_transform(mu, est)[0]


def default_t(mu: WeightedFamily, est: Optional[MarginalEstimates], alpha: float, C: float = 2.0,
              epsilon: float = 0.25, c0: float = 1.0) -> int:
    """``choose_t`` evaluated on the subdivided ground set size."""
    return choose_t(_subdivision(mu, est).size, mu.k, alpha, C, epsilon, c0)


class SparsifiedSampler:
    """A persistent sparsified chain; each sample is the state ``cfg.steps`` steps later.

    The chain is burned in for ``burn_in`` steps (default ``5 * cfg.steps``)
    before the first sample is returned.
    """

    def __init__(self, mu: WeightedFamily, est: Optional[MarginalEstimates], cfg: ChainConfig,
                 rng=None, S0=None, burn_in: Optional[int] = None):
        self.mu, self.est, self.cfg = mu, est, cfg
        self.rng = as_generator(rng if rng is not None else RngStream(cfg.seed))
        self.smap = _subdivision(mu, est)
        if not 2 * mu.k <= cfg.t <= self.smap.size:
            raise DomainError(f"need 2k <= t <= |U| = {self.smap.size}, got t={cfg.t}")
        self.state = tuple(S0) if S0 is not None else find_initial_state(mu, self.rng)
        self.burn_in = 5 * cfg.steps if burn_in is None else burn_in
        self.steps_taken = 0

    def step(self) -> tuple:
        self.state = sparsified_step(self.mu, self.smap, self.state, self.cfg, self.rng)
        self.steps_taken += 1
        return self.state

    def sample(self) -> tuple:
        if self.steps_taken == 0:
            for _ in range(self.burn_in):
                self.step()
        for _ in range(self.cfg.steps):
            self.step()
        return self.state

    def samples(self, count: int) -> list:
        return [self.sample() for _ in range(count)]


def _chain_batch(args):
    mu, est, cfg, seed, stream, count, burn_in = args
    s = SparsifiedSampler(mu, est, cfg, RngStream(seed, (stream,)), burn_in=burn_in)
    return s.samples(count)


def sample_many(mu: WeightedFamily, est: Optional[MarginalEstimates], cfg: ChainConfig, count: int,
                seed: int = 0, chains: int = 1, parallel: int = 1, burn_in: Optional[int] = None) -> list:
    """``count`` samples from ``chains`` independent streams, concatenated by stream id.

    The output depends on ``(seed, chains)`` only; ``parallel`` sets the
    number of worker processes.
    """
    if count < 0 or chains < 1:
        raise DomainError("count must be >= 0 and chains >= 1")
    sizes = [count // chains + (i < count % chains) for i in range(chains)]
    jobs = [(mu, est, cfg, seed, i, c, burn_in) for i, c in enumerate(sizes) if c]
    if parallel > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(parallel, len(jobs))) as pool:
            parts = list(pool.map(_chain_batch, jobs))
    else:
        parts = [_chain_batch(j) for j in jobs]
    return [S for part in parts for S in part]


# ---------------------------------------------------------------------------
# marginal cache


def save_marginals(path, est: MarginalEstimates, fingerprint: str):
    doc = {"n": est.n, "k": est.k, "p": est.p.tolist(), "eta": est.eta, "N": est.sample_count,
           "family_fingerprint": fingerprint}
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        json.dump(doc, fh, sort_keys=True)
    os.replace(tmp, path)


def load_marginals(path, fingerprint: str) -> MarginalEstimates:
    with open(path) as fh:
        doc = json.load(fh)
    expected = {"n", "k", "p", "eta", "N", "family_fingerprint"}
    if set(doc) != expected:
        raise MarginalCacheError(f"{path}: unexpected keys {sorted(set(doc) ^ expected)}")
    if doc["family_fingerprint"] != fingerprint:
        raise MarginalCacheError(f"{path} was computed for a different family spec")
    est = MarginalEstimates(np.asarray(doc["p"], dtype=float), int(doc["N"]), float(doc["eta"]), int(doc["k"]))
    if est.n != doc["n"]:
        raise MarginalCacheError(f"{path}: length of p does not match n")
    return est


# ---------------------------------------------------------------------------
# counting


@dataclass
class CountReport:
    estimate: float
    log_estimate: float
    ci: tuple
    samples_used: int
    epsilon: float
    delta: float
    base_Z: float
    factors: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "Z_estimate": self.estimate,
            "log_Z_estimate": self.log_estimate,
            "ci": list(self.ci),
            "samples_used": self.samples_used,
            "epsilon": self.epsilon,
            "delta": self.delta,
            "base_Z": self.base_Z,
            "factors": [{"removed": j, "q": q, "samples": N} for j, q, N in self.factors],
        }


def _exact_log_Z(mu: WeightedFamily) -> float:
    from scipy.special import logsumexp

    g = mu.ground()
    cands = mu.candidates()
    if cands is None:
        cands = g[combination_positions(len(g), mu.k)]
    lw = mu.log_weights(cands)
    return float(logsumexp(lw)) if np.isfinite(lw).any() else -math.inf


def _telescoping_length(r: int, k: int, base_max_sets: int) -> int:
    m = 0
    while r > 2 * k and math.comb(r, k) > base_max_sets:
        r, m = r - 1, m + 1
    return m


def count_partition_function(mu: WeightedFamily, epsilon: float, delta: float, rng=None, *,
                             alpha: float = 1.0, c0: float = 1.0, base_max_sets: int = COUNT_BASE_GUARD,
                             samples_per_factor: Optional[int] = None) -> CountReport:
    """Estimate ``Z = sum_S mu(S)`` to relative error ``epsilon`` with probability ``1 - delta``.

    Elements are removed one at a time, each time the one with the smallest
    estimated marginal in the current restriction ``R``; the factor
    ``q = P[j not in S]`` under ``mu_R`` is estimated by sparsified samples
    and ``Z(R) = Z(R - j) / q``.  Once ``C(|R|, k) <= base_max_sets`` (or
    ``|R| <= 2k``) the remainder is enumerated exactly.
    """
    if not 0 < epsilon < 1:
        raise DomainError("epsilon must lie in (0, 1)")
    if not 0 < delta < 1:
        raise DomainError("delta must lie in (0, 1)")
    rng = as_generator(rng)
    k = mu.k
    R = mu.ground().copy()
    m = _telescoping_length(len(R), k, base_max_sets)
    if m:
        eps_f = epsilon / (2 * m)
        N = samples_per_factor or math.ceil(2 * math.log(2 * m / delta) / eps_f**2)
        pilot = max(1, N // 4)
    factors, used, var_log = [], 0, 0.0
    state = None
    for _ in range(m):
        local = reindex(mu, R)
        t = choose_t(len(R), k, alpha, 2.0, 0.25, c0)
        cfg = ChainConfig(t=t, steps=1, alpha=alpha)
        S0 = None if state is None else tuple(np.searchsorted(R, state).tolist())
        sampler = SparsifiedSampler(local, None, cfg, rng, S0=S0)
        hits = np.zeros(len(R), dtype=np.int64)
        for S in sampler.samples(pilot):
            hits[list(S)] += 1
        j = int(np.argmin(hits))
        miss = sum(j not in S for S in sampler.samples(N))
        used += pilot + N
        q = miss / N
        if q == 0:
            raise SamplerError("estimated factor is zero", {"R": R.tolist(), "removed": int(R[j])})
        var_log += (1 - q) / (N * q)
        factors.append((int(R[j]), q, N))
        if j in sampler.state:
            state = None
        else:
            state = local.lift(sampler.state)
        R = np.delete(R, j)
    log_base = _exact_log_Z(restrict(mu, R))
    log_Z = log_base - sum(math.log(q) for _, q, _ in factors)
    z = NormalDist().inv_cdf(1 - delta / 2)
    sd = math.sqrt(var_log)
    Z = math.exp(log_Z)
    return CountReport(Z, log_Z, (math.exp(log_Z - z * sd), math.exp(log_Z + z * sd)),
                       used, epsilon, delta, math.exp(log_base), factors)
