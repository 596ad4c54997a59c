"""Sampling engines over weighted families.

The central object is the intermediate-sampling chain: from the current
set ``S0`` draw a uniform ``(t-k)``-subset ``T`` of the other elements and
resample from ``mu`` restricted to ``S0 | T``.  The inner resampling is exact
enumeration when ``C(t, k)`` is small and a down-up walk started at ``S0``
otherwise.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .core import (
    NEG_INF,
    DomainError,
    EmptySupportError,
    EnumerationSizeError,
    ExplicitDistribution,
    WeightedFamily,
    combination_positions,
    complement,
    ksubset,
    restrict,
)
from .rng import as_generator


class SamplerError(RuntimeError):
    """A sampler failed; ``witness`` holds JSON-serializable context."""

    def __init__(self, message: str, witness: Optional[dict] = None):
        super().__init__(message)
        self.witness = witness or {}

    def to_json(self) -> str:
        return json.dumps({"error": str(self), "witness": self.witness}, sort_keys=True)


class InitialStateError(SamplerError):
    pass


@dataclass(frozen=True)
class ChainConfig:
    """Parameters of the intermediate-sampling chain.

    ``inner`` is ``"exact"``, ``"downup"`` or ``"auto"`` (exact whenever the
    restricted family has at most ``inner_guard`` candidate sets).
    ``complement`` enables down-sampling the complement family inside
    ``S0 | T``; ``"auto"`` turns it on when ``ceil(1/alpha) > 1`` and
    ``k > t - k``.
    """

    t: int
    steps: int = 1
    inner: str = "auto"
    ell: int = 1
    inner_steps: Optional[int] = None
    epsilon: float = 0.25
    alpha: float = 1.0
    complement: object = False
    inner_guard: int = 20_000
    seed: int = 0

    def __post_init__(self):
        if self.steps < 1:
            raise DomainError("chain length must be >= 1")
        if self.ell < 1:
            raise DomainError("down-up step size must be >= 1")
        if not 0 < self.epsilon <= 0.25:
            raise DomainError("epsilon must lie in (0, 1/4]")
        if not 0 < self.alpha <= 1:
            raise DomainError("alpha must lie in (0, 1]")
        if self.inner not in ("exact", "downup", "auto"):
            raise DomainError(f"unknown inner sampler {self.inner!r}")

    def validate_for(self, n: int, k: int):
        if not 2 * k <= self.t <= n:
            raise DomainError(f"need 2k <= t <= n, got k={k}, t={self.t}, n={n}")

    def default_inner_steps(self, k: int) -> int:
        return max(1, math.ceil(k ** math.ceil(1 / self.alpha - 1e-12) * math.log(max(self.t, 2))))


def steps_for_target(target_tv: float) -> int:
    """``ceil(ln(1/target_tv))`` chain steps, at least one."""
    if not 0 < target_tv < 1:
        raise DomainError("target TV must lie in (0, 1)")
    return max(1, math.ceil(math.log(1.0 / target_tv) - 1e-12))


# ---------------------------------------------------------------------------
# primitive draws


def sample_index(log_weights: np.ndarray, rng) -> int:
    """Inverse-CDF draw of an index with probability proportional to ``exp(log_weights)``."""
    lw = np.asarray(log_weights, dtype=float)
    top = lw.max()
    if top == NEG_INF:
        raise SamplerError("all candidate weights are zero")
    cdf = np.cumsum(np.exp(lw - top))
    u = rng.random() * cdf[-1]
    return int(min(np.searchsorted(cdf, u, side="right"), len(cdf) - 1))


def exact_sample(d: ExplicitDistribution, rng) -> tuple:
    """Draw ``S`` with probability ``d(S)`` by inverse CDF over the sorted table."""
    rng = as_generator(rng)
    cdf = np.cumsum(d.probs)
    i = int(min(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"), len(cdf) - 1))
    return tuple(d.sets[i].tolist())


def floyd_sample(N: int, m: int, rng) -> np.ndarray:
    """Uniform ``m``-subset of ``range(N)`` by Floyd's algorithm, sorted."""
    if not 0 <= m <= N:
        raise DomainError(f"cannot choose {m} of {N}")
    if m == 0:
        return np.empty(0, dtype=np.int64)
    js = np.arange(N - m, N)
    draws = np.floor(rng.random(m) * (js + 1)).astype(np.int64)
    np.minimum(draws, js, out=draws)
    chosen = set()
    for j, r in zip(js.tolist(), draws.tolist()):
        chosen.add(j if r in chosen else r)
    return np.fromiter(sorted(chosen), dtype=np.int64, count=m)


def uniform_subset_excluding(n: int, exclude, m: int, rng) -> np.ndarray:
    """Uniform ``m``-subset of ``[n] \\ exclude`` without materializing the pool."""
    excl = np.asarray(sorted(exclude), dtype=np.int64)
    r = floyd_sample(n - len(excl), m, rng)
    shifted = excl - np.arange(len(excl))
    return r + np.searchsorted(shifted, r, side="right")


# ---------------------------------------------------------------------------
# down-up walk


def downup_step(mu: WeightedFamily, S, ell: int, rng) -> tuple:
    """Drop a uniform ``ell``-subset of ``S`` and re-add ``ell`` elements ∝ ``mu``."""
    rng = as_generator(rng)
    k = mu.k
    if not 1 <= ell <= k:
        raise DomainError(f"need 1 <= ell <= k = {k}")
    S = np.asarray(S, dtype=np.int64)
    drop = floyd_sample(k, ell, rng)
    kept = np.delete(S, drop)
    avail = np.setdiff1d(mu.ground(), kept, assume_unique=True)
    pos = combination_positions(len(avail), ell)
    sets = np.hstack([np.broadcast_to(kept, (pos.shape[0], k - ell)), avail[pos]])
    sets.sort(axis=1)
    lw = mu.log_weights(sets)
    if not np.isfinite(lw).any():
        raise SamplerError("down-up step found no positive-weight completion",
                           {"S": S.tolist(), "kept": kept.tolist()})
    return tuple(sets[sample_index(lw, rng)].tolist())


# ---------------------------------------------------------------------------
# inner down-sampling and the intermediate chain


def _exact_from_family(nu: WeightedFamily, rng, cands=None) -> tuple:
    if cands is None:
        cands = nu.candidates()
    if cands is None:
        g = nu.ground()
        cands = g[combination_positions(len(g), nu.k)]
    lw = nu.log_weights(cands)
    return tuple(cands[sample_index(lw, rng)].tolist())


def downsample(nu: WeightedFamily, start, cfg: ChainConfig, rng) -> tuple:
    """Draw from the restricted family ``nu`` with the configured inner sampler.

    ``start`` must have positive weight under ``nu``; the down-up walk is
    started there.
    """
    k = nu.k
    g = nu.ground()
    r = len(g)
    cands = nu.candidates()
    count = len(cands) if cands is not None else math.comb(r, k)
    use_exact = cfg.inner == "exact" or (cfg.inner == "auto" and count <= cfg.inner_guard)
    if use_exact:
        return _exact_from_family(nu, rng, cands)

    steps = cfg.inner_steps or cfg.default_inner_steps(k)
    flip = cfg.complement is True or (
        cfg.complement == "auto" and math.ceil(1 / cfg.alpha - 1e-12) > 1 and k > r - k
    )
    if flip:
        fam = complement(nu)
        gset = set(g.tolist())
        state = tuple(sorted(gset - set(start)))
    else:
        fam, state = nu, tuple(start)
    ell = min(cfg.ell, fam.k)
    if ell < 1:
        return tuple(start)
    for _ in range(steps):
        state = downup_step(fam, state, ell, rng)
    if flip:
        return tuple(sorted(gset - set(state)))
    return state


def intermediate_step(mu: WeightedFamily, S0, cfg: ChainConfig, rng) -> tuple:
    """One step of the intermediate-sampling chain from ``S0``."""
    rng = as_generator(rng)
    cfg.validate_for(mu.n, mu.k)
    S0 = tuple(S0)
    T = uniform_subset_excluding(mu.n, S0, cfg.t - mu.k, rng)
    R = np.union1d(np.asarray(S0, dtype=np.int64), T)
    try:
        return downsample(restrict(mu, R), S0, cfg, rng)
    except (SamplerError, EmptySupportError, EnumerationSizeError) as exc:
        raise SamplerError(f"intermediate step failed: {exc}", {"S0": list(S0), "T": T.tolist()}) from exc


def run_chain(mu: WeightedFamily, S0, cfg: ChainConfig, rng, steps: Optional[int] = None) -> tuple:
    """Apply ``steps`` (default ``cfg.steps``) intermediate steps starting at ``S0``."""
    rng = as_generator(rng)
    state = tuple(S0)
    for _ in range(cfg.steps if steps is None else steps):
        state = intermediate_step(mu, state, cfg, rng)
    return state


# ---------------------------------------------------------------------------
# combinatorial helpers


class Containment(NamedTuple):
    lower: float
    exact: float
    upper: float


def subset_containment_probability(n: int, t: int, u: int, v: int) -> Containment:
    """``P[U ⊆ T]`` for ``T`` uniform in ``C([n] \\ V, t - v)``, ``|U| = u``, ``|V| = v``.

    Returns the exact value ``C(n-v-u, t-v-u) / C(n-v, t-v)`` together with
    the sandwich ``((t-u-v)/(n-u-v))^u <= P <= ((t-v)/(n-v))^u``.
    """
    if min(n, t, u, v) < 0 or not u + v <= t <= n:
        raise DomainError(f"need u + v <= t <= n, got n={n}, t={t}, u={u}, v={v}")
    if u == 0:
        return Containment(1.0, 1.0, 1.0)
    log_exact = sum(math.log(t - v - i) - math.log(n - v - i) for i in range(u))
    exact = math.exp(log_exact)
    upper = ((t - v) / (n - v)) ** u
    lower = 1.0 if n == u + v else ((t - u - v) / (n - u - v)) ** u
    return Containment(lower, min(max(exact, lower), upper), upper)


def choose_t(n: int, k: int, alpha: float, C: float = 2.0, epsilon: float = 0.25, c0: float = 1.0) -> int:
    """Intermediate size ``ceil(c0 n^(1-alpha) (C k^2 ln(1/(1-eps)))^alpha)`` clamped to ``[2k, n]``."""
    if not 0 < alpha <= 1:
        raise DomainError("alpha must lie in (0, 1]")
    if C < 1:
        raise DomainError("marginal bound C must be >= 1")
    if not 0 < epsilon <= 0.25:
        raise DomainError("epsilon must lie in (0, 1/4]")
    if n < 2 * k:
        raise DomainError("need n >= 2k")
    raw = math.ceil(c0 * _t_scale(n, k, alpha, C, epsilon) - 1e-9)
    return int(min(max(raw, 2 * k), n))


def _t_scale(n, k, alpha, C, epsilon) -> float:
    return n ** (1 - alpha) * (C * k * k * math.log(1 / (1 - epsilon))) ** alpha


@dataclass
class Calibration:
    c0: float
    t_min: dict = field(default_factory=dict)


def calibrate_c0(instances, alpha: float, C: float = 2.0, epsilon: float = 0.25) -> Calibration:
    """Smallest ``c0`` for which ``choose_t`` gives one-step domination on every instance.

    For each enumerable instance the smallest ``t >= 2k`` with
    ``min P(S0, S) / mu(S) >= 1 - epsilon`` (which implies one-step TV
    ``<= epsilon``) is found by scanning the exact kernel; ``c0`` is the
    largest ratio ``t_min / scale`` over the instances.
    """
    from .analysis import enumerate_family, exact_transition_matrix

    c0, found = 0.0, {}
    for idx, mu in enumerate(instances):
        d = enumerate_family(mu)
        n, k = d.n, d.k
        t_min = n
        for t in range(2 * k, n + 1):
            P = exact_transition_matrix(d, t)
            if P.min_domination_ratio() >= 1 - epsilon and P.one_step_tv().max() <= epsilon:
                t_min = t
                break
        found[idx] = t_min
        c0 = max(c0, t_min / _t_scale(n, k, alpha, C, epsilon))
    return Calibration(c0, found)


# ---------------------------------------------------------------------------
# rejection-sampling variant


def rejection_intermediate_step(mu: WeightedFamily, S0, t: int, M: float, rng, max_tries: int = 1_000_000):
    """Rejection-sampling intermediate step; returns ``(S1, tries)``.

    With ``S0=None`` the intermediate set is a uniform ``t``-subset of
    ``[n]`` accepted with probability ``mu(T) / M``, and the downsampled set
    is an exact draw from ``mu``.  With ``S0`` given the proposal is ``S0``
    plus a uniform ``(t-k)``-subset of the rest.  ``M`` bounds the largest
    intermediate mass in the family's unnormalized units.
    """
    rng = as_generator(rng)
    k = mu.k
    base = np.empty(0, dtype=np.int64) if S0 is None else np.asarray(ksubset(S0, mu.n, k), dtype=np.int64)
    size = t if S0 is None else t - k
    for tries in range(1, max_tries + 1):
        T = uniform_subset_excluding(mu.n, base, size, rng)
        nu = restrict(mu, np.union1d(base, T))
        g = nu.ground()
        cands = nu.candidates()
        if cands is None:
            cands = g[combination_positions(len(g), k)]
        lw = nu.log_weights(cands)
        finite = np.isfinite(lw)
        mass = float(np.exp(lw[finite]).sum()) if finite.any() else 0.0
        if mass > M * (1 + 1e-12):
            raise SamplerError("acceptance bound M is smaller than an observed intermediate mass",
                               {"S0": base.tolist(), "T": T.tolist(), "mass": mass, "M": M})
        if rng.random() * M < mass:
            return tuple(cands[sample_index(lw, rng)].tolist()), tries
    raise SamplerError("rejection sampler exhausted its tries", {"S0": base.tolist(), "tries": max_tries})


def max_intermediate_mass(mu: WeightedFamily, S0, t: int) -> float:
    """``max_{T'} mu(S0 | T')`` by enumeration, in unnormalized units (``S0=None``: ``max_T mu(T)``)."""
    from .analysis import enumerate_family

    d = enumerate_family(mu)
    masses = _intermediate_masses(d, S0, t)
    return float(masses.max() * math.exp(d.log_Z))


def _intermediate_masses(d: ExplicitDistribution, S0, t: int) -> np.ndarray:
    n, k = d.n, d.k
    inc = d.incidence().astype(float)
    if S0 is None:
        rest, base, size = np.arange(n), np.zeros(n, bool), t
    else:
        S0 = ksubset(S0, n, k)
        rest = np.setdiff1d(np.arange(n), S0)
        base = np.zeros(n, bool)
        base[list(S0)] = True
        size = t - k
    pos = combination_positions(len(rest), size)
    out = []
    for start in range(0, len(pos), 4096):
        Ts = rest[pos[start : start + 4096]]
        R = np.broadcast_to(base, (Ts.shape[0], n)).copy()
        if size:
            np.put_along_axis(R, Ts, True, axis=1)
        contained = (inc @ (~R).T.astype(float)) == 0
        out.append(d.probs @ contained)
    return np.concatenate(out)


def rejection_acceptance(d: ExplicitDistribution, t: int, S0=None) -> tuple:
    """Exact ``(E[mu(R)], max mu(R), acceptance = E/max)`` over intermediate sets.

    With ``S0=None`` the intermediate set is a uniform ``t``-subset of
    ``[n]``; otherwise it is ``S0`` plus a uniform ``(t-k)``-subset of the rest.
    """
    masses = _intermediate_masses(d, S0, t)
    mean, top = float(masses.mean()), float(masses.max())
    return mean, top, (mean / top if top > 0 else 0.0)


# ---------------------------------------------------------------------------
# initial state


def _extendable(mu: WeightedFamily, prefix: list, ground: np.ndarray, guard: int) -> Optional[bool]:
    m = mu.k - len(prefix)
    rest = np.setdiff1d(ground, prefix)
    if len(rest) < m:
        return False
    if math.comb(len(rest), m) > guard:
        return None
    pos = combination_positions(len(rest), m)
    sets = np.hstack([np.broadcast_to(np.asarray(prefix, dtype=np.int64), (pos.shape[0], len(prefix))), rest[pos]])
    sets.sort(axis=1)
    return bool(np.isfinite(mu.log_weights(sets)).any())


def find_initial_state(mu: WeightedFamily, rng, retries: int = 16, guard: int = 200_000) -> tuple:
    """A positive-weight set of ``mu``.

    Tries the family's own completion hook, then greedy randomized
    completion that keeps a positive-weight completion reachable (checked by
    enumerating completions when there are at most ``guard`` of them), and
    finally full enumeration.
    """
    from .analysis import enumerate_family

    rng = as_generator(rng)
    hook = mu.initial_state(rng)
    if hook is not None and mu.log_weight(hook) > NEG_INF:
        return ksubset(hook)
    ground = mu.ground()
    attempts = []
    for _ in range(retries):
        prefix: list = []
        while len(prefix) < mu.k:
            order = rng.permutation(np.setdiff1d(ground, prefix))
            for c in order.tolist():
                ok = _extendable(mu, prefix + [c], ground, guard)
                if ok or ok is None:
                    prefix.append(c)
                    break
            else:
                break
        if len(prefix) == mu.k and mu.log_weight(prefix) > NEG_INF:
            return ksubset(prefix)
        attempts.append(sorted(prefix))
        if _extendable(mu, [], ground, guard) is False:
            break
    try:
        d = enumerate_family(mu)
    except (EmptySupportError, EnumerationSizeError) as exc:
        raise InitialStateError(f"no positive-weight starting set found: {exc}", {"prefixes": attempts}) from exc
    return exact_sample(d, rng)
