"""Exact desk-scale oracles and certificates.

Everything here enumerates the support, so it is meant for small instances
(thousands to a few million candidate sets).  The samplers never call into
this module on their hot path; tests and the ``verify`` command do.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.special import logsumexp

from .core import (
    ENUMERATION_GUARD,
    DomainError,
    EmptySupportError,
    EnumerationSizeError,
    ExplicitDistribution,
    SubdivisionMap,
    WeightedFamily,
    combination_positions,
    ksubset,
    restrict,
    subdivide,
)
from .rng import as_generator


def candidate_count(mu: WeightedFamily) -> int:
    c = mu.candidates()
    if c is not None:
        return int(c.shape[0])
    return math.comb(len(mu.ground()), mu.k)


def enumerate_family(mu: WeightedFamily, guard: int = ENUMERATION_GUARD, override: bool = False) -> ExplicitDistribution:
    """Normalized table of every positive-weight set of ``mu``.

    The returned distribution carries ``log_Z``, the log partition function
    of the unnormalized weights.
    """
    count = candidate_count(mu)
    if count > guard and not override:
        raise EnumerationSizeError(
            f"{count} candidate sets exceed the enumeration guard of {guard}"
        )
    sets = mu.candidates()
    if sets is None:
        g = mu.ground()
        sets = g[combination_positions(len(g), mu.k)]
    chunks = [mu.log_weights(sets[i : i + 65536]) for i in range(0, max(len(sets), 1), 65536)]
    lw = np.concatenate(chunks) if chunks else np.empty(0)
    return ExplicitDistribution.from_log_weights(mu.n, mu.k, sets, lw)


def _explicit(mu) -> ExplicitDistribution:
    return mu if isinstance(mu, ExplicitDistribution) else enumerate_family(mu)


def exact_marginals(mu) -> np.ndarray:
    """``P[i in S]`` for every element of the ground set."""
    d = _explicit(mu)
    out = np.zeros(d.n)
    np.add.at(out, d.sets.ravel(), np.repeat(d.probs, d.k))
    return out


def pair_marginals(mu) -> np.ndarray:
    """``P[i in S and j in S]`` with ``P[i]`` on the diagonal."""
    d = _explicit(mu)
    inc = d.incidence().astype(float)
    return (inc * d.probs[:, None]).T @ inc


def _aligned(p, q):
    if isinstance(p, ExplicitDistribution) and isinstance(q, ExplicitDistribution):
        keys = sorted(set(p.as_dict()) | set(q.as_dict()))
        return np.array([p.prob(S) for S in keys]), np.array([q.prob(S) for S in keys])
    p, q = np.asarray(p, dtype=float), np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise DomainError("distributions live on different universes")
    return p, q


def tv_distance(p, q) -> float:
    """Total variation distance ``0.5 * sum |p - q|``."""
    p, q = _aligned(p, q)
    return float(0.5 * np.abs(p - q).sum())


def kl_divergence(nu, mu) -> float:
    """``D_KL(nu || mu)`` in nats; ``+inf`` if ``nu`` charges a ``mu``-null point."""
    p, q = _aligned(nu, mu)
    pos = p > 0
    if (q[pos] <= 0).any():
        return math.inf
    return float(max(0.0, np.sum(p[pos] * (np.log(p[pos]) - np.log(q[pos])))))


def generating_polynomial(mu, z) -> float:
    """Evaluate ``g(z) = sum_S mu(S) prod_{i in S} z_i`` for normalized ``mu``."""
    d = _explicit(mu)
    z = np.asarray(z, dtype=float)
    if z.shape != (d.n,):
        raise DomainError(f"z must have length {d.n}")
    if (z < 0).any():
        raise DomainError("generating polynomial is evaluated on the nonnegative orthant only")
    with np.errstate(divide="ignore"):
        terms = np.log(d.probs) + np.log(z)[d.sets].sum(axis=1)
    return float(np.exp(logsumexp(terms)))


# ---------------------------------------------------------------------------
# entropic independence


@dataclass
class CheckReport:
    check: str
    trials: int
    max_violation: float
    passed: bool
    seed: Optional[int] = None
    params: dict = field(default_factory=dict)
    witness: Optional[list] = None

    def to_json(self, family: str = "") -> dict:
        return {
            "check": self.check,
            "family": family,
            "params": self.params,
            "trials": self.trials,
            "max_violation": self.max_violation,
            "pass": self.passed,
            "seed": self.seed,
            "witness": self.witness,
        }


def random_z_points(n: int, count: int, rng, high: float = 4.0) -> np.ndarray:
    return as_generator(rng).uniform(0.0, high, size=(count, n))


def ei_tangent_check(mu, alpha: float, z_points, tol: float = 1e-9) -> CheckReport:
    """Test ``g(z^alpha)^(1/(k alpha)) <= sum_i p_i z_i`` at every given point.

    ``p`` is the normalized marginal vector ``P[i in S] / k``.  The report's
    ``max_violation`` is the largest ``lhs - rhs`` seen.
    """
    if not 0 < alpha <= 1:
        raise DomainError("alpha must lie in (0, 1]")
    d = _explicit(mu)
    p = exact_marginals(d) / d.k
    z = np.atleast_2d(np.asarray(z_points, dtype=float))
    if (z < 0).any():
        raise DomainError("z-points must be nonnegative")
    logp = np.log(d.probs)
    worst, arg = -math.inf, None
    with np.errstate(divide="ignore"):
        logz = np.log(z)
    for row in range(z.shape[0]):
        lg = logsumexp(logp + alpha * logz[row][d.sets].sum(axis=1))
        lhs = math.exp(lg / (d.k * alpha))
        rhs = float(p @ z[row])
        if lhs - rhs > worst:
            worst, arg = lhs - rhs, row
    return CheckReport(
        "ei-tangent",
        z.shape[0],
        float(worst),
        bool(worst <= tol),
        params={"alpha": alpha},
        witness=None if arg is None else z[arg].tolist(),
    )


# ---------------------------------------------------------------------------
# correlation matrices


class CorrelationMatrix:
    """``Psi(i, i) = 1 - P[i]``, ``Psi(i, j) = P[j | i] - P[j]``.

    Elements with zero marginal are dropped; ``elements`` lists the retained
    indices in row order.
    """

    def __init__(self, matrix: np.ndarray, marginals: np.ndarray, elements: np.ndarray):
        self.matrix = matrix
        self.marginals = marginals
        self.elements = elements

    def symmetrized(self) -> np.ndarray:
        s = np.sqrt(self.marginals)
        sym = s[:, None] * self.matrix / s[None, :]
        return 0.5 * (sym + sym.T)

    def spectrum(self) -> np.ndarray:
        """Eigenvalues in ascending order (self-adjoint in the P-weighted inner product)."""
        return np.linalg.eigvalsh(self.symmetrized())

    def max_eigenvalue(self) -> float:
        return float(self.spectrum()[-1])


def correlation_matrix(mu) -> CorrelationMatrix:
    d = _explicit(mu)
    P = exact_marginals(d)
    keep = np.flatnonzero(P > 0)
    M = pair_marginals(d)[np.ix_(keep, keep)]
    Pk = P[keep]
    psi = M / Pk[:, None] - Pk[None, :]
    return CorrelationMatrix(psi, Pk, keep)


def flc_certificate(mu, alpha: float, trials: int = 100, seed: int = 0, tol: float = 1e-8,
                    log_range: float = 3.0) -> CheckReport:
    """Randomized falsifier for ``lambda_max(Psi_{lambda * mu}) <= 1/alpha``.

    Fields are drawn log-uniformly from ``[e^-log_range, e^log_range]``.  A
    pass means no violating field was found in ``trials`` attempts; the
    reported maximum is a lower bound on the true supremum.
    """
    d = _explicit(mu)
    rng = as_generator(seed)
    worst, witness = -math.inf, None
    for _ in range(trials):
        lam = np.exp(rng.uniform(-log_range, log_range, size=d.n))
        top = correlation_matrix(d.reweight(lam)).max_eigenvalue()
        if top > worst:
            worst, witness = top, lam
    return CheckReport(
        "flc-eig",
        trials,
        float(worst),
        bool(worst <= 1.0 / alpha + tol),
        seed=seed,
        params={"alpha": alpha, "bound": 1.0 / alpha},
        witness=None if witness is None else witness.tolist(),
    )


def mass_of_superset(mu, T, log_Z: Optional[float] = None) -> float:
    """``mu(T) = sum_{S subset of T} mu(S)`` for normalized ``mu``."""
    if isinstance(mu, ExplicitDistribution):
        T = set(int(i) for i in T)
        inside = np.array([set(S) <= T for S in mu.sets.tolist()])
        return float(mu.probs[inside].sum())
    if log_Z is None:
        log_Z = enumerate_family(mu).log_Z
    if len(set(T)) < mu.k:
        return 0.0
    guard = math.comb(len(set(T)), mu.k)
    sub = restrict(mu, T)
    try:
        d = enumerate_family(sub, guard=max(guard, 1))
    except EmptySupportError:
        return 0.0
    return float(math.exp(d.log_Z - log_Z))


# ---------------------------------------------------------------------------
# exact transition kernels


@dataclass
class TransitionMatrix:
    support: np.ndarray
    P: np.ndarray
    stationary: np.ndarray

    def __post_init__(self):
        if (self.P < 0).any():
            raise DomainError("transition matrix has negative entries")
        rows = self.P.sum(axis=1)
        if np.abs(rows - 1).max() > 1e-10:
            raise DomainError(f"transition rows sum to {rows.min()}..{rows.max()}")
        self._index = {tuple(S): i for i, S in enumerate(self.support.tolist())}

    def index(self, S) -> int:
        return self._index[tuple(S)]

    def row(self, S) -> np.ndarray:
        return self.P[self.index(S)]

    def stationarity_error(self) -> float:
        """``|| mu^T P - mu^T ||_1``."""
        return float(np.abs(self.stationary @ self.P - self.stationary).sum())

    def min_entry(self) -> float:
        return float(self.P.min())

    def one_step_tv(self) -> np.ndarray:
        return 0.5 * np.abs(self.P - self.stationary[None, :]).sum(axis=1)

    def min_domination_ratio(self) -> float:
        """``min_{S0, S} P(S0, S) / mu(S)``."""
        return float((self.P / self.stationary[None, :]).min())

    def tv_after(self, steps: int) -> np.ndarray:
        """Per-start TV distance of ``P^steps(S0, .)`` from ``mu``."""
        Pm = np.linalg.matrix_power(self.P, steps)
        return 0.5 * np.abs(Pm - self.stationary[None, :]).sum(axis=1)


def intermediate_kernel_row(d: ExplicitDistribution, S0, t: int, inc: Optional[np.ndarray] = None,
                            guard: int = 2_000_000) -> np.ndarray:
    """Exact one-step law ``P(S0, .)`` of the intermediate-sampling chain.

    Averages ``mu(S) / mu(S0 | T)`` over all ``T`` in ``C([n] \\ S0, t - k)``.
    """
    n, k = d.n, d.k
    if not k <= t <= n:
        raise DomainError(f"need k <= t <= n, got t={t}")
    S0 = ksubset(S0, n, k)
    rest = np.setdiff1d(np.arange(n), S0)
    nT = math.comb(n - k, t - k)
    if nT > guard:
        raise EnumerationSizeError(f"{nT} intermediate sets exceed the guard of {guard}")
    if inc is None:
        inc = d.incidence()
    pos = combination_positions(n - k, t - k)
    acc = np.zeros(len(d))
    base = np.zeros(n, dtype=bool)
    base[list(S0)] = True
    inc_f = inc.astype(np.float64)
    for start in range(0, nT, 4096):
        Ts = rest[pos[start : start + 4096]]
        R = np.broadcast_to(base, (Ts.shape[0], n)).copy()
        np.put_along_axis(R, Ts, True, axis=1)
        outside = inc_f @ (~R).T.astype(np.float64)
        contained = outside == 0
        mass = d.probs @ contained
        acc += (contained / mass[None, :]).sum(axis=1)
    return d.probs * acc / nT


def downup_kernel_row(d: ExplicitDistribution, S, ell: int, inc: Optional[np.ndarray] = None) -> np.ndarray:
    """Exact one-step law of the ``ell``-step down-up walk from ``S``."""
    k = d.k
    if not 1 <= ell <= k:
        raise DomainError("need 1 <= ell <= k")
    if inc is None:
        inc = d.incidence()
    S = np.asarray(ksubset(S, d.n, k))
    row = np.zeros(len(d))
    removals = combination_positions(k, ell)
    for rem in removals:
        keep = np.delete(S, rem)
        ok = inc[:, keep].all(axis=1) if len(keep) else np.ones(len(d), bool)
        w = d.probs * ok
        row += w / w.sum()
    return row / len(removals)


def exact_transition_matrix(mu, t: Optional[int] = None, kernel: str = "intermediate", ell: int = 1) -> TransitionMatrix:
    """Exact transition matrix over the support of ``mu``.

    ``kernel="intermediate"`` is the intermediate-sampling chain with
    intermediate size ``t`` and an exact inner sampler; ``kernel="downup"``
    is the ``ell``-step down-up walk.
    """
    d = _explicit(mu)
    inc = d.incidence()
    if kernel == "intermediate":
        if t is None:
            raise DomainError("intermediate kernel needs t")
        rows = [intermediate_kernel_row(d, S, t, inc) for S in d.sets.tolist()]
    elif kernel == "downup":
        rows = [downup_kernel_row(d, S, ell, inc) for S in d.sets.tolist()]
    else:
        raise DomainError(f"unknown kernel {kernel!r}")
    return TransitionMatrix(d.sets, np.vstack(rows), d.probs.copy())


def spectrum_with_subdivision(mu: WeightedFamily, counts: Sequence[int]) -> tuple:
    """Spectrum of the subdivided family's correlation matrix, and the
    predicted multiset: the original spectrum plus ``sum(t_i - 1)`` ones."""
    smap = SubdivisionMap(counts)
    d = enumerate_family(mu)
    base = correlation_matrix(d).spectrum()
    sub = correlation_matrix(enumerate_family(subdivide(mu, smap))).spectrum()
    P = exact_marginals(d)
    extra = int(sum(c - 1 for c, p in zip(counts, P) if p > 0))
    expected = np.sort(np.concatenate([base, np.ones(extra)]))
    return sub, expected
