"""Benchmark suites emitting ``(suite, n, t, metric, value)`` CSV rows."""

from __future__ import annotations

import csv
import io
import math
import time

import numpy as np

from .analysis import enumerate_family, exact_transition_matrix
from .families import (
    LowRankDppFamily,
    ReedSolomonSpec,
    make_paired,
    make_reed_solomon,
    make_singleton_blowup,
)
from .rng import RngStream
from .samplers import (
    ChainConfig,
    choose_t,
    floyd_sample,
    max_intermediate_mass,
    rejection_acceptance,
    rejection_intermediate_step,
)
from .pipeline import SparsifiedSampler

CSV_SCHEMA = "# domsparse-bench v1"
COLUMNS = ("suite", "n", "t", "metric", "value")


def rejection_vs_markov(seed: int = 0, sizes=(8, 12, 16, 20), trials: int = 200):
    """Acceptance of the rejection variant against one-step TV of the chain on paired instances.

    ``exact_acceptance`` keeps ``S0`` inside the intermediate set;
    ``exact_acceptance_s0_free`` draws the whole set uniformly, which is the
    variant whose acceptance decays like ``t / n``.
    """
    for n in sizes:
        mu = make_paired(n)
        d = enumerate_family(mu)
        S0 = tuple(d.sets[0].tolist())
        for t in sorted({4, max(4, round(math.sqrt(n) * 2)), n // 2, n}):
            _, _, acc = rejection_acceptance(d, t, S0)
            yield n, t, "exact_acceptance", acc
            yield n, t, "exact_acceptance_s0_free", rejection_acceptance(d, t)[2]
            M = max_intermediate_mass(mu, S0, t)
            rng = RngStream(seed, (n, t)).generator()
            total = sum(rejection_intermediate_step(mu, S0, t, M, rng)[1] for _ in range(trials))
            yield n, t, "empirical_acceptance", trials / total
            yield n, t, "chain_one_step_tv", float(exact_transition_matrix(d, t).one_step_tv().max())


def sparsify_scaling(seed: int = 0, sizes=(500, 1000, 2000, 5000), k: int = 4, rank: int = 8,
                     samples: int = 10, alpha: float = 1.0):
    """Wall time per sample at ``t = choose_t`` against ``t = n`` on low-rank DPPs."""
    for n in sizes:
        V = RngStream(seed, (n,)).generator().standard_normal((n, rank))
        mu = LowRankDppFamily(V, k)
        for label, t in (("choose_t", choose_t(n, k, alpha)), ("full", n)):
            cfg = ChainConfig(t=t, steps=1, alpha=alpha)
            s = SparsifiedSampler(mu, None, cfg, RngStream(seed, (n, t)), burn_in=0)
            start = time.perf_counter()
            s.samples(samples)
            yield n, t, f"seconds_per_sample_{label}", (time.perf_counter() - start) / samples


def reed_solomon_coverage(seed: int = 0, q: int = 101, k: int = 3, d: int = 0, ts=(10,), trials: int = 1000):
    """``P[T contains a support set]`` for uniform ``t``-subsets, with the union bound."""
    mu = make_reed_solomon(ReedSolomonSpec(q, k, d, seed=seed))
    for t in ts:
        rng = RngStream(seed, (t,)).generator()
        hits = sum(mu.contains_support_set(floyd_sample(mu.n, t, rng)) for _ in range(trials))
        yield mu.n, t, "coverage", hits / trials
        yield mu.n, t, "union_bound", t**k / q ** (k - d - 1)


def blowup_coverage(seed: int = 0, n: int = 64, k: int = 3, ts=(8,), trials: int = 1000):
    """Coverage of the singleton blow-up parts by uniform ``t``-subsets."""
    p = n // k
    parts = np.arange(p)[:, None] + p * np.arange(k)[None, :]
    for t in ts:
        rng = RngStream(seed, (t,)).generator()
        hits = 0
        for _ in range(trials):
            inside = np.zeros(n, dtype=bool)
            inside[floyd_sample(n, t, rng)] = True
            hits += bool(inside[parts].all(axis=1).any())
        yield n, t, "coverage", hits / trials
        yield n, t, "bound", n * (t / n) ** k


SUITES = {
    "rejection-vs-markov": rejection_vs_markov,
    "sparsify-scaling": sparsify_scaling,
    "reed-solomon-coverage": reed_solomon_coverage,
    "blowup-coverage": blowup_coverage,
}


def run_suite(name: str, seed: int = 0, **kwargs) -> list:
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; expected one of {sorted(SUITES)}")
    return [(name, n, t, metric, value) for n, t, metric, value in SUITES[name](seed=seed, **kwargs)]


def to_csv(rows) -> str:
    buf = io.StringIO()
    buf.write(CSV_SCHEMA + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for suite, n, t, metric, value in rows:
        w.writerow((suite, n, t, metric, repr(float(value))))
    return buf.getvalue()
