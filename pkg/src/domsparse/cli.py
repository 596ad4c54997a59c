"""``domsparse`` command line.

Every subcommand reads a JSON family spec (``--spec``) and a mandatory
``--seed``; output goes to ``--out`` or stdout.  ``verify`` exits 0 when
every check passes, 1 when some check fails and 2 on size or argument
errors.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from . import analysis, bench
from .core import DomainError, EnumerationSizeError
from .families import FamilySpecError, family_from_spec, spec_fingerprint
from .pipeline import (
    MarginalCacheError,
    SparsifiedSampler,
    count_partition_function,
    default_sample_count,
    estimate_marginals,
    isotropic_transform,
    load_marginals,
    sample_many,
    save_marginals,
)
from .rng import RngStream
from .samplers import SamplerError, ChainConfig, choose_t, steps_for_target, subset_containment_probability

CHECKS = ("stationarity", "one-step-tv", "ei-tangent", "flc-eig", "spectrum-subdivision", "containment-bounds")


class UsageError(Exception):
    pass


def _positive_float(text):
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return v


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="domsparse", description=__doc__.splitlines()[0])
    ap.add_argument("--spec", type=Path, help="JSON family spec")
    ap.add_argument("--seed", type=int, required=True)
    ap.add_argument("--out", type=Path, help="output file (default stdout)")
    ap.add_argument("--parallel", type=int, default=1, help="worker processes for batch work")
    sub = ap.add_subparsers(dest="command", required=True)

    def chain_flags(p):
        p.add_argument("--alpha", type=float, default=1.0, help="declared FLC/EI exponent")
        p.add_argument("--C", type=float, default=2.0, help="marginal bound used by choose_t")
        p.add_argument("--epsilon", type=float, default=0.25, help="one-step TV target")
        p.add_argument("--c0", type=float, default=1.0)
        p.add_argument("--t", type=int, help="override the intermediate size")
        p.add_argument("--inner", choices=("auto", "exact", "downup"), default="auto")
        p.add_argument("--ell", type=int, default=1)

    def cache_flags(p):
        p.add_argument("--cache", type=Path, help="marginal cache (default <spec>.marginals.json)")
        p.add_argument("--estimate-marginals", action="store_true", help="estimate and write the cache if missing")
        p.add_argument("--marginal-samples", type=int, help="samples for marginal estimation")
        p.add_argument("--eta", type=float, default=0.5)

    p = sub.add_parser("sample", help="draw sparsified samples")
    chain_flags(p)
    cache_flags(p)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--target-tv", type=_positive_float, default=0.05, help="chain steps per sample: ceil(ln(1/target))")
    p.add_argument("--chains", type=int, default=1, help="independent streams, merged by stream id")
    p.add_argument("--stats", action="store_true", help="append a JSON footer with timing and parameters")

    p = sub.add_parser("marginals", help="estimate marginals and write the cache")
    chain_flags(p)
    cache_flags(p)

    p = sub.add_parser("transform", help="report the isotropic subdivision")
    chain_flags(p)
    cache_flags(p)

    p = sub.add_parser("count", help="estimate the partition function")
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--delta", type=float, default=0.05)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--c0", type=float, default=1.0)
    p.add_argument("--base-max-sets", type=int, default=100_000)
    p.add_argument("--samples-per-factor", type=int)

    p = sub.add_parser("verify", help="run oracle checks on an enumerable instance")
    p.add_argument("--checks", default=",".join(CHECKS), help="comma-separated subset of " + ",".join(CHECKS))
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--t", type=int, help="intermediate size for kernel checks (default 2k)")
    p.add_argument("--epsilon", type=float, default=0.25)
    p.add_argument("--counts", help="comma-separated copy counts for spectrum-subdivision")
    p.add_argument("--guard", type=int, default=analysis.ENUMERATION_GUARD)

    p = sub.add_parser("bench", help="run a benchmark suite and emit CSV")
    p.add_argument("--suite", required=True, choices=sorted(bench.SUITES))
    p.add_argument("--trials", type=int, help="trial count for coverage and rejection suites")
    return ap


# ---------------------------------------------------------------------------


@contextmanager
def _output(path):
    if path is None:
        yield sys.stdout
    else:
        with open(path, "w") as fh:
            yield fh


def _load_spec(args):
    if args.spec is None:
        raise UsageError("--spec is required for this command")
    try:
        spec = json.loads(args.spec.read_text())
    except FileNotFoundError:
        raise UsageError(f"spec file {args.spec} not found")
    return spec, family_from_spec(spec, args.seed)


def _cache_path(args) -> Path:
    return args.cache or args.spec.with_name(args.spec.name + ".marginals.json")


def _chain_config(args, n, k, size=None, steps=1):
    t = args.t or choose_t(size or n, k, args.alpha, args.C, args.epsilon, args.c0)
    return ChainConfig(t=t, steps=steps, inner=args.inner, ell=args.ell, epsilon=args.epsilon,
                       alpha=args.alpha, seed=args.seed)


def _marginals(args, spec, mu, require_cache=True):
    path = _cache_path(args)
    fp = spec_fingerprint(spec)
    if path.exists():
        return load_marginals(path, fp), path
    if require_cache and not args.estimate_marginals:
        raise UsageError(f"marginal cache {path} not found; run `domsparse marginals` or pass --estimate-marginals")
    N = args.marginal_samples or default_sample_count(mu.n, mu.k)
    cfg = _chain_config(args, mu.n, mu.k)
    sampler = SparsifiedSampler(mu, None, cfg, RngStream(args.seed, (0x4D,)))
    est = estimate_marginals(mu, sampler, N, args.eta)
    save_marginals(path, est, fp)
    return est, path


def cmd_sample(args, spec, mu, out):
    est, _ = _marginals(args, spec, mu)
    smap, _ = isotropic_transform(mu, est)
    steps = steps_for_target(args.target_tv)
    cfg = _chain_config(args, mu.n, mu.k, smap.size, steps)
    start = time.perf_counter()
    draws = sample_many(mu, est, cfg, args.count, args.seed, chains=args.chains, parallel=args.parallel)
    elapsed = time.perf_counter() - start
    for S in draws:
        out.write(" ".join(map(str, S)) + "\n")
    if args.stats:
        out.write(json.dumps({"count": args.count, "t": cfg.t, "tau": steps, "U": smap.size,
                              "seconds": elapsed, "chains": args.chains}, sort_keys=True) + "\n")
    return 0


def cmd_marginals(args, spec, mu, out):
    args.estimate_marginals = True
    est, path = _marginals(args, spec, mu, require_cache=False)
    out.write(json.dumps({"cache": str(path), "n": est.n, "k": est.k, "N": est.sample_count,
                          "eta": est.eta, "p": est.p.tolist()}, sort_keys=True) + "\n")
    return 0


def cmd_transform(args, spec, mu, out):
    est, _ = _marginals(args, spec, mu)
    smap, _ = isotropic_transform(mu, est)
    out.write(json.dumps({"n": mu.n, "k": mu.k, "counts": smap.counts.tolist(), "U": smap.size,
                          "t": choose_t(smap.size, mu.k, args.alpha, args.C, args.epsilon, args.c0)},
                         sort_keys=True) + "\n")
    return 0


def cmd_count(args, spec, mu, out):
    if not 0 < args.epsilon < 1:
        raise UsageError("--epsilon must lie in (0, 1)")
    if not 0 < args.delta < 1:
        raise UsageError("--delta must lie in (0, 1)")
    rep = count_partition_function(mu, args.epsilon, args.delta, RngStream(args.seed, (0x43,)),
                                   alpha=args.alpha, c0=args.c0, base_max_sets=args.base_max_sets,
                                   samples_per_factor=args.samples_per_factor)
    out.write(json.dumps(rep.to_json(), sort_keys=True) + "\n")
    return 0


def run_checks(mu, names, family="", trials=100, alpha=1.0, t=None, epsilon=0.25, counts=None,
               seed=0, guard=analysis.ENUMERATION_GUARD) -> list:
    """Run verification checks and return their JSON reports."""
    d = analysis.enumerate_family(mu, guard=guard)
    t = t or 2 * d.k
    reports = []
    P = None
    for name in names:
        if name in ("stationarity", "one-step-tv") and P is None:
            P = analysis.exact_transition_matrix(d, t)
        if name == "stationarity":
            err, low = P.stationarity_error(), P.min_entry()
            rep = analysis.CheckReport(name, 1, err, bool(err <= 1e-10 and low > 0), seed,
                                       {"t": t, "min_support_entry": low})
        elif name == "one-step-tv":
            tv = P.one_step_tv()
            worst = int(np.argmax(tv))
            rep = analysis.CheckReport(name, len(tv), float(tv[worst]), bool(tv[worst] <= epsilon), seed,
                                       {"t": t, "epsilon": epsilon,
                                        "domination": P.min_domination_ratio()},
                                       d.sets[worst].tolist())
        elif name == "ei-tangent":
            z = analysis.random_z_points(d.n, trials, RngStream(seed, (0x45,)).generator())
            rep = analysis.ei_tangent_check(d, alpha, z)
            rep.seed = seed
        elif name == "flc-eig":
            rep = analysis.flc_certificate(d, alpha, trials, seed)
        elif name == "spectrum-subdivision":
            c = counts or [2] + [1] * (d.n - 1)
            sub, expected = analysis.spectrum_with_subdivision(mu, c)
            gap = float(np.abs(sub - expected).max()) if len(sub) == len(expected) else math.inf
            rep = analysis.CheckReport(name, 1, gap, bool(gap <= 1e-7), seed, {"counts": list(c)})
        elif name == "containment-bounds":
            rep = containment_sweep(trials, seed, max_n=max(d.n, 4))
        else:
            raise UsageError(f"unknown check {name!r}")
        reports.append(rep.to_json(family))
    return reports


def containment_sweep(points: int, seed: int, max_n: int = 12) -> analysis.CheckReport:
    """Random parameter sweep of the containment sandwich; violation = worst overshoot."""
    rng = RngStream(seed, (0x53,)).generator()
    worst, witness = -math.inf, None
    for _ in range(points):
        n = int(rng.integers(1, max_n + 1))
        t = int(rng.integers(0, n + 1))
        v = int(rng.integers(0, t + 1))
        u = int(rng.integers(0, t - v + 1))
        lo, ex, hi = subset_containment_probability(n, t, u, v)
        gap = max(lo - ex, ex - hi)
        if gap > worst:
            worst, witness = gap, [n, t, u, v]
    return analysis.CheckReport("containment-bounds", points, float(worst), bool(worst <= 0), seed,
                                {"max_n": max_n}, witness)


def cmd_verify(args, spec, mu, out):
    names = [c.strip() for c in args.checks.split(",") if c.strip()]
    unknown = set(names) - set(CHECKS)
    if unknown:
        raise UsageError(f"unknown checks {sorted(unknown)}")
    counts = [int(c) for c in args.counts.split(",")] if args.counts else None
    try:
        reports = run_checks(mu, names, spec.get("family", ""), args.trials, args.alpha, args.t,
                             args.epsilon, counts, args.seed, args.guard)
    except EnumerationSizeError as exc:
        out.write(json.dumps({"error": "size", "message": str(exc)}, sort_keys=True) + "\n")
        return 2
    ok = all(r["pass"] for r in reports)
    out.write(json.dumps({"family": spec.get("family", ""), "pass": ok, "reports": reports}, sort_keys=True) + "\n")
    return 0 if ok else 1


def cmd_bench(args, out):
    kwargs = {}
    if args.trials:
        kwargs["trials"] = args.trials
    out.write(bench.to_csv(bench.run_suite(args.suite, args.seed, **kwargs)))
    return 0


COMMANDS = {"sample": cmd_sample, "marginals": cmd_marginals, "transform": cmd_transform,
            "count": cmd_count, "verify": cmd_verify}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with _output(args.out) as out:
            if args.command == "bench":
                return cmd_bench(args, out)
            spec, mu = _load_spec(args)
            return COMMANDS[args.command](args, spec, mu, out)
    except (UsageError, DomainError, FamilySpecError, MarginalCacheError, EnumerationSizeError) as exc:
        print(f"domsparse: error: {exc}", file=sys.stderr)
        return 2
    except SamplerError as exc:
        print(f"domsparse: sampler failure: {exc.to_json()}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
