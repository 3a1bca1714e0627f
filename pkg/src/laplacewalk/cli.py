"""Command line: ``exact`` tables, ``simulate`` dumps and ``verify`` suites.

Exit codes: 0 success, 1 a verification check failed, 2 usage error.
"""

from __future__ import annotations

import argparse
import itertools
import math
import sys
from typing import Callable

import numpy as np

from . import bessel, branching, embed, exact, io, rng as rngmod, verify, walk


class UsageError(Exception):
    pass


# --------------------------------------------------------------------------
# parameter parsing


def parse_values(text: str, integer: bool = False) -> list:
    """``"1..5"`` (integers), ``"0.5,1,2"`` or a single value; ``inf`` allowed."""
    out = []
    for part in str(text).split(","):
        part = part.strip()
        if ".." in part:
            lo, hi = part.split("..")
            out.extend(range(int(lo), int(hi) + 1))
        elif integer:
            out.append(int(part))
        else:
            out.append(float(part))
    return out


# --------------------------------------------------------------------------
# exact laws


def _series_rows(ser, **params):
    return [[k, float(c)] for k, c in enumerate(ser)]


LAWS: dict[str, tuple[tuple[str, ...], Callable, str]] = {
    # name: (parameters, evaluator -> value, domain text)
    "tail_dk": (("k", "v"), lambda k, v: exact.tail_dk(int(k), v), "k >= 1 integer, v >= 0"),
    "limit_density": (("x",), lambda x: float(exact.limit_density(x)), "x > 0"),
    "mellin": (("s",), exact.mellin_limit, "-1 < s < 3"),
    "mk_tail": (("k", "v"), lambda k, v: exact.mk_tail(int(k), v), "k >= 1 integer, v >= 0"),
    "interval_pgf": (("u", "v", "z"), exact.interval_pgf, "0 <= u <= v <= inf, 0 <= z <= 1"),
    "cluster_pgf": (("lam", "v", "z"), exact.cluster_pgf, "lam > 0, v >= 0, 0 <= z <= 1"),
    "ndes_pgf": (("v", "z"), exact.ndes_pgf, "v >= 0, 0 <= z <= 1"),
    "max_mnu_tail": (("t",), exact.max_mnu_tail, "t >= 0"),
    "first_death_tail": (("t",), lambda t: float(exact.first_death_tail(t)), "t >= 0"),
    "expected_gap": (("k", "n"), lambda k, n: exact.expected_gap(int(k), None if math.isinf(n) else int(n)),
                     "1 <= k <= n (n may be inf)"),
    "p0_power": (("m", "i", "j"), lambda m, i, j: float(exact.p0_power(int(m), int(i), int(j))),
                 "m >= 0, i >= 1, j >= 0 integers"),
}
SERIES_LAWS: dict[str, tuple[tuple[str, ...], Callable, str]] = {
    "gap_tail_series": (("v",), exact.gap_tail_series, "v >= 0"),
    "gap_density_series": (("v",), exact.gap_density_series, "v > 0"),
    "ndes_pmf": (("v",), exact.ndes_pmf_series, "v >= 0 (inf allowed)"),
    "interval_pmf": (("u", "v"), exact.interval_pmf_series, "0 <= u <= v"),
    "cluster_pmf": (("lam", "v"), exact.cluster_pmf_series, "lam > 0, v >= 0"),
}
INTEGER_PARAMS = {"k", "K", "m", "i", "j"}
ALL_LAWS = sorted(set(LAWS) | set(SERIES_LAWS) | {"agreement"})


def _param_lists(args, names):
    lists = []
    for name in names:
        raw = getattr(args, name, None)
        if raw is None:
            raise UsageError(f"missing --{name}")
        lists.append(parse_values(raw, integer=name in INTEGER_PARAMS))
    return lists


def cmd_exact(args) -> tuple[str, int]:
    law = args.law
    if law == "agreement":
        names = ("v", "z", "K")
        header = ["v", "z", "K", "lhs", "rhs", "error", "tailBound"]
        rows = []
        for v, z, K in itertools.product(*_param_lists(args, names)):
            a = exact.agreement_check(v, z, int(K))
            rows.append([v, z, int(K), a.lhs, a.rhs, a.error, a.tail_bound])
        return io.table_text(law, {}, header, rows, args.format), 0
    if law in LAWS:
        names, fn, _ = LAWS[law]
        rows = [[*combo, fn(*combo)] for combo in itertools.product(*_param_lists(args, names))]
        return io.table_text(law, {}, [*names, "value"], rows, args.format), 0
    if law in SERIES_LAWS:
        names, fn, _ = SERIES_LAWS[law]
        order = int(args.order if args.order is not None else 20)
        combos = list(itertools.product(*_param_lists(args, names)))
        rows = []
        for combo in combos:
            ser = fn(*combo, order)
            rows += [[*combo, k, float(c)] for k, c in enumerate(ser)]
        return io.table_text(law, {"order": order}, [*names, "k", "value"], rows, args.format), 0
    raise UsageError(f"unknown law {law!r}; choose from {', '.join(ALL_LAWS)}")


def law_domain(law: str) -> str:
    for table in (LAWS, SERIES_LAWS):
        if law in table:
            return table[law][2]
    return "v > 0, |z| < 1, K >= 1" if law == "agreement" else ""


# --------------------------------------------------------------------------
# samplers


def _point_sampler(fn):
    """Wrap a one-run sampler returning points into a block function."""
    def block(g, n):
        return [np.asarray(fn(g)) for _ in range(n)]
    return block


def _samplers(args) -> dict[str, Callable]:
    K = int(args.K)
    cap = args.level_cap
    h = args.grid_step
    vmax = args.v_max
    return {
        "stopped_walk": _point_sampler(lambda g: walk.sample_stopped_walk(g).levels),
        "marked_bd": _point_sampler(lambda g: branching.simulate_marked_bd(g, cap).points),
        "geiger": _point_sampler(lambda g: branching.simulate_geiger(g, cap).points),
        "w_branching": lambda g, n: branching.w_branching_batch(g, n, K)[0],
        "w_via_differences": lambda g, n: bessel.w_via_differences_batch(g, n, K, h)[0],
        "feller_w": lambda g, n: walk.feller_w_batch(g, n, int(args.n), K),
        "mk_infty": lambda g, n: embed.mk_infty_batch(g, n, K, safety=args.safety)[:, 1:],
        "h_chain": lambda g, n: branching.h_chain_batch(g, n, K).astype(float),
        "walk_minimum_gap": lambda g, n: embed.walk_minimum_gap_batch(g, n, int(args.n))[:, None],
        "ndes_bessel": _point_sampler(lambda g: bessel.simulate_ndes_bessel(g, h, vmax).points),
        "nw_bessel": _point_sampler(lambda g: bessel.simulate_nw_bessel(g, h, vmax).points),
        "poisson_cluster": _point_sampler(lambda g: bessel.poisson_cluster(args.lam, vmax, g).points),
        "bes3_poisson": _point_sampler(lambda g: embed.sample_bes3_poisson(args.v, args.safety, g).points),
    }


SAMPLER_NAMES = ("stopped_walk", "marked_bd", "geiger", "w_branching", "w_via_differences", "feller_w",
                 "mk_infty", "h_chain", "walk_minimum_gap", "ndes_bessel", "nw_bessel", "poisson_cluster",
                 "bes3_poisson", "besq_path")


def cmd_simulate(args) -> tuple[str, int]:
    if args.seed is None:
        raise UsageError("--seed is required for simulation")
    name = args.sampler
    if name == "besq_path":
        path = bessel.besq_path(args.delta, args.x0, args.grid_step, args.v_max, rngmod.stream(args.seed, name))
        rows = list(zip(path.times, path.values))
        return io.table_text(name, {}, ["t", "Q"], rows, args.format), 0
    table = _samplers(args)
    if name not in table:
        raise UsageError(f"unknown sampler {name!r}; choose from {', '.join(SAMPLER_NAMES)}")
    parts = rngmod.run_blocks(table[name], args.replicas, args.seed, f"simulate/{name}", args.threads)
    if isinstance(parts[0], list):
        runs = [r for p in parts for r in p]
        rows = [(i, k + 1, x) for i, r in enumerate(runs) for k, x in enumerate(r)]
    else:
        mat = np.concatenate(parts)
        rows = [(i, k + 1, mat[i, k]) for i in range(mat.shape[0]) for k in range(mat.shape[1])]
    if args.format == "json":
        values = [{"replica": i, "k": k, "value": x} for i, k, x in rows]
        return io.law_json(name, {"seed": args.seed, "replicas": args.replicas}, values), 0
    return io.csv_text(["replica", "k", "value"], rows), 0


# --------------------------------------------------------------------------
# verification

RNG_FREE_SUITES = {"agreement", "series"}


def cmd_verify(args) -> tuple[str, int]:
    names = list(verify.SUITES) if args.suite == "all" else [args.suite]
    for n in names:
        if n not in verify.SUITES:
            raise UsageError(f"unknown suite {n!r}; choose from {', '.join(verify.SUITES)} or all")
    if args.seed is None and any(n not in RNG_FREE_SUITES for n in names):
        raise UsageError("--seed is required for suites that simulate")
    cfg = verify.RunConfig(
        seed=args.seed if args.seed is not None else 0,
        replicas=args.replicas, grid_step=args.grid_step, v_max=args.v_max,
        level_cap=args.level_cap, safety=args.safety, threads=args.threads,
        retry=args.retry_on_fail, timings=args.timings,
    )
    reports = []
    for n in names:
        rs = verify.run_suite(n, cfg)
        for r in rs:
            print(r.line(), file=sys.stderr)
        reports += rs
    text = io.reports_json(reports, args.suite, args.seed) if args.format == "json" else io.reports_csv(reports)
    return text, 0 if all(r.passed for r in reports) else 1


# --------------------------------------------------------------------------


def _positive(kind):
    def conv(text):
        x = kind(text)
        if not x > 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {text}")
        return x
    return conv


def _safety(text):
    x = float(text)
    if x < 10:
        raise argparse.ArgumentTypeError("safety must be >= 10")
    return x


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, help="master seed (required for simulation)")
    common.add_argument("--replicas", type=_positive(int), default=10**6)
    common.add_argument("--grid-step", type=_positive(float), default=1e-3)
    common.add_argument("--v-max", type=_positive(float), default=8.0)
    common.add_argument("--level-cap", type=_positive(float), default=math.inf)
    common.add_argument("--safety", type=_safety, default=None,
                        help="BES3 truncation factor; default is the exact escape rule")
    common.add_argument("--format", choices=("csv", "json"), default=None)
    common.add_argument("--out", help="output file (default: stdout)")
    common.add_argument("--threads", type=_positive(int), default=1)
    common.add_argument("--retry-on-fail", action="store_true")

    p = argparse.ArgumentParser(prog="laplacewalk", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    ex = sub.add_parser("exact", parents=[common], help="tables of closed-form laws")
    ex.add_argument("law", help=", ".join(ALL_LAWS))
    for name in ("k", "v", "z", "K", "s", "x", "n", "u", "lam", "t", "m", "i", "j"):
        ex.add_argument(f"--{name}")
    ex.add_argument("--order", type=int, help="series truncation order (default 20)")

    sim = sub.add_parser("simulate", parents=[common], help="sample dumps")
    sim.add_argument("sampler", help=", ".join(SAMPLER_NAMES))
    sim.add_argument("--K", default=10, type=_positive(int))
    sim.add_argument("--n", default=4000, type=_positive(int), help="walk length")
    sim.add_argument("--lam", default=1.0, type=_positive(float))
    sim.add_argument("--v", default=4.0, type=_positive(float), help="BES3 target level")
    sim.add_argument("--delta", default=4.0, type=float)
    sim.add_argument("--x0", default=0.0, type=float)

    ver = sub.add_parser("verify", parents=[common], help="run verification suites")
    ver.add_argument("suite", help=", ".join(verify.SUITES) + ", all")
    ver.add_argument("--timings", action="store_true", help="record runtimeMs (breaks byte-identity)")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.format is None:
        args.format = "json" if args.command == "verify" else "csv"
    handlers = {"exact": cmd_exact, "simulate": cmd_simulate, "verify": cmd_verify}
    try:
        text, code = handlers[args.command](args)
    except UsageError as e:
        parser.error(str(e))
    except (ValueError, ZeroDivisionError, OverflowError) as e:
        extra = f" (valid domain: {law_domain(args.law)})" if args.command == "exact" else ""
        parser.error(f"{e}{extra}")
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
