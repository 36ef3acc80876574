"""Command-line front end.

Exit codes: 0 success, 2 invalid input, 3 budget or overflow abort, 4 failed
check under ``--strict``.
"""
from __future__ import annotations

import argparse
import json
import math
import re
import sys
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__, config
from .averages import NonnegativityError, SupportExplosion, cesaro, multi_average
from .decompositions import distal_tower, hostkra_project, jdlg_split, von_neumann_split
from .factors import cond_expect, parse_factor
from .observables import (FrequencyOverflow, Observable, PointVector, character, constant, fejer,
                          from_json, indicator, integral, random_charsum, sup_bound, to_json)
from .recurrence import (ap_count, build_correspondence, correspondence_verify, gvn_harness, mr_certificate,
                         parse_integer_set)
from .seminorms import BudgetExceeded, bench_gowers, ghk_seminorm
from .systems import CATALOG, System, parse_system

EXIT_OK, EXIT_INVALID, EXIT_BUDGET, EXIT_STRICT = 0, 2, 3, 4
NUMERIC_KEYS = ("prune_eps", "quad_resolution", "block", "work_budget", "support_cap", "max_k")


class InvalidInput(ValueError):
    pass


# --------------------------------------------------------------------------
# formatting


def fmt(x: Any) -> str:
    """17 significant digits, locale independent."""
    if isinstance(x, bool) or x is None:
        return json.dumps(x)
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, complex):
        return f"{fmt(x.real)}{'+' if x.imag >= 0 or math.isnan(x.imag) else '-'}{fmt(abs(x.imag))}j"
    x = float(x)
    if math.isnan(x) or math.isinf(x):
        return json.dumps(str(x))
    return format(x, ".17g")


def _flat(obj, depth: int = 2) -> bool:
    """Scalars, or lists nested at most `depth` deep: printed on one line."""
    if isinstance(obj, dict):
        return False
    if isinstance(obj, (list, tuple)):
        return depth > 0 and all(_flat(v, depth - 1) for v in obj)
    return True


def dump_json(obj: Any, indent: int = 0) -> str:
    pad = "  " * (indent + 1)
    end = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dump_json(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if _flat(obj):
            return "[" + ", ".join(dump_json(v, indent + 1) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + dump_json(v, indent + 1) for v in obj) + "\n" + end + "]"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, complex):
        return "[" + fmt(obj.real) + ", " + fmt(obj.imag) + "]"
    return fmt(obj)


def provenance(seed: int) -> dict:
    d = {"version": __version__, "seed": seed}
    d.update(config.current().provenance())
    return d


def csv_text(header: list[str], rows: list[list], prov: dict) -> str:
    lines = [f"# {k}={fmt(v) if not isinstance(v, str) else v}" for k, v in prov.items()]
    lines.append(",".join(header))
    for r in rows:
        lines.append(",".join(v if isinstance(v, str) else fmt(v) for v in r))
    return "\n".join(lines) + "\n"


def obs_json(f: Observable) -> dict:
    d = to_json(f)
    d["terms"] = [[k, re_, im] for k, re_, im in d["terms"]]
    return d


# --------------------------------------------------------------------------
# parsing


def parse_schedule(raw, field: str = "schedule") -> list[int]:
    if raw is None:
        return None
    if isinstance(raw, str):
        try:
            vals = [int(t) for t in raw.split(",") if t.strip()]
        except ValueError:
            raise InvalidInput(f"{field}: not a list of integers: {raw!r}")
    else:
        vals = [int(t) for t in raw]
    if not vals:
        raise InvalidInput(f"{field}: must be nonempty")
    if vals[0] < 1 or any(b <= a for a, b in zip(vals, vals[1:])):
        raise InvalidInput(f"{field}: must be strictly increasing positive integers, got {raw}")
    return vals


_HEADS = ("e", "const", "fejer", "random", "pm1", "indicator", "file")
_SPLIT = re.compile(r"\+(?=(?:[-+0-9.eE]+\*)?(?:" + "|".join(_HEADS) + r"):)")


def _options(parts: list[str]) -> dict:
    out = {}
    for p in parts:
        if "=" in p:
            k, v = p.split("=", 1)
            out[k] = v
        elif p:
            out[p] = True
    return out


def parse_fn(spec: str, sys: System, seed: int = 0, base_dir=None) -> Observable:
    """Observable from ``e:1,0``, ``const:c``, ``fejer:r[,r]``, ``random:seed=1``, ``pm1:seed=1``,
    ``indicator:0,3``, ``file:f.json``; sums with ``+`` and scalar prefixes ``c*``."""
    pieces = _SPLIT.split(spec.strip())
    total = None
    for piece in pieces:
        coef = 1.0
        m = re.match(r"^([-+0-9.eEj]+)\*(.*)$", piece)
        if m:
            coef, piece = complex(m.group(1)), m.group(2)
        f = _parse_atom(piece, sys, seed, base_dir)
        f = f * coef if coef != 1.0 else f
        total = f if total is None else total + f
    return total


def _parse_atom(spec: str, sys: System, seed: int, base_dir) -> Observable:
    head, _, arg = spec.partition(":")
    torus = sys.kind == "torus"
    if head == "e":
        k = tuple(int(x) for x in arg.split(","))
        if torus:
            if len(k) != sys.dim:
                raise InvalidInput(f"fn: frequency {k} has dimension {len(k)}, system has {sys.dim}")
            return character(k)
        if len(k) != 1:
            raise InvalidInput("fn: finite-system characters take one index")
        n = sys.space.size
        return PointVector(np.exp(2j * np.pi * k[0] * np.arange(n) / n), sys.space)
    if head == "const":
        c = complex(arg)
        return constant(c, sys.dim) if torus else PointVector(np.full(sys.space.size, c), sys.space)
    if head == "fejer":
        if not torus:
            raise InvalidInput("fn: fejer kernels live on tori")
        degs = [int(x) for x in arg.split(",")]
        if len(degs) == 1:
            degs = degs * sys.dim
        if len(degs) != sys.dim:
            raise InvalidInput("fn: one Fejér degree per torus dimension")
        return fejer(degs)
    if head in ("random", "pm1"):
        opts = _options(arg.split(":"))
        rng = np.random.default_rng(int(opts.get("seed", seed)))
        if head == "pm1":
            if torus:
                raise InvalidInput("fn: pm1 needs a finite system")
            return PointVector(rng.choice([-1.0, 1.0], sys.space.size), sys.space)
        if torus:
            return random_charsum(rng, sys.dim, int(opts.get("terms", 4)), int(opts.get("freq", 3)),
                                  real=bool(opts.get("real", False)))
        v = rng.normal(size=sys.space.size)
        if opts.get("complex"):
            v = v + 1j * rng.normal(size=sys.space.size)
        return PointVector(v, sys.space)
    if head == "indicator":
        if torus:
            raise InvalidInput("fn: indicators need a finite system")
        return indicator([int(x) for x in arg.split(",") if x], sys.space)
    if head == "file":
        data = json.loads(Path(base_dir or ".", arg).read_text())
        return from_json(data, None if torus else sys.space)
    raise InvalidInput(f"fn: unknown observable {spec!r}")


# --------------------------------------------------------------------------
# commands


class Result:
    def __init__(self, text: str, ok: bool = True):
        self.text = text
        self.ok = ok


def _system(args) -> System:
    if not args.system:
        raise InvalidInput("system: required")
    try:
        return parse_system(args.system, args.base_dir)
    except (ValueError, OSError) as e:
        raise InvalidInput(f"system: {e}")


def _fns(args, sys) -> list[Observable]:
    specs = args.fn or []
    if not specs:
        raise InvalidInput("fn: at least one --fn is required")
    return [parse_fn(s, sys, args.seed, args.base_dir) for s in specs]


def cmd_systems_list(args) -> Result:
    rows = [[k, v] for k, v in CATALOG.items()]
    return Result(csv_text(["id", "description"], rows, provenance(args.seed)))


def cmd_seminorm(args) -> Result:
    sys = _system(args)
    f = _fns(args, sys)[0]
    l = int(args.order or 2)
    sched = parse_schedule(args.schedule)
    tr = ghk_seminorm(sys, f, l, sched, method=args.method or "recursive", full_cycle=bool(args.full_cycle))
    rows = [[N, v, p, tr.method] for N, v, p in zip(tr.schedule, tr.values, tr.powers)]
    prov = provenance(args.seed)
    prov["policy"] = tr.policy
    prov["clamped"] = len(tr.clamped)
    ok = all(v <= sup_bound(f) + 1e-9 for v in tr.values)
    return Result(csv_text(["N", "value", f"value^{2**l}", "method"], rows, prov), ok)


def cmd_average_multi(args) -> Result:
    sys = _system(args)
    fs = _fns(args, sys)
    k = int(args.k or len(fs))
    if len(fs) == 1 and k > 1:
        fs = fs * k
    if len(fs) != k:
        raise InvalidInput(f"k: {k} does not match the number of --fn ({len(fs)})")
    sched = parse_schedule(args.schedule)
    tr = multi_average(sys, fs, sched, output="norm")
    gaps = _running_gaps(tr.values)
    rows = [[N, v, g] for N, v, g in zip(tr.schedule, tr.values, gaps)]
    return Result(csv_text(["N", "l2_norm", "gap"], rows, provenance(args.seed)))


def _running_gaps(vals):
    return [0.0] + [abs(b - a) for a, b in zip(vals, vals[1:])]


def cmd_average_cesaro(args) -> Result:
    sys = _system(args)
    f = _fns(args, sys)[0]
    tr = cesaro(sys, f, parse_schedule(args.schedule))
    rows = [[N, n, d] for N, n, d in zip(tr.schedule, tr.norms, tr.meta["fixed_distance"])]
    ok = all(abs(integral(v) - integral(f)) <= 1e-12 * (1 + abs(integral(f))) for v in tr.values)
    return Result(csv_text(["N", "l2_norm", "distance_to_fixed_part"], rows, provenance(args.seed)), ok)


def cmd_recurrence(args) -> Result:
    sys = _system(args)
    f = _fns(args, sys)[0]
    k = int(args.k or 2)
    cert = mr_certificate(sys, f, k, parse_schedule(args.schedule), nonneg=bool(args.nonneg))
    rows = [[N, v, r] for N, v, r in zip(cert["schedule"], cert["values"], cert["running_inf"])]
    prov = provenance(args.seed)
    prov["liminf_proxy"] = cert["liminf_proxy"]
    prov["verdict"] = cert["verdict"]
    ok = min(cert["values"]) >= -1e-12
    return Result(csv_text(["N", "value", "running_inf"], rows, prov), ok)


def cmd_decompose(args) -> Result:
    sys = _system(args)
    f = _fns(args, sys)[0]
    kind = args.kind or "vn"
    sched = parse_schedule(args.schedule)
    if kind == "tower":
        levels = distal_tower(sys)
        body = {"tower": [{"k": L.k, "factor": L.factor.ident, "compact_over_previous": L.compact_over_previous,
                           "evidence": L.evidence} for L in levels]}
        ok = all(L.compact_over_previous is not False for L in levels)
    else:
        if kind == "vn":
            res = von_neumann_split(sys, f, sched)
        elif kind == "jdlg":
            res = jdlg_split(sys, f, sched)
        elif kind.startswith("hostkra:"):
            res = hostkra_project(sys, f, int(kind.split(":")[1]), sched)
        else:
            raise InvalidInput(f"kind: unknown decomposition {kind!r}")
        err = res.reconstruction_error(f)
        ov = abs(res.overlap())
        body = {"structured": obs_json(res.structured), "residual": obs_json(res.residual),
                "certificates": res.certificates, "reconstruction_error": err, "overlap": ov}
        ok = err <= 1e-12 and ov <= 1e-10
    body["provenance"] = provenance(args.seed)
    return Result(dump_json(body) + "\n", ok)


def cmd_factor_expect(args) -> Result:
    sys = _system(args)
    f = _fns(args, sys)[0]
    F = parse_factor(args.factor or "trivial", sys, args.base_dir)
    g = cond_expect(F, f)
    ok = abs(integral(g) - integral(f)) <= 1e-12 * (1 + abs(integral(f)))
    body = {"factor": F.ident, "expectation": obs_json(g), "integral": integral(g),
            "provenance": provenance(args.seed)}
    return Result(dump_json(body) + "\n", ok)


def _int_set(args):
    if not args.set:
        raise InvalidInput("set: required")
    try:
        return parse_integer_set(args.set, args.base_dir)
    except (ValueError, OSError, KeyError) as e:
        raise InvalidInput(f"set: {e}")


def cmd_ap_count(args) -> Result:
    C = _int_set(args)
    k = int(args.k or 2)
    rows = [[len(C), C.horizon, k, ap_count(C, k), len(C) / C.horizon]]
    return Result(csv_text(["size", "horizon", "k", "ap_count", "density"], rows, provenance(args.seed)))


def cmd_correspondence(args) -> Result:
    C = _int_set(args)
    k = int(args.k or 2)
    kmax = int(args.k_max or k)
    inst = build_correspondence(C, kmax)
    rep = correspondence_verify(inst, k)
    rep["mu_A"] = str(inst.measure)
    rep["meta"] = inst.meta
    rep["provenance"] = provenance(args.seed)
    return Result(dump_json(rep) + "\n", rep["consistent"] and rep["counts_match"])


def cmd_gvn(args) -> Result:
    sys = _system(args)
    fs = _fns(args, sys)
    k = int(args.k or len(fs))
    if len(fs) == 1 and k > 1:
        fs = fs * k
    if len(fs) != k:
        raise InvalidInput(f"k: {k} does not match the number of --fn ({len(fs)})")
    slack = float(args.slack) if args.slack is not None else None
    rep = gvn_harness(sys, fs, parse_schedule(args.schedule), slack=slack, full_cycle=bool(args.full_cycle),
                      attested=bool(args.attest))
    rows = [[r["N"], r["lhs"], r["rhs"], r["slack"], r["margin"], r["ok"]] for r in rep["rows"]]
    prov = provenance(args.seed)
    prov["slack_policy"] = rep["slack_policy"]
    return Result(csv_text(["N", "lhs", "rhs", "slack", "margin", "ok"], rows, prov), rep["passed"])


def cmd_bench(args) -> Result:
    rep = bench_gowers(int(args.n or 64), int(args.repeat or 3), args.seed)
    rep["provenance"] = provenance(args.seed)
    return Result(dump_json(rep) + "\n", rep["speedup"] >= 10.0)


# --------------------------------------------------------------------------
# argument parsing


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--system")
    p.add_argument("--fn", action="append")
    p.add_argument("--schedule")
    p.add_argument("--k", type=int)
    p.add_argument("--order", type=int)
    p.add_argument("--factor")
    p.add_argument("--kind")
    p.add_argument("--method", choices=["recursive", "fourier-base", "cube-oracle"])
    p.add_argument("--full-cycle", action="store_true", default=None)
    p.add_argument("--nonneg", action="store_true", default=None, help="attest f >= 0 for trig polynomials")
    p.add_argument("--attest", action="store_true", default=None, help="attest sup-norm bounds <= 1")
    p.add_argument("--slack", type=float)
    p.add_argument("--set")
    p.add_argument("--k-max", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--repeat", type=int)


def build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(prog="ergolab", description="finite-N laboratory for multiple recurrence")
    top.add_argument("--config", help="JSON file with defaults for any option")
    top.add_argument("--threads", type=int)
    top.add_argument("--strict", action="store_true", default=None)
    top.add_argument("--seed", type=int)
    top.add_argument("--out", help="write the report here instead of stdout")
    top.add_argument("--version", action="version", version=__version__)
    sub = top.add_subparsers(dest="command", required=True)

    def group(name, actions):
        p = sub.add_parser(name)
        if actions is None:
            _common(p)
            return
        s = p.add_subparsers(dest="action", required=True)
        for a in actions:
            _common(s.add_parser(a))

    group("systems", ["list"])
    group("seminorm", ["compute"])
    group("average", ["multi", "cesaro"])
    group("recurrence", ["check"])
    group("decompose", None)
    group("factor", ["expect"])
    group("ap", ["count"])
    group("correspondence", None)
    group("gvn", None)
    group("bench", ["gowers"])
    return top


COMMANDS = {
    ("systems", "list"): cmd_systems_list,
    ("seminorm", "compute"): cmd_seminorm,
    ("average", "multi"): cmd_average_multi,
    ("average", "cesaro"): cmd_average_cesaro,
    ("recurrence", "check"): cmd_recurrence,
    ("decompose", None): cmd_decompose,
    ("factor", "expect"): cmd_factor_expect,
    ("ap", "count"): cmd_ap_count,
    ("correspondence", None): cmd_correspondence,
    ("gvn", None): cmd_gvn,
    ("bench", "gowers"): cmd_bench,
}


def _load_config(args) -> dict:
    if not args.config:
        return {}
    try:
        cfg = json.loads(Path(args.config).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise InvalidInput(f"config: {e}")
    if not isinstance(cfg, dict):
        raise InvalidInput("config: top level must be an object")
    args.base_dir = str(Path(args.config).parent)
    return cfg


def _merge(args, cfg: dict) -> dict:
    numeric = dict(cfg.get("numeric", {}))
    for key, val in cfg.items():
        if key == "numeric":
            continue
        if key in NUMERIC_KEYS:
            numeric[key] = val
            continue
        attr = key.replace("-", "_")
        if attr == "schedule" and isinstance(val, list):
            val = ",".join(str(int(x)) for x in val)
        if attr == "fn" and isinstance(val, str):
            val = [val]
        if getattr(args, attr, None) is None:
            setattr(args, attr, val)
    bad = set(numeric) - set(NUMERIC_KEYS)
    if bad:
        raise InvalidInput(f"config: unknown numeric settings {sorted(bad)}")
    return numeric


def run(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_INVALID if e.code not in (0, None) else EXIT_OK
    args.base_dir = None
    try:
        cfg = _load_config(args)
        numeric = _merge(args, cfg)
        if args.seed is None:
            args.seed = 0
        threads = args.threads if args.threads is not None else config.default_threads()
        if threads < 1:
            raise InvalidInput("threads: must be >= 1")
        fn = COMMANDS[(args.command, getattr(args, "action", None))]
        with config.override(threads=threads, **numeric):
            res = fn(args)
    except (BudgetExceeded, FrequencyOverflow, SupportExplosion, OverflowError) as e:
        print(f"error: {e}", file=stderr)
        return EXIT_BUDGET
    except (InvalidInput, NonnegativityError, ValueError, KeyError, OSError) as e:
        print(f"error: {e}", file=stderr)
        return EXIT_INVALID
    if args.out:
        Path(args.out).write_text(res.text)
    else:
        stdout.write(res.text)
    if args.strict and not res.ok:
        print("error: a check failed (--strict)", file=stderr)
        return EXIT_STRICT
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
