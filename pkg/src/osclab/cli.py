"""``osc-lab``: config-driven runner for the experiments in this package.

Every subcommand writes ``report.csv`` and ``summary.json`` into ``--out``
and exits 0 when all verdicts pass, 1 when any fails, 2 on configuration
or runtime errors.
"""

from __future__ import annotations

import argparse
import json
import re
import sys
import time
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import acceptance
from .averaging import (ReportRow, arithmetic_oscillation_test, cesaro_disjointness, cesaro_rows,
                        chain_binomial_phase, chowla_patterns, chowla_rows, chowla_test,
                        mean_attraction_estimate, oscillation_order_test, quasi_eigen_crosscheck)
from .equidist import (KoksmaConfig, KoksmaRow, PointSample1D, frac_parts, koksma_experiment,
                       star_discrepancy, weyl_criterion_battery)
from .orbitpoly import expand_orbit, lifted_orbit
from .reals import PrecisionBudgetError, frac_str, parse_real
from .reports import csv_text, tally, write_csv, write_json, write_rows
from .seqgen import (DEFAULT_PRECISION_CEILING, ExpBetaSpec, PrecisionPolicy, ResourceError,
                     SequenceExhausted, SequenceFormatError, check_growth_condition,
                     exp_beta_sequence, mobius_sequence, parse_sequence_spec)
from .torus import (AffineMap, DimensionError, TorusPoint, TrigPolynomial, det, flow_label,
                    integer_inverse, is_unipotent, least_unipotent_power, load_flow, mat_mul,
                    unipotent_triangularize)

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib


class ConfigError(ValueError):
    pass


# option name -> (type, default); None default means required
OPTIONS = {
    "mobius": {"nmax": (int, 10 ** 6), "checkpoints": (str, ""), "lam": (str, "2")},
    "expbeta": {"alpha": (str, "1"), "beta": (str, None), "g": (str, "1"), "nmax": (int, 1000),
                "show": (int, 20)},
    "expand": {"flow": (str, None), "point": (str, ""), "n_check": (int, 50)},
    "weyl": {"seq": (str, "mobius"), "nmax": (int, 10 ** 5), "degree": (int, 2),
             "checkpoints": (str, ""), "threshold": (float, 0.02), "samples": (int, 16)},
    "arith": {"seq": (str, "mobius"), "nmax": (int, 10 ** 5), "degree": (int, 2),
              "kmax": (int, 4), "checkpoints": (str, ""), "threshold": (float, 0.02),
              "samples": (int, 16)},
    "disjoint": {"seq": (str, "mobius"), "flow": (str, None), "observable": (str, None),
                 "point": (str, ""), "nmax": (int, 10 ** 5), "checkpoints": (str, ""),
                 "threshold": (float, 0.02), "method": (str, "auto")},
    "chowla": {"seq": (str, "mobius"), "nmax": (int, 10 ** 5), "rmax": (int, 2),
               "shift_max": (int, 3), "exp_max": (int, 2), "threshold": (float, 0.05)},
    "koksma": {"alpha": (str, "1"), "g": (str, "1"), "beta_lo": (str, "1.1"), "beta_hi": (str, "3"),
               "samples": (int, 200), "nmax": (int, 4000), "rmax": (int, 1), "shift_max": (int, 0),
               "exp_max": (int, 1), "discrepancy_factor": (float, 3.0), "weyl_factor": (float, 4.0),
               "hmax": (int, 8), "min_pass_fraction": (float, 0.9)},
    "mma": {"flow": (str, None), "x": (str, None), "z": (str, None), "nmax": (int, 10 ** 4),
            "checkpoints": (str, ""), "epsilon": (float, None)},
    "qds": {"d": (int, 2), "alpha": (str, "sqrt(2)-1"), "point": (str, ""), "nmax": (int, 10 ** 4),
            "tol": (float, 1e-9)},
    "triangularize": {"matrix": (str, None), "max_power": (int, 12)},
    "discrepancy": {"grid": (int, None), "file": (str, None), "alpha": (str, "1"), "beta": (str, None),
                    "nmax": (int, 1000), "hmax": (int, 8)},
    "accept": {"only": (str, "")},
}
OPTIONAL_NONE = {("mma", "epsilon"), ("discrepancy", "grid"), ("discrepancy", "file"),
                 ("discrepancy", "beta")}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="osc-lab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name, opts in OPTIONS.items():
        sp = sub.add_parser(name)
        sp.add_argument("--config", type=Path)
        sp.add_argument("--out", type=Path, default=Path("osc-lab-out"))
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--threads", type=int, default=1)
        sp.add_argument("--precision-ceiling", type=int, default=DEFAULT_PRECISION_CEILING)
        sp.add_argument("--allow-skip", action="store_true")
        sp.add_argument("--dry-run", action="store_true")
        for key, (typ, _) in opts.items():
            sp.add_argument("--" + key.replace("_", "-"), dest=key, type=typ, default=None)
    return p


def resolve(ns) -> dict:
    """CLI flags over config-file values over defaults; unknown config keys are errors."""
    opts = OPTIONS[ns.command]
    file_cfg = {}
    if ns.config is not None:
        try:
            with open(ns.config, "rb") as fh:
                file_cfg = tomllib.load(fh)
        except (OSError, tomllib.TOMLDecodeError) as exc:
            raise ConfigError(f"cannot read config {ns.config}: {exc}") from None
        file_cfg = {k.replace("-", "_"): v for k, v in file_cfg.items()}
        unknown = sorted(set(file_cfg) - set(opts))
        if unknown:
            raise ConfigError(f"unknown config keys for {ns.command}: {unknown}")
    cfg = {}
    for key, (typ, default) in opts.items():
        v = getattr(ns, key)
        if v is None and key in file_cfg:
            try:
                v = typ(file_cfg[key])
            except (TypeError, ValueError):
                raise ConfigError(f"bad value for {key}: {file_cfg[key]!r}") from None
        if v is None:
            v = default
        if v is None and (ns.command, key) not in OPTIONAL_NONE:
            raise ConfigError(f"missing required option --{key.replace('_', '-')}")
        cfg[key] = v
    return cfg


# --- parsing helpers ------------------------------------------------------

def parse_checkpoints(text: str, nmax: int) -> list[int]:
    if not text:
        return [nmax]
    cps = [int(float(v)) if "e" in v else int(v) for v in text.replace(" ", "").split(",") if v]
    if cps[-1] > nmax:
        raise ConfigError("checkpoints exceed nmax")
    return cps


def parse_point(text: str, d: int) -> TorusPoint:
    if not text:
        return TorusPoint.zero(d)
    parts = [v.strip() for v in text.split(",")]
    if len(parts) != d:
        raise ConfigError(f"point needs {d} coordinates")
    return TorusPoint.of(*parts)


_TERM = re.compile(r"^(?:(?P<coef>[^*]*)\*)?\s*e\((?P<k>[-\d,\s]+)\)$")


def parse_observable(text: str) -> TrigPolynomial:
    """``"e(1,1)"``, ``"0.5*e(1,0) - e(0,1)"``, ``"(1+1j)*e(2)"``; bare numbers are constants."""
    pieces, depth, cur = [], 0, ""
    for ch in text.replace(" ", ""):
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if depth == 0 and ch in "+-" and cur and cur[-1] not in "*(e":
            pieces.append(cur)
            cur = "" if ch == "+" else "-"
            continue
        cur += ch
    pieces.append(cur)
    terms, consts = {}, []
    for piece in pieces:
        sign = 1
        while piece.startswith(("+", "-")):
            sign = -sign if piece[0] == "-" else sign
            piece = piece[1:]
        m = _TERM.match(piece)
        if m:
            coef = m.group("coef")
            c = sign * (complex(coef.strip("()")) if coef else 1)
            k = tuple(int(v) for v in m.group("k").split(","))
            terms[k] = terms.get(k, 0) + c
        else:
            try:
                consts.append(sign * complex(piece.strip("()")))
            except ValueError:
                raise ConfigError(f"cannot parse observable term {piece!r}") from None
    if not terms:
        raise ConfigError("observable needs at least one e(...) term")
    d = len(next(iter(terms)))
    if consts:
        terms[(0,) * d] = terms.get((0,) * d, 0) + sum(consts)
    return TrigPolynomial(terms)


def parse_matrix(text: str):
    rows = [[int(v) for v in r.split(",")] for r in text.replace(" ", "").split(";")]
    if any(len(r) != len(rows) for r in rows):
        raise ConfigError("matrix must be square, rows separated by ';'")
    return tuple(tuple(r) for r in rows)


def _policy(ns) -> PrecisionPolicy:
    return PrecisionPolicy(ceiling=ns.precision_ceiling)


def _seq(ns, text: str, n: int):
    return parse_sequence_spec(text, n, _policy(ns))


def _g(text: str):
    return tuple(Fraction(v) for v in text.split(","))


# --- commands -------------------------------------------------------------
# Each returns (cell count, rows, verdicts) or, in dry-run mode, the planned
# cell count only.  ``rows`` is (columns, list of string lists).

def cmd_mobius(ns, cfg, dry):
    cps = parse_checkpoints(cfg["checkpoints"], cfg["nmax"])
    if dry:
        return len(cps)
    seq = mobius_sequence(cfg["nmax"])
    mu = seq.meta["mu"].astype(np.int64)
    mertens = np.cumsum(mu[1:])
    cert = check_growth_condition(seq, float(parse_real(cfg["lam"])), cfg["nmax"])
    rows = [ReportRow("mobius", "mobius", param=f"lambda={cfg['lam']};c_bound={cert.c_bound!r}",
                      N=N, value=complex(mertens[N - 1] / N)) for N in cps]
    return rows


def cmd_expbeta(ns, cfg, dry):
    if dry:
        return 1
    spec = ExpBetaSpec(cfg["alpha"], cfg["beta"], _g(cfg["g"]), _policy(ns))
    seq = exp_beta_sequence(spec, cfg["nmax"])
    fp = seq.meta["fracs"]
    vals = seq.values(cfg["nmax"])
    show = min(cfg["show"], cfg["nmax"])
    rows = [ReportRow("expbeta", spec.label(), param=f"frac={fp.numerators[n - 1] / 2 ** fp.store_bits!r}",
                      N=n, value=complex(vals[n - 1])) for n in range(1, show + 1)]
    rows.append(ReportRow("expbeta", spec.label(),
                          param=f"working_bits={fp.working_bits};error={fp.error!r}",
                          N=cfg["nmax"], value=0j, threshold=2.0 ** -64,
                          verdict="pass" if fp.error <= 2.0 ** -64 else "fail"))
    return rows


def cmd_expand(ns, cfg, dry):
    flow = load_flow(cfg["flow"])
    x = parse_point(cfg["point"], flow.d)
    if dry:
        return flow.d + 1
    exp = expand_orbit(flow, x, exact=flow.exact) if not _is_simple(flow) else _expand_simple_unchecked(flow, x)
    lifts = lifted_orbit(flow, x, cfg["n_check"])
    match = all(tuple(P(Fraction(n)) for P in exp.polys) == lifts[n] for n in range(cfg["n_check"] + 1))
    write_json(ns.out / "polys.json", {"flow": flow_label(flow),
                                       "polys": [[frac_str(c) for c in P.coeffs] for P in exp.polys],
                                       "attained": list(exp.attained), "bounds": list(exp.bounds)})
    label = flow_label(flow)
    rows = [ReportRow("expand", "", label, "", f"P{i + 1}={P.to_json()}", k=a, l=b, N=0,
                      verdict="pass" if a <= b else "fail")
            for i, (P, a, b) in enumerate(zip(exp.polys, exp.attained, exp.bounds))]
    rows.append(ReportRow("expand", "", label, "", "orbit_match", N=cfg["n_check"],
                          verdict="pass" if match else "fail"))
    return rows


def _is_simple(flow):
    from .torus import SimplePolySkew
    return isinstance(flow, SimplePolySkew)


def _expand_simple_unchecked(flow, x):
    # report a violated bound as a fail row instead of raising
    from .orbitpoly import OrbitExpansion, expand_orbit_general
    try:
        return expand_orbit(flow, x, exact=flow.exact)
    except AssertionError:
        g = expand_orbit_general(flow.as_general(), x, exact=flow.exact)
        return OrbitExpansion(g.polys, (1,) + tuple(i + flow.k - 1 for i in range(2, flow.d + 1)),
                              g.attained)


def cmd_weyl(ns, cfg, dry):
    cps = parse_checkpoints(cfg["checkpoints"], cfg["nmax"])
    if dry:
        return cfg["samples"] + 4
    seq = _seq(ns, cfg["seq"], cfg["nmax"])
    rep = oscillation_order_test(seq, cfg["degree"], cps, cfg["threshold"], cfg["samples"],
                                 ns.seed, threads=ns.threads)
    return rep.rows()


def cmd_arith(ns, cfg, dry):
    cps = parse_checkpoints(cfg["checkpoints"], cfg["nmax"])
    k = cfg["kmax"]
    if dry:
        return (cfg["samples"] + 4) * k * (k + 1) // 2
    seq = _seq(ns, cfg["seq"], cfg["nmax"])
    rep = arithmetic_oscillation_test(seq, cfg["degree"], k, cps, cfg["threshold"], cfg["samples"],
                                      ns.seed, threads=ns.threads)
    return rep.rows()


def cmd_disjoint(ns, cfg, dry):
    flow = load_flow(cfg["flow"])
    obs = parse_observable(cfg["observable"])
    x = parse_point(cfg["point"], flow.d)
    cps = parse_checkpoints(cfg["checkpoints"], cfg["nmax"])
    if obs.d != flow.d:
        raise DimensionError("observable and flow dimensions differ")
    if dry:
        return 1
    seq = _seq(ns, cfg["seq"], cfg["nmax"])
    s = cesaro_disjointness(seq, flow, obs, x, cps, method=cfg["method"])
    return cesaro_rows("disjoint", seq.name, flow_label(flow), cfg["observable"], s,
                       cfg["threshold"], param=f"x={cfg['point'] or '0'}")


def cmd_chowla(ns, cfg, dry):
    pats = chowla_patterns(cfg["rmax"], cfg["shift_max"], cfg["exp_max"])
    if dry:
        return len(pats)
    seq = _seq(ns, cfg["seq"], cfg["nmax"] + cfg["shift_max"])
    res = chowla_test(seq, pats, cfg["nmax"], threads=ns.threads)
    return chowla_rows(seq.name, res, cfg["threshold"])


def cmd_koksma(ns, cfg, dry):
    kc = KoksmaConfig(alpha=cfg["alpha"], g=_g(cfg["g"]), beta_interval=(cfg["beta_lo"], cfg["beta_hi"]),
                      samples=cfg["samples"],
                      patterns=chowla_patterns(cfg["rmax"], cfg["shift_max"], cfg["exp_max"]),
                      N=cfg["nmax"], discrepancy_factor=cfg["discrepancy_factor"],
                      weyl_factor=cfg["weyl_factor"], h_max=cfg["hmax"],
                      precision_ceiling=ns.precision_ceiling)
    if dry:
        return kc.samples * len(kc.patterns)
    rep = koksma_experiment(kc, seed=ns.seed, threads=ns.threads)
    if rep.skipped and not ns.allow_skip:
        raise PrecisionBudgetError(next(b.error for b in rep.betas if b.error))
    summary = rep.summary()
    summary["min_pass_fraction"] = cfg["min_pass_fraction"]
    summary["passed"] = rep.pass_fraction >= cfg["min_pass_fraction"]
    write_json(ns.out / "koksma.json", summary)
    return ("koksma", KoksmaRow.COLUMNS, rep.rows, summary["passed"])


def cmd_mma(ns, cfg, dry):
    flow = load_flow(cfg["flow"])
    x, z = parse_point(cfg["x"], flow.d), parse_point(cfg["z"], flow.d)
    cps = parse_checkpoints(cfg["checkpoints"], cfg["nmax"])
    if dry:
        return 1
    s = mean_attraction_estimate(flow, x, z, cps)
    eps = cfg["epsilon"]
    return cesaro_rows("mma", "", flow_label(flow), "distance", s, eps,
                       param=f"x={cfg['x']};z={cfg['z']}")


def cmd_qds(ns, cfg, dry):
    flow = AffineMap.chain(cfg["d"], cfg["alpha"])
    z = parse_point(cfg["point"], cfg["d"])
    if dry:
        return 1
    theta = chain_binomial_phase(flow, z)
    dev = quasi_eigen_crosscheck(theta, flow, z, cfg["nmax"])
    th = json.dumps([frac_str(t) if t.denominator < 2 ** 64 else repr(float(t)) for t in theta.thetas])
    return [ReportRow("qds", "", flow_label(flow), f"e(x_{cfg['d']})", f"theta={th}", N=cfg["nmax"],
                      value=complex(dev), threshold=cfg["tol"],
                      verdict="pass" if dev < cfg["tol"] else "fail")]


def cmd_triangularize(ns, cfg, dry):
    A = parse_matrix(cfg["matrix"])
    if abs(det(A)) != 1:
        raise ConfigError("matrix must be unimodular")
    if dry:
        return 1
    m = 1 if is_unipotent(A) else least_unipotent_power(A, cfg["max_power"])
    if m is None:
        return [ReportRow("triangularize", "", param=f"A={A!r};no unipotent power <= {cfg['max_power']}",
                          verdict="fail")]
    Am = A
    for _ in range(m - 1):
        Am = mat_mul(Am, A)
    P = unipotent_triangularize(Am)
    L = mat_mul(mat_mul(integer_inverse(P), Am), P)
    write_json(ns.out / "triangularize.json", {"A": A, "power": m, "P": P, "L": L})
    return [ReportRow("triangularize", "", param=f"power={m};P={P!r};L={L!r}", k=m,
                      verdict="pass" if det(P) == 1 else "fail")]


def cmd_discrepancy(ns, cfg, dry):
    if dry:
        return 1
    if cfg["grid"] is not None:
        sample, name = PointSample1D.centered_grid(cfg["grid"]), f"grid({cfg['grid']})"
    elif cfg["file"] is not None:
        vals = [float(line) for line in Path(cfg["file"]).read_text().split() if line]
        sample, name = PointSample1D(vals), f"file:{cfg['file']}"
    elif cfg["beta"] is not None:
        spec = ExpBetaSpec(cfg["alpha"], cfg["beta"], (Fraction(1),), _policy(ns))
        sample, name = frac_parts(spec, cfg["nmax"]), spec.label()
    else:
        raise ConfigError("need --grid, --file or --beta")
    D = star_discrepancy(sample)
    W = weyl_criterion_battery(sample, cfg["hmax"])
    return [ReportRow("discrepancy", name, param="star", N=sample.n, value=complex(D)),
            ReportRow("discrepancy", name, param=f"weyl_max_h<={cfg['hmax']}", N=sample.n,
                      value=complex(W.max))]


def cmd_accept(ns, cfg, dry):
    nums = [int(v) for v in cfg["only"].split(",")] if cfg["only"] else None
    if dry:
        return len(nums) if nums else 12
    results = acceptance.run_all(nums, seed=ns.seed, threads=ns.threads)
    for r in results:
        write_csv(ns.out / "criteria" / f"{r.number:02d}.csv", ["criterion", "item", "value", "ok"], r.rows)
    return [ReportRow("accept", "", param=f"{r.number}:{r.title}", N=0,
                      verdict="pass" if r.passed else "fail") for r in results]


COMMANDS = {name: globals()[f"cmd_{name}"] for name in OPTIONS}


def run(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    t0 = time.perf_counter()
    try:
        cfg = resolve(ns)
        if ns.dry_run:
            cells = COMMANDS[ns.command](ns, cfg, True)
            print(f"{ns.command}: config ok, {cells} planned cells")
            return 0
        out = COMMANDS[ns.command](ns, cfg, False)
    except (ConfigError, DimensionError, SequenceFormatError, SequenceExhausted, ResourceError,
            ValueError, OSError, KeyError, tomllib.TOMLDecodeError) as exc:
        print(f"osc-lab {ns.command}: error: {exc}", file=sys.stderr)
        return 2
    except PrecisionBudgetError as exc:
        if not ns.allow_skip:
            print(f"osc-lab {ns.command}: {exc}", file=sys.stderr)
            return 2
        out = [ReportRow(ns.command, "", param=str(exc), verdict="skipped")]

    if isinstance(out, tuple):  # koksma: own schema plus an aggregate verdict
        _, columns, rows, agg = out
        write_csv(ns.out / "report.csv", columns, (r.as_list() for r in rows))
        counts = tally(r.as_list()[-1] for r in rows)
        failed = not agg
    else:
        write_rows(ns.out / "report.csv", out)
        counts = tally(r.verdict for r in out)
        failed = counts["failed"] > 0
    summary = {"command": ns.command, "config_echo": {**cfg, "seed": ns.seed, "threads": ns.threads,
                                                      "precision_ceiling": ns.precision_ceiling},
               **counts, "wall_time_s": round(time.perf_counter() - t0, 3)}
    write_json(ns.out / "summary.json", summary)
    print(f"{ns.command}: {counts['cells']} cells, {counts['passed']} passed, "
          f"{counts['failed']} failed, {counts['skipped']} skipped -> {ns.out / 'report.csv'}")
    return 1 if failed else 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
