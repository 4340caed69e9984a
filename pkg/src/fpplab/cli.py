"""Command-line entry point.

Exit codes: 0 success, 1 faithfulness alarm (a verified construction or an
oracle comparison failed), 2 configuration error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

from . import __version__
from .config import ConfigError, RunConfig
from .experiments import coexist_sample, histogram, perc_sample, run_oracle_diff, run_surgeries
from .montecarlo import dumps, estimate, read_records_csv, records_csv, scan_n
from .percolation import cesaro_fraction, mu_estimate
from .svgplot import render

EXIT_OK, EXIT_ALARM, EXIT_CONFIG, EXIT_IO = 0, 1, 2, 3


class OutputError(OSError):
    pass


def _out_dir(args) -> Path:
    out = Path(args.out)
    if not out.is_dir():
        raise OutputError(f"output directory {out} does not exist")
    return out


def _load(args) -> RunConfig:
    cfg = RunConfig.load(args.config)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    return cfg


def _write(path: Path, text: str):
    with open(path, "w", newline="") as fh:
        fh.write(text)


def _csv(fingerprint: str, header, rows) -> str:
    buf = io.StringIO()
    buf.write(f"# config_fingerprint: {fingerprint}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([format(v, ".10g") if isinstance(v, float) else v for v in r])
    return buf.getvalue()


def _doc(cfg: RunConfig, command: str, **body) -> str:
    doc = {"command": command, "config": cfg.to_json(), "config_fingerprint": cfg.fingerprint,
           "version": __version__}
    doc.update(body)
    return dumps(doc)


# ---------------------------------------------------------------------------


def cmd_estimate(args) -> int:
    cfg = _load(args)
    out = _out_dir(args)
    fam, dist = cfg.family(), cfg.dist()
    records = []
    for n in cfg.n_list:
        rec = estimate(fam, n, dist, cfg.samples, cfg.seed, cfg.make_budget(), cfg.policy(), cfg.d,
                       args.threads, cfg.z, cfg.fingerprint)
        records.append(rec)
        print(f"{rec.event} n={n} true={rec.true} false={rec.false} undecided={rec.undecided} "
              f"p_lo={rec.p_lo:.4g} p_hi={rec.p_hi:.4g}")
    stem = cfg.output_stem or "estimate"
    _write(out / f"{stem}.csv", records_csv(records, cfg.fingerprint, cfg.record_timing))
    _write(out / f"{stem}.json", _doc(cfg, "estimate",
                                      records=[r.to_json(cfg.record_timing) for r in records]))
    return EXIT_OK


def cmd_scan(args) -> int:
    cfg = _load(args)
    out = _out_dir(args)
    res = scan_n(cfg.family(), cfg.n_list, cfg.dist(), cfg.samples, cfg.seed, cfg.make_budget(),
                 cfg.policy(), cfg.d, args.threads, cfg.z, cfg.fingerprint)
    for rec in res.records:
        print(f"{rec.event} n={rec.n} p_lo={rec.p_lo:.4g} p_hi={rec.p_hi:.4g}")
    print(f"log-log slope {res.slope:.4g} +- {res.slope_se:.4g} "
          f"(references {-2 * cfg.d} and {-(cfg.d - 1)})")
    stem = cfg.output_stem or "scan"
    _write(out / f"{stem}.csv", records_csv(res.records, cfg.fingerprint, cfg.record_timing))
    _write(out / f"{stem}.json", _doc(cfg, "scan", **res.to_json(cfg.record_timing)))
    return EXIT_OK


def cmd_surgery(args) -> int:
    cfg = _load(args)
    out = _out_dir(args)
    lines = []

    def sink(n, K, index, rep):
        doc = rep.to_json()
        doc.update({"n": n, "K": K, "index": index})
        lines.append(json.dumps(doc, sort_keys=True))

    tallies = run_surgeries(cfg.surgery, cfg.n_list, cfg.K_list, cfg.dist(), cfg.samples, cfg.seed,
                            cfg.d, cfg.make_budget(), sink)
    failed = 0
    for (n, K), t in tallies.items():
        failed += len(t.failures)
        print(f"{cfg.surgery} n={n} K={K} samples={t.samples} premise={t.premise} verified={t.verified}")
    stem = cfg.output_stem or "surgery"
    _write(out / f"{stem}.jsonl", "".join(line + "\n" for line in lines))
    _write(out / f"{stem}.json", _doc(cfg, "surgery", surgery=cfg.surgery, tallies=[
        dict(n=n, K=K, **t.to_json()) for (n, K), t in tallies.items()]))
    if failed:
        print(f"ALARM: {failed} premise-holding samples failed verification", file=sys.stderr)
        return EXIT_ALARM
    return EXIT_OK


def cmd_coexist(args) -> int:
    cfg = _load(args)
    if cfg.box_radius is not None and cfg.box_radius < max(cfg.horizon, max(cfg.n_list)):
        raise ConfigError("horizon or sphere exceeds the configured box radius")
    out = _out_dir(args)
    dist = cfg.dist()
    rows, summary = [], []
    for pos, n in enumerate(cfg.n_list):
        hits, levels, upper, lower = {}, {}, [], []
        for s in range(cfg.samples):
            index = pos * cfg.samples + s
            stats, h = coexist_sample(n, cfg.horizon, dist, cfg.seed, index, cfg.d, cfg.box_radius)
            rows.append((n, index, str(stats.upper_proxy), str(stats.lower_proxy),
                         int(stats.coexistence_proxy)))
            upper.append(stats.upper_proxy)
            lower.append(stats.lower_proxy)
            for K, hit in h.items():
                hits[K] = hits.get(K, 0) + int(hit)
            for K, (below, above) in stats.levels.items():
                b, a = levels.get(K, (0, 0))
                levels[K] = (b + below, a + above)
        summary.append({
            "n": n, "samples": cfg.samples,
            "sphere_hit_rate": {str(K): v / cfg.samples for K, v in sorted(hits.items())},
            "level_counts": {str(K): list(v) for K, v in sorted(levels.items())},
            "upper_proxy_histogram": histogram(upper),
            "lower_proxy_histogram": histogram(lower),
        })
        rates = " ".join(f"K={K}:{v / cfg.samples:.3g}" for K, v in sorted(hits.items()))
        print(f"coexist n={n} horizon={cfg.horizon} hit rates {rates}")
    stem = cfg.output_stem or "coexist"
    _write(out / f"{stem}.csv", _csv(cfg.fingerprint, ["n", "sample", "upper_proxy", "lower_proxy",
                                                       "coexistence_proxy"], rows))
    _write(out / f"{stem}.json", _doc(cfg, "coexist", horizon=cfg.horizon, by_n=summary))
    return EXIT_OK


def cmd_perc(args) -> int:
    cfg = _load(args)
    out = _out_dir(args)
    radius = cfg.box_radius or 10
    dist = cfg.dist()
    rows = []
    for s in range(cfg.samples):
        r = perc_sample(cfg.M, radius, dist, cfg.seed, s, cfg.d)
        rows.append((s, r["clusters"], r["largest_fraction"], int(r["touches_all_faces"])))
    mean_frac = sum(r[2] for r in rows) / len(rows)
    faces = sum(r[3] for r in rows) / len(rows)
    print(f"perc M={cfg.M} radius={radius} mean largest fraction {mean_frac:.4g}, "
          f"spanning rate {faces:.4g}, subcritical zeros {dist.subcritical_zeros(cfg.d)}")
    stem = cfg.output_stem or "perc"
    _write(out / f"{stem}.csv", _csv(cfg.fingerprint, ["sample", "clusters", "largest_fraction",
                                                       "touches_all_faces"], rows))
    _write(out / f"{stem}.json", _doc(cfg, "perc", mean_largest_fraction=format(mean_frac, ".10g"),
                                      spanning_rate=format(faces, ".10g"),
                                      subcritical_zeros=dist.subcritical_zeros(cfg.d)))
    return EXIT_OK


def cmd_mu(args) -> int:
    cfg = _load(args)
    out = _out_dir(args)
    dist = cfg.dist()
    mu = mu_estimate(dist, cfg.M, cfg.direction, cfg.ladder, cfg.samples, cfg.seed, cfg.z)
    ces = cesaro_fraction(dist, cfg.M, cfg.direction, cfg.N, cfg.eps, cfg.samples, cfg.seed,
                          mu_hat=mu.mu_hat, z=cfg.z)
    print(f"mu_hat{tuple(cfg.direction)} = {mu.mu_hat:.6g} (trend {mu.trend}); "
          f"cesaro fraction {ces.fraction:.4g} at eps={cfg.eps}")
    stem = cfg.output_stem or "mu"
    header = ["n", "mean", "half_width", "count"]
    _write(out / f"{stem}_ladder.csv", _csv(cfg.fingerprint, header, mu.rows()))
    _write(out / f"{stem}_cesaro.csv", _csv(cfg.fingerprint, ["k"] + header[1:], ces.rows()))
    _write(out / f"{stem}.json", _doc(cfg, "mu", mu_hat=format(mu.mu_hat, ".10g"), trend=mu.trend,
                                      cesaro_fraction=format(ces.fraction, ".10g"),
                                      cesaro_counts=list(ces.counts)))
    return EXIT_OK


def cmd_oracle_diff(args) -> int:
    cfg = _load(args)
    out = _out_dir(args)
    radius = int(cfg.oracle.get("radius", 3))
    cap = int(cfg.oracle.get("cap", 20000))
    tallies = run_oracle_diff(cfg.dist(), radius, cfg.samples, cfg.seed, cfg.d, cap, cfg.make_budget())
    rows = []
    bad = 0
    for name, t in tallies.items():
        bad += t.contradictions
        rows.append((name, t.compared, t.agree, t.contradictions, t.undecided, t.skipped))
        print(f"oracle-diff {name}: compared={t.compared} agree={t.agree} "
              f"contradictions={t.contradictions} undecided={t.undecided} skipped={t.skipped}")
    stem = cfg.output_stem or "oracle_diff"
    _write(out / f"{stem}.csv", _csv(cfg.fingerprint, ["procedure", "compared", "agree",
                                                       "contradictions", "undecided", "skipped"], rows))
    _write(out / f"{stem}.json", _doc(cfg, "oracle-diff",
                                      tallies={k: t.to_json() for k, t in tallies.items()}))
    return EXIT_ALARM if bad else EXIT_OK


def cmd_plot(args) -> int:
    try:
        text = Path(args.input).read_text()
    except OSError as exc:
        raise OutputError(str(exc)) from None
    try:
        rows = read_records_csv(text)
        svg = render(rows, args.dim, title=Path(args.input).name)
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"malformed CSV: {exc}") from None
    out = Path(args.output)
    if not out.parent.is_dir():
        raise OutputError(f"output directory {out.parent} does not exist")
    _write(out, svg)
    print(f"wrote {out}")
    return EXIT_OK


COMMANDS = {
    "estimate": cmd_estimate, "scan": cmd_scan, "surgery": cmd_surgery, "coexist": cmd_coexist,
    "perc": cmd_perc, "mu": cmd_mu, "oracle-diff": cmd_oracle_diff, "plot": cmd_plot,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fpplab", description="Exact first-passage percolation experiments")
    p.add_argument("--version", action="version", version=f"fpplab {__version__}")
    sub = p.add_subparsers(dest="cmd", required=True)
    for name in COMMANDS:
        if name == "plot":
            continue
        s = sub.add_parser(name)
        s.add_argument("--config", required=True, help="JSON run configuration")
        s.add_argument("--out", required=True, help="existing output directory")
        s.add_argument("--seed", type=int, default=None, help="override the master seed")
        s.add_argument("--threads", type=int, default=1, help="worker processes (speed only)")
    s = sub.add_parser("plot")
    s.add_argument("--input", required=True, help="CSV in the estimate schema")
    s.add_argument("--output", required=True, help="SVG path")
    s.add_argument("--dim", type=int, default=2, help="lattice dimension for the reference slopes")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "threads", 1) < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return COMMANDS[args.cmd](args)
    except (ConfigError, ValueError, IndexError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
