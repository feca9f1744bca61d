"""Batch command line: simulate, fit-predict, score, reproduce.

Each stage reads and writes plain files so stages compose in shell
pipelines; ``reproduce`` orchestrates the full experiment loop and emits
one summary table. Flags override config-file values, which override the
built-in defaults.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .errors import NumericError, ParseError, ValidationError
from .estimator import StepCdf, fit_conditional_cdf
from .kernels import KernelSpec, bandwidth_for_sample
from .paths import Portfolio, paths_from_records
from .records import ClaimRecord, StateSpace, ingest_records, write_records
from .reserving import (IbnrModel, assemble_report, mack_process_variance,
                        predict_ibnr, predict_rbns)
from .scoring import ScoreSummary, crps, error_incidence, relativize, select_model
from .simulator import ScenarioConfig, generate_scenario, portfolio_to_records
from .triangles import build_count_triangle, build_paid_triangle

EXIT_PARSE = 2
EXIT_VALIDATION = 3
EXIT_NUMERIC = 4
EXIT_IO = 5

FEATURE_ALIASES = {"u": "accident_period", "type": "claim_type"}

DEFAULTS = {
    "k": 4,
    "scenario": "alpha",
    "kernel": "exact",
    "eta": 0.75,
    "features": "",
    "seed": 0,
    "reps": 1,
    "censor_depth": None,
    "censoring": "uniform",
    "volume_preset": None,
    "input": None,
    "truth": None,
    "output": None,
    "fallback": "zero",
    "months_per_period": 12,
    "ibnr_variance": "mack",
    "candidate": None,
    "ks": "4,5,6,7",
    "scenarios": "alpha,beta",
    "jobs": 1,
}


def parse_features(text: str | None) -> tuple[str, ...]:
    """Comma-joined feature names; '' or 'none' means unconditional."""
    if text is None or text.strip() in ("", "none"):
        return ()
    names = []
    for raw in text.split(","):
        name = raw.strip()
        name = FEATURE_ALIASES.get(name.lower(), name)
        names.append(name)
    return tuple(names)


def censor_depth_cut(records: list[ClaimRecord], depth: int) -> list[ClaimRecord]:
    """Restrict records to what a calendar cut after ``depth`` periods shows.

    Claims reported later than the cut disappear; payments past the cut are
    dropped; a claim counts as settled only when its closing period (the
    one after its last payment) falls inside the cut. Claims reported but
    not yet paid keep a zero row.
    """
    if depth < 1:
        raise ValidationError(f"censor depth must be >= 1, got {depth}")
    by_claim: dict[str, list[ClaimRecord]] = {}
    for rec in records:
        by_claim.setdefault(rec.claim_id, []).append(rec)
    out: list[ClaimRecord] = []
    for claim_id, rows in by_claim.items():
        head = rows[0]
        if head.accident_period + head.reporting_delay - 1 > depth:
            continue
        last_paid_dp = max((r.development_period for r in rows if r.incremental_paid > 0),
                           default=0)
        settled_now = head.settled and head.accident_period + last_paid_dp <= depth
        keep = [r for r in rows if head.accident_period + r.development_period - 1 <= depth]
        if not keep:
            keep = [
                ClaimRecord(claim_id, head.claim_type, head.accident_period,
                            head.reporting_delay, 1, 0.0, settled_now)
            ]
        out.extend(
            ClaimRecord(r.claim_id, r.claim_type, r.accident_period, r.reporting_delay,
                        r.development_period, r.incremental_paid, settled_now)
            for r in keep
        )
    return out


def fit_cdf_by_claim(portfolio: Portfolio, features: tuple[str, ...],
                     kernel: KernelSpec, eta: float) -> tuple[dict[str, StepCdf], dict]:
    """One fitted CDF per open claim, cached per distinct covariate point."""
    cols = portfolio.covariate_columns(features)
    bandwidth = None
    if features and not kernel.is_exact:
        bandwidth = bandwidth_for_sample(portfolio.covariate_matrix[:, cols], eta=eta)
    cache: dict[tuple, StepCdf] = {}
    per_claim: dict[str, StepCdf] = {}
    for path in portfolio.paths:
        if path.absorbed:
            continue
        x = tuple(path.covariates[c] for c in cols)
        if x not in cache:
            cache[x] = fit_conditional_cdf(portfolio, x or None, kernel, bandwidth, features)
        per_claim[path.claim_id] = cache[x]
    return per_claim, cache


def fit_and_predict(portfolio: Portfolio, records: list[ClaimRecord],
                    features: tuple[str, ...], kernel: KernelSpec, eta: float,
                    fallback: str, ibnr_variance: str):
    """Full prediction on one portfolio: RBNS block, IBNR block, report."""
    per_claim, cache = fit_cdf_by_claim(portfolio, features, kernel, eta)
    rbns = predict_rbns(portfolio, per_claim, fallback=fallback)
    count_tri = build_count_triangle(records, portfolio.state_space)
    if np.any(count_tri.values.sum(axis=1) > 0):
        ibnr = predict_ibnr(count_tri, portfolio, count_variance=ibnr_variance)
    else:
        ibnr = IbnrModel.zero()
    metadata = {
        "k": portfolio.state_space.k,
        "kernel": kernel.family,
        "features": list(features),
        "n_closed": portfolio.n_closed,
        "n_open": portfolio.n_rbns,
        "beyond_support": rbns.n_beyond_support,
    }
    report = assemble_report(portfolio, rbns, ibnr, metadata)
    return report, rbns, ibnr, cache, per_claim


def score_portfolio(portfolio: Portfolio, truth: dict[str, float], label: str,
                    features: tuple[str, ...], kernel: KernelSpec, eta: float,
                    fallback: str, records: list[ClaimRecord],
                    ibnr_variance: str) -> ScoreSummary:
    """EI and per-open-claim CRPS of one model against realized ultimates."""
    report, rbns, ibnr, _, per_claim = fit_and_predict(
        portfolio, records, features, kernel, eta, fallback, ibnr_variance
    )
    open_paths = [p for p in portfolio.paths if not p.absorbed]
    missing = [p.claim_id for p in open_paths if p.claim_id not in truth]
    if missing:
        raise ValidationError(f"truth file lacks ultimates for {len(missing)} open claims")
    values = np.array([crps(per_claim[p.claim_id], truth[p.claim_id]) for p in open_paths])
    actual_total = math.fsum(truth[p.claim_id] if not p.absorbed else p.absorption_size
                             for p in portfolio.paths)
    ei = error_incidence(report.y_total, actual_total)
    cv = report.sd_y_total / report.y_total if report.y_total > 0 else None
    return ScoreSummary(
        model=label,
        k=portfolio.state_space.k,
        features=features,
        claim_ids=tuple(p.claim_id for p in open_paths),
        crps_values=values,
        ei=ei,
        cv=cv,
    )


def read_truth(path) -> dict[str, float]:
    truth = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != ("claim_number", "ultimate"):
            raise ParseError(f"truth file needs header claim_number,ultimate, got {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                truth[row[0].strip()] = float(row[1])
            except (IndexError, ValueError) as exc:
                raise ParseError(str(exc), row=lineno) from None
    return truth


def write_truth(truth: dict[str, float], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["claim_number", "ultimate"])
        for claim_id, value in truth.items():
            writer.writerow([claim_id, repr(float(value))])


def _ensure_outdir(args) -> Path:
    if not args.output:
        raise ValidationError("--output directory is required for this command")
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------- commands


def cmd_simulate(args) -> int:
    out = _ensure_outdir(args)
    config = ScenarioConfig(
        k=args.k,
        scenario=args.scenario,
        seed=args.seed,
        replications=args.reps,
        censoring=args.censoring,
        volume_preset=args.volume_preset,
    )
    for rep in range(args.reps):
        portfolio, truth = generate_scenario(config, rep)
        records = portfolio_to_records(portfolio, args.months_per_period)
        write_records(records, out / f"portfolio_rep{rep:03d}.csv", args.months_per_period)
        write_truth(truth, out / f"truth_rep{rep:03d}.csv")
        print(f"rep {rep}: {len(portfolio)} claims "
              f"({portfolio.n_closed} settled, {portfolio.n_rbns} open)")
    return 0


def _load_portfolio(args) -> tuple[Portfolio, list[ClaimRecord]]:
    if not args.input:
        raise ValidationError("--input CSV is required for this command")
    records = ingest_records(args.input, args.months_per_period)
    if args.censor_depth is not None:
        records = censor_depth_cut(records, args.censor_depth)
    portfolio = paths_from_records(records, StateSpace(args.k))
    return portfolio, records


def cmd_fit_predict(args) -> int:
    out = _ensure_outdir(args)
    portfolio, records = _load_portfolio(args)
    features = parse_features(args.features)
    kernel = KernelSpec(args.kernel)
    report, rbns, ibnr, cache, _ = fit_and_predict(
        portfolio, records, features, kernel, args.eta, args.fallback, args.ibnr_variance
    )
    (out / "report.json").write_text(report.to_json() + "\n", encoding="utf-8")
    with open(out / "rbns_claims.csv", "w", newline="", encoding="utf-8") as fh:
        csv.writer(fh).writerows(rbns.to_csv_rows())
    with open(out / "cdf_curves.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["size", "probability", "covariate"])
        for x, cdf in cache.items():
            tag = ";".join(repr(v) for v in x)
            for size, value in zip(cdf.sizes, cdf.values):
                writer.writerow([repr(float(size)), repr(float(value)), tag])
    build_count_triangle(records, portfolio.state_space).to_csv(out / "count_triangle.csv")
    build_paid_triangle(records, portfolio.state_space).to_csv(out / "paid_triangle.csv")
    print(report.to_text())
    return 0


def cmd_score(args) -> int:
    out = _ensure_outdir(args)
    if not args.truth:
        raise ValidationError("--truth CSV is required for scoring")
    portfolio, records = _load_portfolio(args)
    truth = read_truth(args.truth)
    kernel = KernelSpec(args.kernel)
    specs = args.candidate if args.candidate else [args.features or ""]
    summaries = []
    for spec in specs:
        features = parse_features(spec)
        label = "aj+" + "+".join(features) if features else "aj"
        summaries.append(
            score_portfolio(portfolio, truth, label, features, kernel, args.eta,
                            args.fallback, records, args.ibnr_variance)
        )
    reference = next((s for s in summaries if s.features), summaries[0])
    summaries = relativize(summaries, reference)
    best = select_model(summaries)
    with open(out / "scores.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["model", "k", "features", "ei", "avg_crps", "relative_crps",
                         "cv_y_total", "selected"])
        for s in summaries:
            writer.writerow([
                s.model, s.k, "+".join(s.features),
                repr(s.ei), repr(s.avg_crps), repr(s.relative_crps),
                repr(s.cv) if s.cv is not None else "",
                int(s.model == best.model),
            ])
    (out / "scores.json").write_text(
        json.dumps({"selected": best.model,
                    "models": [{"model": s.model, "ei": s.ei, "avg_crps": s.avg_crps,
                                "relative_crps": s.relative_crps} for s in summaries]},
                   indent=2) + "\n",
        encoding="utf-8",
    )
    for s in summaries:
        marker = "*" if s.model == best.model else " "
        print(f"{marker} {s.model:<24} EI {s.ei:+.4f}  CRPS {s.avg_crps:.6f} "
              f"(rel {s.relative_crps:.4f})")
    return 0


def _reproduce_cell(payload) -> dict:
    """One (scenario, k, rep) unit of the reproduce loop."""
    scenario, k, rep, seed, months_per_period, fallback = payload
    config = ScenarioConfig(k=k, scenario=scenario, seed=seed)
    portfolio_direct, truth = generate_scenario(config, rep)
    records = portfolio_to_records(portfolio_direct, months_per_period)
    portfolio = paths_from_records(records, StateSpace(k))
    kernel = KernelSpec("exact")
    ibnr_variance = "mack" if k >= 4 else "zero"

    actual_total = math.fsum(truth.values())
    variants = [("no", ())] if scenario == "alpha" else [("yes", ("accident_period",)), ("no", ())]
    cell = {"actual": actual_total, "aj": {}}
    for flag, features in variants:
        summary = score_portfolio(portfolio, truth, f"aj-{flag}", features, kernel,
                                  0.75, fallback, records, ibnr_variance)
        cell["aj"][flag] = {"ei": summary.ei, "cv": summary.cv, "crps": summary.avg_crps}

    paid = build_paid_triangle(records, portfolio.state_space)
    cl = mack_process_variance(paid)
    cl_total = cl.total_ultimate
    cell["cl"] = {
        "ei": error_incidence(cl_total, actual_total),
        "cv": math.sqrt(cl.total_process_variance) / cl_total if cl_total > 0 else None,
    }
    return cell


def cmd_reproduce(args) -> int:
    out = _ensure_outdir(args)
    ks = [int(v) for v in str(args.ks).split(",") if v.strip()]
    scenarios = [s.strip() for s in str(args.scenarios).split(",") if s.strip()]
    rows = []
    for scenario in scenarios:
        for k in ks:
            payloads = [
                (scenario, k, rep, args.seed, args.months_per_period, args.fallback)
                for rep in range(args.reps)
            ]
            if args.jobs > 1:
                with ProcessPoolExecutor(max_workers=args.jobs) as pool:
                    cells = list(pool.map(_reproduce_cell, payloads))
            else:
                cells = [_reproduce_cell(p) for p in payloads]

            flags = ["no"] if scenario == "alpha" else ["yes", "no"]
            actual_avg = float(np.mean([c["actual"] for c in cells]))
            ei_cl = float(np.mean([c["cl"]["ei"] for c in cells]))
            cv_cl = float(np.mean([c["cl"]["cv"] for c in cells]))
            for flag in flags:
                ei_aj = float(np.mean([c["aj"][flag]["ei"] for c in cells]))
                cv_aj = float(np.mean([c["aj"][flag]["cv"] for c in cells]))
                reference = "yes" if scenario == "beta" else flag
                rel = float(np.mean([
                    c["aj"][flag]["crps"] / c["aj"][reference]["crps"] for c in cells
                ]))
                rows.append([k, scenario, flag, actual_avg, ei_aj, ei_cl, cv_aj, cv_cl, rel])
                print(f"{scenario} k={k} U={flag}: actual {actual_avg:.3f} "
                      f"EI(AJ) {ei_aj:+.4f} EI(CL) {ei_cl:+.4f} relCRPS {rel:.4f}")

    table = out / "reproduce_table.csv"
    with open(table, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["k", "scenario", "with_u", "actual_avg", "ei_aj", "ei_cl",
                         "cv_aj", "cv_cl", "crps_rel"])
        for row in rows:
            writer.writerow([row[0], row[1], row[2]] + [repr(float(v)) for v in row[3:]])
    print(f"wrote {table}")
    return 0


# ---------------------------------------------------------------- wiring


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ajreserve",
        description="Individual claims reserving on the claim-size clock",
    )
    parser.add_argument("--config", help="JSON config file; flags override its values")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--k", type=int, help="number of states (>= 3)")
        p.add_argument("--kernel", choices=("exact", "epanechnikov", "uniform", "triangular"))
        p.add_argument("--eta", type=float, help="bandwidth schedule exponent in (0,1)")
        p.add_argument("--features", help="comma-joined features (claim_type, U); '' = none")
        p.add_argument("--seed", type=int)
        p.add_argument("--reps", type=int, help="number of replications")
        p.add_argument("--censor-depth", dest="censor_depth", type=int,
                       help="calendar periods visible to the fit")
        p.add_argument("--input", help="portfolio CSV")
        p.add_argument("--output", help="output directory")
        p.add_argument("--fallback", choices=("zero", "error"),
                       help="policy when W exceeds the estimated support")
        p.add_argument("--months-per-period", dest="months_per_period", type=int)
        p.add_argument("--ibnr-variance", dest="ibnr_variance", choices=("mack", "zero"))

    p_sim = sub.add_parser("simulate", help="generate scenario portfolios plus ground truth")
    add_common(p_sim)
    p_sim.add_argument("--scenario", choices=("alpha", "beta"))
    p_sim.add_argument("--censoring", choices=("uniform", "none"))
    p_sim.add_argument("--volume-preset", dest="volume_preset",
                       choices=("flat", "decrement", "formula"))

    p_fit = sub.add_parser("fit-predict", help="fit conditional CDFs and predict the reserve")
    add_common(p_fit)

    p_score = sub.add_parser("score", help="CRPS/EI scoring and model selection")
    add_common(p_score)
    p_score.add_argument("--truth", help="truth CSV (claim_number,ultimate)")
    p_score.add_argument("--candidate", action="append",
                         help="feature list per candidate model (repeatable)")

    p_rep = sub.add_parser("reproduce", help="full experiment loop and summary table")
    add_common(p_rep)
    p_rep.add_argument("--ks", help="comma-joined k values (default 4,5,6,7)")
    p_rep.add_argument("--scenarios", help="comma-joined scenarios (default alpha,beta)")
    p_rep.add_argument("--jobs", type=int, help="worker pool size for replications")
    return parser


def resolve_args(argv=None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    merged = dict(DEFAULTS)
    if args.config:
        try:
            merged.update(json.loads(Path(args.config).read_text(encoding="utf-8")))
        except json.JSONDecodeError as exc:
            raise ParseError(f"config file: {exc}") from None
    for key, value in vars(args).items():
        if key in ("config",):
            continue
        if value is not None or key not in merged:
            merged[key] = value
    return argparse.Namespace(**merged)


COMMANDS = {
    "simulate": cmd_simulate,
    "fit-predict": cmd_fit_predict,
    "score": cmd_score,
    "reproduce": cmd_reproduce,
}


def main(argv=None) -> int:
    try:
        args = resolve_args(argv)
        return COMMANDS[args.command](args)
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
