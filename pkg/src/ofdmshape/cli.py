"""Command-line entry point: ``ofdmshape <command> --scenario FILE ...``.

Exit codes: 0 success, 2 bad input, 3 incompatible bank or transform,
4 a threshold in the report was violated, 5 the solver failed.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .bands import NumericalConsistencyError, analytical_psd, write_psd_csv
from .coefficients import BankFormatError, BankSet, EdgeBank, read_banks, write_banks
from .config import LEFT, ConfigError
from .mask import EmissionMask, MaskError, cost_report, evaluate_plan, plan_mask, plan_oobe, plan_pulses, \
    write_plan_csv
from .optimize import CarrierSolveError, adaptive_optimize, adaptive_optimize_harmonic, adhoc_optimize, \
    local_optimize_edge
from .qp import SolverError
from .scenario import PROFILES, Scenario, ScenarioError, load_scenario
from .transforms import UnsupportedTransformError
from .waveform import SymbolStream, WaveformError, compare_psd, evm_db, papr_at, papr_ccdf, synthesize, \
    welch_expectation, welch_psd, write_waveform

log = logging.getLogger("ofdmshape")

EXIT_OK, EXIT_INPUT, EXIT_INCOMPATIBLE, EXIT_THRESHOLD, EXIT_SOLVER = 0, 2, 3, 4, 5

DEFAULT_THRESHOLDS = dict(welch_dev_db=1.0, evm_db=-120.0, papr_gap_db=0.5)
CCDF_THRESHOLDS = np.round(np.arange(4.0, 14.01, 0.25), 2)


class Incompatible(Exception):
    pass


# pipeline pieces shared by the commands


def optimize_source(sc: Scenario, cfg=None):
    """Bank, bank set or ad hoc coefficients for the scenario's method."""
    cfg = sc.cfg if cfg is None else cfg
    o = sc.optimize
    tol = o.get("tol", 1e-9)
    if sc.method == "local":
        return local_optimize_edge(cfg, o.get("edge", cfg.n // 2), o.get("orientation", LEFT), sc.flavor,
                                   span=o.get("span"), n_h=o.get("n_h"), tol=tol)
    if sc.method == "adaptive":
        weight = o.get("isolated_weight", 0.0)
        if sc.flavor == "cc+harmonic":
            return adaptive_optimize_harmonic(cfg, o.get("edge"), span=o.get("span"), tol=tol,
                                              isolated_weight=weight)
        return adaptive_optimize(cfg, o.get("edge"), sc.flavor, span=o.get("span"), tol=tol,
                                 isolated_weight=weight)
    if sc.method == "adhoc":
        return adhoc_optimize(cfg, sc.mask, sc.flavor, n_h=sc.plan.get("n_h"), tol=tol)
    raise ScenarioError(f"method {sc.method!r} has nothing to optimize")


def load_source(sc: Scenario, bank_path):
    if sc.method == "rc-only":
        return None
    if bank_path is None:
        log.info("no --bank given, optimizing in-process")
        return optimize_source(sc)
    source, cfg = read_banks(bank_path)
    if cfg.digest() != sc.cfg.digest():
        raise Incompatible(f"{bank_path}: bank was optimized for config {cfg.digest()}, "
                           f"scenario has {sc.cfg.digest()}")
    kind = "adhoc" if isinstance(source, dict) else "bank"
    if (kind == "adhoc") != (sc.method == "adhoc"):
        raise Incompatible(f"{bank_path}: {kind} file does not fit method {sc.method!r}")
    return source


def build_plan(sc: Scenario, source):
    p = sc.plan
    kw = dict(n_h=p.get("n_h"), allow_local_narrow=p.get("allow_local_narrow", False),
              sample_domain_fallback=p.get("sample_domain_fallback", True))
    if source is None:
        kw["rc_data"] = p.get("rc_data", "interior")
    return plan_mask(sc.cfg, sc.mask, source, **kw)


def provenance(sc: Scenario, **extra) -> dict:
    out = dict(tool_version=__version__, cfg_hash=sc.cfg.digest(), scenario=sc.name, method=sc.method,
               flavor=sc.flavor, profile=sc.profile)
    out.update(extra)
    return out


def _label(key) -> str:
    return f"{key[0]}-{key[1]}"


def _write_json(path: Path, doc: dict) -> None:
    path.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")


def cost_records(sc: Scenario, plan) -> list:
    return [cost_report(sc.cfg, plan, scheme) for scheme in ("A", "B")]


# commands


def cmd_optimize(sc: Scenario, args) -> int:
    if sc.method == "rc-only":
        raise ScenarioError("rc-only scenarios need no optimization", sc.name)
    source = optimize_source(sc)
    out = Path(args.out) / f"{sc.name}.bank.json"
    write_banks(out, source, sc.cfg, provenance(sc))
    if isinstance(source, BankSet):
        what = f"bank set of {len(source)} banks x {source.banks[0].n_h} columns"
    elif isinstance(source, EdgeBank):
        what = f"bank of {source.n_h} columns at edge {source.edge}"
    else:
        what = f"ad hoc coefficients for {len(source)} carriers"
    print(f"wrote {out}: {what}")
    return EXIT_OK


def _plan_outputs(sc, args, compute_psd: bool) -> int:
    source = load_source(sc, args.bank)
    plan = build_plan(sc, source)
    out = Path(args.out)
    prov = provenance(sc)
    metrics = dict(prov, counts=plan.counts(), converted=[list(x) for x in plan.notes.get("converted", [])],
                   cost=cost_records(sc, plan))
    if "plan" in sc.outputs or not compute_psd:
        write_plan_csv(out / f"{sc.name}.plan.csv", plan, prov)
    status = EXIT_OK
    if compute_psd:
        density = sc.plan.get("density", 8)
        pulses = plan_pulses(plan)
        curve, report = evaluate_plan(plan, pulses, density)
        metrics["psd_max_db"] = {_label(k): v for k, v in report.items()}
        metrics["oobe_total"] = plan_oobe(plan, pulses) if plan.shaped_carriers else None
        if "psd" in sc.outputs:
            write_psd_csv(out / f"{sc.name}.psd.csv", curve, prov)
        worst = max(report.values())
        print(f"{sc.name}: PSD_max " + ", ".join(f"{_label(k)}: {v:.2f} dB" for k, v in report.items()))
        limit = sc.thresholds.get("psd_max_db")
        if limit is not None:
            ok = worst <= limit
            metrics["checks"] = {"psd_max_db": dict(value=worst, limit=limit, passed=ok)}
            if not ok:
                print(f"FAIL PSD_max {worst:.2f} dB > {limit} dB")
                status = EXIT_THRESHOLD
    _write_json(out / f"{sc.name}.metrics.json", metrics)
    for rec in metrics["cost"]:
        print(f"scheme {rec['scheme']}: {rec['products']} products, {rec['stored']} stored values")
    return status


def cmd_plan(sc: Scenario, args) -> int:
    return _plan_outputs(sc, args, compute_psd=False)


def cmd_psd(sc: Scenario, args) -> int:
    return _plan_outputs(sc, args, compute_psd=True)


def cmd_cost_report(sc: Scenario, args) -> int:
    source = load_source(sc, args.bank) if sc.method != "rc-only" else None
    plan = build_plan(sc, source)
    out = Path(args.out) / f"{sc.name}.cost.csv"
    with open(out, "w", newline="") as fh:
        for k, v in provenance(sc).items():
            fh.write(f"# {k}={v}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["scheme", "shaped", "products", "stored"])
        for rec in cost_records(sc, plan):
            w.writerow([rec["scheme"], rec["shaped"], rec["products"], rec["stored"]])
            print(f"scheme {rec['scheme']}: shaped={rec['shaped']} products={rec['products']} "
                  f"stored={rec['stored']}")
    return EXIT_OK


def verify_plan(sc: Scenario, plan, symbols: int, seed: int) -> tuple:
    """Synthesize, estimate and receive; returns (report dict, curves dict, waveform)."""
    if symbols <= 0:
        raise WaveformError("empty stream")
    cfg = sc.cfg
    v = sc.verify
    window = v.get("window", 4 * cfg.n)
    overlap = v.get("overlap", window // 4)
    guard = v.get("guard", 1.0)
    pulses = plan_pulses(plan)
    stream = SymbolStream.qpsk(plan.data_carriers, symbols, seed)
    wave = synthesize(plan, stream, pulses)
    passband = sc.mask.passband_band()
    notches = sc.mask.notch_components()

    # the analytical grid must be fine enough for an exact window convolution
    density = 8
    while density * cfg.n < window + cfg.length:
        density *= 2
    curve = analytical_psd(cfg, pulses, density=density)
    analytic = curve.normalized_to(passband)
    expected = welch_expectation(curve, window, passband)
    estimate = welch_psd(wave, window, overlap, passband)
    dev = compare_psd(expected, estimate, notches, cfg.n, guard)
    dev_raw = compare_psd(analytic, estimate, notches, cfg.n, guard)

    _, report = evaluate_plan(plan, pulses)
    evm = evm_db(wave, stream)
    # RC reference: same carriers, same data
    rc_plan = plan_mask(cfg, sc.mask, None, rc_data="plan")
    rc_wave = synthesize(rc_plan, stream)
    papr = papr_at(wave, 1e-2)
    papr_rc = papr_at(rc_wave, 1e-2)

    th = dict(DEFAULT_THRESHOLDS)
    th.update(sc.thresholds)
    values = dict(welch_dev_db=dev, evm_db=evm, papr_gap_db=abs(papr - papr_rc))
    if "psd_max_db" in th:
        values["psd_max_db"] = max(report.values())
    checks = {k: dict(value=float(v), limit=th[k], passed=bool(v <= th[k])) for k, v in values.items()}
    result = dict(
        provenance(sc, seed=seed, symbols=symbols, window=window, overlap=overlap),
        welch_dev_db=dev, welch_dev_raw_db=dev_raw, evm_db=evm, papr_1e2_db=papr, papr_rc_1e2_db=papr_rc,
        psd_max_db={_label(k): x for k, x in report.items()},
        evm_note="first and last symbols excluded", checks=checks,
        passed=all(c["passed"] for c in checks.values()),
    )
    ccdf = np.stack([CCDF_THRESHOLDS, papr_ccdf(wave, CCDF_THRESHOLDS), papr_ccdf(rc_wave, CCDF_THRESHOLDS)], 1)
    return result, dict(estimate=estimate, expected=expected, analytic=analytic, ccdf=ccdf), wave


def cmd_verify(sc: Scenario, args) -> int:
    symbols = args.symbols if args.symbols is not None else sc.verify.get("symbols", 2000)
    seed = args.seed if args.seed is not None else sc.verify.get("seed", 0)
    if symbols <= 0:
        raise WaveformError("empty stream")
    plan = build_plan(sc, load_source(sc, args.bank))
    report, curves, wave = verify_plan(sc, plan, symbols, seed)
    out = Path(args.out)
    prov = provenance(sc, seed=seed, symbols=symbols)
    _write_json(out / f"{sc.name}.verify.json", report)
    write_psd_csv(out / f"{sc.name}.welch.csv", curves["estimate"], prov)
    write_psd_csv(out / f"{sc.name}.welch-expected.csv", curves["expected"], prov)
    with open(out / f"{sc.name}.ccdf.csv", "w", newline="") as fh:
        for k, v in prov.items():
            fh.write(f"# {k}={v}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["papr_db", "ccdf_shaped", "ccdf_rc"])
        for row in curves["ccdf"]:
            w.writerow([repr(float(x)) for x in row])
    if "waveform" in sc.outputs:
        write_waveform(out / f"{sc.name}.iq", wave)
    for name, c in report["checks"].items():
        print(f"{'PASS' if c['passed'] else 'FAIL'} {name}: {c['value']:.3f} (limit {c['limit']})")
    return EXIT_OK if report["passed"] else EXIT_THRESHOLD


def _sweep_points(sc: Scenario):
    """(optimization key, cfg, flavor, [N_D ...]) in output order."""
    s = sc.sweep
    cfg = sc.cfg
    flavors = s.get("flavors", [sc.flavor])
    two = 2 * cfg.n_ci
    points = []
    if s["parameter"] == "nh_min":
        for flavor in flavors:
            for v in s["values"]:
                c = cfg.replace(nh_min=v)
                nds = s.get("nd", [v + two, c.nh_max + two])
                points.append((("nh_min", v, flavor), c, flavor, nds))
    elif s["parameter"] == "nh_max":
        for flavor in flavors:
            for v in s["values"]:
                c = cfg.replace(nh_max=v)
                points.append((("nh_max", v, flavor), c, flavor, s.get("nd", [v + two])))
    else:
        for flavor in flavors:
            for nh_max in s.get("nh_max", [cfg.nh_max]):
                c = cfg.replace(nh_max=nh_max)
                points.append((("nd", nh_max, flavor), c, flavor, list(s["values"])))
    return points


def _sweep_task(sc: Scenario, cfg, flavor, nds, left_edge):
    rows = []
    try:
        variant = Scenario(**{k: getattr(sc, k) for k in sc.__dataclass_fields__})
        variant.cfg, variant.flavor = cfg, flavor
        source = None
        if sc.method != "adhoc" and sc.method != "rc-only":
            source = optimize_source(variant, cfg)
        for nd in nds:
            mask = EmissionMask(cfg.n, ((left_edge, left_edge + nd + 1),))
            if sc.method == "adhoc":
                variant.mask = mask
                source = optimize_source(variant, cfg)
            plan = plan_mask(cfg, mask, source, allow_local_narrow=True)
            _, report = evaluate_plan(plan)
            rows.append((nd, max(report.values()), ""))
    except (SolverError, ConfigError, MaskError, UnsupportedTransformError) as exc:
        rows += [(nd, float("nan"), f"{type(exc).__name__}: {exc}") for nd in nds[len(rows):]]
    return rows


def cmd_sweep(sc: Scenario, args) -> int:
    if not sc.sweep or not sc.sweep.get("values"):
        raise ScenarioError("empty sweep range", sc.name)
    left = sc.sweep.get("left_edge", 100)
    points = _sweep_points(sc)
    jobs = max(1, args.jobs)
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as pool:
            futures = [pool.submit(_sweep_task, sc, c, f, nds, left) for _, c, f, nds in points]
            results = [f.result() for f in futures]
    else:
        results = [_sweep_task(sc, c, f, nds, left) for _, c, f, nds in points]
    out = Path(args.out) / f"{sc.name}.sweep.csv"
    failed = False
    with open(out, "w", newline="") as fh:
        for k, v in provenance(sc, parameter=sc.sweep["parameter"]).items():
            fh.write(f"# {k}={v}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["parameter", "value", "flavor", "nh_min", "nh_max", "nd", "psd_max_db", "error"])
        for (key, c, flavor, _), rows in zip(points, results):
            for nd, value, err in rows:
                failed |= bool(err)
                w.writerow([key[0], key[1] if key[0] != "nd" else nd, flavor, c.nh_min, c.nh_max, nd,
                            repr(float(value)), err])
                print(f"{key[0]}={key[1] if key[0] != 'nd' else nd} {flavor} nh_max={c.nh_max} "
                      f"N_D={nd}: {value:.2f} dB{'  ' + err if err else ''}")
    return EXIT_SOLVER if failed else EXIT_OK


COMMANDS = {
    "optimize": cmd_optimize,
    "plan": cmd_plan,
    "psd": cmd_psd,
    "verify": cmd_verify,
    "sweep": cmd_sweep,
    "cost-report": cmd_cost_report,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ofdmshape", description="Spectral shaping of OFDM signals "
                                     "with precomputed, transformable pulses.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--scenario", required=True, help="scenario JSON file")
        p.add_argument("--out", default=".", help="output directory (default: current)")
        p.add_argument("--profile", choices=sorted(PROFILES), help="base parameter profile")
        p.add_argument("-v", "--verbose", action="store_true")
        if name in ("plan", "psd", "verify", "cost-report"):
            p.add_argument("--bank", help="bank file from 'optimize' (optimized in-process when omitted)")
        if name == "verify":
            p.add_argument("--seed", type=int, help="symbol generator seed")
            p.add_argument("--symbols", type=int, help="number of OFDM symbols U")
        if name == "sweep":
            p.add_argument("--jobs", type=int, default=1, help="parallel optimizations")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        sc = load_scenario(args.scenario, args.profile)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](sc, args)
    except (ScenarioError, BankFormatError, WaveformError, MaskError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (Incompatible, UnsupportedTransformError) as exc:
        print(f"incompatible: {exc}", file=sys.stderr)
        return EXIT_INCOMPATIBLE
    except CarrierSolveError as exc:
        print(f"solver failed: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (SolverError, NumericalConsistencyError) as exc:
        print(f"solver failed: {exc}", file=sys.stderr)
        return EXIT_SOLVER


def run() -> None:
    sys.exit(main())
