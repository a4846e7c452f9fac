"""Command-line front end.

Subcommands ``approx``, ``diagnose``, ``study`` and ``simulate`` each take
one YAML experiment config and write CSV/JSON into the output directory
(overridable with the SUBEXP2_OUTPUT_DIR environment variable).

Exit codes: 0 success, 2 config error, 3 resource budget exceeded,
4 numerical-quality failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import shutil
import sys
from pathlib import Path

import numpy as np

from .asymptotics import QuadratureError, approximation_report, build_equivalent_tail
from .config import ConfigError, ExperimentConfig, load_config
from .diagnostics import (
    CURVE_COLUMNS,
    ClassReport,
    DiagnosticsSettings,
    Flag,
    Interval,
    RatioCurve,
    diagnose,
    geometric_grid,
    kesten_bound_check,
    ratio_curve,
    smallness_threshold,
    tail_equivalence_check,
)
from .lattice import LatticeBracket, LatticeError, ResourceError, TruncationError, snap
from .montecarlo import SimulationError, estimates_to_csv, oracle_agreement, simulate_compound_tail

log = logging.getLogger("subexp2")

EXIT_OK, EXIT_CONFIG, EXIT_RESOURCE, EXIT_QUALITY = 0, 2, 3, 4
OUTPUT_ENV = "SUBEXP2_OUTPUT_DIR"


class QualityFailure(RuntimeError):
    """Too many points were excluded for cancellation."""


# -- helpers -------------------------------------------------------------------


def output_dir(cfg: ExperimentConfig) -> Path:
    root = os.environ.get(OUTPUT_ENV)
    out = Path(root) / cfg.name if root else Path(cfg.output.dir)
    out.mkdir(parents=True, exist_ok=True)
    if cfg.source is not None:
        shutil.copyfile(cfg.source, out / "config.yaml")
    return out


def _write_json(path: Path, data) -> None:
    path.write_text(json.dumps(_clean(data), indent=2, sort_keys=True) + "\n")


def _clean(v):
    # JSON has no NaN/inf; write null instead
    if isinstance(v, dict):
        return {str(k): _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, (float, np.floating)):
        return float(v) if math.isfinite(v) else None
    if isinstance(v, np.integer):
        return int(v)
    return v


def settings_from(cfg: ExperimentConfig, check_halving: bool | None = None) -> DiagnosticsSettings:
    d = cfg.diagnostics
    return DiagnosticsSettings(
        step=cfg.lattice.step,
        x_min=cfg.grid.x_min,
        x_max=cfg.grid.x_max,
        ratio=cfg.grid.ratio,
        window=d.window,
        closed_x_max=d.closed_x_max,
        probe_t=tuple(float(t) for t in d.probe_t),
        tol=d.tol,
        local_ratio_tol=d.local_ratio_tol,
        zero_tol=d.zero_tol,
        bounded_tol=d.bounded_tol,
        y_set=tuple(float(y) for y in d.y_set),
        A_values=tuple(float(a) for a in d.A_values),
        check_halving=d.check_halving if check_halving is None else check_halving,
        nfold=tuple(int(n) for n in d.nfold),
        budget=cfg.lattice.budget,
    )


def _grid(cfg: ExperimentConfig, compound: bool = False) -> np.ndarray:
    top = cfg.grid.x_max
    if compound and cfg.grid.compound_x_max is not None:
        top = cfg.grid.compound_x_max
    xs = geometric_grid(cfg.grid.x_min, top, cfg.grid.ratio)
    return np.unique(snap(xs, cfg.lattice.step))


def _cancellation_fraction(curves) -> float:
    flags = [f for c in curves if c.uses_lattice for f in c.flags[-c.window :]]
    return sum(f is Flag.CANCELLATION for f in flags) / len(flags) if flags else 0.0


def residual_curve(report, window: int, tol: float) -> RatioCurve:
    """Compound residual ratio as a RatioCurve with cancellation flags."""
    rr = report.residual_ratio
    lo, hi = report.residual_band
    frac = report.bracket_fraction

    zero_target = report.target == 0

    def point(i):
        if zero_target:
            # nothing to cancel against; judge the band on the absolute scale of the verdict
            bad = not (hi[i] - lo[i]) <= tol
        else:
            bad = not frac[i] <= 0.5
        flag = Flag.CANCELLATION if bad else Flag.OK
        if not math.isfinite(rr[i]):
            flag = Flag.UNDEFINED
        return Interval(float(rr[i]), float(lo[i]), float(hi[i]), flag)

    idx = {float(x): i for i, x in enumerate(report.x_grid)}
    return ratio_curve(
        "compound_residual", lambda x: point(idx[x]), report.x_grid, float(report.target), tol, window, uses_lattice=True
    )


# -- commands --------------------------------------------------------------------


def cmd_approx(cfg: ExperimentConfig) -> dict:
    if cfg.count is None:
        raise ConfigError("count: required for approx")
    model, count = cfg.model.build(), cfg.count.build()
    out = output_dir(cfg)
    report = approximation_report(model, count, _grid(cfg, compound=True), cfg.lattice.step, cfg.lattice_x_max, cfg.lattice.method)
    curve = residual_curve(report, cfg.diagnostics.window, cfg.diagnostics.tol)
    if "csv" in cfg.output.formats:
        report.to_csv(out / "approx.csv")
    summary = {
        "target": report.target,
        "last_window_estimate": curve.last_window_estimate,
        "verdict": curve.verdict.value,
        "max_bracket_fraction_in_window": float(np.nanmax(report.bracket_fraction[-curve.window :])),
    }
    if "json" in cfg.output.formats:
        data = report.to_dict()
        data["summary"] = summary
        _write_json(out / "approx.json", data)
    print(
        f"{cfg.name}: residual ratio {summary['last_window_estimate']:.6g} "
        f"(target {summary['target']:.6g}) {summary['verdict']}"
    )
    _check_quality([curve], cfg)
    return summary


def _kesten(cfg: ExperimentConfig, model, bracket: LatticeBracket) -> dict:
    d = cfg.diagnostics
    A = smallness_threshold(model, bracket.x_max, bracket.step)
    res = kesten_bound_check(bracket, model, d.eps, A, int(d.n_max))
    return res.to_dict()


def cmd_diagnose(cfg: ExperimentConfig) -> ClassReport:
    model = cfg.model.build()
    out = output_dir(cfg)
    s = settings_from(cfg)
    bracket = LatticeBracket(model, s.step, cfg.lattice_x_max, s.budget)
    report = diagnose(model, s, bracket)
    extra = {}
    if cfg.diagnostics.kesten:
        try:
            extra["kesten"] = _kesten(cfg, model, bracket)
        except LatticeError as exc:
            extra["kesten"] = {"error": str(exc)}
    if cfg.diagnostics.equivalence:
        try:
            H = build_equivalent_tail(model)
            xs = geometric_grid(cfg.grid.x_min, cfg.grid.x_max * 10, cfg.grid.ratio)
            c1, c2 = tail_equivalence_check(H, xs, window=cfg.diagnostics.window)
            report.curves[c1.name] = c1
            report.curves[c2.name] = c2
            extra["equivalence_K"] = H.K
        except QuadratureError as exc:
            extra["equivalence"] = {"error": str(exc)}
    if "csv" in cfg.output.formats:
        report.to_csv(out / "diagnose_curves.csv")
    if "json" in cfg.output.formats:
        data = report.to_dict()
        data.update(extra)
        _write_json(out / "diagnose.json", data)
    (out / "diagnose_summary.txt").write_text(report.summary_table() + "\n")
    print(report.summary_table())
    _check_quality(report.curves.values(), cfg)
    return report


STUDY_COLUMNS = (
    "curve",
    "target",
    "tol",
    "estimate",
    "spread",
    "verdict",
    "estimate_half_step",
    "verdict_half_step",
    "stable",
    "note",
)


def cmd_study(cfg: ExperimentConfig) -> list[dict]:
    """Every curve at step h and h/2, plus a verdict-stability summary."""
    model = cfg.model.build()
    out = output_dir(cfg)
    s = settings_from(cfg, check_halving=True)
    report = diagnose(model, s)
    curves = dict(report.curves)
    halved = dict(report.halved_curves)
    if cfg.count is not None:
        count = cfg.count.build()
        for step, store in ((s.step, curves), (s.step / 2, halved)):
            rep = approximation_report(model, count, _grid(cfg, compound=True), step, cfg.lattice_x_max, cfg.lattice.method)
            store["compound_residual"] = residual_curve(rep, s.window, s.tol)
        curves["compound_residual"].apply_halving(halved["compound_residual"])
    rows = []
    for name, c in curves.items():
        h = halved.get(name)
        rows.append(
            {
                "curve": name,
                "target": c.target,
                "tol": c.tol,
                "estimate": c.last_window_estimate,
                "spread": c.spread,
                "verdict": c.verdict.value,
                "estimate_half_step": h.last_window_estimate if h else math.nan,
                "verdict_half_step": h.verdict.value if h else "",
                "stable": h is None or "flipped" not in c.note,
                "note": c.note,
            }
        )
    with open(out / "study_curves.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("step",) + CURVE_COLUMNS)
        for step, store in ((s.step, curves), (s.step / 2, halved)):
            for c in store.values():
                for row in c.csv_rows():
                    w.writerow([repr(step)] + row)
    with open(out / "study_summary.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=STUDY_COLUMNS)
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    _write_json(out / "study.json", {"verdicts": {k: v.value for k, v in report.verdicts.items()}, "curves": rows, "notes": report.notes})
    width = max(len(r["curve"]) for r in rows) + 2
    for r in rows:
        print(f"{r['curve']:<{width}}{r['verdict']:>14}{r['verdict_half_step']:>14}  est={r['estimate']:.5g}")
    _check_quality(curves.values(), cfg)
    return rows


def cmd_simulate(cfg: ExperimentConfig) -> dict:
    if cfg.count is None:
        raise ConfigError("count: required for simulate")
    if cfg.montecarlo.seed is None:
        raise ConfigError("montecarlo.seed: required for simulate")
    model, count = cfg.model.build(), cfg.count.build()
    out = output_dir(cfg)
    xs = _grid(cfg, compound=True)
    report = approximation_report(model, count, xs, cfg.lattice.step, cfg.lattice_x_max, cfg.lattice.method)
    est = simulate_compound_tail(model, count, report.x_grid, int(cfg.montecarlo.n_samples), int(cfg.montecarlo.seed))
    frac, inside = oracle_agreement(est, report.exact_lo, report.exact_hi, cfg.montecarlo.min_exceedances)
    if "csv" in cfg.output.formats:
        estimates_to_csv(est, model, count, out / "simulate.csv")
    summary = {
        "agreement_fraction": frac,
        "points": [
            {
                "x": e.x,
                "estimate": e.estimate,
                "std_error": e.std_error,
                "exact_lo": float(a),
                "exact_hi": float(b),
                "inside": bool(ok),
            }
            for e, a, b, ok in zip(est, report.exact_lo, report.exact_hi, inside)
        ],
        "n_samples": int(cfg.montecarlo.n_samples),
        "seed": int(cfg.montecarlo.seed),
    }
    if "json" in cfg.output.formats:
        _write_json(out / "simulate.json", summary)
    print(f"{cfg.name}: oracle agreement {frac:.3f} over checkable points")
    return summary


def _check_quality(curves, cfg: ExperimentConfig) -> None:
    frac = _cancellation_fraction(list(curves))
    if frac > cfg.diagnostics.max_cancellation_fraction:
        raise QualityFailure(
            f"{frac:.0%} of verdict-window points flagged for cancellation "
            f"(limit {cfg.diagnostics.max_cancellation_fraction:.0%})"
        )


COMMANDS = {"approx": cmd_approx, "diagnose": cmd_diagnose, "study": cmd_study, "simulate": cmd_simulate}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="subexp2", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        sp = sub.add_parser(name, help=(fn.__doc__ or name).splitlines()[0])
        sp.add_argument("config", type=Path)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config)
        COMMANDS[args.command](cfg)
    except (ConfigError, SimulationError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ResourceError as exc:
        print(f"resource error: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (QualityFailure, TruncationError, QuadratureError) as exc:
        print(f"numerical quality failure: {exc}", file=sys.stderr)
        return EXIT_QUALITY
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
