"""Command-line front end: ``salmix cluster | classify | simulate | density-grid | repro-sim``."""

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import selection
from .data import DataSet, encode_labels, read_csv, write_csv
from .em import fit_em
from .engine import AnnealingSchedule, FitConfig
from .exceptions import CsvFormatError, MissingClassExamples, UnsupportedDimension
from .gmm import GaussianMixture, fit_gmm
from .report import FitReport
from .sal import SHIFT_TOL, SalComponent, SalMixture, sal_mixture_log_density
from .semi import ClassificationTask, fit_classifier
from .simulate import SimulationSpec, generate, paper_sim_spec

log = logging.getLogger("salmix")

MODELS = {"sal": fit_em, "gaussian": fit_gmm}


def _threads() -> int:
    raw = os.environ.get("SALMIX_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            log.warning("ignoring non-integer SALMIX_THREADS=%r", raw)
    return os.cpu_count() or 1


def _pool_map(fn, jobs):
    """Run ``fn`` over ``jobs`` on a process pool capped by ``SALMIX_THREADS``; results keep job order."""
    jobs = list(jobs)
    workers = min(_threads(), len(jobs))
    if workers <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, jobs))


def _config(args, g: int) -> FitConfig:
    return FitConfig(
        g=g,
        epsilon=args.epsilon,
        max_iter=args.max_iter,
        annealing=AnnealingSchedule.linear(args.anneal_steps, args.restarts),
        seed=args.seed,
    )


# standardisation --------------------------------------------------------------

def _standardize(rows):
    center = rows.mean(axis=0)
    scale = rows.std(axis=0, ddof=1) if rows.shape[0] > 1 else np.ones(rows.shape[1])
    scale = np.where(scale > 0, scale, 1.0)
    return (rows - center) / scale, center, scale


def _to_original_units(report: FitReport, center, scale) -> FitReport:
    """Map parameters fitted on z-scores back to the raw scale; the log-likelihood shifts by ``-n sum(log s)``."""
    m = report.parameters
    D = np.diag(scale)
    if isinstance(m, GaussianMixture):
        params = GaussianMixture(m.weights, center + m.means * scale,
                                 np.array([D @ s @ D for s in m.covariances]))
    else:
        params = SalMixture(m.weights, [
            SalComponent(center + c.mu * scale, c.alpha * scale, D @ c.sigma @ D)
            for c in m.components
        ])
    n = report.responsibilities.shape[0]
    shift = -n * float(np.sum(np.log(scale)))
    trace = [v + shift for v in report.log_lik_trace]
    mask = report.known_mask
    score = selection.icl(trace[-1], report.score.free_params, n, report.responsibilities, mask)
    out = replace(report, parameters=params, log_lik_trace=trace, score=score)
    out.config = dict(report.config, standardized={"center": center.tolist(), "scale": scale.tolist()})
    return out


# cluster ----------------------------------------------------------------------

def _fit_job(job):
    kind, g, rows, cfg, standardize = job
    X = rows
    if standardize:
        X, center, scale = _standardize(rows)
    try:
        report = MODELS[kind](X, cfg)
    except Exception as exc:  # recorded per (model, g); the sweep goes on
        return kind, g, None, f"{type(exc).__name__}: {exc}"
    if standardize:
        report = _to_original_units(report, center, scale)
    return kind, g, report.to_dict(), None


def _true_codes(data: DataSet):
    if data.labels is None:
        return None
    codes, _ = encode_labels(data.labels)
    return codes


def _write_labels(path, report: FitReport, rows=None):
    tau = report.responsibilities
    idx = range(tau.shape[0]) if rows is None else rows
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("row_id,map_label," + ",".join(f"tau_{j + 1}" for j in range(tau.shape[1])) + "\n")
        for i in idx:
            fh.write(f"{i + 1},{report.map_labels[i]}," + ",".join(repr(float(t)) for t in tau[i]) + "\n")


def run_sweep(data: DataSet, models, g_values, args):
    """Fit every (model, g); returns ``{(model, g): FitReport or error string}``."""
    jobs = [(kind, g, data.rows, _config(args, g), args.standardize)
            for kind in models for g in g_values]
    results = {}
    for kind, g, d, err in _pool_map(_fit_job, jobs):
        results[(kind, g)] = FitReport.from_dict(d) if d is not None else err
    return results


def _select(results, kind, criterion):
    ok = {g: r for (k, g), r in results.items() if k == kind and isinstance(r, FitReport)}
    if not ok:
        return None
    key = (lambda r: r.score.icl) if criterion == "icl" else (lambda r: r.score.bic)
    return max(ok.values(), key=key)


def cmd_cluster(args) -> int:
    data = read_csv(args.input)
    models = ["sal", "gaussian"] if args.model == "both" else [args.model]
    if args.g_min < 1 or args.g_max < args.g_min:
        raise SystemExit("error: need 1 <= --g-min <= --g-max")
    results = run_sweep(data, models, range(args.g_min, args.g_max + 1), args)
    truth = _true_codes(data)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    summary = {"input": str(args.input), "criterion": args.criterion, "seed": args.seed, "fits": [],
               "selected": {}}
    for (kind, g), r in sorted(results.items()):
        entry = {"model": kind, "g": g}
        if isinstance(r, FitReport):
            if truth is not None:
                r.ari = selection.rand_and_ari(truth, r.map_labels)[1]
            stem = f"{kind}_g{g}"
            r.to_json(out / f"{stem}.json")
            _write_labels(out / f"{stem}_labels.csv", r)
            entry.update(status=r.status, log_lik=r.log_lik, bic=r.score.bic, icl=r.score.icl,
                         ari=r.ari, report=f"{stem}.json")
        else:
            entry.update(status="failed", error=r)
            log.warning("%s G=%d failed: %s", kind, g, r)
        summary["fits"].append(entry)
    for kind in models:
        best = _select(results, kind, args.criterion)
        summary["selected"][kind] = None if best is None else {"g": best.g, "ari": best.ari}
        if best is not None:
            msg = f"{kind}: selected G={best.g} by {args.criterion.upper()}"
            if best.ari is not None:
                msg += f" (ARI {best.ari:.4f})"
            print(msg)
        else:
            print(f"{kind}: every fit failed")
    (out / "summary.json").write_text(json.dumps(summary, indent=1), encoding="utf-8")
    return 0


# classify ---------------------------------------------------------------------

def cmd_classify(args) -> int:
    data = read_csv(args.input)
    if data.labels is None or data.known_mask is None:
        raise SystemExit("error: classify needs 'label' and 'known' columns")
    known_rows = np.flatnonzero(data.known_mask)
    classes = sorted(set(data.labels[known_rows].tolist()), key=lambda v: (str(type(v)), v))
    g = args.g if args.g is not None else len(classes)
    task = ClassificationTask.from_dataset(data, g=g, h=args.h, classes=classes)
    cfg = _config(args, task.h)
    X = data.rows
    if args.standardize:
        X, center, scale = _standardize(data.rows)
        task = ClassificationTask(DataSet(X, data.column_names), task.known_labels, task.g, task.h,
                                  task.labelled_rows)
    report = fit_classifier(task, cfg, engine=args.model)
    if args.standardize:
        report = _to_original_units(report, center, scale)
    held = np.flatnonzero(~data.known_mask)
    if held.size:
        report.ari = selection.rand_and_ari(data.labels[held], report.map_labels[held])[1]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stem = f"{args.model}_classify_g{task.h}"
    report.to_json(out / f"{stem}.json")
    _write_labels(out / f"{stem}_labels.csv", report)
    summary = {"input": str(args.input), "model": args.model, "g": task.g, "h": task.h,
               "k": task.k, "status": report.status, "log_lik": report.log_lik,
               "held_out_ari": report.ari, "classes": [str(c) for c in classes],
               "report": f"{stem}.json"}
    (out / "summary.json").write_text(json.dumps(summary, indent=1), encoding="utf-8")
    msg = f"{args.model}: {task.k} labelled, {held.size} predicted"
    if report.ari is not None:
        msg += f", held-out ARI {report.ari:.4f}"
    print(msg)
    return 0


# simulate ---------------------------------------------------------------------

def default_sim_mixture(g: int) -> SalMixture:
    """``g`` equally weighted skewed components stacked along the second axis, 7 units apart."""
    comps = [SalComponent([0.0, -2.0 + 7.0 * k], [2.0, 1.0 + (k % 2)], np.eye(2)) for k in range(g)]
    return SalMixture(np.full(g, 1.0 / g), comps)


def cmd_simulate(args) -> int:
    if args.paper:
        spec = replace(paper_sim_spec(args.seed), datasets=args.datasets or 25)
    else:
        spec = SimulationSpec(default_sim_mixture(args.g), args.n, args.datasets or 1, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    width = max(3, len(str(spec.datasets)))
    for k, (ds, _) in enumerate(generate(spec)):
        write_csv(out / f"sim_{k + 1:0{width}d}.csv", ds)
    print(f"wrote {spec.datasets} data set(s) of {spec.n} rows to {out}")
    return 0


# density grid -----------------------------------------------------------------

def density_grid(model, bounds, resolution):
    """``(x, y, density)`` rows on a ``resolution x resolution`` grid whose outer nodes sit on the bounds."""
    if model.p != 2:
        raise UnsupportedDimension(f"density grids need a 2-D model, got p={model.p}")
    xmin, xmax, ymin, ymax = bounds
    if not (xmax > xmin and ymax > ymin) or resolution < 2:
        raise ValueError("need increasing bounds and resolution >= 2")
    xs = np.linspace(xmin, xmax, resolution)
    ys = np.linspace(ymin, ymax, resolution)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    if isinstance(model, GaussianMixture):
        L = model.component_log_densities(pts)
        m = L.max(axis=1, keepdims=True)
        logd = m[:, 0] + np.log(np.exp(L - m).sum(axis=1))
    else:
        # the SAL density is unbounded at a shift; a grid node landing there gets a finite value
        logd = sal_mixture_log_density(pts, model, delta_floor=SHIFT_TOL)
    return np.column_stack([pts, np.exp(logd)])


def cmd_density_grid(args) -> int:
    report = FitReport.from_json(args.report)
    grid = density_grid(report.parameters, args.bounds, args.resolution)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(args.out, grid, delimiter=",", header="x,y,density", comments="", fmt="%.17g")
    print(f"wrote {grid.shape[0]} grid points to {args.out}")
    return 0


# simulation study ----------------------------------------------------------------

def _repro_job(job):
    k, ds, z, kind, g_max, args = job
    best, errors = None, 0
    for g in range(1, g_max + 1):
        try:
            r = MODELS[kind](ds, _config(args, g))
        except Exception:
            errors += 1
            continue
        if best is None or r.score.icl > best.score.icl:
            best = r
    if best is None:
        return k, kind, None, float("nan"), errors
    return k, kind, best.g, selection.rand_and_ari(z, best.map_labels)[1], errors


def simulation_study(args):
    """ICL-selected G and ARI per data set and model; ``{model: [(g, ari), ...]}``."""
    spec = replace(paper_sim_spec(args.seed), datasets=args.datasets)
    sets = generate(spec)
    jobs = [(k, ds, z, kind, args.g_max, args) for k, (ds, z) in enumerate(sets)
            for kind in ("sal", "gaussian")]
    table = {"sal": [None] * len(sets), "gaussian": [None] * len(sets)}
    for k, kind, g, ari, _ in _pool_map(_repro_job, jobs):
        table[kind][k] = (g, ari)
    return table


def format_study(table) -> str:
    lines = []
    for kind, label in (("sal", "SAL"), ("gaussian", "Gaussian")):
        gs = [g for g, _ in table[kind]]
        aris = np.array([a for _, a in table[kind]], dtype=float)
        pct = 100.0 * np.mean([g == 2 for g in gs])
        counts = {g: gs.count(g) for g in sorted(set(gs), key=lambda v: (v is None, v))}
        lines.append(f"{label:<9} G=2 selected             {pct:5.0f}%")
        lines.append(f"{'':<9} Average ARI (std. dev.)  {np.nanmean(aris):.4f} ({np.nanstd(aris, ddof=1):.5f})")
        lines.append(f"{'':<9} selected G counts        " + ", ".join(f"{g}: {c}" for g, c in counts.items()))
    return "\n".join(lines)


def cmd_repro_sim(args) -> int:
    table = simulation_study(args)
    print(format_study(table))
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(json.dumps(
            {k: [{"g": g, "ari": a} for g, a in v] for k, v in table.items()}, indent=1),
            encoding="utf-8")
    return 0


# parser -----------------------------------------------------------------------

def _fit_flags(p, models=None):
    if models:
        p.add_argument("--model", choices=models, default="sal")
    p.add_argument("--epsilon", type=float, default=1e-5)
    p.add_argument("--max-iter", type=int, default=1000)
    p.add_argument("--restarts", type=int, default=10)
    p.add_argument("--anneal-steps", type=int, default=25)
    p.add_argument("--seed", type=int, required=True)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="salmix", description="SAL and Gaussian mixture fitting.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("cluster", help="fit mixtures over a range of G and select one")
    p.add_argument("input")
    p.add_argument("--out", default="salmix_out")
    _fit_flags(p, ["sal", "gaussian", "both"])
    p.add_argument("--g-min", type=int, default=1)
    p.add_argument("--g-max", type=int, default=5)
    p.add_argument("--criterion", choices=["icl", "bic"], default="icl")
    p.add_argument("--standardize", action="store_true")
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("classify", help="fit with the rows flagged 'known' pinned to their label")
    p.add_argument("input")
    p.add_argument("--out", default="salmix_out")
    _fit_flags(p, ["sal", "gaussian"])
    p.add_argument("--g", type=int, default=None, help="number of classes (default: distinct known labels)")
    p.add_argument("--h", type=int, default=None, help="number of components, at least --g")
    p.add_argument("--standardize", action="store_true")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("simulate", help="write simulated data sets with a label column")
    p.add_argument("--out", default="salmix_sim")
    p.add_argument("--paper", action="store_true", help="the two-component benchmark design")
    p.add_argument("--datasets", type=int, default=None)
    p.add_argument("--n", type=int, default=500)
    p.add_argument("--g", type=int, default=2)
    p.add_argument("--seed", type=int, required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("density-grid", help="mixture density on a 2-D grid for contour plots")
    p.add_argument("report")
    p.add_argument("--bounds", type=float, nargs=4, metavar=("XMIN", "XMAX", "YMIN", "YMAX"),
                   required=True)
    p.add_argument("--resolution", type=int, default=100)
    p.add_argument("--out", default="density_grid.csv")
    p.set_defaults(func=cmd_density_grid)

    p = sub.add_parser("repro-sim", help="run the simulation study and print its summary table")
    p.add_argument("--datasets", type=int, default=25)
    p.add_argument("--g-max", type=int, default=7)
    p.add_argument("--out", default=None, help="optional JSON with per-data-set results")
    _fit_flags(p)
    p.set_defaults(func=cmd_repro_sim)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (CsvFormatError, UnsupportedDimension, MissingClassExamples, FileNotFoundError,
            ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
