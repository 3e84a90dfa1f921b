"""Experiment commands behind the CLI.  Each returns plain rows; writing is separate."""
from __future__ import annotations

import csv
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .experiments import (
    EpsGrid,
    Experiment,
    MethodSizes,
    MethodSkipped,
    covariance_error,
    kriging_error,
    make_method,
    method_covariance,
    run_replicate,
    simulate_truth,
    warmup,
)
from .kriging import KrigingProblem, Optimal, krige
from .matern import MaternParams

__all__ = [
    "CommandResult",
    "COV_ERROR_HEADER",
    "KRIGING_HEADER",
    "SUMMARY_HEADER",
    "TAPER_HEADER",
    "SKIPPED_HEADER",
    "experiment_from",
    "sizes_from",
    "cmd_cov_error",
    "cmd_kriging_bench",
    "summarize",
    "cmd_taper_sweep",
    "cmd_demo_predict",
    "write_csv",
    "write_grid",
    "read_grid",
    "fmt",
]

COV_ERROR_HEADER = ("method", "nu", "range", "epsilon")
KRIGING_HEADER = ("method", "nu", "range", "replicate", "kriging_error", "t_step1", "t_step2", "t_step3")
SUMMARY_HEADER = (
    "method", "nu", "range", "replicates",
    "kriging_error_mean", "kriging_error_std",
    "t_step1_mean", "t_step1_std", "t_step2_mean", "t_step2_std", "t_step3_mean", "t_step3_std",
)
TAPER_HEADER = (
    "nu", "range", "replicate", "theta",
    "kriging_error_taper", "t_step2_taper", "t_step23_taper",
    "kriging_error_s1", "t_step2_s1", "t_step23_s1",
)
SKIPPED_HEADER = ("method", "nu", "range", "reason")


@dataclass
class CommandResult:
    rows: list = field(default_factory=list)
    skipped: list = field(default_factory=list)
    # unexpected failures; each is also a skipped row with an "error:" reason
    failures: int = 0
    extra: dict = field(default_factory=dict)


def fmt(x):
    if isinstance(x, (float, np.floating)):
        return "%.17g" % x
    return str(x)


def write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def write_grid(path, values, dims, lower, upper):
    """Row-major text grid with a two-line header: dims and bounding box."""
    values = np.asarray(values, dtype=float).reshape(dims)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("# dims " + " ".join(str(int(n)) for n in dims) + "\n")
        box = " ".join(f"{fmt(float(lo))} {fmt(float(hi))}" for lo, hi in zip(lower, upper))
        fh.write("# bbox " + box + "\n")
        for row in values.reshape(dims[0], -1):
            fh.write(" ".join(fmt(float(v)) for v in row) + "\n")


def read_grid(path):
    """Inverse of :func:`write_grid`: ``(values, dims, bbox)``."""
    with open(path, encoding="utf-8") as fh:
        dims = tuple(int(t) for t in fh.readline().split()[2:])
        bbox = tuple(float(t) for t in fh.readline().split()[2:])
        values = np.loadtxt(fh, ndmin=2)
    return values.reshape(dims), dims, bbox


def experiment_from(cfg, nu, range_):
    ex = cfg["experiment"]
    return Experiment(
        nu=nu,
        range=range_,
        lower=tuple(ex["lower"]),
        upper=tuple(ex["upper"]),
        m=ex["m"],
        sigma=ex["sigma"],
        grid=tuple(ex["grid"]),
        replicates=ex["replicates"],
        seed=cfg["run"]["seed"],
        sim_cap=ex["sim_cap"],
    )


def sizes_from(cfg, **overrides):
    m = cfg["methods"]
    values = dict(
        s_nodes=m["s_nodes"],
        exact_nodes=m["exact_nodes"],
        db3_nodes=m["db3_nodes"],
        conv_nodes=m["conv_nodes"],
        taper_theta=m["taper_theta"],
        expand=m["expand"],
        fixed_count=m["fixed_count"],
        taper_override=m["taper_override"],
    )
    values.update(overrides)
    return MethodSizes(**values)


def _pool_map(fn, tasks, threads):
    if threads <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, tasks))


# covariance error ---------------------------------------------------------


def _cov_error_task(task):
    name, nu, range_, lower, upper, sizes, grid = task
    p = MaternParams.from_range(nu, range_, len(lower))
    try:
        method = make_method(name, p, lower, upper, sizes)
        eps = covariance_error(method_covariance(method, p), p, lower, upper, grid)
    except MethodSkipped as exc:
        return ("skip", exc.reason)
    except Exception as exc:  # noqa: BLE001  recorded as a failure row
        return ("error", f"error: {type(exc).__name__}: {exc}")
    return ("ok", eps)


def cmd_cov_error(cfg):
    ex = cfg["experiment"]
    grid = EpsGrid(**cfg["cov_error"])
    sizes = sizes_from(cfg)
    tasks = [
        (name, nu, r, tuple(ex["lower"]), tuple(ex["upper"]), sizes, grid)
        for nu in ex["nu"]
        for r in ex["ranges"]
        for name in cfg["methods"]["names"]
    ]
    out = CommandResult()
    for task, (status, value) in zip(tasks, _pool_map(_cov_error_task, tasks, cfg["run"]["threads"])):
        name, nu, r = task[:3]
        if status == "ok":
            out.rows.append((name, nu, r, value))
        else:
            out.skipped.append((name, nu, r, value))
            out.failures += status == "error"
    return out


# kriging benchmark ----------------------------------------------------------


def _bench_task(task):
    exp, replicate, names, sizes, repeats, do_warmup = task
    if do_warmup:
        warmup()
    outcome = run_replicate(exp, replicate, names, sizes, repeats)
    timings = {k: (t.step1, t.step2, t.step3) for k, t in outcome.timings.items()}
    return outcome.errors, timings, outcome.skipped


def cmd_kriging_bench(cfg):
    ex = cfg["experiment"]
    names = tuple(cfg["methods"]["names"])
    names = ("optimal",) + tuple(n for n in names if n != "optimal")
    sizes = sizes_from(cfg)
    repeats = cfg["run"]["repeats"]
    threads = cfg["run"]["threads"]
    tasks = [
        (experiment_from(cfg, nu, r), i, names, sizes, repeats, True)
        for nu in ex["nu"]
        for r in ex["ranges"]
        for i in range(ex["replicates"])
    ]
    warmup()
    results = _pool_map(_bench_task, tasks, threads)
    if threads > 1:
        # timings only from a dedicated single-process pass
        timed = [_bench_task(t) for t in tasks]
        results = [(errs, tm[1], skip) for (errs, _, skip), tm in zip(results, timed)]
    out = CommandResult()
    seen_skips = set()
    for task, (errors, timings, skipped) in zip(tasks, results):
        exp, replicate = task[0], task[1]
        for name in names:
            if name in errors:
                t1, t2, t3 = timings[name]
                out.rows.append((name, exp.nu, exp.range, replicate, errors[name], t1, t2, t3))
            elif name in skipped and (name, exp.nu, exp.range) not in seen_skips:
                seen_skips.add((name, exp.nu, exp.range))
                out.skipped.append((name, exp.nu, exp.range, skipped[name]))
            if name in skipped and skipped[name].startswith("error:"):
                out.failures += 1
    out.extra["summary"] = summarize(out.rows)
    return out


def summarize(rows):
    """Mean and sample standard deviation per (method, nu, range)."""
    groups = {}
    for row in rows:
        groups.setdefault(tuple(row[:3]), []).append(row[4:])
    summary = []
    for key, vals in groups.items():
        a = np.asarray(vals, dtype=float)
        std = a.std(axis=0, ddof=1) if a.shape[0] > 1 else np.zeros(a.shape[1])
        mean = a.mean(axis=0)
        cols = []
        for j in range(a.shape[1]):
            cols += [float(mean[j]), float(std[j])]
        summary.append(key + (a.shape[0],) + tuple(cols))
    return summary


# taper sweep --------------------------------------------------------------


def _sweep_task(task):
    exp, replicate, thetas, sizes, s_sizes, do_warmup = task
    if do_warmup:
        warmup()
    truth = simulate_truth(exp, replicate)
    p = exp.params

    def run(method):
        problem = KrigingProblem(truth.obs_locs, truth.y, exp.sigma, truth.pred_locs, p, method)
        return krige(problem)

    opt = run(Optimal())
    s1 = run(make_method("markov-s1", p, exp.lower, exp.upper, s_sizes))
    s1_err = kriging_error(s1, opt)
    rows = []
    for theta in thetas:
        tap = run(make_method("taper", p, exp.lower, exp.upper, MethodSizes(
            taper_theta=theta, taper_override=sizes.taper_override)))
        rows.append((
            exp.nu, exp.range, replicate, theta,
            kriging_error(tap, opt), tap.timings.step2, tap.timings.step2 + tap.timings.step3,
            s1_err, s1.timings.step2, s1.timings.step2 + s1.timings.step3,
        ))
    return rows


def cmd_taper_sweep(cfg):
    ex = cfg["experiment"]
    sizes = sizes_from(cfg)
    s_sizes = sizes_from(cfg, s_nodes=cfg["taper_sweep"]["s_nodes"])
    thetas = tuple(cfg["taper_sweep"]["thetas"])
    threads = cfg["run"]["threads"]
    out = CommandResult()
    usable = []
    for nu in ex["nu"]:
        probe = MaternParams.from_range(nu, 1.0, len(ex["lower"]))
        try:
            make_method("taper", probe, ex["lower"], ex["upper"], sizes)
            usable.append(nu)
        except MethodSkipped as exc:
            out.skipped.extend(("taper", nu, r, exc.reason) for r in ex["ranges"])
    tasks = [
        (experiment_from(cfg, nu, r), i, thetas, sizes, s_sizes, True)
        for nu in usable
        for r in ex["ranges"]
        for i in range(ex["replicates"])
    ]
    warmup()
    results = _pool_map(_sweep_task, tasks, threads)
    if threads > 1:
        timed = [_sweep_task(t) for t in tasks]
        results = [
            [r[:4] + (r[4], t[5], t[6], r[7], t[8], t[9]) for r, t in zip(res, tim)]
            for res, tim in zip(results, timed)
        ]
    for rows in results:
        out.rows.extend(rows)
    return out


# demo prediction ----------------------------------------------------------


def cmd_demo_predict(cfg):
    """Predictions from one simulated data set on the demo grid, one field per method."""
    demo = cfg["demo"]
    ex = cfg["experiment"]
    exp = Experiment(
        nu=demo["nu"], range=demo["range"], lower=tuple(ex["lower"]), upper=tuple(ex["upper"]),
        m=ex["m"], sigma=ex["sigma"], grid=tuple(demo["grid"]), replicates=1,
        seed=cfg["run"]["seed"], sim_cap=ex["sim_cap"],
    )
    truth = simulate_truth(exp, 0, include_grid=False)
    p = exp.params
    sizes = sizes_from(cfg)
    out = CommandResult()
    fields = {}
    names = ("optimal",) + tuple(n for n in cfg["methods"]["names"] if n != "optimal")
    warmup()
    for name in names:
        try:
            method = make_method(name, p, exp.lower, exp.upper, sizes)
        except MethodSkipped as exc:
            out.skipped.append((name, exp.nu, exp.range, exc.reason))
            continue
        result = krige(KrigingProblem(truth.obs_locs, truth.y, exp.sigma, truth.pred_locs, p, method))
        fields[name] = result.predictions
    out.extra.update(fields=fields, dims=exp.grid, lower=exp.lower, upper=exp.upper, truth=truth)
    return out


def ensure_dir(path):
    os.makedirs(path, exist_ok=True)
    return path
