"""Command-line experiment runner: filter versus windowed smoothers over
Monte Carlo runs of the simulated scenario.

Example::

    mwglmb run --mode filter --mode smoother:5 --mode smoother:20 --runs 20 --seed 7

Configuration files are flat ``key = value`` text (``#`` comments). Keys::

    duration p_detect clutter_rate p_survive r_birth sigma_a sigma_r sigma_b
    cap_requested cap_pre_gibbs samples_filter samples_gibbs
    ospa_c ospa_p ospa_window runs seed workers modes

``modes`` is a comma-separated list such as ``filter, smoother:5``.
Command-line flags override the file.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import io
import sys
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .core import LabeledStateSet
from .metrics import OspaParams, ospa2, ospa_components, tracks_from_states
from .models import default_scenario_models
from .sim import Dataset, Scenario, generate, load_dataset, save_dataset
from .smoother import SmootherConfig, extract_estimate, run_tracker

SCENARIO_KEYS = {"p_detect": float, "clutter_rate": float, "p_survive": float, "r_birth": float,
                 "sigma_a": float, "sigma_r": float, "sigma_b": float}
TRACKER_KEYS = {"cap_requested": int, "cap_pre_gibbs": int, "samples_filter": int,
                "samples_gibbs": int}
OTHER_KEYS = {"duration": int, "ospa_c": float, "ospa_p": float, "ospa_window": int,
              "runs": int, "seed": int, "workers": int, "modes": str}


class ConfigError(Exception):
    pass


class Mode(NamedTuple):
    """``window is None`` is the filter baseline."""

    window: Optional[int]

    @property
    def name(self) -> str:
        return "filter" if self.window is None else f"smoother_N{self.window}"

    @classmethod
    def parse(cls, text: str) -> "Mode":
        name, _, arg = text.strip().partition(":")
        if name == "filter" and not arg:
            return cls(None)
        if name == "smoother" and arg:
            try:
                n = int(arg)
            except ValueError:
                raise ConfigError(f"bad window in mode {text!r}") from None
            if n < 1:
                raise ConfigError(f"window must be >= 1 in mode {text!r}")
            return cls(n)
        raise ConfigError(f"unknown mode {text!r}; use 'filter' or 'smoother:N'")


@dataclass(frozen=True)
class RunConfig:
    modes: tuple[Mode, ...] = (Mode(None), Mode(5), Mode(20))
    runs: int = 1
    seed: int = 0
    workers: int = 1
    duration: int = 100
    scenario: dict = field(default_factory=dict)
    tracker: dict = field(default_factory=dict)
    ospa: OspaParams = OspaParams()

    def __post_init__(self):
        if not self.modes:
            raise ConfigError("at least one tracker mode is required")
        if self.runs < 1:
            raise ConfigError("runs must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    def scenario_for(self, run: int) -> Scenario:
        models = default_scenario_models(**self.scenario)
        return Scenario(duration=self.duration, models=models, seed=run_seed(self.seed, run))

    def tracker_for(self, mode: Mode, run: int) -> SmootherConfig:
        seed = run_seed(self.seed, run, 1)
        if mode.window is None:
            return SmootherConfig(smoothing=False, seed=seed, **self.tracker)
        return SmootherConfig(window=mode.window, seed=seed, **self.tracker)


def run_seed(seed: int, run: int, stream: int = 0) -> int:
    """Derived integer seed for one run; stream 0 simulates, 1 tracks."""
    ss = np.random.SeedSequence([seed, run, stream])
    return int(ss.generate_state(1, np.uint32)[0])


def read_config(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    try:
        parser.read_string("[run]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from None
    out = {}
    known = {**SCENARIO_KEYS, **TRACKER_KEYS, **OTHER_KEYS}
    for key, raw in parser["run"].items():
        if key not in known:
            raise ConfigError(f"unknown config key {key!r}")
        try:
            out[key] = known[key](raw)
        except ValueError:
            raise ConfigError(f"bad value for {key}: {raw!r}") from None
    return out


def build_config(values: dict) -> RunConfig:
    modes = values.get("modes")
    if isinstance(modes, str):
        modes = [m for m in modes.split(",") if m.strip()]
    kw = {}
    if modes:
        kw["modes"] = tuple(Mode.parse(m) for m in modes)
    for key in ("runs", "seed", "workers", "duration"):
        if key in values:
            kw[key] = values[key]
    kw["scenario"] = {k: values[k] for k in SCENARIO_KEYS if k in values}
    kw["tracker"] = {k: values[k] for k in TRACKER_KEYS if k in values}
    try:
        kw["ospa"] = OspaParams(values.get("ospa_c", 100.0), values.get("ospa_p", 1.0),
                                values.get("ospa_window", 10))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return RunConfig(**kw)


# ----------------------------------------------------------------- evaluation

class ModeResult(NamedTuple):
    """Per-scan series for one mode on one dataset (index 0 is scan 0)."""

    estimates: list[LabeledStateSet]
    ospa: np.ndarray
    ospa_loc: np.ndarray
    ospa_card: np.ndarray
    ospa2: np.ndarray
    cardinality: np.ndarray
    seconds: np.ndarray


def estimated_states(result, mode: Mode, models) -> list[LabeledStateSet]:
    """Per-scan labeled estimates.

    The filter reports its online filtered estimate at every scan. A
    smoother reports the smoothed trajectories of the best hypothesis in the
    final bank.
    """
    if mode.window is None:
        return [LabeledStateSet(0)] + list(result.online)
    est = extract_estimate(result.bank, models.motion, smoothed=True)
    per_scan: list[list] = [[] for _ in range(result.bank.scan + 1)]
    for ell, first, means in est.tracks:
        for i, m in enumerate(means):
            per_scan[first + i].append((m, ell))
    return [LabeledStateSet(k, tuple(items)) for k, items in enumerate(per_scan)]


def evaluate(truth: Sequence[LabeledStateSet], estimates: Sequence[LabeledStateSet],
             params: OspaParams) -> tuple[np.ndarray, ...]:
    n = len(truth)
    vals = np.zeros((4, n))
    t_tracks = tracks_from_states(truth)
    e_tracks = tracks_from_states(estimates)
    for k in range(n):
        vals[:3, k] = ospa_components(truth[k].positions(), estimates[k].positions(), params)
        vals[3, k] = ospa2(t_tracks, e_tracks, params, k)
    return tuple(vals)


def run_mode(dataset: Dataset, scenario: Scenario, mode: Mode, tracker: SmootherConfig,
             params: OspaParams) -> ModeResult:
    result = run_tracker(dataset.measurements, scenario.models, tracker)
    est = estimated_states(result, mode, scenario.models)
    o, loc, card, o2 = evaluate(dataset.truth, est, params)
    seconds = np.array([0.0] + [d.seconds for d in result.diagnostics])
    cardinality = np.array([len(x) for x in est])
    return ModeResult(est, o, loc, card, o2, cardinality, seconds)


def _run_task(args):
    cfg, run, mode, dataset = args
    scenario = cfg.scenario_for(run)
    if dataset is None:
        dataset = generate(scenario)
    return run_mode(dataset, scenario, mode, cfg.tracker_for(mode, run), cfg.ospa)


def run_experiment(cfg: RunConfig, datasets: Optional[Sequence[Dataset]] = None,
                   executor=None) -> tuple[list[Dataset], dict]:
    """Run every mode on every run; returns the datasets and
    ``{mode: [ModeResult per run]}``. Results do not depend on scheduling."""
    if datasets is None:
        datasets = [generate(cfg.scenario_for(r)) for r in range(cfg.runs)]
    tasks = [(cfg, r, m, datasets[r]) for m in cfg.modes for r in range(len(datasets))]
    outs = list(executor.map(_run_task, tasks)) if executor else [_run_task(t) for t in tasks]
    results: dict = {m: [] for m in cfg.modes}
    for (_, _, m, _), out in zip(tasks, outs):
        results[m].append(out)
    return list(datasets), results


# -------------------------------------------------------------------- output

def _fmt(x) -> str:
    return repr(float(x))


def _write_csv(path: Path, header, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    path.write_text(buf.getvalue())


def write_mode_outputs(outdir: Path, mode: Mode, datasets, results) -> None:
    d = outdir / mode.name
    d.mkdir(parents=True, exist_ok=True)
    n = len(results[0].ospa)
    rows = []
    for x in results[0].estimates:
        for (_, ell), pos in zip(x.items, x.positions()):
            rows.append((x.scan, str(ell), _fmt(pos[0]), _fmt(pos[1])))
    _write_csv(d / "tracks.csv", ("scan", "label", "x", "y"), rows)
    mean = lambda attr: np.mean([getattr(r, attr) for r in results], axis=0)  # noqa: E731
    cols = [mean(a) for a in ("ospa", "ospa_loc", "ospa_card", "ospa2")]
    _write_csv(d / "metrics.csv", ("scan", "ospa", "ospa_loc", "ospa_card", "ospa2"),
               [(k, *(_fmt(c[k]) for c in cols)) for k in range(n)])
    true_card = np.mean([[len(x) for x in ds.truth] for ds in datasets], axis=0)
    est_card = mean("cardinality")
    _write_csv(d / "cardinality.csv", ("scan", "true", "estimated"),
               [(k, _fmt(true_card[k]), _fmt(est_card[k])) for k in range(n)])
    # wall-clock times are the only non-deterministic output
    secs = mean("seconds")
    _write_csv(d / "runtime.csv", ("scan", "seconds"), [(k, _fmt(secs[k])) for k in range(1, n)])
    for r, res in enumerate(results):
        rd = d / "runs" / f"run_{r:03d}"
        rd.mkdir(parents=True, exist_ok=True)
        _write_csv(rd / "metrics.csv", ("scan", "ospa", "ospa_loc", "ospa_card", "ospa2"),
                   [(k, _fmt(res.ospa[k]), _fmt(res.ospa_loc[k]), _fmt(res.ospa_card[k]),
                     _fmt(res.ospa2[k])) for k in range(n)])


def summarize(results: dict) -> list[tuple]:
    rows = []
    for mode, res in results.items():
        o = np.array([r.ospa[1:].mean() for r in res])
        o2 = np.array([r.ospa2[1:].mean() for r in res])
        rows.append((mode.name, len(res), _fmt(o.mean()), _fmt(o.std()), _fmt(o2.mean()),
                     _fmt(o2.std())))
    return rows


def write_plots(outdir: Path, datasets, results: dict) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    matplotlib.rcParams["svg.hashsalt"] = "mwglmb"
    meta = {"Date": None}

    fig, axes = plt.subplots(2, 1, sharex=True, figsize=(8, 6))
    truth = tracks_from_states(datasets[0].truth)
    for t in truth.values():
        ks = sorted(t)
        for ax, c in zip(axes, (0, 1)):
            ax.plot(ks, [t[k][c] for k in ks], "k-", lw=1)
    for mode, res in results.items():
        for i, t in enumerate(tracks_from_states(res[0].estimates).values()):
            ks = sorted(t)
            for ax, c in zip(axes, (0, 1)):
                ax.plot(ks, [t[k][c] for k in ks], ".", ms=2,
                        label=mode.name if (i == 0 and c == 0) else None)
    axes[0].set_ylabel("x (m)")
    axes[1].set_ylabel("y (m)")
    axes[1].set_xlabel("scan")
    axes[0].legend(loc="upper right", fontsize=7)
    fig.savefig(outdir / "tracks.svg", metadata=meta)
    plt.close(fig)

    for attr, ylabel in (("ospa", "OSPA (m)"), ("ospa2", "OSPA2 (m)"),
                         ("cardinality", "cardinality"), ("seconds", "step time (s)")):
        fig, ax = plt.subplots(figsize=(8, 4))
        if attr == "cardinality":
            ax.plot(np.mean([[len(x) for x in ds.truth] for ds in datasets], axis=0), "k-",
                    label="truth")
        for mode, res in results.items():
            y = np.mean([getattr(r, attr) for r in res], axis=0)
            start = 1 if attr == "seconds" else 0
            ax.plot(range(start, len(y)), y[start:], label=mode.name)
        ax.set_xlabel("scan")
        ax.set_ylabel(ylabel)
        ax.legend(fontsize=7)
        name = {"seconds": "runtime"}.get(attr, attr)
        fig.savefig(outdir / f"{name}.svg", metadata=meta)
        plt.close(fig)


# ----------------------------------------------------------------------- main

def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mwglmb", description=__doc__.split("\n\n")[0])
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run tracker modes over Monte Carlo runs")
    r.add_argument("--config", metavar="PATH")
    r.add_argument("--mode", action="append", metavar="NAME[:N]",
                   help="'filter' or 'smoother:N' (repeatable)")
    r.add_argument("--runs", type=int)
    r.add_argument("--seed", type=int)
    r.add_argument("--out", default="results", metavar="DIR")
    r.add_argument("--workers", type=int)
    r.add_argument("--export-dataset", metavar="PATH",
                   help="write the run-0 dataset as text")
    r.add_argument("--replay", metavar="PATH",
                   help="track a previously exported dataset instead of simulating")
    r.add_argument("--no-plots", action="store_true")
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _parser().parse_args(argv)
    try:
        values = read_config(args.config) if args.config else {}
        for key in ("runs", "seed", "workers"):
            if getattr(args, key) is not None:
                values[key] = getattr(args, key)
        if args.mode:
            values["modes"] = args.mode
        cfg = build_config(values)
        datasets = None
        if args.replay:
            try:
                datasets = [load_dataset(args.replay)]
            except (OSError, ValueError) as exc:
                raise ConfigError(f"cannot read dataset {args.replay}: {exc}") from None
            cfg = replace(cfg, runs=1, duration=datasets[0].duration)
    except ConfigError as exc:
        print(f"mwglmb: {exc}", file=sys.stderr)
        return 2

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    failed = out / "FAILED"
    if failed.exists():
        failed.unlink()
    try:
        if cfg.workers > 1:
            with ProcessPoolExecutor(cfg.workers) as ex:
                datasets, results = run_experiment(cfg, datasets, ex)
        else:
            datasets, results = run_experiment(cfg, datasets)
        if args.export_dataset:
            save_dataset(datasets[0], args.export_dataset)
        for mode in cfg.modes:
            write_mode_outputs(out, mode, datasets, results[mode])
        _write_csv(out / "summary.csv",
                   ("mode", "runs", "ospa_mean", "ospa_std", "ospa2_mean", "ospa2_std"),
                   summarize(results))
        if not args.no_plots:
            write_plots(out, datasets, results)
    except Exception:
        failed.write_text(traceback.format_exc())
        print(f"mwglmb: run failed, partial outputs in {out} (see FAILED)", file=sys.stderr)
        return 1
    for row in summarize(results):
        print(f"{row[0]:>14}  OSPA {float(row[2]):7.2f}  OSPA2 {float(row[4]):7.2f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
