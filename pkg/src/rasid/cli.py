"""Command-line front end.

Exit codes: 0 success, 2 configuration error, 3 data error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__, bench, evaluation
from .baselines import fit_mle
from .config import ConfigError, detector_config, load_config, require_path
from .detector import (load_decisions, load_verdicts, region_heatmap, run, write_decisions,
                       write_verdicts)
from .profiling import FeatureKind, build_profile, load_bundle, save_bundle, with_alpha
from .synth import SynthConfig, generate_synthetic, office_config, office_geometry
from .trace import (DataError, load_geometry, load_labels, load_trace, write_geometry,
                    write_labels, write_trace)

EXIT_CONFIG = 2
EXIT_DATA = 3


def _meta(cfg: dict, command: str) -> dict:
    return {"command": command, "version": __version__, "seed": cfg["seed"], "config": cfg}


def _write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=2) + "\n")


def _out_dir(cfg: dict) -> Path:
    out = Path(cfg["paths"].get("out") or "out")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _labels(cfg: dict):
    return load_labels(require_path(cfg, "labels"))


# ---------------------------------------------------------------------------
# Commands

def cmd_gen(cfg: dict, args) -> int:
    out = _out_dir(cfg)
    if args.testbed == "office":
        geo = office_geometry()
        try:
            synth = office_config(cfg["seed"], **cfg["synth"])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad synth section: {exc}") from None
        write_geometry(geo, out / "geometry.json")
    else:
        geo = load_geometry(require_path(cfg, "geometry"))
        try:
            synth = SynthConfig.from_dict({**cfg["synth"], "seed": cfg["seed"]})
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad synth section: {exc}") from None
    try:
        trace, labels = generate_synthetic(synth, geo)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    n = write_trace(trace, out / "trace.jsonl")
    write_labels(labels, out / "labels.jsonl")
    _write_json(out / "gen.meta.json", {**_meta(cfg, "gen"), "synth": synth.to_dict()})
    print(f"seed {synth.seed}: wrote {n} samples over {trace.k} streams to {out}")
    return 0


def cmd_train(cfg: dict, args) -> int:
    trace = load_trace(require_path(cfg, "trace"))
    t0, t1 = float(cfg["train"]["start"]), float(cfg["train"]["end"])
    if cfg["paths"].get("labels"):
        bench.check_training_silence(_labels(cfg), t0, t1)
    d = cfg["detector"]
    train = trace.slice(t0, t1)
    profiles = {s: build_profile(train, s, d["l"], d["alpha"], FeatureKind(d["feature"]))
                for s in trace.streams}
    out = _out_dir(cfg)
    meta = {"seed": cfg["seed"], "train": cfg["train"], "l": d["l"], "alpha": d["alpha"],
            "feature": d["feature"], "version": __version__}
    save_bundle(profiles, out / "profiles.json", meta)
    print(f"trained {len(profiles)} profiles on [{t0:g}, {t1:g}) -> {out / 'profiles.json'}")
    return 0


def _evaluate(cfg: dict, decisions, out: Path, field: str) -> evaluation.EvalReport:
    labels = _labels(cfg)
    t_end = float(cfg["train"]["end"])
    test = [dec for dec in decisions if dec.t >= t_end]
    rep = evaluation.score(test, labels, field)
    doc = {"field": field, "scored_from": t_end, "report": rep.to_dict()}
    (out / "report.json").write_text(evaluation.dumps(doc))
    sys.stdout.write(evaluation.report_table(rep, "rasid"))
    return rep


def cmd_run(cfg: dict, args) -> int:
    trace = load_trace(require_path(cfg, "trace"))
    profiles = load_bundle(require_path(cfg, "profiles"))
    d = cfg["detector"]
    for s, p in profiles.items():
        if p.feature.value != d["feature"]:
            raise ConfigError(f"profile for {s} uses feature {p.feature.value!r}, "
                              f"detector.feature is {d['feature']!r}")
        if p.alpha != d["alpha"]:
            profiles[s] = with_alpha(p, d["alpha"])
    res = run(trace, profiles, detector_config(cfg))
    out = _out_dir(cfg)
    write_decisions(res.decisions, out / "decisions.jsonl")
    write_verdicts(res, out / "verdicts.jsonl")
    save_bundle(res.profiles, out / "profiles_updated.json",
                {"seed": cfg["seed"], "updates": {str(s): n for s, n in res.updates.items()}})
    _write_json(out / "run.meta.json", _meta(cfg, "run"))
    print(f"{len(res.decisions)} decisions, {int(res.alarms().sum())} refined alarms")
    if args.eval:
        _evaluate(cfg, res.decisions, out, args.field)
    return 0


def cmd_eval(cfg: dict, args) -> int:
    out = _out_dir(cfg)
    path = Path(cfg["paths"].get("decisions") or out / "decisions.jsonl")
    if not path.exists():
        raise ConfigError(f"decisions file not found: {path}")
    _evaluate(cfg, load_decisions(path), out, args.field)
    return 0


def cmd_compare(cfg: dict, args) -> int:
    trace = load_trace(require_path(cfg, "trace"))
    labels = _labels(cfg)
    t_end = float(cfg["train"]["end"])
    bench.check_training_silence(labels, float(cfg["train"]["start"]), t_end)
    dcfg = detector_config(cfg)
    reports = bench.rasid_reports(trace, labels, cfg=dcfg, train_end=t_end)
    b = cfg["baselines"]
    mle = None
    if b.get("mle_trace") and b.get("mle_labels"):
        for key in ("mle_trace", "mle_labels"):
            if not Path(b[key]).exists():
                raise ConfigError(f"baselines.{key} not found: {b[key]}")
        mle = fit_mle(load_trace(b["mle_trace"]), load_labels(b["mle_labels"]))
    reports.update(bench.baseline_reports(trace, labels, t_end,
                                          bench.BaselineParams.from_dict(b), mle))
    params = {name: cfg["detector"] for name in ("basic", "updated", "refined")}
    params.update({name: {k: v for k, v in b.items() if not k.startswith("mle_")}
                   for name in reports if name not in params})
    doc = evaluation.compare(reports, params)
    out = _out_dir(cfg)
    (out / "compare.json").write_text(evaluation.dumps(doc))
    table = evaluation.format_table(doc)
    (out / "compare.txt").write_text(table)
    sys.stdout.write(table)
    return 0


def cmd_sweep(cfg: dict, args) -> int:
    trace = load_trace(require_path(cfg, "trace"))
    labels = _labels(cfg)
    t_end = float(cfg["train"]["end"])
    bench.check_training_silence(labels, float(cfg["train"]["start"]), t_end)
    s = cfg["sweep"]
    doc = {"seed": cfg["seed"]}
    if args.what in ("l_alpha", "all"):
        doc["l_alpha"] = bench.sweep_l_alpha(trace, labels, s["l"], s["alpha"], t_end)
    if args.what in ("l_update", "all"):
        doc["l_update"] = bench.sweep_l_update(trace, labels, s["l_update"],
                                               detector_config(cfg), "basic", t_end)
    out = _out_dir(cfg)
    (out / "sweep.json").write_text(evaluation.dumps(doc))
    n = sum(len(v) for k, v in doc.items() if k != "seed")
    print(f"{n} sweep points -> {out / 'sweep.json'}")
    return 0


def cmd_heatmap(cfg: dict, args) -> int:
    geo = load_geometry(require_path(cfg, "geometry"))
    out = _out_dir(cfg)
    path = Path(cfg["paths"].get("verdicts") or out / "verdicts.jsonl")
    if not path.exists():
        raise ConfigError(f"verdicts file not found: {path}")
    verdicts = load_verdicts(path, args.t)
    if not verdicts:
        raise DataError(f"no verdicts at t={args.t:g} in {path}")
    hm = region_heatmap(verdicts, geo, args.resolution)
    target = out / f"heatmap_t{args.t:g}.csv"
    hm.write_csv(target)
    i, j = np.unravel_index(int(np.argmax(hm.heat)), hm.heat.shape)
    print(f"peak heat {hm.heat[i, j]:.4f} at ({hm.xs[j]:g}, {hm.ys[i]:g}) -> {target}")
    return 0


COMMANDS = {"gen": cmd_gen, "train": cmd_train, "run": cmd_run, "eval": cmd_eval,
            "compare": cmd_compare, "sweep": cmd_sweep, "heatmap": cmd_heatmap}


# ---------------------------------------------------------------------------
# Argument parsing

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON configuration file")
    common.add_argument("--seed", type=int, help="random seed (overrides config)")
    common.add_argument("--out", help="output directory")
    for key in ("trace", "labels", "geometry", "profiles", "decisions", "verdicts"):
        common.add_argument(f"--{key}", help=f"{key} file path")
    common.add_argument("--l", type=int, help="feature window length")
    common.add_argument("--alpha", type=float, help="significance level")
    common.add_argument("--l-update", type=int, dest="l_update", help="update group size")
    common.add_argument("--beta", type=float, help="smoothing coefficient")
    common.add_argument("--rel-threshold", type=float, dest="rel_threshold",
                        help="relative alarm threshold over the silence level")
    common.add_argument("--feature", choices=[k.value for k in FeatureKind])
    common.add_argument("--no-update", action="store_true", help="freeze profiles")
    common.add_argument("--train-end", type=float, dest="train_end",
                        help="end of the training prefix in seconds")

    p = argparse.ArgumentParser(prog="rasid", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"rasid {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    g = sub.add_parser("gen", parents=[common], help="generate a synthetic trace")
    g.add_argument("--testbed", choices=["office"], help="use the built-in office testbed")
    sub.add_parser("train", parents=[common], help="build silence profiles")
    r = sub.add_parser("run", parents=[common], help="monitor a trace")
    r.add_argument("--eval", action="store_true", help="also score against labels")
    e = sub.add_parser("eval", parents=[common], help="score a decision log")
    for sp in (r, e):
        sp.add_argument("--field", default="refined_alarm",
                        choices=["refined_alarm", "basic_alarm"])
    sub.add_parser("compare", parents=[common], help="RASID versus baselines")
    s = sub.add_parser("sweep", parents=[common], help="parameter sweeps")
    s.add_argument("--what", default="all", choices=["l_alpha", "l_update", "all"])
    h = sub.add_parser("heatmap", parents=[common], help="region heat grid at one tick")
    h.add_argument("--t", type=float, required=True, help="decision time")
    h.add_argument("--resolution", type=float, default=0.5, help="grid spacing in metres")
    return p


def _overrides(args) -> dict:
    over: dict = {"paths": {}, "detector": {}, "train": {}}
    if args.seed is not None:
        over["seed"] = args.seed
    if args.out:
        over["paths"]["out"] = args.out
    for key in ("trace", "labels", "geometry", "profiles", "decisions", "verdicts"):
        if getattr(args, key):
            over["paths"][key] = getattr(args, key)
    for key in ("l", "alpha", "l_update", "beta", "rel_threshold", "feature"):
        if getattr(args, key) is not None:
            over["detector"][key] = getattr(args, key)
    if args.no_update:
        over["detector"]["update"] = False
    if args.train_end is not None:
        over["train"]["end"] = args.train_end
    return over


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, _overrides(args))
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"rasid: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"rasid: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
