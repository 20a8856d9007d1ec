"""Command-line entry point: ``mfbench <command> [flags]``.

Every command accepts ``--config FILE`` (a JSON object whose keys are flag
names with dashes replaced by underscores) and ``--seed``.  Explicit flags
override the file.  The fully resolved config and its fingerprint are
logged and written next to each command's outputs.

Exit codes: 0 success, 1 validation error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from pathlib import Path

from mfbench.errors import (
    ConfigError,
    DeterminismError,
    DimensionError,
    MfbenchError,
    ScoreError,
)

log = logging.getLogger("mfbench")

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2

# defaults for flags that a config file may also set
DEFAULTS = {
    "gen-data": {"out": None, "tasks": ["pick_place", "button_order"], "episodes": 200,
                 "seed": 0},
    "train": {"data": None, "out": None, "curve": None, "frames": 4, "modulator": True,
              "regularization": True, "decoder": "dit", "steps": 1500, "batch_size": 32,
              "lr": 1e-3, "diffusion_repeats": 8, "pretrain_steps": 3000, "pretrain_lr": 2e-3,
              "augment_shift": 4, "init_encoder": None, "seed": 0},
    "eval": {"policy": None, "tasks": ["pick_place", "button_order"], "trials": 50,
             "out": None, "seed": 0},
    "bench": {"policy": None, "suite": None, "tasks": ["pick_place"], "settings": None,
              "trials": 100, "phase": 0, "out": None, "formats": ["json", "csv", "svg_plot"],
              "workers": 1, "seed": 0},
    "selftest": {"goldens": None, "seed": 0},
    "report": {"report": None, "out": None, "format": "svg_plot", "seed": 0},
    "sweep": {"data": None, "out": None, "frames": [1, 2, 4], "variants": ["default"],
              "tasks": ["button_order"], "steps": 300, "pretrain_steps": 300, "trials": 20,
              "lr": 1e-3, "batch_size": 32, "seed": 0},
}


def fingerprint(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":"), default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def resolve(args: argparse.Namespace) -> dict:
    """defaults < config file < explicit flags."""
    cfg = dict(DEFAULTS[args.command])
    if args.config:
        data = json.loads(Path(args.config).read_text())
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
        unknown = set(data) - set(cfg)
        if unknown:
            raise ConfigError(f"unknown config keys for {args.command}: {sorted(unknown)}")
        cfg.update(data)
    for key in cfg:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    return cfg


def _require(cfg: dict, *keys: str) -> None:
    missing = [k for k in keys if cfg.get(k) in (None, [], "")]
    if missing:
        raise ConfigError("missing required option(s): "
                          + ", ".join("--" + k.replace("_", "-") for k in missing))


def _write_run(out: Path, command: str, cfg: dict) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / f"{command}.run.json").write_text(json.dumps(
        {"command": command, "config": cfg, "fingerprint": fingerprint(cfg)},
        indent=2, sort_keys=True, default=str) + "\n")


# ---------------------------------------------------------------- commands

def cmd_gen_data(cfg: dict) -> int:
    from mfbench.simenv import generate_dataset

    _require(cfg, "out")
    out = Path(cfg["out"])
    for task in cfg["tasks"]:
        path = generate_dataset(task, int(cfg["episodes"]), int(cfg["seed"]), out / task)
        print(f"wrote {cfg['episodes']} episodes -> {path}")
    _write_run(out, "gen-data", cfg)
    return EXIT_OK


def _model_config(cfg: dict, frames: int | None = None):
    from mfbench.policy import ModelConfig

    return ModelConfig(frames=int(frames if frames is not None else cfg["frames"]),
                       modulator=bool(cfg.get("modulator", True)),
                       regularization=bool(cfg.get("regularization", True)),
                       decoder=cfg.get("decoder", "dit"))


def _load_records(paths):
    from mfbench.simenv import load_dataset

    records = []
    for p in paths:
        if not (Path(p) / "index.json").exists():
            raise ConfigError(f"{p}: no episode index found")
        records.extend(load_dataset(p))
    return records


def cmd_train(cfg: dict) -> int:
    from mfbench.policy import Policy, TrainHyper, WindowDataset, train, transfer_encoder
    from mfbench.policy.train import hyper_to_dict

    _require(cfg, "data", "out")
    config = _model_config(cfg)
    records = _load_records(cfg["data"])
    hyper = TrainHyper(steps=int(cfg["steps"]), batch_size=int(cfg["batch_size"]),
                       lr=float(cfg["lr"]), diffusion_repeats=int(cfg["diffusion_repeats"]),
                       pretrain_steps=int(cfg["pretrain_steps"]),
                       pretrain_lr=float(cfg["pretrain_lr"]),
                       augment_shift=int(cfg["augment_shift"]), seed=int(cfg["seed"]))
    fp = fingerprint(cfg)
    log.info("train config fingerprint %s", fp)
    ds = WindowDataset(records, config.frames, config.chunk_len)
    policy = None
    if cfg["init_encoder"]:
        policy = transfer_encoder(_load_policy(cfg["init_encoder"]),
                                  Policy(config, seed=hyper.seed, normalizer=ds.normalizer))
    curve = cfg["curve"] or str(Path(cfg["out"]) / "loss_curve.csv")
    result = train(ds, config, policy=policy, hyper=hyper, curve_path=curve)
    result.policy.save(cfg["out"], {"run": {"config": cfg, "fingerprint": fp,
                                            "hyper": hyper_to_dict(hyper)}})
    losses = result.losses
    summary = (f"loss {losses[0]:.4f} -> {losses[-5:].mean():.4f}" if len(losses)
               else "encoder stage only")
    print(f"trained {hyper.pretrain_steps}+{hyper.steps} steps, {summary}; "
          f"checkpoint {cfg['out']} (params {result.policy.fingerprint()}, config {fp})")
    return EXIT_OK


def _load_policy(path: str):
    from mfbench.policy import Policy

    if not (Path(path) / "index.json").exists():
        raise ConfigError(f"{path}: checkpoint not found")
    return Policy.load(path)


def cmd_eval(cfg: dict) -> int:
    from mfbench.bench import SuiteConfig, run_benchmark

    _require(cfg, "policy")
    paths = cfg["policy"] if isinstance(cfg["policy"], list) else [cfg["policy"]]
    fp = fingerprint(cfg)
    summary = {"fingerprint": fp, "policies": {}}
    for p in paths:
        pol = _load_policy(p)
        suite = SuiteConfig(tasks=tuple(cfg["tasks"]), trials=int(cfg["trials"]),
                            seed=int(cfg["seed"]))
        rep = run_benchmark(pol, suite, name=Path(p).name)
        summary["policies"][p] = {r.task: r.sr for r in rep.rows}
        for r in rep.rows:
            print(f"{p}\t{r.task}\tSR={r.sr:.1f}\t({r.successes}/{r.trials})")
    if cfg["out"]:
        Path(cfg["out"]).parent.mkdir(parents=True, exist_ok=True)
        Path(cfg["out"]).write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def _suite(cfg: dict):
    from mfbench.bench import SuiteConfig, all_settings

    if cfg["suite"]:
        data = json.loads(Path(cfg["suite"]).read_text())
        data.setdefault("seed", int(cfg["seed"]))
        return SuiteConfig.from_dict(data)
    settings = cfg["settings"]
    if settings is None:
        settings = [s.name for s in all_settings()]
    return SuiteConfig(tasks=tuple(cfg["tasks"]), settings=tuple(settings),
                       trials=int(cfg["trials"]), seed=int(cfg["seed"]),
                       phase=int(cfg["phase"]), workers=int(cfg["workers"]))


def cmd_bench(cfg: dict) -> int:
    from mfbench.bench import comparison_csv, emit_report, run_benchmark

    _require(cfg, "policy", "out")
    suite = _suite(cfg)
    out = Path(cfg["out"])
    fp = fingerprint(cfg)
    log.info("bench config fingerprint %s", fp)
    reports = []
    ext = {"json": "json", "csv": "csv", "svg_plot": "svg"}
    names = [Path(p).name or f"policy{i}" for i, p in enumerate(cfg["policy"])]
    if len(set(names)) != len(names):
        names = [f"{n}-{i}" for i, n in enumerate(names)]
    for path, name in zip(cfg["policy"], names):
        pol = _load_policy(path)
        rep = run_benchmark(pol, suite, name=name)
        reports.append(rep)
        for fmt in cfg["formats"]:
            emit_report(rep, fmt, out / f"{name}.report.{ext[fmt]}")
        for r in rep.rows:
            rs = "-" if r.r_score is None else f"{r.r_score:.1f}"
            print(f"{name}\t{r.task}\t{r.setting}\tSR={r.sr:.1f}\tR={rs}")
    if len(reports) > 1:
        comparison_csv(reports, out / "comparison.csv")
        print(f"comparison table -> {out / 'comparison.csv'}")
    _write_run(out, "bench", cfg)
    return EXIT_OK


def cmd_selftest(cfg: dict) -> int:
    from mfbench.cli.selftest import run_selftest

    results = run_selftest(cfg["goldens"])
    failed = [r for r in results if not r.passed]
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name}: {r.detail}")
    print(f"{len(results) - len(failed)}/{len(results)} fixtures passed")
    return EXIT_OK if not failed else EXIT_RUNTIME


def cmd_report(cfg: dict) -> int:
    from mfbench.bench import emit_report, load_report

    _require(cfg, "report", "out")
    emit_report(load_report(cfg["report"]), cfg["format"], cfg["out"])
    print(f"wrote {cfg['out']}")
    return EXIT_OK


SWEEP_VARIANTS = {
    "default": {},
    "no-modulator": {"modulator": False},
    "no-regularization": {"regularization": False},
    "mlp": {"decoder": "mlp"},
    "self": {"decoder": "self"},
}


def cmd_sweep(cfg: dict) -> int:
    """Train one policy per (variant, M) and record clean success rates."""
    from mfbench.bench import SuiteConfig, run_benchmark, write_frames_sweep
    from mfbench.policy import TrainHyper, train_shared_encoder

    _require(cfg, "data", "out")
    unknown = set(cfg["variants"]) - set(SWEEP_VARIANTS)
    if unknown:
        raise ConfigError(f"unknown variants {sorted(unknown)}; known: {sorted(SWEEP_VARIANTS)}")
    records = _load_records(cfg["data"])
    out = Path(cfg["out"])
    hyper = TrainHyper(steps=int(cfg["steps"]), batch_size=int(cfg["batch_size"]),
                       lr=float(cfg["lr"]), pretrain_steps=int(cfg["pretrain_steps"]),
                       seed=int(cfg["seed"]), log_every=0)
    cells = [(v, m) for v in cfg["variants"] for m in cfg["frames"]]
    configs = [_model_config({**cfg, **SWEEP_VARIANTS[v]}, frames=m) for v, m in cells]
    # one single-frame encoder stage shared by every (variant, M) cell
    results = train_shared_encoder(records, configs, hyper)
    rows = []
    suite = SuiteConfig(tasks=tuple(cfg["tasks"]), trials=int(cfg["trials"]),
                        seed=int(cfg["seed"]))
    for (variant, m), res in zip(cells, results):
        for r in run_benchmark(res.policy, suite).rows:
            rows.append({"variant": variant, "frames": m, "task": r.task,
                         "trials": r.trials, "sr": r.sr})
            print(f"{variant}\tM={m}\t{r.task}\tSR={r.sr:.1f}")
    write_frames_sweep(rows, out / "frames_sweep.csv", out / "frames_sweep.svg")
    _write_run(out, "sweep", cfg)
    return EXIT_OK


COMMANDS = {"gen-data": cmd_gen_data, "train": cmd_train, "eval": cmd_eval,
            "bench": cmd_bench, "selftest": cmd_selftest, "report": cmd_report,
            "sweep": cmd_sweep}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mfbench", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def command(name, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="JSON file of option values")
        p.add_argument("--seed", type=int)
        return p

    p = command("gen-data", "roll out the scripted expert into episode containers")
    p.add_argument("--out", help="output directory (one subdirectory per task)")
    p.add_argument("--tasks", nargs="+")
    p.add_argument("--episodes", type=int)

    p = command("train", "train a policy on one or more episode containers")
    p.add_argument("--data", nargs="+", help="episode container directories")
    p.add_argument("--out", help="checkpoint directory")
    p.add_argument("--curve", help="loss-curve CSV (default: <out>/loss_curve.csv)")
    p.add_argument("--frames", type=int, help="frames per window, M")
    p.add_argument("--no-modulator", dest="modulator", action="store_const", const=False)
    p.add_argument("--no-regularization", dest="regularization", action="store_const",
                   const=False)
    p.add_argument("--decoder", choices=["dit", "mlp", "self", "cross_attention_dit",
                                         "mlp_only", "self_attention_only"])
    p.add_argument("--steps", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--diffusion-repeats", type=int)
    p.add_argument("--pretrain-steps", type=int, help="single-frame encoder stage steps")
    p.add_argument("--pretrain-lr", type=float)
    p.add_argument("--augment-shift", type=int, help="max random translation in pixels")
    p.add_argument("--init-encoder", help="checkpoint whose encoder weights seed this run")

    p = command("eval", "clean success rate of one or more checkpoints")
    p.add_argument("--policy", nargs="+")
    p.add_argument("--tasks", nargs="+")
    p.add_argument("--trials", type=int)
    p.add_argument("--out", help="summary JSON")

    p = command("bench", "robustness benchmark with hash-seeded disturbance plans")
    p.add_argument("--policy", nargs="+", help="checkpoint directories")
    p.add_argument("--suite", help="suite JSON (tasks, settings, trials, seed, phase, horizon)")
    p.add_argument("--tasks", nargs="+")
    p.add_argument("--settings", nargs="*", help="e.g. full_occlusion@1:1 blurring@1:0")
    p.add_argument("--trials", type=int)
    p.add_argument("--phase", type=int, help="offset of the disturbed slot within a period")
    p.add_argument("--workers", type=int)
    p.add_argument("--formats", nargs="+", choices=["json", "csv", "svg_plot"])
    p.add_argument("--out", help="report directory")

    p = command("selftest", "run built-in correctness fixtures")
    p.add_argument("--goldens", help="override the packaged goldens file")

    p = command("report", "re-render a saved report JSON")
    p.add_argument("--report")
    p.add_argument("--format", choices=["json", "csv", "svg_plot"])
    p.add_argument("--out")

    p = command("sweep", "success-vs-frames ablation sweep")
    p.add_argument("--data", nargs="+")
    p.add_argument("--out")
    p.add_argument("--frames", type=int, nargs="+")
    p.add_argument("--variants", nargs="+", choices=sorted(SWEEP_VARIANTS))
    p.add_argument("--tasks", nargs="+")
    p.add_argument("--steps", type=int)
    p.add_argument("--pretrain-steps", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--batch-size", type=int)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve(args)
        log.info("%s config %s fingerprint %s", args.command,
                 json.dumps(cfg, sort_keys=True, default=str), fingerprint(cfg))
        return COMMANDS[args.command](cfg)
    except (ConfigError, DimensionError, ScoreError, FileNotFoundError,
            json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (MfbenchError, DeterminismError, OSError) as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
