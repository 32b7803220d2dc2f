"""Command line front end.

Subcommands: gen (synthesize PTAE files), run (evaluate methods over a
stream), sweep (grid one adapter knob), bench (throughput at scale).

Settings resolve in three layers: built-in defaults, then an INI-style
config file (sections [stream], [pta], [cache], [run]), then command line
flags. Exit codes: 0 success, 1 validation/configuration error, 2 I/O or
file format error. PTA_OUTPUT_DIR sets the default output directory.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import dataclasses
import json
import os
import sys

import numpy as np

from . import ptae
from .adapter import (
    AnchorMode,
    DecayMode,
    PtaAdapter,
    PtaConfig,
    ScoreMode,
    UpdateOrder,
)
from .cache import CacheAdapter, CacheConfig
from .errors import FormatError, ValidationError
from .harness import bench_throughput, run_stream, sweep
from .stream import Stream
from .synthetic import (
    LabelDistribution,
    ShiftKind,
    ShiftSpec,
    make_anchors,
    sample_stream,
)
from .zeroshot import TextAnchors, ZeroShotAdapter

_METHODS = ("zero-shot", "pta", "cache")

# key -> (default, type); the type also parses config file strings.
_SCHEMA = {
    "stream": {
        "classes": (10, int),
        "dim": (64, int),
        "n": (2000, int),
        "shift": ("none", str),
        "magnitude": (0.0, float),
        "noise": (0.25, float),
        "label_dist": ("uniform", str),
        "zipf_s": (1.1, float),
        "seed": (0, int),
        "order_seed": (None, int),
        "anchors": (None, str),
        "stream": (None, str),
    },
    "pta": {
        "h": (20.0, float),
        "w": (0.01, float),
        "tau": (0.01, float),
        "update_order": ("update-then-predict", str),
        "anchor_mode": ("fixed", str),
        "score_mode": ("fused", str),
        "decay_mode": ("adaptive", str),
    },
    "cache": {
        "capacity": (3, int),
        "alpha": (1.0, float),
        "sharpness": (5.0, float),
    },
    "run": {
        "methods": ("zero-shot,pta,cache", str),
        "warmup": (100, int),
        "checkpoint_every": (50, int),
        "run_id": ("run", str),
        "jobs": (1, int),
        "out": (None, str),
    },
}


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors by default; bad arguments are
    # validation failures here, so force exit code 1.
    def error(self, message):
        self.exit(1, f"{self.prog}: error: {message}\n")


def _load_config_file(path: str | None) -> dict[str, dict[str, str]]:
    if path is None:
        return {}
    parser = configparser.ConfigParser()
    with open(path, "r", encoding="utf-8") as fh:
        parser.read_file(fh)
    out: dict[str, dict[str, str]] = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ValidationError(f"unknown config section [{section}]")
        out[section] = dict(parser.items(section))
    return out


def _merged(section: str, file_cfg: dict, flags: dict) -> dict:
    schema = _SCHEMA[section]
    out = {k: default for k, (default, _) in schema.items()}
    for key, raw in file_cfg.get(section, {}).items():
        if key not in schema:
            raise ValidationError(f"unknown config key '{key}' in [{section}]")
        _, typ = schema[key]
        try:
            out[key] = typ(raw)
        except ValueError as exc:
            raise ValidationError(f"bad value for {section}.{key}: {raw!r}") from exc
    for key, value in flags.items():
        if key in schema and value is not None:
            out[key] = value
    return out


def _out_dir(merged_run: dict) -> str:
    out = merged_run.get("out") or os.environ.get("PTA_OUTPUT_DIR") or "."
    os.makedirs(out, exist_ok=True)
    return out


def _spec_from(stream_cfg: dict) -> ShiftSpec:
    try:
        shift = ShiftKind(stream_cfg["shift"])
        dist = LabelDistribution(stream_cfg["label_dist"])
    except ValueError as exc:
        raise ValidationError(str(exc)) from exc
    order_seed = stream_cfg["order_seed"]
    if order_seed is None:
        order_seed = stream_cfg["seed"]
    return ShiftSpec(
        class_count=stream_cfg["classes"],
        dim=stream_cfg["dim"],
        stream_length=stream_cfg["n"],
        noise_sigma=stream_cfg["noise"],
        shift_kind=shift,
        shift_magnitude=stream_cfg["magnitude"],
        label_distribution=dist,
        zipf_exponent=stream_cfg["zipf_s"],
        anchor_seed=stream_cfg["seed"],
        order_seed=order_seed,
    )


def _pta_config_from(pta_cfg: dict) -> PtaConfig:
    try:
        return PtaConfig(
            h=pta_cfg["h"],
            w=pta_cfg["w"],
            tau=pta_cfg["tau"],
            update_order=UpdateOrder(pta_cfg["update_order"]),
            anchor_mode=AnchorMode(pta_cfg["anchor_mode"]),
            score_mode=ScoreMode(pta_cfg["score_mode"]),
            decay_mode=DecayMode(pta_cfg["decay_mode"]),
        )
    except ValueError as exc:
        raise ValidationError(str(exc)) from exc


def _load_inputs(stream_cfg: dict, tau: float) -> tuple[TextAnchors, Stream]:
    """Anchors + stream from PTAE files when given, else synthesized."""
    a_path, s_path = stream_cfg["anchors"], stream_cfg["stream"]
    if (a_path is None) != (s_path is None):
        raise ValidationError("provide both --anchors and --stream, or neither")
    if a_path is not None:
        afile = ptae.read_embeddings(a_path)
        if afile.header.kind == ptae.KIND_STREAM:
            raise ValidationError(f"{a_path} is a stream container, not anchors")
        sfile = ptae.read_embeddings(s_path)
        if sfile.labels is None:
            raise ValidationError(f"{s_path} carries no labels (need kind 1)")
        anchors = TextAnchors(matrix=afile.matrix, temperature=tau)
        return anchors, Stream(embeddings=sfile.matrix, labels=sfile.labels)
    spec = _spec_from(stream_cfg)
    anchors = make_anchors(spec, temperature=tau)
    return anchors, sample_stream(spec, anchors)


def _method_factories(names_csv: str, anchors, pta_config, cache_config) -> dict:
    factories = {}
    for name in [m.strip() for m in names_csv.split(",") if m.strip()]:
        if name not in _METHODS:
            raise ValidationError(
                f"unknown method {name!r}; choose from {', '.join(_METHODS)}"
            )
        if name in factories:
            continue
        if name == "zero-shot":
            factories[name] = lambda a=anchors: ZeroShotAdapter(a)
        elif name == "pta":
            factories[name] = lambda a=anchors, c=pta_config: PtaAdapter(a, c)
        else:
            factories[name] = lambda a=anchors, c=cache_config: CacheAdapter(a, c)
    return factories


# -- subcommands ---------------------------------------------------------------


def cmd_gen(args) -> int:
    file_cfg = _load_config_file(args.config)
    stream_cfg = _merged("stream", file_cfg, vars(args))
    run_cfg = _merged("run", file_cfg, vars(args))
    spec = _spec_from(stream_cfg)
    anchors = make_anchors(spec)
    stream = sample_stream(spec, anchors)
    out = _out_dir(run_cfg)
    a_path = os.path.join(out, "anchors.ptae")
    s_path = os.path.join(out, "stream.ptae")
    ptae.write_embeddings(a_path, ptae.KIND_ANCHORS, anchors.matrix, normalized=True)
    ptae.write_embeddings(
        s_path, ptae.KIND_STREAM, stream.embeddings, stream.labels, normalized=True
    )
    print(
        f"generated C={spec.class_count} d={spec.dim} n={spec.stream_length} "
        f"shift={spec.shift_kind.value}@{spec.shift_magnitude} "
        f"seeds=({spec.anchor_seed},{spec.order_seed})"
    )
    print(f"anchors: {a_path}")
    print(f"stream:  {s_path}")
    return 0


def cmd_run(args) -> int:
    file_cfg = _load_config_file(args.config)
    stream_cfg = _merged("stream", file_cfg, vars(args))
    pta_cfg = _merged("pta", file_cfg, vars(args))
    cache_cfg = _merged("cache", file_cfg, vars(args))
    run_cfg = _merged("run", file_cfg, vars(args))
    pta_config = _pta_config_from(pta_cfg)
    cache_config = CacheConfig(
        capacity=cache_cfg["capacity"],
        alpha=cache_cfg["alpha"],
        sharpness=cache_cfg["sharpness"],
    )
    anchors, stream = _load_inputs(stream_cfg, pta_cfg["tau"])
    factories = _method_factories(
        run_cfg["methods"], anchors, pta_config, cache_config
    )
    echo = {"stream": stream_cfg, "pta": pta_cfg, "cache": cache_cfg, "run": run_cfg}
    report, records = run_stream(
        stream,
        factories,
        warmup_skip=run_cfg["warmup"],
        checkpoint_every=run_cfg["checkpoint_every"],
        config_echo=echo,
    )
    out = _out_dir(run_cfg)
    run_id = run_cfg["run_id"]

    records_path = os.path.join(out, f"{run_id}.records.jsonl")
    if os.path.exists(records_path):
        os.remove(records_path)
    ptae.append_results(
        records_path,
        (
            {
                "run_id": run_id,
                "method": name,
                "index": rec.index,
                "true_label": rec.true_label,
                "prediction": outcome.prediction,
                "correct": outcome.correct,
                "wall_nanos": outcome.wall_nanos,
            }
            for rec in records
            for name, outcome in rec.outcomes.items()
        ),
    )
    pred_path = os.path.join(out, f"{run_id}.predictions.csv")
    with open(pred_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "true_label", "method", "prediction"])
        for rec in records:
            for name, outcome in rec.outcomes.items():
                writer.writerow([rec.index, rec.true_label, name, outcome.prediction])
    report_path = os.path.join(out, f"{run_id}.report.json")
    with open(report_path, "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    curve_path = os.path.join(out, f"{run_id}.curve.csv")
    ptae.write_curve_csv(
        curve_path,
        (
            (ckpt, name, f"{acc:.6f}")
            for name, method_report in report.methods.items()
            for ckpt, acc in method_report.online_curve
        ),
    )
    for name, mr in report.methods.items():
        print(
            f"{name}: final={mr.final_accuracy:.2f}% "
            f"median_latency={mr.median_latency_ns / 1e3:.1f}us "
            f"throughput={mr.throughput_per_s:.0f}/s"
        )
    print(f"report: {report_path}")
    return 0


def cmd_sweep(args) -> int:
    file_cfg = _load_config_file(args.config)
    stream_cfg = _merged("stream", file_cfg, vars(args))
    pta_cfg = _merged("pta", file_cfg, vars(args))
    run_cfg = _merged("run", file_cfg, vars(args))
    pta_config = _pta_config_from(pta_cfg)
    anchors, stream = _load_inputs(stream_cfg, pta_cfg["tau"])
    try:
        values = [float(v) for v in args.values.split(",") if v.strip()]
    except ValueError as exc:
        raise ValidationError(f"bad sweep values {args.values!r}") from exc
    rows = sweep(
        anchors, stream, args.param, values, config=pta_config, jobs=run_cfg["jobs"]
    )
    out = _out_dir(run_cfg)
    path = os.path.join(out, f"{run_cfg['run_id']}.sweep.csv")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["param", "value", "final_accuracy", "status"])
        for row in rows:
            acc = "" if row.final_accuracy is None else f"{row.final_accuracy:.6f}"
            writer.writerow([row.param, row.value, acc, row.status])
            print(f"{row.param}={row.value}: {acc or 'skipped'} [{row.status}]")
    print(f"sweep table: {path}")
    return 0


def cmd_bench(args) -> int:
    file_cfg = _load_config_file(args.config)
    pta_cfg = _merged("pta", file_cfg, vars(args))
    cache_cfg = _merged("cache", file_cfg, vars(args))
    run_cfg = _merged("run", file_cfg, vars(args))
    pta_config = _pta_config_from(pta_cfg)
    cache_config = CacheConfig(
        capacity=cache_cfg["capacity"],
        alpha=cache_cfg["alpha"],
        sharpness=cache_cfg["sharpness"],
    )
    builders = {
        "zero-shot": lambda a: ZeroShotAdapter(a),
        "pta": lambda a, c=pta_config: PtaAdapter(a, c),
        "cache": lambda a, c=cache_config: CacheAdapter(a, c),
    }
    requested = [m.strip() for m in run_cfg["methods"].split(",") if m.strip()]
    for name in requested:
        if name not in builders:
            raise ValidationError(f"unknown method {name!r}")
    report = bench_throughput(
        {name: builders[name] for name in requested},
        class_count=args.classes,
        dim=args.dim,
        n_samples=args.n,
    )
    for name, res in report.methods.items():
        first = res.cost_curve[1]
        last = res.cost_curve[9]
        print(
            f"{name}: steady={res.throughput_steady_per_s:.0f}/s "
            f"decile1_median={first[2] / 1e3:.1f}us decile9_median={last[2] / 1e3:.1f}us"
        )
    if "pta" in report.methods and "zero-shot" in report.methods:
        print(f"pta/zero-shot throughput ratio: {report.ratio('pta', 'zero-shot'):.3f}")
    if "cache" in report.methods and "zero-shot" in report.methods:
        print(f"cache/zero-shot throughput ratio: {report.ratio('cache', 'zero-shot'):.3f}")
    out = _out_dir(run_cfg)
    path = os.path.join(out, f"{run_cfg['run_id']}.bench.json")
    payload = {
        "class_count": report.class_count,
        "dim": report.dim,
        "n_samples": report.n_samples,
        "machine": report.machine,
        "methods": {
            name: {
                "throughput_steady_per_s": res.throughput_steady_per_s,
                "cost_curve": res.cost_curve,
            }
            for name, res in report.methods.items()
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"bench report: {path}")
    return 0


# -- argument wiring -------------------------------------------------------------


def _add_stream_flags(p: argparse.ArgumentParser):
    p.add_argument("--classes", type=int)
    p.add_argument("--dim", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--shift", choices=[k.value for k in ShiftKind])
    p.add_argument("--magnitude", type=float)
    p.add_argument("--noise", type=float)
    p.add_argument("--label-dist", dest="label_dist", choices=[d.value for d in LabelDistribution])
    p.add_argument("--zipf-s", dest="zipf_s", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--order-seed", dest="order_seed", type=int)


def _add_pta_flags(p: argparse.ArgumentParser):
    p.add_argument("--h", type=float)
    p.add_argument("--w", type=float)
    p.add_argument("--tau", type=float)
    p.add_argument("--update-order", dest="update_order", choices=[o.value for o in UpdateOrder])
    p.add_argument("--anchor-mode", dest="anchor_mode", choices=[m.value for m in AnchorMode])
    p.add_argument("--score-mode", dest="score_mode", choices=[m.value for m in ScoreMode])
    p.add_argument("--decay-mode", dest="decay_mode", choices=[m.value for m in DecayMode])


def _add_cache_flags(p: argparse.ArgumentParser):
    p.add_argument("--cache-capacity", dest="capacity", type=int)
    p.add_argument("--cache-alpha", dest="alpha", type=float)
    p.add_argument("--cache-sharpness", dest="sharpness", type=float)


def _add_run_flags(p: argparse.ArgumentParser):
    p.add_argument("--methods")
    p.add_argument("--warmup", type=int)
    p.add_argument("--checkpoint-every", dest="checkpoint_every", type=int)
    p.add_argument("--run-id", dest="run_id")
    p.add_argument("--jobs", type=int)
    p.add_argument("--out")
    p.add_argument("--anchors")
    p.add_argument("--stream")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pta", description=__doc__)
    parser.add_argument("--config", help="INI config file; flags override it")
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("gen", help="synthesize anchors.ptae and stream.ptae")
    _add_stream_flags(p_gen)
    p_gen.add_argument("--out")

    p_run = sub.add_parser("run", help="evaluate methods over a stream")
    _add_stream_flags(p_run)
    _add_pta_flags(p_run)
    _add_cache_flags(p_run)
    _add_run_flags(p_run)

    p_sweep = sub.add_parser("sweep", help="grid one adapter parameter")
    p_sweep.add_argument("--param", required=True, choices=["h", "w"])
    p_sweep.add_argument("--values", required=True, help="comma-separated values")
    _add_stream_flags(p_sweep)
    _add_pta_flags(p_sweep)
    _add_run_flags(p_sweep)

    p_bench = sub.add_parser("bench", help="throughput at scale")
    p_bench.add_argument("--classes", type=int, default=1000)
    p_bench.add_argument("--dim", type=int, default=512)
    p_bench.add_argument("--n", type=int, default=5000)
    _add_pta_flags(p_bench)
    _add_cache_flags(p_bench)
    p_bench.add_argument("--methods")
    p_bench.add_argument("--run-id", dest="run_id")
    p_bench.add_argument("--out")

    for p in (p_gen, p_run, p_sweep, p_bench):
        p.add_argument("--config", dest="config", help=argparse.SUPPRESS)
    return parser


_COMMANDS = {"gen": cmd_gen, "run": cmd_run, "sweep": cmd_sweep, "bench": cmd_bench}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits on usage errors and --help
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except ValidationError as exc:
        print(f"pta: validation error: {exc}", file=sys.stderr)
        return 1
    except FormatError as exc:
        print(f"pta: file format error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"pta: i/o error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
