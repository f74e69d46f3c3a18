"""Command-line driver: ``tdtm simulate | compare | sweep | print-config``.

Exit codes: 0 success, 1 usage or configuration error, 2 I/O error (missing or
malformed model/dataset, unwritable output), 3 internal invariant violation
(protocol monitor, one-hot grant, deadlock).
"""

import argparse
import os
import sys
from dataclasses import replace
from typing import Optional

import numpy as np

from . import vcd
from .metrics import rows_to_csv
from .model import DimensionError, ModelFormatError, TmModel, read_dataset, read_model
from .simulator import (COTM_ARCH, COTM_IDEAL, DIGITAL, HAMMING, MODES, ConfigError, RunConfig,
                        SimulationResult, apply_overrides, check_compatible, default_mode,
                        dump_config, parse_config_text, records_rows, scaled_fine_unit, simulate)

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_INVARIANT = 0, 1, 2, 3
SWEEP_PARAMS = ("e", "tau", "tdc_resolution", "delta_meta", "arbiter", "K")


class InputError(Exception):
    """Unreadable or malformed input file (exit code 2)."""


class InvariantError(Exception):
    """The simulator detected a protocol, one-hot or liveness violation (exit code 3)."""


# -- argument handling ------------------------------------------------------------

def _common(p: argparse.ArgumentParser, data: bool = True) -> None:
    p.add_argument("--config", help="flat key = value config file (see print-config)")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="config override, repeatable (e.g. --set timing.e=6)")
    p.add_argument("--model", required=data, help="model JSON file")
    if data:
        p.add_argument("--data", required=True, help="dataset CSV (0/1 features, optional label)")
    p.add_argument("--mode", choices=MODES, help="classifier back end (default: by model variant)")
    p.add_argument("--arbiter", choices=("tba", "mesh"), help="winner-takes-all topology")
    p.add_argument("--seed", type=int, help="run seed")
    p.add_argument("--out", default=".", help="output directory (default: current directory)")
    p.add_argument("--vcd", action="store_true", help="also write VCD waveforms")


def build_parser() -> argparse.ArgumentParser:
    defaults = dump_config(RunConfig())
    parser = argparse.ArgumentParser(
        prog="tdtm", formatter_class=argparse.RawDescriptionHelpFormatter,
        description="Event-driven simulator of an asynchronous Tsetlin machine accelerator.",
        epilog="configuration keys and defaults:\n\n" + defaults)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one mode over a dataset")
    _common(p)

    p = sub.add_parser("compare", help="run several modes on the same samples")
    _common(p)
    p.add_argument("--modes", help="comma-separated modes (default: every mode the model supports)")

    p = sub.add_parser("sweep", help="repeat simulate over values of one parameter")
    _common(p)
    p.add_argument("--param", required=True, help=f"one of {', '.join(SWEEP_PARAMS)}")
    p.add_argument("--values", required=True, help="comma-separated values")

    p = sub.add_parser("print-config", help="print the effective configuration")
    _common(p, data=False)
    return parser


def _split_set(items) -> list[tuple[str, str]]:
    pairs = []
    for item in items:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        pairs.append((k, v))
    return pairs


def _read_text(path: str) -> str:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None


def resolve_config(args, model: Optional[TmModel] = None) -> RunConfig:
    pairs = []
    if args.config:
        pairs += parse_config_text(_read_text(args.config))
    pairs += _split_set(args.set)
    if getattr(args, "mode", None):
        pairs.append(("run.mode", args.mode))
    elif model is not None and not any(k.strip() == "run.mode" for k, _ in pairs):
        pairs.append(("run.mode", default_mode(model)))
    if getattr(args, "arbiter", None):
        pairs.append(("run.arbiter", args.arbiter))
    if getattr(args, "seed", None) is not None:
        pairs.append(("run.seed", str(args.seed)))
    return apply_overrides(RunConfig(), pairs)


def load_inputs(args):
    if not os.path.exists(args.model):
        raise InputError(f"model file not found: {args.model}")
    try:
        model = read_model(args.model)
    except ModelFormatError as exc:
        raise InputError(f"{args.model}: {exc}") from None
    except OSError as exc:
        raise InputError(f"cannot read {args.model}: {exc.strerror}") from None
    if not os.path.exists(args.data):
        raise InputError(f"dataset file not found: {args.data}")
    try:
        samples = read_dataset(args.data, model.num_features)
    except DimensionError as exc:
        raise InputError(f"{args.data}: {exc}") from None
    except OSError as exc:
        raise InputError(f"cannot read {args.data}: {exc.strerror}") from None
    if not samples:
        raise InputError(f"{args.data}: no samples")
    return model, samples


# -- output -------------------------------------------------------------------------

def _write(out_dir: str, name: str, text: str) -> str:
    path = os.path.join(out_dir, name)
    try:
        os.makedirs(out_dir, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise InputError(f"cannot write {path}: {exc.strerror}") from None
    return path


def _mean_latency(result: SimulationResult) -> str:
    lat = [r.grant_time - r.inject_time for r in result.records
           if r.grant_time is not None and r.inject_time is not None]
    return repr(float(np.mean(lat))) if lat else ""


def summary_row(result: SimulationResult) -> dict:
    row = result.report.row() if result.report else {"mode": result.config.mode,
                                                      "arbiter": result.config.arbiter}
    row["mean_latency_ps"] = _mean_latency(result)
    row["violations"] = len(result.violations)
    return row


def check_invariants(result: SimulationResult) -> None:
    problems = [f"t={v.time} ps {v.where}: {v.message}" for v in result.violations]
    problems += result.diagnostics
    if problems:
        raise InvariantError("; ".join(problems))


def _run(model, samples, cfg: RunConfig, out_dir: str, want_vcd: bool, vcd_name: str):
    try:
        result = simulate(model, samples, cfg)
    except ValueError as exc:   # DCDE sizing, kernel cell constraints
        raise ConfigError(str(exc)) from None
    if want_vcd:
        _write(out_dir, vcd_name, vcd.dumps(result.kernel))
    return result


# -- subcommands ----------------------------------------------------------------------

def cmd_simulate(args) -> int:
    model, samples = load_inputs(args)
    cfg = resolve_config(args, model)
    result = _run(model, samples, cfg, args.out, args.vcd, "trace.vcd")
    _write(args.out, "report.csv", rows_to_csv(records_rows(result)))
    _write(args.out, "summary.csv", rows_to_csv([summary_row(result)]))
    text = result.report.text() if result.report else "no completed inferences\n"
    _write(args.out, "summary.txt", text)
    sys.stdout.write(text)
    check_invariants(result)
    return EXIT_OK


def _compatible_modes(model: TmModel) -> list[str]:
    if model.is_multiclass:
        return [DIGITAL, HAMMING]
    return [DIGITAL, COTM_IDEAL, COTM_ARCH]


def _table(rows, keys) -> str:
    cells = [[str(r.get(k, "")) for k in keys] for r in rows]
    widths = [max(len(k), *(len(c[i]) for c in cells)) for i, k in enumerate(keys)]
    out = ["  ".join(k.ljust(w) for k, w in zip(keys, widths))]
    out += ["  ".join(c.ljust(w) for c, w in zip(row, widths)) for row in cells]
    return "\n".join(out) + "\n"


TABLE_KEYS = ("mode", "arbiter", "agreement_rate", "f_infer_hz", "throughput_gops",
              "meta_events", "transitions_total", "mean_latency_ps")


def cmd_compare(args) -> int:
    model, samples = load_inputs(args)
    modes = [m.strip() for m in args.modes.split(",") if m.strip()] if args.modes else _compatible_modes(model)
    if len(modes) < 2:
        raise ConfigError("compare needs at least two modes")
    base = resolve_config(args, model)
    rows, per_sample, failures = [], [], []
    for mode in modes:
        cfg = apply_overrides(base, [("run.mode", mode)])
        check_compatible(model, mode)
        result = _run(model, samples, cfg, args.out, args.vcd, f"trace_{mode}.vcd")
        rows.append(summary_row(result))
        per_sample += records_rows(result)
        try:
            check_invariants(result)
        except InvariantError as exc:
            failures.append(f"{mode}: {exc}")
    _write(args.out, "compare.csv", rows_to_csv(rows))
    _write(args.out, "report.csv", rows_to_csv(per_sample))
    text = _table(rows, TABLE_KEYS)
    _write(args.out, "compare.txt", text)
    sys.stdout.write(text)
    if failures:
        raise InvariantError(" | ".join(failures))
    return EXIT_OK


def sweep_point(model: TmModel, cfg: RunConfig, param: str, raw: str):
    """Model and config for one sweep value."""
    try:
        if param == "e":
            return model, replace(cfg, timing=scaled_fine_unit(cfg.timing, int(raw)))
        if param == "tau":
            return model, apply_overrides(cfg, [("timing.tau", raw)])
        if param == "tdc_resolution":
            return model, apply_overrides(cfg, [("timing.tdc_resolution", raw)])
        if param == "delta_meta":
            return model, apply_overrides(cfg, [("arbiter.delta_meta", raw)])
        if param == "arbiter":
            return model, apply_overrides(cfg, [("run.arbiter", raw)])
        if param == "K":
            return model.restrict_classes(int(raw)), cfg
    except (ValueError, DimensionError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"sweep {param}={raw}: {exc}") from None
    raise ConfigError(f"unknown sweep parameter {param!r}; expected one of {', '.join(SWEEP_PARAMS)}")


def cmd_sweep(args) -> int:
    if args.param not in SWEEP_PARAMS:
        raise ConfigError(f"unknown sweep parameter {args.param!r}; expected one of {', '.join(SWEEP_PARAMS)}")
    values = [v.strip() for v in args.values.split(",") if v.strip()]
    if not values:
        raise ConfigError("sweep needs at least one value")
    model, samples = load_inputs(args)
    base = resolve_config(args, model)
    rows, failures = [], []
    for raw in values:
        m, cfg = sweep_point(model, base, args.param, raw)
        result = _run(m, samples, cfg, args.out, args.vcd, f"trace_{args.param}_{raw}.vcd")
        row = {"param": args.param, "value": raw}
        row.update(summary_row(result))
        rows.append(row)
        try:
            check_invariants(result)
        except InvariantError as exc:
            failures.append(f"{args.param}={raw}: {exc}")
    _write(args.out, "sweep.csv", rows_to_csv(rows))
    sys.stdout.write(_table(rows, ("param", "value") + TABLE_KEYS))
    if failures:
        raise InvariantError(" | ".join(failures))
    return EXIT_OK


def cmd_print_config(args) -> int:
    model = None
    if args.model:
        if not os.path.exists(args.model):
            raise InputError(f"model file not found: {args.model}")
        try:
            model = read_model(args.model)
        except ModelFormatError as exc:
            raise InputError(f"{args.model}: {exc}") from None
    sys.stdout.write(dump_config(resolve_config(args, model)))
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "compare": cmd_compare, "sweep": cmd_sweep,
            "print-config": cmd_print_config}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"tdtm: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InputError as exc:
        print(f"tdtm: {exc}", file=sys.stderr)
        return EXIT_IO
    except InvariantError as exc:
        print(f"tdtm: invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
