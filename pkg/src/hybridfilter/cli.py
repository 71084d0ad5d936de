"""Command-line entry point: ``hybridfilter {generate-data,train,euler-run,filter,evaluate}``.

Configuration files are JSON objects; validation errors report the offending line.
``HYBRIDFILTER_OUT`` overrides the default output directory and ``HYBRIDFILTER_THREADS``
caps BLAS threads (set before numpy loads).
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import re
import sys
from pathlib import Path

if "HYBRIDFILTER_THREADS" in os.environ:
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(var, os.environ["HYBRIDFILTER_THREADS"])

log = logging.getLogger("hybridfilter")


class ConfigError(ValueError):
    pass


def _key_line(text: str, key: str) -> int:
    for i, line in enumerate(text.splitlines(), 1):
        if re.search(r'"%s"\s*:' % re.escape(key), line):
            return i
    return 1


def load_config(path, schema: dict[str, type | tuple]) -> dict:
    """Parse a JSON config and check keys/types against ``schema``."""
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}:1: expected a JSON object")
    for key, value in data.items():
        if key not in schema:
            raise ConfigError(f"{path}:{_key_line(text, key)}: unknown key {key!r}")
        want = schema[key]
        ok = isinstance(value, want) and not (isinstance(value, bool) and bool not in
                                              (want if isinstance(want, tuple) else (want,)))
        if value is not None and not ok:
            raise ConfigError(f"{path}:{_key_line(text, key)}: {key!r} has the wrong type")
    return data


RUN_SCHEMA = {"ic_id": str, "p": int, "N": int, "T_f": (int, float), "tvb_M": (int, float),
              "cfl": (int, float), "seed": int}


def out_dir(args) -> Path:
    base = args.out or os.environ.get("HYBRIDFILTER_OUT") or "hybridfilter_out"
    p = Path(base)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _preset(args):
    from .experiments import get_preset
    return get_preset(args.preset, train_samples=getattr(args, "samples", None),
                      train_max_epochs=getattr(args, "epochs", None),
                      validation_runs_per_ic=getattr(args, "val_runs", None))


def cmd_generate_data(args) -> int:
    from .experiments import generate_data
    digests = generate_data(out_dir(args), _preset(args), args.seed)
    print(json.dumps(digests, sort_keys=True))
    return 0


def cmd_train(args) -> int:
    from .experiments import train_model
    out = out_dir(args)
    data = Path(args.data) if args.data else out
    if not (data / "train.bin").exists():
        raise SystemExit(f"no corpus found in {data}; run generate-data first")
    path = train_model(data, out, _preset(args), args.seed)
    print(path)
    return 0


def cmd_euler_run(args) -> int:
    from .experiments import RunDescriptor, run_euler, save_run
    if args.config:
        cfg = load_config(args.config, RUN_SCHEMA)
        if "ic_id" not in cfg or "p" not in cfg:
            raise ConfigError(f"{args.config}:1: 'ic_id' and 'p' are required")
    else:
        cfg = {"ic_id": args.ic, "p": args.degree, "N": args.cells, "T_f": args.t_final,
               "tvb_M": args.tvb_M, "seed": args.seed}
    desc = RunDescriptor(**{k: v for k, v in cfg.items() if v is not None})
    fields = run_euler(desc)
    out = out_dir(args)
    stem = f"{desc.ic_id}_p{desc.p}"
    save_run(fields, out, stem)
    (out / f"{stem}.json").write_text(json.dumps(vars(desc.resolved()), sort_keys=True))
    print(out / f"{stem}.dgf")
    return 0


def cmd_filter(args) -> int:
    from .experiments import load_optional_model, load_run
    from .hybrid import HybridConfig, hybrid_filter_euler
    fields = load_run(Path(args.fields))
    model = load_optional_model(args.model)
    if model is None:
        log.warning("no model given; the learned filter stage is skipped")
    res = hybrid_filter_euler(fields, HybridConfig(fields.degree, model=model))
    out = out_dir(args)
    stem = Path(args.fields).stem
    for var in ("rho", "u", "p", "S"):
        res[var].to_csv(out / f"{stem}_{var}_filtered.csv")
    print(json.dumps([w.to_dict() for w in res["rho"].windows]))
    return 0


def cmd_evaluate(args) -> int:
    from . import experiments as ex
    out = out_dir(args)
    preset = _preset(args)
    model = ex.load_optional_model(args.model)
    suites = args.suite or ["tophat", "final", "dataset"]
    if "tophat" in suites:
        rows = ex.tophat_errors(model, args.windows or preset.tophat_eval_windows,
                                args.seed + 10_000)
        ex.write_csv(out / "tophat_errors.csv", rows)
        ex.write_csv(out / "tophat_summary.csv", ex.summarize(rows, ("method",)))
    if "final" in suites:
        rows = ex.final_time_rows(model, preset)
        ex.write_csv(out / "final_time_errors.csv", rows)
    if "dataset" in suites:
        rows = ex.evaluate_euler(model, preset, args.seed)
        ex.write_csv(out / "dataset_errors.csv", rows)
        ex.write_csv(out / "dataset_summary.csv",
                     ex.summarize(rows, ("problem", "variable", "method")))
    ex.write_csv(out / "paper_values.csv",
                 [{"problem": k[0], "variable": k[1], "quantity": k[2], "method": m, "value": v}
                  for k, d in ex.PAPER_VALUES.items() for m, v in d.items()])
    print(out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hybridfilter", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--preset", choices=("paper", "desk"), default="desk")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", help="output directory")
        return p

    g = common(sub.add_parser("generate-data", help="build training/validation corpora"))
    g.add_argument("--samples", type=int, help="override the number of top-hat runs")
    g.add_argument("--val-runs", type=int, help="override validation runs per initial condition")
    g.set_defaults(func=cmd_generate_data)

    t = common(sub.add_parser("train", help="train the learned filter"))
    t.add_argument("--data", help="corpus directory (default: --out)")
    t.add_argument("--epochs", type=int, help="override the epoch budget")
    t.set_defaults(func=cmd_train)

    e = common(sub.add_parser("euler-run", help="run an Euler shock tube"))
    e.add_argument("--config", help="JSON run descriptor")
    e.add_argument("--ic", choices=("sod", "lax", "shu_osher"), default="sod")
    e.add_argument("--degree", type=int, default=2)
    e.add_argument("--cells", type=int, default=128)
    e.add_argument("--t-final", type=float)
    e.add_argument("--tvb-M", type=float)
    e.set_defaults(func=cmd_euler_run)

    f = common(sub.add_parser("filter", help="hybrid-filter a stored Euler run"))
    f.add_argument("fields", help="field dump written by euler-run")
    f.add_argument("--model", help="model file; omitted means SIAC-only")
    f.set_defaults(func=cmd_filter)

    v = common(sub.add_parser("evaluate", help="error tables against exact/reference data"))
    v.add_argument("--model", help="model file; omitted means SIAC-only")
    v.add_argument("--suite", action="append", choices=("tophat", "final", "dataset"))
    v.add_argument("--windows", type=int, help="held-out top-hat window count")
    v.set_defaults(func=cmd_evaluate)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
