"""Command-line entry point: ``readmit <command> [options]``.

Exit status is 0 on success, 1 when a stage fails and 2 for usage or
configuration errors (including a missing input file).
"""
from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
from pathlib import Path

from . import __version__, kvfile, pipeline, synthetic
from .config import ConfigError, PipelineConfig

EXIT_OK, EXIT_STAGE, EXIT_USAGE = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse exits with 2 already; keep the message short
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"readmit: error: {message}\n")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="INI file merged over the bundled defaults")
    p.add_argument("--out", type=Path, help="output directory (overrides output.directory)")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE",
                   help="override one configuration value; may be repeated")
    p.add_argument("--input", help="input CSV path or 'synthetic'")
    p.add_argument("--models", help="comma-separated model families to train")
    p.add_argument("--paper-order", action="store_true",
                   help="balance the whole cohort before splitting (test rows may be resampled)")
    p.add_argument("--debug", action="store_true", help="write the row access log")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="readmit", description="Hospital readmission risk pipeline.")
    parser.add_argument("--version", action="version", version=f"readmit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in pipeline.STAGES:
        _common(sub.add_parser(name, help=f"run the {name} stage"))
    _common(sub.add_parser("run", help="run every enabled stage"))
    rep = sub.add_parser("report", help="print result tables from an output directory")
    _common(rep)
    rep.add_argument("--format", choices=("text", "csv"), default="text")
    syn = sub.add_parser("synth", help="write a synthetic encounter CSV")
    syn.add_argument("path", type=Path)
    syn.add_argument("--patients", type=int, default=3000)
    syn.add_argument("--seed", type=int, default=7)
    return parser


def _load_config(args) -> PipelineConfig:
    overrides = list(args.overrides)
    if args.input:
        overrides.append(f"data.input={args.input}")
    if args.models:
        overrides.append(f"models.families={args.models}")
    if args.paper_order:
        overrides.append("preprocess.paper_order=true")
    if args.debug:
        overrides.append("output.debug=true")
    if args.out:
        overrides.append(f"output.directory={args.out.resolve()}")
    return PipelineConfig.load(args.config, overrides)


def _table(rows: list[dict], cols: list[str]) -> str:
    def fmt(v):
        try:
            return f"{float(v):.4f}" if "." in v or "e" in v else v
        except ValueError:
            return v
    cells = [[fmt(r.get(c, "")) for c in cols] for r in rows]
    widths = [max([len(c)] + [len(row[i]) for row in cells]) for i, c in enumerate(cols)]
    line = lambda vals: "  ".join(v.ljust(w) for v, w in zip(vals, widths))
    return "\n".join([line(cols), line(["-" * w for w in widths])] + [line(r) for r in cells])


def report(out: Path, fmt: str = "text") -> str:
    """Render the model, tuning and ensemble tables found in ``out``."""
    sections = []
    for fname, title, key in ((pipeline.TABLE3, "Test metrics, default hyperparameters", "family"),
                              (pipeline.TABLE4, "Test metrics, GA-tuned hyperparameters", "family"),
                              (pipeline.ENSEMBLE_CSV, "Greedy ensemble", "model")):
        path = out / fname
        if not path.exists():
            sections.append((title, None, None))
            continue
        rows = pipeline.read_csv(path)
        cols = list(rows[0].keys()) if rows else [key]
        sections.append((title, rows, cols))
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["table", "name", "field", "value"])
        for title, rows, cols in sections:
            for r in rows or []:
                name = r.get("family") or f"{r.get('model')}:{r.get('split')}"
                for c in cols:
                    if c not in ("family", "model", "split"):
                        w.writerow([title, name, c, r[c]])
        return buf.getvalue()
    parts = []
    feats = out / pipeline.FEATURES
    if feats.exists():
        info = kvfile.read(feats, "features")["features"]
        used = info["used"]
        shown = ", ".join(used) if len(used) <= 20 else ", ".join(used[:20]) + ", ..."
        note = " (empty selection, all columns kept)" if info.get("fallback_to_all") else ""
        parts.append(f"Features used ({info['use']}, {len(used)}){note}: {shown}")
    for title, rows, cols in sections:
        if rows is None:
            parts.append(f"{title}: not available (stage not run)")
        else:
            show = [c for c in cols if c not in ("genes",)]
            parts.append(f"{title}\n{_table(rows, show)}")
    plots = sorted(p.name for p in out.glob("fig*.csv"))
    if plots:
        parts.append("Plot data: " + ", ".join(plots))
    return "\n\n".join(parts) + "\n"


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    if args.command == "synth":
        synthetic.write(args.path, args.patients, args.seed)
        print(f"wrote {args.path}")
        return EXIT_OK
    try:
        cfg = _load_config(args)
    except ConfigError as exc:
        print(f"readmit: configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.command == "report":
        out = cfg.output_dir
        if not out.is_dir():
            print(f"readmit: no output directory at {out}", file=sys.stderr)
            return EXIT_USAGE
        sys.stdout.write(report(out, args.format))
        return EXIT_OK
    try:
        if args.command == "run":
            pipeline.run_all(cfg)
        else:
            pipeline.run_stages(cfg, [args.command])
    except pipeline.StageError as exc:
        print(f"readmit: {exc}", file=sys.stderr)
        return EXIT_STAGE
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
