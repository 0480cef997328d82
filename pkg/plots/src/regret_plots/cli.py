"""Command-line entry point: render figures from a TOML spec or flags."""

from __future__ import annotations

import argparse
import sys

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .plotting import KINDS, PlotSpec, SchemaError, plot


def spec_from_toml(path: str) -> PlotSpec:
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    table = raw.get("plot")
    if table is None:
        raise ValueError(f"{path}: missing [plot] table")
    for key in ("kind", "csv", "out"):
        if key not in table:
            raise ValueError(f"{path}: missing plot.{key}")
    csv_paths = table["csv"]
    if isinstance(csv_paths, str):
        csv_paths = [csv_paths]
    return PlotSpec(
        csv_paths=tuple(csv_paths),
        kind=table["kind"],
        out_path=table["out"],
        labels=dict(table.get("labels", {})),
        exclude=tuple(table.get("exclude", ())),
        dpi=int(table.get("dpi", 150)),
        title=table.get("title"),
    )


def _parse_labels(pairs) -> dict[str, str]:
    labels = {}
    for pair in pairs or ():
        if "=" not in pair:
            raise ValueError(f"label {pair!r} must look like algorithm=Label")
        alg, label = pair.split("=", 1)
        labels[alg] = label
    return labels


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="sleeping-bandits-plot",
        description="Render figures from sleeping-bandit benchmark CSVs",
    )
    parser.add_argument("--spec", help="TOML plot spec (overrides the other flags)")
    parser.add_argument("--csv", action="append", help="input CSV (repeatable)")
    parser.add_argument("--kind", choices=KINDS)
    parser.add_argument("--out", help="output PNG path")
    parser.add_argument(
        "--label", action="append", help="algorithm=Label (repeatable)", default=None
    )
    parser.add_argument(
        "--exclude", action="append", help="algorithm to drop (repeatable)", default=None
    )
    parser.add_argument("--dpi", type=int, default=150)
    parser.add_argument("--title", default=None)
    args = parser.parse_args(argv)

    try:
        if args.spec:
            spec = spec_from_toml(args.spec)
        else:
            if not (args.csv and args.kind and args.out):
                parser.error("--csv, --kind and --out are required without --spec")
            spec = PlotSpec(
                csv_paths=tuple(args.csv),
                kind=args.kind,
                out_path=args.out,
                labels=_parse_labels(args.label),
                exclude=tuple(args.exclude or ()),
                dpi=args.dpi,
                title=args.title,
            )
        print(plot(spec))
        return 0
    except (SchemaError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
