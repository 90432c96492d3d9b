"""Command-line driver: generate, detect, bench, sweep, report.

Exit codes: 0 success, 1 usage/config error, 2 data error.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .chunk import load_stream
from .competitive import LearnConfig
from .detector import DetectorConfig, process_stream, summary_csv
from .evaluation import (
    GAMMA_GRID,
    TRACE_COLUMNS,
    AblationVariant,
    rows_to_csv,
    run_variant,
    sweep,
    trace_rows,
)
from .occ import DescriptorConfig
from .streamgen import IR_GRID, StreamSpec, build_stream

log = logging.getLogger("clusterdrift")

OUT_ENV = "CLUSTERDRIFT_OUT"
DEFAULT_OUT = "clusterdrift-out"


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


@dataclass
class RunConfig:
    seed: int
    out: Path
    learn: LearnConfig = field(default_factory=LearnConfig)
    descriptor: DescriptorConfig = field(default_factory=DescriptorConfig)
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    spec: StreamSpec | None = None
    manifest: Path | None = None
    axis: str | None = None
    values: tuple | None = None
    variants: tuple = tuple(AblationVariant)

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "learn": asdict(self.learn),
            "descriptor": asdict(self.descriptor),
            "detector": asdict(self.detector),
            "spec": self.spec.to_dict() if self.spec else None,
            "manifest": str(self.manifest) if self.manifest else None,
            "axis": self.axis,
            "values": list(self.values) if self.values else None,
            "variants": [AblationVariant(v).value for v in self.variants],
        }


# flag dest -> (config section, key)
_OVERRIDES = {
    "kappa0": ("learn", "kappa0"),
    "alpha": ("learn", "alpha"),
    "max_iters": ("learn", "max_iters"),
    "rival_rate": ("learn", "rival_rate"),
    "descriptor": ("descriptor", "kind"),
    "nu": ("descriptor", "nu"),
    "gamma": ("detector", "gamma"),
    "empty_policy": ("detector", "empty_policy"),
    "retrain": ("detector", "retrain_on_drift"),
    "normalizer": ("detector", "normalizer"),
}


def _load_json(path, what):
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read {what} {path}: {exc}") from exc


def _section(cls, d: dict):
    known = {f.name for f in fields(cls)}
    extra = set(d) - known
    if extra:
        raise UsageError(f"unknown {cls.__name__} keys: {sorted(extra)}")
    if cls is LearnConfig and isinstance(d.get("growth_cap"), float):
        d["growth_cap"] = int(d["growth_cap"])
    return cls(**d)


def build_run_config(args, bench_protocol: bool = False) -> RunConfig:
    """Merge the JSON config with flag overrides (flags win)."""
    cfg = _load_json(args.config, "config") if getattr(args, "config", None) else {}
    if not isinstance(cfg, dict):
        raise UsageError("config must be a JSON object")
    sections = {k: dict(cfg.get(k) or {}) for k in ("learn", "descriptor", "detector")}
    if bench_protocol:
        # labels are relative to the first base chunk, so score against a fixed model
        sections["detector"].setdefault("retrain_on_drift", False)
    for dest, (sec, key) in _OVERRIDES.items():
        v = getattr(args, dest, None)
        if v is not None:
            sections[sec][key] = v

    spec = None
    spec_src = getattr(args, "spec", None) or cfg.get("spec")
    if spec_src is not None:
        if isinstance(spec_src, str):
            if spec_src == cfg.get("spec") and not Path(spec_src).is_absolute():
                spec_src = Path(args.config).parent / spec_src
            spec_dict = _load_json(spec_src, "spec")
        else:
            spec_dict = dict(spec_src)
    else:
        spec_dict = None

    seed = getattr(args, "seed", None)
    if seed is None:
        seed = cfg.get("seed")
    if seed is None and spec_dict is not None:
        seed = spec_dict.get("seed")
    if seed is None:
        raise UsageError("a seed is required (--seed, config 'seed', or the spec's 'seed')")
    if spec_dict is not None:
        spec_dict["seed"] = int(seed)
        try:
            spec = StreamSpec.from_dict(spec_dict)
        except (KeyError, TypeError, ValueError) as exc:
            raise UsageError(f"invalid stream spec: {exc}") from exc

    manifest = getattr(args, "manifest", None) or cfg.get("manifest")
    out = getattr(args, "out", None) or cfg.get("out") or os.environ.get(OUT_ENV) or DEFAULT_OUT
    values = getattr(args, "values", None) or cfg.get("values")
    variants = getattr(args, "variants", None) or cfg.get("variants") or [v.value for v in AblationVariant]
    try:
        return RunConfig(
            seed=int(seed),
            out=Path(out),
            learn=_section(LearnConfig, sections["learn"]),
            descriptor=_section(DescriptorConfig, sections["descriptor"]),
            detector=_section(DetectorConfig, sections["detector"]),
            spec=spec,
            manifest=Path(manifest) if manifest else None,
            axis=getattr(args, "axis", None) or cfg.get("axis"),
            values=tuple(float(v) for v in values) if values else None,
            variants=tuple(_variant(v) for v in variants),
        )
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid configuration: {exc}") from exc


def _variant(name):
    for v in AblationVariant:
        if name in (v.value, v.name):
            return v
    raise UsageError(f"unknown variant {name!r}; choose from {[v.name for v in AblationVariant]}")


def _write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _stream_for(rc: RunConfig):
    """Chunks from the manifest if given, else generated from the spec."""
    if rc.manifest is not None:
        try:
            return load_stream(rc.manifest)
        except (OSError, ValueError, KeyError) as exc:
            raise DataError(f"cannot load stream {rc.manifest}: {exc}") from exc
    if rc.spec is not None:
        return build_stream(rc.spec).chunks
    raise UsageError("need --manifest or --spec")


# -- subcommands ------------------------------------------------------------

def cmd_generate(args) -> int:
    rc = build_run_config(args)
    if rc.spec is None:
        raise UsageError("generate needs --spec")
    stream = build_stream(rc.spec)
    manifest = stream.write(rc.out)
    _write(rc.out / "spec.json", json.dumps(rc.spec.to_dict(), indent=1) + "\n")
    print(f"wrote {len(stream.chunks)} chunks to {manifest}")
    return 0


def cmd_detect(args) -> int:
    rc = build_run_config(args)
    if rc.manifest is None:
        raise UsageError("detect needs --manifest")
    chunks = _stream_for(rc)
    result = process_stream(chunks, rc.learn, rc.descriptor, rc.detector)
    for r in result.reports:
        _write(rc.out / "reports" / f"chunk_{r.chunk_index:05d}.json", r.to_json() + "\n")
    _write(rc.out / "summary.csv", summary_csv(result.reports))
    _write(rc.out / "run.json", json.dumps({**rc.to_dict(), "promotions": result.promotions,
                                            "failures": result.failures}, indent=1) + "\n")
    n_drift = sum(r.drifted for r in result.reports)
    print(f"{len(result.reports)} chunks scored, {n_drift} drifted, {len(result.promotions)} retrains")
    return 0


def cmd_bench(args) -> int:
    rc = build_run_config(args, bench_protocol=True)
    chunks = _stream_for(rc)
    if any(c.drift_label is None for c in chunks[1:]):
        raise DataError("bench needs drift labels on every incoming chunk")
    rows = []
    for v in rc.variants:
        run = run_variant(v, chunks, rc.learn, rc.descriptor, rc.detector, rc.seed)
        rows.append({"axis": "variant", "value": "", "variant": v.value, **run.metrics})
        _write(rc.out / f"trace_{v.name}.csv", rows_to_csv(trace_rows(run), TRACE_COLUMNS))
    table = rows_to_csv(rows)
    _write(rc.out / "bench.csv", table)
    _write(rc.out / "run.json", json.dumps(rc.to_dict(), indent=1) + "\n")
    sys.stdout.write(table)
    return 0


def cmd_sweep(args) -> int:
    rc = build_run_config(args, bench_protocol=True)
    if rc.spec is None:
        raise UsageError("sweep needs --spec (streams are regenerated per grid point)")
    if rc.axis not in ("gamma", "ir"):
        raise UsageError("sweep needs --axis gamma|ir")
    values = rc.values or (GAMMA_GRID if rc.axis == "gamma" else IR_GRID)
    rows = sweep(rc.axis, values, rc.spec, rc.learn, rc.descriptor, rc.detector, rc.variants, rc.seed)
    table = rows_to_csv(rows)
    _write(rc.out / f"sweep_{rc.axis}.csv", table)
    _write(rc.out / "run.json", json.dumps(rc.to_dict(), indent=1) + "\n")
    sys.stdout.write(table)
    return 0


def _read_csv(path):
    try:
        with open(path, newline="") as fh:
            return list(csv.DictReader(fh))
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc


def cmd_report(args) -> int:
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError as exc:
        raise UsageError("report needs matplotlib (pip install 'artifact[plot]')") from exc
    plt.rcParams["svg.hashsalt"] = "clusterdrift"
    out = Path(args.out or os.environ.get(OUT_ENV) or DEFAULT_OUT)
    for path in args.csv:
        rows = _read_csv(path)
        if not rows:
            raise DataError(f"{path} has no rows")
        cols = rows[0].keys()
        fig, ax = plt.subplots(figsize=(6, 3.5))
        try:
            if "running_accuracy" in cols:
                ax.plot([int(r["chunk_index"]) for r in rows], [float(r["running_accuracy"]) for r in rows])
                ax.set_xlabel("chunk")
                ax.set_ylabel("running accuracy")
            elif {"axis", "value", "accuracy"} <= set(cols):
                for var in dict.fromkeys(r["variant"] for r in rows):
                    sel = [r for r in rows if r["variant"] == var]
                    xs = [float(r["value"]) if r["value"] else i for i, r in enumerate(sel)]
                    ax.plot(xs, [float(r["accuracy"]) for r in sel], marker="o", label=var)
                ax.set_xlabel(rows[0]["axis"])
                ax.set_ylabel("accuracy")
                ax.legend()
            elif "max_theta" in cols:
                ax.plot([int(r["chunk_index"]) for r in rows], [float(r["max_theta"]) for r in rows])
                ax.set_xlabel("chunk")
                ax.set_ylabel("max theta")
            else:
                raise DataError(f"{path}: unrecognized CSV layout")
        except (KeyError, ValueError) as exc:
            raise DataError(f"{path}: {exc}") from exc
        target = out / (Path(path).stem + ".svg")
        target.parent.mkdir(parents=True, exist_ok=True)
        fig.tight_layout()
        fig.savefig(target, format="svg", metadata={"Date": None})
        plt.close(fig)
        print(f"wrote {target}")
    return 0


# -- parser -----------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _common(p, needs_data=True):
    p.add_argument("--config", help="JSON run configuration; flags override its keys")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./{DEFAULT_OUT})")
    p.add_argument("--kappa0", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--max-iters", type=int, dest="max_iters")
    p.add_argument("--rival-rate", type=float, dest="rival_rate")
    p.add_argument("--descriptor", choices=["soft-ball", "kernel-svdd"])
    p.add_argument("--nu", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--empty-policy", choices=["ignore", "alarm"], dest="empty_policy")
    p.add_argument("--normalizer", choices=["standardize", "min-max", "identity"])
    p.add_argument("--retrain", action=argparse.BooleanOptionalAction, default=None,
                   help="promote drifted chunks to base and retrain")


def make_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="clusterdrift", description="Cluster-level drift detection for imbalanced streams.")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    g = sub.add_parser("generate", help="write a synthetic labeled stream from a spec file")
    _common(g)
    g.add_argument("--spec")

    d = sub.add_parser("detect", help="run detect-then-train over a manifest")
    _common(d)
    d.add_argument("--manifest")

    b = sub.add_parser("bench", help="run the ablation variants and emit a metric table")
    _common(b)
    b.add_argument("--spec")
    b.add_argument("--manifest")
    b.add_argument("--variants", nargs="+")

    s = sub.add_parser("sweep", help="gamma or imbalance-ratio sweep")
    _common(s)
    s.add_argument("--spec")
    s.add_argument("--axis", choices=["gamma", "ir"])
    s.add_argument("--values", nargs="+", type=float)
    s.add_argument("--variants", nargs="+")

    r = sub.add_parser("report", help="render SVG plots from result CSVs")
    r.add_argument("csv", nargs="+")
    r.add_argument("--out")
    return p


COMMANDS = {"generate": cmd_generate, "detect": cmd_detect, "bench": cmd_bench,
            "sweep": cmd_sweep, "report": cmd_report}


def run_cli(argv=None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError(parser.format_usage().strip())
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    logging.basicConfig(level=logging.DEBUG if args.verbose > 1 else
                        logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (DataError, OSError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2


def main():
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
