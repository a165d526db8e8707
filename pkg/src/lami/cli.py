"""Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 data error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .confidence import DEFAULT_SERVICES, parse_services, region_model, service_report
from .errors import ConfigError, DataError
from .harness import experiments as ex
from .harness.campus import clustered_campus
from .patching import assign_regions, format_provenance, load_patch_config, patch_region
from .traces import DEFAULT_GMM, GmmSpec, format_trace, generate_synthetic_trace, parse_trace, summarize
from .vae import VaeHyper, format_loss_trace, sample_vae, train_vae

log = logging.getLogger("lami")

EXIT_CONFIG = 2
EXIT_DATA = 3


def _load_config(args) -> dict:
    if not args.config:
        return {}
    try:
        return json.loads(Path(args.config).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {args.config} is not valid JSON: {exc}") from exc


def _read_text(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc


def _read_rtt(path: str) -> np.ndarray:
    """RTT column of a trace CSV or of any CSV with an ``rtt_ms`` column."""
    text = _read_text(path)
    first = text.splitlines()[0] if text else ""
    if first.strip().startswith("timestamp_ms"):
        return np.array([s.rtt_ms for s in parse_trace(text)])
    reader = csv.DictReader(io.StringIO(text))
    if not reader.fieldnames or "rtt_ms" not in reader.fieldnames:
        raise DataError(f"{path} has no rtt_ms column")
    try:
        return np.array([float(row["rtt_ms"]) for row in reader])
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from exc


def _write(out: Path, name: str, text: str) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    path.write_text(text, encoding="utf-8")
    return path


def _hyper(cfg: dict, seed: int) -> VaeHyper:
    try:
        return VaeHyper(**{**cfg.get("vae", {}), "seed": seed})
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad vae config: {exc}") from exc


def cmd_gen(args) -> None:
    cfg = _load_config(args)
    out = Path(args.out or ".")
    if "campus" in cfg:
        try:
            campus = clustered_campus(**cfg["campus"])
        except TypeError as exc:
            raise ConfigError(f"bad campus config: {exc}") from exc
        samples = campus.observe_samples(np.random.default_rng(args.seed))
        _write(out, "grid.json", json.dumps({"grid": campus.grid.to_dict(), "patch": {}}, indent=2))
    else:
        spec = GmmSpec.from_dict(cfg["gmm"]) if "gmm" in cfg else DEFAULT_GMM
        samples = generate_synthetic_trace(spec, int(cfg.get("n", 1000)), args.seed)
    path = _write(out, "trace.csv", format_trace(samples))
    print(f"wrote {len(samples)} samples to {path}")


def cmd_stats(args) -> None:
    s = summarize(parse_trace(_read_text(args.trace)))
    doc = {"count": s.count, "mean_ms": s.mean_ms, "std_ms": s.std_ms, "median_ms": s.median_ms}
    text = json.dumps(doc, indent=2)
    if args.out:
        _write(Path(args.out), "summary.json", text + "\n")
    print(text)


def cmd_patch(args) -> None:
    if not args.config:
        raise ConfigError("patch needs --config with a grid section")
    grid, pcfg = load_patch_config(_read_text(args.config))
    region_map = assign_regions(parse_trace(_read_text(args.trace)), grid)
    cell = tuple(args.cell)
    if cell not in region_map:
        raise ConfigError(f"cell {cell} is outside the {region_map.shape} grid")
    result = patch_region(region_map, cell, pcfg, args.seed)
    out = Path(args.out or ".")
    _write(out, "provenance.csv", format_provenance(result.log))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["rtt_ms", "donor_row", "donor_col"])
    for v, (r, c) in zip(result.samples, result.donors):
        w.writerow([repr(float(v)), "" if r < 0 else int(r), "" if c < 0 else int(c)])
    _write(out, "patched.csv", buf.getvalue())
    print(f"cell {cell}: {region_map.count(cell)} -> {result.samples.size} samples "
          f"in {len(result.log)} round(s); dropped {region_map.dropped} out-of-box samples")


def cmd_synth(args) -> None:
    cfg = _load_config(args)
    rtt = _read_rtt(args.samples)
    hyper = _hyper(cfg, args.seed)
    model, trace = train_vae(rtt, hyper)
    draws = sample_vae(model, args.n, args.seed + 1)
    out = Path(args.out or ".")
    _write(out, "model.json", model.to_json())
    _write(out, "loss.csv", format_loss_trace(trace))
    buf = io.StringIO()
    buf.write("rtt_ms\n")
    for v in np.concatenate((rtt, draws)):
        buf.write(f"{float(v)!r}\n")
    _write(out, "synth.csv", buf.getvalue())
    print(f"trained on {rtt.size} samples, final loss {trace[-1]:.4f}, generated {args.n}")


def cmd_model(args) -> None:
    rtt = _read_rtt(args.samples)
    services = (parse_services(_read_text(args.services)) if args.services
                else list(DEFAULT_SERVICES))
    cdf, kde = region_model(rtt)
    report = service_report(cdf, services)
    out = Path(args.out or ".")
    _write(out, "ecdf.json", cdf.to_json())
    _write(out, "kde.json", kde.to_json())
    _write(out, "report.csv", report.to_csv())
    _write(out, "report.json", report.to_json())
    sys.stdout.write(report.to_csv())


def cmd_eval(args) -> None:
    cfg = _load_config(args)
    seeds = [args.seed + i for i in range(args.seeds)]
    out = Path(args.out or ".")
    hyper = _hyper(cfg, 0)
    if args.figure == "fig4c":
        counts = cfg.get("counts", [10, 50, 100, 500, 1000, 5000])
        result = ex.experiment_sample_count(DEFAULT_GMM, counts, seeds)
    elif args.figure == "fig6":
        result = ex.experiment_vae_vs_interpolation(
            DEFAULT_GMM, cfg.get("n_observed", [25, 10]), seeds, hyper)
    elif args.figure == "fig7":
        campus = clustered_campus(**cfg.get("campus", {}))
        result = ex.experiment_recovery(campus, seeds=seeds, hyper=hyper,
                                        methods=cfg.get("methods", ex.METHODS))
        _write(out, "fig7_diff.csv", result.curves_csv())
    else:
        campus = clustered_campus(**cfg.get("campus", {}))
        radii = cfg.get("radii_m", [125.0, 500.0, 1000.0, 1500.0, 2500.0])
        result = ex.experiment_searchable_area(campus, radii, seeds=seeds, hyper=hyper)
    for name in sorted(result.series):
        path = _write(out, f"{result.label}_{name}.csv", result.to_csv(name))
        print(f"{name}: mean KR {np.round(result.means(name), 4).tolist()} -> {path}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="base random seed")
    common.add_argument("--config", help="JSON configuration file")
    common.add_argument("--out", help="output directory (default: current directory)")

    parser = argparse.ArgumentParser(prog="lami", description="Latency model inpainting")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", parents=[common], help="generate a synthetic trace or campus")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("stats", parents=[common], help="summarise a trace")
    p.add_argument("trace")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("patch", parents=[common], help="patch one region of a trace")
    p.add_argument("trace")
    p.add_argument("--cell", type=int, nargs=2, required=True, metavar=("ROW", "COL"))
    p.set_defaults(func=cmd_patch)

    p = sub.add_parser("synth", parents=[common], help="train a VAE and generate samples")
    p.add_argument("samples")
    p.add_argument("--n", type=int, default=10_000, help="number of samples to generate")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("model", parents=[common], help="ecdf, KDE and confidence report")
    p.add_argument("samples")
    p.add_argument("--services", help="JSON service list")
    p.set_defaults(func=cmd_model)

    p = sub.add_parser("eval", parents=[common], help="run a desk-scale experiment")
    p.add_argument("figure", choices=["fig4c", "fig6", "fig7", "fig8"])
    p.add_argument("--seeds", type=int, default=10, help="number of seeds")
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return 0


if __name__ == "__main__":
    sys.exit(main())
