"""Command-line front end: reproducible runs with CSV and PNG artifacts.

Every command is deterministic given its flags and seeds, writes
RFC-4180-style CSV tables, and (unless --no-figures) renders matplotlib
figures next to them. Exit code 0 means all requested checks passed.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import reports
from .activations import ActivationTriple
from .constructor import ConstructionError, build_small_norm_network, verify_construction
from .datasets import CsvFormatError, sphere_onehot_dataset
from .experiments import (
    ConfigError,
    ExperimentConfig,
    resolve_dataset,
    sweep,
    train,
    init_network,
    InitScheme,
    _SCHEME_USES_SHORTCUT,
)
from .hessian import (
    DegenerateDirectionError,
    finite_difference_hessian,
    high_order_zero_hessian,
    spectrum,
    stationarity_order_probe,
    zero_point_hessian,
)
from .network import Dataset, loss, save_network, zero_network


class CliError(Exception):
    pass


def _parse_data(
    source: str, width: int, samples: int, flavour: str = "whitened"
) -> tuple[Dataset, int]:
    """Resolve --data into a Dataset plus the seed column value (-1 for files)."""
    if source.startswith("synthetic:"):
        try:
            seed = int(source.split(":", 1)[1])
        except ValueError:
            raise CliError(f"bad synthetic data source {source!r}; expected synthetic:<seed>")
        if flavour == "sphere":
            return sphere_onehot_dataset(width, samples, seed), seed
        from .datasets import whitened_synthetic_dataset

        return whitened_synthetic_dataset(width, samples, seed), seed
    path = Path(source)
    if not path.exists():
        raise CliError(f"data file not found: {source}")
    if flavour == "sphere":
        from .datasets import load_labeled_csv

        labels, feats = load_labeled_csv(path)
        classes = sorted(set(labels))
        if len(classes) != feats.shape[1]:
            raise CliError(
                f"construction data needs one class per feature dimension; "
                f"got {len(classes)} classes and {feats.shape[1]} features"
            )
        x = feats.T
        y = np.zeros((feats.shape[1], len(labels)))
        index = {c: i for i, c in enumerate(classes)}
        for j, lab in enumerate(labels):
            y[index[lab], j] = 1.0
        return Dataset(x, y), -1
    from .datasets import pca_whiten_csv

    return pca_whiten_csv(path, k=width), -1


def _acts(names: str) -> ActivationTriple:
    try:
        return ActivationTriple.from_names(names)
    except ValueError as e:
        raise CliError(str(e))


def _maybe_png(out: str | None, suffix: str = "") -> str | None:
    if out is None:
        return None
    p = Path(out)
    return str(p.with_name(p.stem + suffix + ".png"))


def cmd_spectrum(args) -> int:
    acts = _acts(args.acts)
    data, seed = _parse_data(args.data, args.width, args.samples)
    if data.d != args.width:
        raise CliError(f"data width {data.d} does not match --width {args.width}")
    n, R = args.n, args.depth
    net0 = zero_network(data.d, n, R, acts)
    loss0 = loss(net0, data)
    if n <= 2:
        h_analytic = zero_point_hessian(data, acts, n, R)
    else:
        h_analytic = high_order_zero_hessian(n, R, data.d)
    rep = spectrum(h_analytic, loss0)
    h_fd = finite_difference_hessian(net0, data)
    fd_diff = float(np.max(np.abs(h_analytic - h_fd)))
    print(f"cond_proxy={reports.fmt(rep.cond_proxy)} index={reports.fmt(rep.index)}")
    if rep.degenerate:
        print("degenerate spectrum: percentile eigenvalue is numerically zero")
    print(f"max |analytic - finite difference| = {fd_diff:.3e}")
    if args.out:
        reports.write_csv(
            args.out,
            reports.SPECTRUM_HEADER,
            [reports.spectrum_row(rep, n * R, n, R, data.d, seed)],
        )
        print(f"wrote {args.out}")
        if args.figures:
            from .plotting import save_spectrum_figure

            png = _maybe_png(args.out)
            save_spectrum_figure(rep, png)
            print(f"wrote {png}")
    return 0


def _probe_pass(slope: float, n: int) -> bool:
    if n <= 2:
        return abs(slope - n) <= 0.1
    return slope >= n - 0.1


def cmd_probe(args) -> int:
    acts = _acts(args.acts)
    data, seed = _parse_data(args.data, args.width, args.samples)
    n, R = args.n, args.depth
    slopes = []
    rows = []
    for k in range(args.directions):
        slope = stationarity_order_probe(data, acts, n, R, seed=args.seed + k)
        ok = _probe_pass(slope, n)
        slopes.append(slope)
        rows.append([n, R, data.d, args.seed + k, k, slope, n, ok])
        print(f"direction {k}: exponent {slope:.4f} -> {'pass' if ok else 'FAIL'}")
    passed = sum(_probe_pass(s, n) for s in slopes)
    overall = passed > len(slopes) / 2
    print(
        f"fitted exponent (median of {len(slopes)}): {float(np.median(slopes)):.4f}; "
        f"expected order {n}: {'pass' if overall else 'FAIL'}"
    )
    if args.out:
        reports.write_csv(args.out, reports.PROBE_HEADER, rows)
        print(f"wrote {args.out}")
    return 0 if overall else 1


def cmd_construct(args) -> int:
    data, _ = _parse_data(args.data, args.width, args.samples, flavour="sphere")
    record = build_small_norm_network(data, args.units)
    report = verify_construction(
        record.network, data, record.rho, record.delta, record.paths
    )
    for name, ok in report.checks.items():
        print(f"check {name}: {'pass' if ok else 'FAIL'}")
    print(
        f"rho={record.rho:.6g} delta={record.delta:.6g} units_used={record.units_used} "
        f"max_frobenius={report.max_frobenius:.6g} fit_error={report.fit_error:.3e}"
    )
    out = Path(args.out)
    json_path = out.with_suffix(".json")
    csv_path = out.with_suffix(".csv")
    save_network(record.network, json_path)
    reports.write_csv(csv_path, reports.CONSTRUCTION_HEADER, [reports.construction_row(report)])
    print(f"wrote {json_path}")
    print(f"wrote {csv_path}")
    if args.figures:
        from .plotting import save_construction_figure

        png = out.with_suffix(".png")
        save_construction_figure(record, png)
        print(f"wrote {png}")
    return 0 if report.passed else 1


def _single(config_value, fieldname):
    if len(config_value) != 1:
        raise CliError(
            f"train expects a single-valued config field {fieldname!r}, got {config_value}"
        )
    return config_value[0]


def cmd_train(args) -> int:
    config = ExperimentConfig.from_json(args.config)
    depth = _single(config.depths, "depths")
    scheme_name = _single(config.schemes, "schemes")
    lr = _single(config.learning_rates, "learning_rates")
    seed = _single(config.seeds, "seeds")
    data = resolve_dataset(config.dataset, config.width, config.samples)
    R = depth // config.n
    scheme = InitScheme(scheme_name, seed, config.perturbation_scale)
    net0 = init_network(
        config.width, config.n, R, scheme, config.activation_triple,
        _SCHEME_USES_SHORTCUT[scheme_name],
    )
    trace = train(net0, data, lr, config.epochs, config.snapshot_interval)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    trace_path = out_dir / "trace.csv"
    reports.write_csv(trace_path, reports.TRACE_HEADER, reports.trace_rows(trace))
    status = "diverged" if trace.diverged else "converged"
    print(
        f"depth={depth} scheme={scheme_name} lr={lr} seed={seed}: "
        f"final loss {trace.final_loss:.6e} after {trace.epochs[-1]} epochs ({status})"
    )
    print(f"wrote {trace_path}")
    if args.figures:
        from .plotting import save_trace_figure

        png = out_dir / "trace.png"
        save_trace_figure(trace, png, title=f"{scheme_name} depth {depth} lr {lr}")
        print(f"wrote {png}")
    return 0 if not trace.diverged else 1


def cmd_sweep(args) -> int:
    config = ExperimentConfig.from_json(args.config)
    result = sweep(config, keep_traces=args.traces)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    sweep_path = out_dir / "sweep.csv"
    reports.write_csv(sweep_path, reports.SWEEP_HEADER, reports.sweep_rows(result))
    print(f"{'depth':>6} {'scheme':>16} {'opt lr':>10} {'mean loss':>14} {'std':>12}")
    for s in result.summaries:
        print(
            f"{s.depth:>6} {s.scheme:>16} {s.optimal_lr:>10.4g} "
            f"{s.mean_final_loss:>14.6e} {s.std_final_loss:>12.4e}"
        )
    print(f"wrote {sweep_path}")
    if args.traces:
        trace_dir = out_dir / "traces"
        trace_dir.mkdir(exist_ok=True)
        for (depth, scheme_name, lr, seed), trace in result.traces.items():
            name = f"trace_depth{depth}_{scheme_name}_lr{lr:g}_seed{seed}.csv"
            reports.write_csv(trace_dir / name, reports.TRACE_HEADER, reports.trace_rows(trace))
        print(f"wrote {len(result.traces)} trace CSVs under {trace_dir}")
    if args.figures:
        from .plotting import save_sweep_figures

        loss_png = out_dir / "sweep_final_loss.png"
        cond_png = out_dir / "sweep_init_cond.png"
        save_sweep_figures(result, loss_png, cond_png)
        print(f"wrote {loss_png}")
        print(f"wrote {cond_png}")
    return 0


def cmd_verify_hessian(args) -> int:
    acts = _acts(args.acts)
    data, _ = _parse_data(args.data, args.width, args.samples)
    n, R = args.n, args.depth
    h_analytic = zero_point_hessian(data, acts, n, R)
    net0 = zero_network(data.d, n, R, acts)
    h_fd = finite_difference_hessian(net0, data)
    diff = float(np.max(np.abs(h_analytic - h_fd)))
    tol = 1e-5
    ok = diff <= tol
    print(f"max entrywise |analytic - finite difference| = {diff:.3e} "
          f"(tolerance {tol:.0e}): {'pass' if ok else 'FAIL'}")
    if args.out:
        reports.write_csv(args.out, reports.VERIFY_HEADER, [[n, R, data.d, diff, tol, ok]])
        print(f"wrote {args.out}")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="shortcutlab",
        description="Shortcut-network loss-surface toolkit: Hessian spectra, "
        "stationarity probes, exact-fit constructions, training sweeps.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, data_default="synthetic:0"):
        p.add_argument("--width", type=int, default=6, help="layer width d")
        p.add_argument("--data", default=data_default,
                       help="'synthetic:<seed>' or a CSV of 'label, feature...' rows")
        p.add_argument("--samples", type=int, default=None,
                       help="synthetic sample count (default 10 * width)")
        p.add_argument("--acts", default="identity,identity,identity",
                       help="pre,mid,post activation names")
        p.add_argument("--figures", action=argparse.BooleanOptionalAction, default=True,
                       help="render PNG figures next to CSV outputs")

    p = sub.add_parser("spectrum", help="zero-point Hessian spectrum report")
    p.add_argument("--n", type=int, required=True, help="shortcut depth (path length)")
    p.add_argument("--depth", type=int, default=1, help="number of residual units R")
    add_common(p)
    p.add_argument("--out", default=None, help="CSV output path")
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("probe", help="stationarity-order probe at the zero point")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--depth", type=int, default=2, help="number of residual units R")
    p.add_argument("--seed", type=int, default=0, help="direction seed")
    p.add_argument("--directions", type=int, default=1, help="number of probe directions")
    add_common(p)
    p.add_argument("--out", default=None, help="CSV output path")
    p.set_defaults(func=cmd_probe)

    p = sub.add_parser("construct", help="build and audit an exact-fit network")
    p.add_argument("--units", type=int, required=True, help="number of residual units R")
    p.add_argument("--out", default="construction", help="output prefix (JSON + CSV + PNG)")
    add_common(p)
    p.set_defaults(func=cmd_construct, samples_default=3)

    p = sub.add_parser("train", help="single training run from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", default=".", help="directory for trace.csv")
    p.add_argument("--figures", action=argparse.BooleanOptionalAction, default=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sweep", help="depth/scheme/lr/seed sweep from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", default=".", help="directory for sweep.csv")
    p.add_argument("--traces", action="store_true", help="also write per-run trace CSVs")
    p.add_argument("--figures", action=argparse.BooleanOptionalAction, default=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify-hessian", help="analytic vs finite-difference Hessian at zero")
    p.add_argument("--n", type=int, required=True, choices=(1, 2))
    p.add_argument("--depth", type=int, default=2, help="number of residual units R")
    add_common(p)
    p.add_argument("--out", default=None, help="CSV output path")
    p.set_defaults(func=cmd_verify_hessian)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if e.code is not None else 0
    if getattr(args, "samples", None) is None and hasattr(args, "samples"):
        args.samples = getattr(args, "samples_default", None) or 10 * args.width
    try:
        return args.func(args)
    except (CliError, ConfigError, ConstructionError, CsvFormatError,
            DegenerateDirectionError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except FileNotFoundError as e:
        print(f"error: file not found: {e.filename}", file=sys.stderr)
        return 1


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
