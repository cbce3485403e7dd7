"""CSV serialisation for every report the toolkit emits.

One tabular format: RFC-4180 style with a header row, '.' decimal
separator, and floats printed with 17 significant digits so values
round-trip and repeated runs are byte-identical.
"""

from __future__ import annotations

import csv

SPECTRUM_HEADER = [
    "depth", "n", "R", "d", "seed", "loss",
    "lambda_max", "lambda_p10", "cond_proxy", "index",
]
SWEEP_HEADER = [
    "depth", "n", "scheme", "lr", "seed", "final_loss",
    "diverged", "init_cond_proxy", "init_index",
]
TRACE_HEADER = ["epoch", "loss", "grad_norm", "avg_frob", "cond_proxy", "index"]
CONSTRUCTION_HEADER = ["m", "d", "rho", "R", "delta", "max_frobenius", "fit_error", "units_used"]
PROBE_HEADER = ["n", "R", "d", "seed", "direction", "slope", "expected", "passed"]
VERIFY_HEADER = ["n", "R", "d", "max_abs_diff", "tolerance", "passed"]


def fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return "%.17g" % value
    return str(value)


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])


def spectrum_row(report, depth: int, n: int, R: int, d: int, seed) -> list:
    return [
        depth, n, R, d, seed, report.loss_at_point,
        report.lambda_max, report.lambda_p10, report.cond_proxy, report.index,
    ]


def sweep_rows(result) -> list:
    return [
        [
            r.depth, r.n, r.scheme, r.lr, r.seed, r.final_loss,
            r.diverged, r.init_cond_proxy, r.init_index,
        ]
        for r in result.rows
    ]


def trace_rows(trace) -> list:
    snap = {epoch: rep for epoch, rep in trace.snapshots}
    rows = []
    for k, epoch in enumerate(trace.epochs):
        rep = snap.get(epoch)
        rows.append(
            [
                epoch,
                trace.losses[k],
                trace.grad_norms[k],
                trace.avg_frobenius[k],
                rep.cond_proxy if rep is not None else "",
                rep.index if rep is not None else "",
            ]
        )
    return rows


def construction_row(report) -> list:
    return [
        report.m, report.d, report.rho, report.R, report.delta,
        report.max_frobenius, report.fit_error, report.units_used,
    ]
