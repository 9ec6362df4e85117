"""CSV and SVG emission, plus the matrix file format with a `rows,cols` header.

All writers format floats with ``repr`` so files are byte-stable for identical
inputs and round-trip exactly.
"""

import os

import numpy as np

__all__ = [
    "write_matrix_csv", "read_matrix_csv", "write_vector_csv", "read_vector_csv",
    "write_results_csv", "write_aggregate_csv", "write_surface_csv",
    "write_convergence_csv", "write_trace_csv", "write_certificates_csv",
    "write_error_chart_svg", "emit_report",
]


def _fmt(value):
    return repr(float(value))


def write_matrix_csv(path, matrix):
    """Write a 2D array as CSV whose first line is `rows,cols`."""
    m = np.atleast_2d(np.asarray(matrix, dtype=float))
    lines = [f"{m.shape[0]},{m.shape[1]}"]
    lines.extend(",".join(_fmt(v) for v in row) for row in m)
    with open(path, "w", encoding="ascii", newline="\n") as handle:
        handle.write("\n".join(lines) + "\n")


def read_matrix_csv(path):
    with open(path, "r", encoding="ascii") as handle:
        header = handle.readline().strip()
        try:
            rows, cols = (int(part) for part in header.split(","))
        except ValueError as exc:
            raise ValueError(f"{path}: expected a `rows,cols` header, got {header!r}") from exc
        body = [line.strip() for line in handle if line.strip()]
    if len(body) != rows:
        raise ValueError(f"{path}: header promises {rows} rows, found {len(body)}")
    matrix = np.array([[float(v) for v in line.split(",")] for line in body], dtype=float)
    if matrix.size == 0:
        matrix = matrix.reshape(rows, cols)
    if matrix.shape != (rows, cols):
        raise ValueError(f"{path}: header promises shape ({rows}, {cols}), found {matrix.shape}")
    return matrix


def write_vector_csv(path, vector):
    write_matrix_csv(path, np.asarray(vector, dtype=float).reshape(-1, 1))


def read_vector_csv(path):
    matrix = read_matrix_csv(path)
    if matrix.shape[1] != 1:
        raise ValueError(f"{path}: expected a single-column vector, got {matrix.shape[1]} columns")
    return matrix[:, 0]


def _write_lines(path, lines):
    with open(path, "w", encoding="ascii", newline="\n") as handle:
        handle.write("\n".join(lines) + "\n")


def write_results_csv(path, report):
    lines = ["method,prior_kind,n_t,alpha,repetition,rel_error"]
    lines.extend(
        f"{r.method},{report.prior_kind},{r.n_t},{_fmt(r.alpha)},{r.repetition},{_fmt(r.rel_error)}"
        for r in report.records)
    _write_lines(path, lines)


def write_aggregate_csv(path, report):
    lines = ["method,prior_kind,n_t,alpha,mean_rel_error,std_rel_error,repetitions"]
    lines.extend(
        f"{a.method},{report.prior_kind},{a.n_t},{_fmt(a.alpha)},"
        f"{_fmt(a.mean_rel_error)},{_fmt(a.std_rel_error)},{a.repetitions}"
        for a in report.aggregates())
    _write_lines(path, lines)


def write_surface_csv(path, report):
    """Long-form (training size x alpha) surface for 3D plotting."""
    lines = ["method,prior_kind,n_t,alpha,mean_rel_error"]
    lines.extend(
        f"{a.method},{report.prior_kind},{a.n_t},{_fmt(a.alpha)},{_fmt(a.mean_rel_error)}"
        for a in report.aggregates())
    _write_lines(path, lines)


def write_convergence_csv(path, report, gaps):
    lines = ["method,prior_kind,n_t,gap_to_tikhonov"]
    lines.extend(f"{g.method},{report.prior_kind},{g.n_t},{_fmt(g.gap)}" for g in gaps)
    _write_lines(path, lines)


def write_trace_csv(path, trace):
    lines = ["iter,loss,grad_norm"]
    lines.extend(f"{it},{_fmt(loss)},{_fmt(grad)}" for it, loss, grad in trace)
    _write_lines(path, lines)


def write_certificates_csv(path, certified_rows):
    """Rows are (certificate, asserted) pairs from the bundled suite."""
    lines = ["loss_kind,construction,grad_norm,fd_grad_norm,loss,reference,tolerance,passed,asserted,notes"]
    for cert, asserted in certified_rows:
        lines.append(
            f"{cert.loss_kind},{cert.construction},{_fmt(cert.gradient_norm)},"
            f"{_fmt(cert.fd_gradient_norm)},{_fmt(cert.loss_value)},{_fmt(cert.reference_norm)},"
            f"{_fmt(cert.tolerance)},{str(cert.passed).lower()},{str(asserted).lower()},{cert.notes}")
    _write_lines(path, lines)


_CHART_COLORS = {
    "mcdnn": "#1f77b4",
    "mcdnn_unweighted": "#2ca02c",
    "ndnn": "#d62728",
    "tikhonov": "#7f7f7f",
}
_WIDTH, _HEIGHT = 640, 420
_MARGIN_L, _MARGIN_R, _MARGIN_T, _MARGIN_B = 70, 150, 30, 50


def write_error_chart_svg(path, report):
    """Line chart of mean error at the best hyperparameter versus training size."""
    sizes = sorted({r.n_t for r in report.records})
    methods = report.methods()
    series = {m: [report.optimal(m, n).mean_rel_error for n in sizes] for m in methods}
    values = [v for curve in series.values() for v in curve]
    lo, hi = min(values), max(values)
    span = (hi - lo) or max(abs(hi), 1e-12)
    lo, hi = lo - 0.08 * span, hi + 0.08 * span
    x_lo, x_hi = sizes[0], sizes[-1]
    x_span = (x_hi - x_lo) or 1

    def sx(value):
        return _MARGIN_L + (value - x_lo) / x_span * (_WIDTH - _MARGIN_L - _MARGIN_R)

    def sy(value):
        return _HEIGHT - _MARGIN_B - (value - lo) / (hi - lo) * (_HEIGHT - _MARGIN_T - _MARGIN_B)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH}" height="{_HEIGHT}" '
        f'viewBox="0 0 {_WIDTH} {_HEIGHT}">',
        f'<rect width="{_WIDTH}" height="{_HEIGHT}" fill="white"/>',
        f'<line x1="{_MARGIN_L}" y1="{_HEIGHT - _MARGIN_B}" x2="{_WIDTH - _MARGIN_R}" '
        f'y2="{_HEIGHT - _MARGIN_B}" stroke="black"/>',
        f'<line x1="{_MARGIN_L}" y1="{_MARGIN_T}" x2="{_MARGIN_L}" '
        f'y2="{_HEIGHT - _MARGIN_B}" stroke="black"/>',
    ]
    for tick in np.linspace(lo, hi, 5):
        y = sy(tick)
        parts.append(f'<line x1="{_MARGIN_L - 4}" y1="{y:.2f}" x2="{_MARGIN_L}" y2="{y:.2f}" stroke="black"/>')
        parts.append(f'<text x="{_MARGIN_L - 8}" y="{y + 4:.2f}" text-anchor="end" '
                     f'font-size="11" font-family="sans-serif">{tick:.4g}</text>')
    for size in sizes:
        x = sx(size)
        parts.append(f'<line x1="{x:.2f}" y1="{_HEIGHT - _MARGIN_B}" x2="{x:.2f}" '
                     f'y2="{_HEIGHT - _MARGIN_B + 4}" stroke="black"/>')
        parts.append(f'<text x="{x:.2f}" y="{_HEIGHT - _MARGIN_B + 18}" text-anchor="middle" '
                     f'font-size="11" font-family="sans-serif">{size}</text>')
    parts.append(f'<text x="{(_MARGIN_L + _WIDTH - _MARGIN_R) / 2:.2f}" y="{_HEIGHT - 10}" '
                 f'text-anchor="middle" font-size="12" font-family="sans-serif">training size</text>')
    parts.append(f'<text x="16" y="{(_MARGIN_T + _HEIGHT - _MARGIN_B) / 2:.2f}" text-anchor="middle" '
                 f'font-size="12" font-family="sans-serif" '
                 f'transform="rotate(-90 16 {(_MARGIN_T + _HEIGHT - _MARGIN_B) / 2:.2f})">mean relative error</text>')
    for index, method in enumerate(methods):
        color = _CHART_COLORS.get(method, "#555555")
        points = " ".join(f"{sx(n):.2f},{sy(v):.2f}" for n, v in zip(sizes, series[method]))
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.8" points="{points}"/>')
        legend_y = _MARGIN_T + 16 + 18 * index
        parts.append(f'<line x1="{_WIDTH - _MARGIN_R + 10}" y1="{legend_y - 4}" '
                     f'x2="{_WIDTH - _MARGIN_R + 34}" y2="{legend_y - 4}" stroke="{color}" stroke-width="1.8"/>')
        parts.append(f'<text x="{_WIDTH - _MARGIN_R + 40}" y="{legend_y}" font-size="11" '
                     f'font-family="sans-serif">{method}</text>')
    parts.append("</svg>")
    _write_lines(path, parts)


def emit_report(report, out_dir, gaps=None):
    """Write the results, aggregate, and surface CSVs plus the SVG chart.

    Returns the list of file names written (relative to ``out_dir``).
    """
    os.makedirs(out_dir, exist_ok=True)
    written = []
    for name, writer in (("results.csv", write_results_csv),
                         ("aggregate.csv", write_aggregate_csv),
                         ("surface.csv", write_surface_csv),
                         ("report.svg", write_error_chart_svg)):
        writer(os.path.join(out_dir, name), report)
        written.append(name)
    if gaps is not None:
        write_convergence_csv(os.path.join(out_dir, "convergence.csv"), report, gaps)
        written.append("convergence.csv")
    return written
