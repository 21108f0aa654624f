"""Self-contained SVG learning curves (success rate against environment steps)."""

from __future__ import annotations

import os
from xml.sax.saxutils import escape

from hershape.training import read_metrics

WIDTH, HEIGHT, PAD = 720, 440, 60
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f")
DASHES = ("", "6 3", "2 2", "8 3 2 3")


def emit_plot(metrics_paths, output_path) -> str:
    """One polyline per metrics file, legend taken from the file names."""
    paths = [os.fspath(p) for p in metrics_paths]
    if not paths:
        raise ValueError("emit_plot needs at least one metrics file")
    series = [(p, read_metrics(p)) for p in paths]
    max_step = max((r.env_step for _, rows in series for r in rows), default=0) or 1

    plot_w, plot_h = WIDTH - 2 * PAD, HEIGHT - 2 * PAD

    def sx(step):
        return PAD + plot_w * step / max_step

    def sy(rate):
        return HEIGHT - PAD - plot_h * rate

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<line x1="{PAD}" y1="{HEIGHT - PAD}" x2="{WIDTH - PAD}" y2="{HEIGHT - PAD}" stroke="black"/>',
        f'<line x1="{PAD}" y1="{PAD}" x2="{PAD}" y2="{HEIGHT - PAD}" stroke="black"/>',
    ]
    for i in range(5):
        rate = i / 4
        y = sy(rate)
        out.append(f'<line x1="{PAD}" y1="{y:.2f}" x2="{WIDTH - PAD}" y2="{y:.2f}" stroke="#ddd" stroke-dasharray="4"/>')
        out.append(f'<text x="{PAD - 6}" y="{y + 4:.2f}" font-family="sans-serif" font-size="11" text-anchor="end">{rate:.2f}</text>')
        step = max_step * i / 4
        x = sx(step)
        out.append(
            f'<text x="{x:.2f}" y="{HEIGHT - PAD + 16}" font-family="sans-serif" font-size="11" text-anchor="middle">{step:.0f}</text>'
        )
    out.append(
        f'<text x="{WIDTH / 2}" y="{HEIGHT - 18}" font-family="sans-serif" font-size="13" text-anchor="middle">environment steps</text>'
    )
    out.append(
        f'<text x="18" y="{HEIGHT / 2}" font-family="sans-serif" font-size="13" text-anchor="middle" '
        f'transform="rotate(-90 18 {HEIGHT / 2})">success rate</text>'
    )

    for i, (path, rows) in enumerate(series):
        color = COLORS[i % len(COLORS)]
        dash = DASHES[(i // len(COLORS)) % len(DASHES)]
        style = f' stroke-dasharray="{dash}"' if dash else ""
        points = " ".join(f"{sx(r.env_step):.2f},{sy(r.success_rate):.2f}" for r in rows)
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="2"{style} points="{points}"/>')
        ly = PAD + 16 * i
        label = escape(os.path.basename(os.path.dirname(path)) + "/" + os.path.basename(path) if os.path.dirname(path) else path)
        out.append(f'<line x1="{WIDTH - PAD - 170}" y1="{ly}" x2="{WIDTH - PAD - 150}" y2="{ly}" stroke="{color}" stroke-width="2"{style}/>')
        out.append(f'<text x="{WIDTH - PAD - 145}" y="{ly + 4}" font-family="sans-serif" font-size="11">{label}</text>')
    out.append("</svg>")

    with open(output_path, "w", encoding="utf-8") as f:
        f.write("\n".join(out) + "\n")
    return os.fspath(output_path)
