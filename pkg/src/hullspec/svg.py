"""Minimal deterministic SVG emission: spectra scatters and sigma_min heatmaps.

Hand-rolled so that identical inputs give identical bytes (no timestamps,
no renderer state).  Contours are approximated by flagging grid cells where
sigma_min crosses a level between neighbors.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
           "#8c564b", "#e377c2", "#7f7f7f")

_W = 720
_H = 560
_PAD = 48


def _fmt(x: float) -> str:
    return f"{x:.4f}".rstrip("0").rstrip(".")


def _header(width: int, height: int) -> str:
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">\n'
        f'<rect width="{width}" height="{height}" fill="white"/>\n'
    )


def scatter_svg(path, labelled_points: Sequence[tuple[str, np.ndarray]],
                title: str = "") -> None:
    """One color per labelled point set, points in the complex plane."""
    all_pts = np.concatenate([np.asarray(p, complex).ravel() for _, p in labelled_points])
    re, im = all_pts.real, all_pts.imag
    re_min, re_max = float(re.min()), float(re.max())
    im_min, im_max = float(im.min()), float(im.max())
    re_pad = max((re_max - re_min) * 0.05, 1e-3)
    im_pad = max((im_max - im_min) * 0.05, 1e-3)
    re_min, re_max = re_min - re_pad, re_max + re_pad
    im_min, im_max = im_min - im_pad, im_max + im_pad

    def sx(x):
        return _PAD + (x - re_min) / (re_max - re_min) * (_W - 2 * _PAD)

    def sy(y):
        return _H - _PAD - (y - im_min) / (im_max - im_min) * (_H - 2 * _PAD)

    parts = [_header(_W, _H)]
    if title:
        parts.append(f'<text x="{_W // 2}" y="20" text-anchor="middle" '
                     f'font-family="monospace" font-size="13">{title}</text>\n')
    parts.append(
        f'<rect x="{_PAD}" y="{_PAD}" width="{_W - 2 * _PAD}" '
        f'height="{_H - 2 * _PAD}" fill="none" stroke="#999"/>\n'
    )
    for idx, (label, pts) in enumerate(labelled_points):
        color = _COLORS[idx % len(_COLORS)]
        pts = np.asarray(pts, complex).ravel()
        for z in pts:
            parts.append(
                f'<circle cx="{_fmt(sx(z.real))}" cy="{_fmt(sy(z.imag))}" '
                f'r="2.2" fill="{color}" fill-opacity="0.6"/>\n'
            )
        parts.append(
            f'<text x="{_PAD + 4}" y="{_PAD + 16 + 14 * idx}" fill="{color}" '
            f'font-family="monospace" font-size="11">{label}</text>\n'
        )
    parts.append("</svg>\n")
    with open(path, "w", encoding="ascii") as fh:
        fh.write("".join(parts))


def _gray(value: float, lo: float, hi: float) -> str:
    t = 0.0 if hi <= lo else (value - lo) / (hi - lo)
    level = int(round(255 * min(max(t, 0.0), 1.0)))
    return f"rgb({level},{level},{255 - level // 3})"


def heatmap_svg(path, re_values: np.ndarray, im_values: np.ndarray,
                sigma: np.ndarray, epsilons: Sequence[float] = (),
                title: str = "") -> None:
    """Gray-scale log sigma_min map; epsilon sublevel boundaries in color."""
    n_im, n_re = sigma.shape
    logs = np.log10(np.maximum(sigma, 1e-16))
    lo, hi = float(logs.min()), float(logs.max())
    cell_w = (_W - 2 * _PAD) / n_re
    cell_h = (_H - 2 * _PAD) / n_im
    parts = [_header(_W, _H)]
    if title:
        parts.append(f'<text x="{_W // 2}" y="20" text-anchor="middle" '
                     f'font-family="monospace" font-size="13">{title}</text>\n')
    for j in range(n_im):
        y = _H - _PAD - (j + 1) * cell_h
        for i in range(n_re):
            x = _PAD + i * cell_w
            parts.append(
                f'<rect x="{_fmt(x)}" y="{_fmt(y)}" width="{_fmt(cell_w + 0.5)}" '
                f'height="{_fmt(cell_h + 0.5)}" fill="{_gray(logs[j, i], lo, hi)}"/>\n'
            )
    for e_idx, eps in enumerate(epsilons):
        color = _COLORS[e_idx % len(_COLORS)]
        inside = sigma < eps
        for j in range(n_im):
            for i in range(n_re):
                if not inside[j, i]:
                    continue
                boundary = (
                    i == 0 or i == n_re - 1 or j == 0 or j == n_im - 1
                    or not inside[j, i - 1] or not inside[j, i + 1]
                    or not inside[j - 1, i] or not inside[j + 1, i]
                )
                if boundary:
                    x = _PAD + i * cell_w
                    y = _H - _PAD - (j + 1) * cell_h
                    parts.append(
                        f'<rect x="{_fmt(x)}" y="{_fmt(y)}" '
                        f'width="{_fmt(cell_w)}" height="{_fmt(cell_h)}" '
                        f'fill="{color}" fill-opacity="0.85"/>\n'
                    )
        parts.append(
            f'<text x="{_PAD + 4}" y="{_PAD + 16 + 14 * e_idx}" fill="{color}" '
            f'font-family="monospace" font-size="11">eps={eps}</text>\n'
        )
    parts.append("</svg>\n")
    with open(path, "w", encoding="ascii") as fh:
        fh.write("".join(parts))
