#!/usr/bin/env python3
"""Regenerate the knot corpus polygon files under src/pinchmd/data/corpus/.

Every curve has a mathematically known determinant: torus knots T(1,q) are
unknots, T(2,3) is the trefoil (determinant 3), T(2,5) the cinquefoil
(determinant 5), and the figure-eight parametric curve has determinant 5.
"""

from pathlib import Path

import numpy as np

from pinchmd.knots import save_polygon

OUT = Path(__file__).resolve().parents[1] / "src" / "pinchmd" / "data" / "corpus"


def curve(fn, n):
    t = 2 * np.pi * np.arange(n) / n
    return np.stack(fn(t), axis=1)


CURVES = {
    "triangle.txt": np.array([[0.0, 0, 0], [1.0, 0, 0], [0.5, 1.0, 0]]),
    # phase pi puts the first sample at the extremal point (0, -3, 0), so the
    # file also works as an *open* chain under radial closure (knot-check)
    "trefoil.txt": curve(
        lambda t: (
            np.sin(t + np.pi) + 2 * np.sin(2 * t),
            np.cos(t + np.pi) - 2 * np.cos(2 * t),
            -np.sin(3 * t + np.pi),
        ),
        60,
    ),
    "trefoil_torus.txt": curve(
        lambda t: ((2 + np.cos(3 * t)) * np.cos(2 * t), (2 + np.cos(3 * t)) * np.sin(2 * t), np.sin(3 * t)), 80
    ),
    "figure_eight.txt": curve(
        lambda t: ((2 + np.cos(2 * t)) * np.cos(3 * t), (2 + np.cos(2 * t)) * np.sin(3 * t), np.sin(4 * t)), 80
    ),
    "cinquefoil.txt": curve(
        lambda t: ((2 + np.cos(5 * t)) * np.cos(2 * t), (2 + np.cos(5 * t)) * np.sin(2 * t), np.sin(5 * t)), 100
    ),
    "unknot_twisted.txt": curve(
        lambda t: ((2 + np.cos(2 * t)) * np.cos(t), (2 + np.cos(2 * t)) * np.sin(t), np.sin(2 * t)), 60
    ),
}


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    for name, pts in CURVES.items():
        save_polygon(pts, OUT / name)
        print(f"wrote {OUT / name} ({len(pts)} vertices)")


if __name__ == "__main__":
    main()
