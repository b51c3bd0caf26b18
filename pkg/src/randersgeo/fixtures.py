"""Synthetic test-image generators with known ground truth.

Three families: a noisy two-level disk, a dense-small-blocks texture where
edges are unreliable, and a two-level region interrupted by random straight
segments (strong distracting edges).
"""

from __future__ import annotations

import numpy as np

from .grid import BinaryMask, Grid2D, Image, Polyline


def _circle_contour(center, radius, n=360):
    t = np.linspace(0, 2 * np.pi, n, endpoint=False)
    return Polyline(np.column_stack([center[0] + radius * np.cos(t),
                                     center[1] + radius * np.sin(t)]), True)


def disk_fixture(size=256, radius=70.0, fg=0.75, bg=0.25, noise=0.05,
                 seed=0):
    """Noisy two-level disk; returns (image, gt_mask, gt_contour)."""
    g = Grid2D(size, size)
    c = (size - 1) / 2.0
    X, Y = g.cell_centers()
    inside = np.hypot(X - c, Y - c) <= radius
    rng = np.random.default_rng(seed)
    img = np.where(inside, fg, bg) + rng.normal(0.0, noise, g.shape)
    img = np.clip(img, 0.0, 1.0)
    return (Image(g, 1, img), BinaryMask(g, inside),
            _circle_contour((c, c), radius))


def blocks_fixture(size=256, radius=70.0, seed=0, inside_density=0.25,
                   outside_density=0.05, block=4):
    """Region made of dense small bright blocks on a mid background, with
    sparse distractor blocks outside; edges are weak, statistics strong."""
    g = Grid2D(size, size)
    c = (size - 1) / 2.0
    X, Y = g.cell_centers()
    inside = np.hypot(X - c, Y - c) <= radius
    rng = np.random.default_rng(seed)
    img = np.full(g.shape, 0.35)
    n_in = int(inside_density * inside.sum() / (block * block))
    n_out = int(outside_density * (~inside).sum() / (block * block))
    placed = 0
    while placed < n_in:
        x = rng.integers(0, size - block)
        y = rng.integers(0, size - block)
        if inside[y + block // 2, x + block // 2]:
            img[y:y + block, x:x + block] = 0.9
            placed += 1
    placed = 0
    while placed < n_out:
        x = rng.integers(0, size - block)
        y = rng.integers(0, size - block)
        if not inside[y + block // 2, x + block // 2]:
            img[y:y + block, x:x + block] = 0.9
            placed += 1
    img += rng.normal(0.0, 0.02, g.shape)
    img = np.clip(img, 0.0, 1.0)
    return (Image(g, 1, img), BinaryMask(g, inside),
            _circle_contour((c, c), radius))


def clutter_fixture(size=256, radius=70.0, fg=0.7, bg=0.3, noise=0.03,
                    n_segments=12, seed=0):
    """Two-level disk interrupted by random bright straight segments that
    produce strong distracting edge features."""
    g = Grid2D(size, size)
    c = (size - 1) / 2.0
    X, Y = g.cell_centers()
    inside = np.hypot(X - c, Y - c) <= radius
    rng = np.random.default_rng(seed)
    img = np.where(inside, fg, bg) + rng.normal(0.0, noise, g.shape)
    for _ in range(n_segments):
        a = rng.uniform(0, size, 2)
        ang = rng.uniform(0, 2 * np.pi)
        L = rng.uniform(0.4 * size, 1.2 * size)
        b = a + L * np.array([np.cos(ang), np.sin(ang)])
        _draw_segment(img, a, b, value=1.0, width=1.5)
    img = np.clip(img, 0.0, 1.0)
    return (Image(g, 1, img), BinaryMask(g, inside),
            _circle_contour((c, c), radius))


def _draw_segment(img, a, b, value, width):
    h, w = img.shape
    n = int(np.hypot(*(b - a)) / 0.3) + 1
    r = int(np.ceil(width / 2))
    for t in np.linspace(0.0, 1.0, n):
        p = a + t * (b - a)
        ix, iy = int(round(p[0])), int(round(p[1]))
        for dy in range(-r, r + 1):
            for dx in range(-r, r + 1):
                if dx * dx + dy * dy <= width * width / 4:
                    x, y = ix + dx, iy + dy
                    if 0 <= x < w and 0 <= y < h:
                        img[y, x] = value


FIXTURES = {
    "disk": disk_fixture,
    "blocks": blocks_fixture,
    "clutter": clutter_fixture,
}


def make_fixture(kind, **kwargs):
    if kind not in FIXTURES:
        raise ValueError(f"unknown fixture kind {kind!r}")
    return FIXTURES[kind](**kwargs)
