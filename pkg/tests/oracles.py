"""Independent reference computations used by the tests."""
from __future__ import annotations

import numpy as np


def grid_search_min_energy_2(q: float) -> float:
    """Minimise ``l^2 + (1-l)^2 + 2 l (1-l) q`` over ``l`` by successively finer grids."""
    lo, hi, best = 0.0, 1.0, None
    for _ in range(12):
        lam = np.linspace(lo, hi, 201)
        vals = lam**2 + (1 - lam) ** 2 + 2 * lam * (1 - lam) * q
        i = int(np.argmin(vals))
        best = vals[i]
        step = (hi - lo) / 200
        lo, hi = max(0.0, lam[i] - 2 * step), min(1.0, lam[i] + 2 * step)
    return float(best)


def grid_search_min_energy_3(q01: float, q02: float, q12: float) -> float:
    """Minimum of ``w^T K w`` over the 2-simplex by zooming grid search."""
    k = np.array([[1, q01, q02], [q01, 1, q12], [q02, q12, 1]], dtype=float)
    c0, c1, half = 1 / 3, 1 / 3, 0.5
    best = None
    for _ in range(30):
        a = np.linspace(c0 - half, c0 + half, 81)
        b = np.linspace(c1 - half, c1 + half, 81)
        aa, bb = np.meshgrid(a, b, indexing="ij")
        cc = 1 - aa - bb
        ok = (aa >= 0) & (bb >= 0) & (cc >= 0)
        w = np.stack([aa, bb, cc], axis=-1)
        vals = np.einsum("...i,ij,...j->...", w, k, w)
        vals[~ok] = np.inf
        i, j = np.unravel_index(np.argmin(vals), vals.shape)
        best = vals[i, j]
        c0, c1 = aa[i, j], bb[i, j]
        half *= 0.25
    return float(best)


def cantor_mesh_indices(depth: int, k: int) -> set[int]:
    """Indices ``floor(x 3^k)`` of middle-third Cantor left endpoints, in exact integer arithmetic."""
    pts = [0]
    for _ in range(depth):
        pts = [3 * p + d for p in pts for d in (0, 2)]
    # x = p / 3^depth, so floor(x 3^k) = p // 3^(depth-k)
    return {p // 3 ** (depth - k) for p in pts}
