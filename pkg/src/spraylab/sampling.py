"""Deterministic point sets and an order-preserving parallel map."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from scipy.stats import qmc

GOLDEN_ANGLE = np.pi * (3.0 - np.sqrt(5.0))


def axis_points(n: int) -> np.ndarray:
    """The ``2n`` points ``+-e_i``, shape ``(2n, n)``."""
    eye = np.eye(n)
    return np.concatenate([eye, -eye])


def fibonacci_sphere(count: int) -> np.ndarray:
    k = np.arange(count) + 0.5
    z = 1.0 - 2.0 * k / count
    rho = np.sqrt(1.0 - z * z)
    phi = GOLDEN_ANGLE * k
    return np.stack([rho * np.cos(phi), rho * np.sin(phi), z], axis=1)


def sphere_points(n: int, count: int = 2000, *, axes: bool = True) -> np.ndarray:
    """Low-discrepancy points on the unit sphere ``S^{n-1}``, shape ``(m, n)``."""
    if n == 1:
        pts = np.array([[1.0], [-1.0]])
    elif n == 2:
        t = 2 * np.pi * (np.arange(count) + 0.5) / count
        pts = np.stack([np.cos(t), np.sin(t)], axis=1)
    elif n == 3:
        pts = fibonacci_sphere(count)
    else:
        u = qmc.Halton(d=n, scramble=False).random(count + 1)[1:]
        g = np.sqrt(2.0) * _erfinv(2.0 * u - 1.0)
        pts = g / np.linalg.norm(g, axis=1, keepdims=True)
    if axes:
        pts = np.concatenate([pts, axis_points(n)])
    return pts


def _erfinv(z):
    from scipy.special import erfinv

    return erfinv(np.clip(z, -1 + 1e-15, 1 - 1e-15))


def ball_points(n: int, count: int, radius: float = 1.0) -> np.ndarray:
    """Halton points filling the closed ball, plus its centre."""
    u = qmc.Halton(d=n + 1, scramble=False).random(count + 1)[1:]
    g = np.sqrt(2.0) * _erfinv(2.0 * u[:, :n] - 1.0)
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    r = radius * u[:, n] ** (1.0 / n)
    return np.concatenate([np.zeros((1, n)), g * r[:, None]])


def random_phase_points(n: int, count: int, seed: int = 0, *, base_scale: float = 1.0,
                        unit_fibre: bool = True):
    """Seeded ``(x, y)`` arrays of shape ``(n, count)``; fibres on the unit sphere by default."""
    rng = np.random.default_rng(seed)
    x = rng.uniform(-base_scale, base_scale, size=(n, count))
    y = rng.normal(size=(n, count))
    norms = np.linalg.norm(y, axis=0)
    if unit_fibre:
        y = y / norms
    else:
        y = y / norms * rng.uniform(0.5, 2.0, size=count)
    return x, y


def thread_count() -> int:
    try:
        v = int(os.environ.get("SPRAYLAB_THREADS", "1"))
    except ValueError:
        v = 1
    return max(1, v)


def parallel_map(fn, items) -> list:
    """``[fn(i) for i in items]`` on up to ``SPRAYLAB_THREADS`` threads, in input order."""
    items = list(items)
    k = min(thread_count(), len(items))
    if k <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=k) as pool:
        return list(pool.map(fn, items))
