"""Seeded random-stream derivation shared by screening, bootstrap and evaluator.

All stochastic components of the toolkit draw from PCG64 streams derived from a
master seed plus integer key(s) via ``numpy.random.SeedSequence(entropy=seed,
spawn_key=key)``.  Keyed derivation makes every draw a pure function of
(seed, key), so replications and per-run randomizations can be computed in any
order, or in parallel, without changing the result.
"""

from __future__ import annotations

import numpy as np

# Domain tags keep streams for different purposes disjoint even when the
# integer keys collide.
DOMAIN_INACTIVE = 1
DOMAIN_BOOTSTRAP = 2
DOMAIN_NOISE = 3
DOMAIN_CVFOLDS = 4


def substream(seed: int, *key: int) -> np.random.Generator:
    """Return an independent PCG64 generator for (seed, key)."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


def normal_box_muller(gen: np.random.Generator, size: int) -> np.ndarray:
    """Standard normals via the Box-Muller transform over ``gen``'s uniforms."""
    n_pairs = (size + 1) // 2
    u1 = gen.random(n_pairs)
    u2 = gen.random(n_pairs)
    # u1 == 0 would blow up the log; the half-open [0,1) draw makes 1-u1 safe.
    r = np.sqrt(-2.0 * np.log1p(-u1))
    theta = 2.0 * np.pi * u2
    z = np.concatenate([r * np.cos(theta), r * np.sin(theta)])
    return z[:size]
