"""Counter-based random streams keyed by integer tuples.

Every draw in the package comes from ``stream(seed, domain, *key)``: a
Philox generator whose key is derived from the full tuple, so the numbers a
work item sees depend only on its identity and never on scheduling.
"""

from __future__ import annotations

import numpy as np

# Stream domains; part of the key so different consumers never collide.
DOMAIN_SOLVE = 1
DOMAIN_MESH = 2
DOMAIN_SIMULATE = 3
DOMAIN_TEST = 99


def stream(seed: int, domain: int, *key: int) -> np.random.Generator:
    ss = np.random.SeedSequence([int(seed), int(domain), *(int(k) for k in key)])
    return np.random.Generator(np.random.Philox(ss))


def normals(seed: int, domain: int, key: tuple[int, ...], shape) -> np.ndarray:
    return stream(seed, domain, *key).standard_normal(shape)
