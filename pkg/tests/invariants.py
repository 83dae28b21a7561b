"""Vectorized metric-space invariant checks on random triples.

Returns counts of violations per invariant so the acceptance suite can
report them; unit tests assert they are all zero.
"""

import numpy as np

from frechetnet.spaces import random_points


def check_space_invariants(space, n_cases, rng):
    a = random_points(space, n_cases, rng)
    b = random_points(space, n_cases, rng)
    c = random_points(space, n_cases, rng)
    dab = np.sqrt(space.sq_dist_many(a, b))
    dba = np.sqrt(space.sq_dist_many(b, a))
    dbc = np.sqrt(space.sq_dist_many(b, c))
    dac = np.sqrt(space.sq_dist_many(a, c))
    daa = space.sq_dist_many(a, a)

    once = space.project_many(space.embed_many(a))
    raw = rng.normal(0.0, 2.0, (n_cases, space.embed_dim))
    p1 = space.project_many(raw)
    p2 = space.project_many(space.embed_many(p1))
    valid = np.array([space.is_valid(p) for p in p1])
    return {
        "symmetry": int(np.sum(np.abs(dab - dba) > 1e-12 * (1 + dab))),
        "nonnegative": int(np.sum(dab < 0)),
        "identity": int(np.sum(daa != 0)),
        "triangle": int(np.sum(dac > dab + dbc + 1e-9)),
        "round_trip": int(np.sum(np.abs(once - a).reshape(n_cases, -1).max(axis=1) > 1e-10)),
        "idempotence": int(np.sum(np.abs(p2 - p1).reshape(n_cases, -1).max(axis=1) > 1e-10)),
        "projection_valid": int(np.sum(~valid)),
    }
