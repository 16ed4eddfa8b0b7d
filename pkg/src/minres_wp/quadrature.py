"""Quadrature rules on the reference interval and reference triangle.

Points are barycentric; weights sum to the reference measure (1 on
``[0, 1]``, 1/2 on the unit triangle).
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import permutations

import numpy as np

__all__ = ["QuadRule", "quad_rule"]


@dataclass(frozen=True, eq=False)
class QuadRule:
    dim: int
    degree: int
    points: np.ndarray   # (nq, dim+1) barycentric coordinates
    weights: np.ndarray  # (nq,)

    @property
    def n_points(self) -> int:
        return self.weights.size


def _orbit(*bary):
    return sorted(set(permutations(bary)))


# symmetric triangle rules, weights normalised to total 1
_TRIANGLE = {
    1: [((1 / 3, 1 / 3, 1 / 3), 1.0)],
    2: [(p, 1 / 3) for p in _orbit(0.5, 0.5, 0.0)],
    4: ([(p, 0.223381589678011) for p in _orbit(0.445948490915965, 0.445948490915965, 0.108103018168070)]
        + [(p, 0.109951743655322) for p in _orbit(0.091576213509771, 0.091576213509771, 0.816847572980459)]),
    5: ([((1 / 3, 1 / 3, 1 / 3), 0.225)]
        + [(p, 0.132394152788506) for p in _orbit(0.470142064105115, 0.470142064105115, 0.059715871789770)]
        + [(p, 0.125939180544827) for p in _orbit(0.101286507323456, 0.101286507323456, 0.797426985353087)]),
    6: ([(p, 0.116786275726379) for p in _orbit(0.249286745170910, 0.249286745170910, 0.501426509658179)]
        + [(p, 0.050844906370207) for p in _orbit(0.063089014491502, 0.063089014491502, 0.873821971016996)]
        + [(p, 0.082851075618374) for p in _orbit(0.053145049844817, 0.310352451033784, 0.636502499121399)]),
}
_TRIANGLE_FOR_DEGREE = {0: 1, 1: 1, 2: 2, 3: 4, 4: 4, 5: 5, 6: 6}


@lru_cache(maxsize=None)
def quad_rule(dim: int, degree: int) -> QuadRule:
    """Rule exact for polynomials of total degree ``<= degree`` (at most 6)."""
    if degree < 0 or degree > 6:
        raise ValueError(f"unsupported quadrature degree {degree}")
    if dim == 1:
        n = degree // 2 + 1
        xi, w = np.polynomial.legendre.leggauss(n)
        t = 0.5 * (xi + 1.0)
        pts = np.column_stack([1.0 - t, t])
        rule = QuadRule(1, degree, pts, 0.5 * w)
    elif dim == 2:
        table = _TRIANGLE[_TRIANGLE_FOR_DEGREE[degree]]
        pts = np.array([p for p, _ in table], dtype=float)
        # renormalise the tabulated barycentric triples to sum to one exactly
        pts /= pts.sum(axis=1, keepdims=True)
        w = np.array([w for _, w in table], dtype=float)
        rule = QuadRule(2, degree, pts, 0.5 * w / w.sum())
    else:
        raise ValueError(f"unsupported dimension {dim}")
    rule.points.setflags(write=False)
    rule.weights.setflags(write=False)
    return rule
