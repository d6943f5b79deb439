"""Quadrature rules on the reference triangle and the unit interval."""
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class QuadratureRule:
    """Points and weights of a reference-cell rule.

    ``points`` are barycentric coordinates (triangle, shape (nq, 3)) or
    parameters in [0, 1] (interval, shape (nq,)).  Weights sum to the
    reference measure: 1/2 for the triangle, 1 for the interval.
    """
    points: np.ndarray
    weights: np.ndarray
    degree: int


def _triangle_degree5():
    # 7-point symmetric rule (Radon; Strang-Fix), exact to degree 5
    s = np.sqrt(15.0)
    a1, a2 = (6.0 - s) / 21.0, (6.0 + s) / 21.0
    b1, b2 = 1.0 - 2.0 * a1, 1.0 - 2.0 * a2
    w0 = 9.0 / 40.0
    w1 = (155.0 - s) / 1200.0
    w2 = (155.0 + s) / 1200.0
    pts = np.array([
        [1 / 3, 1 / 3, 1 / 3],
        [b1, a1, a1], [a1, b1, a1], [a1, a1, b1],
        [b2, a2, a2], [a2, b2, a2], [a2, a2, b2],
    ])
    w = 0.5 * np.array([w0, w1, w1, w1, w2, w2, w2])
    return QuadratureRule(pts, w, 5)


def _gauss3():
    r = np.sqrt(3.0 / 5.0) / 2.0
    pts = np.array([0.5 - r, 0.5, 0.5 + r])
    w = np.array([5.0, 8.0, 5.0]) / 18.0
    return QuadratureRule(pts, w, 5)


TRIANGLE_RULE = _triangle_degree5()
EDGE_RULE = _gauss3()


def triangle_rule() -> QuadratureRule:
    return TRIANGLE_RULE


def edge_rule() -> QuadratureRule:
    return EDGE_RULE
