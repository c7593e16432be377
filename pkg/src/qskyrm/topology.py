"""Lattice topological charge via triangulated solid angles.

A spin field on the frame is triangulated and each triangle (i, j, k)
contributes half its spherical solid angle, computed in the numerically
robust two-argument arctangent form. Summing over all triangles and
dividing by 4*pi gives the winding of the texture around the sphere.
"""

import math
from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np

from .errors import DegenerateTriangleError, VanishingMomentError

Coord = Tuple[int, int]

# texture vectors shorter than this cannot be meaningfully normalized
MOMENT_FLOOR = 1e-6

# both atan2 arguments below this magnitude: antipodal/collinear triple
DEGENERACY_FLOOR = 1e-12


@dataclass
class SpinField:
    """Vectors keyed by frame coordinate, plus the triangulation to sum over."""

    vectors: Dict[Coord, np.ndarray]
    triangles: List[Tuple[Coord, Coord, Coord]]


def half_solid_angle(ni, nj, nk) -> float:
    """Signed half solid angle of the spherical triangle (ni, nj, nk).

    Expects vectors on (or near) the unit sphere. The result is
    atan2(ni . (nj x nk), 1 + ni.nj + ni.nk + nj.nk), in (-pi, pi].
    Antipodal configurations zero both arguments and have no defined value.
    """
    ni = np.asarray(ni, dtype=float)
    nj = np.asarray(nj, dtype=float)
    nk = np.asarray(nk, dtype=float)
    num = float(np.dot(ni, np.cross(nj, nk)))
    den = 1.0 + float(np.dot(ni, nj) + np.dot(ni, nk) + np.dot(nj, nk))
    if abs(num) < DEGENERACY_FLOOR and abs(den) < DEGENERACY_FLOOR:
        raise DegenerateTriangleError(
            f"triangle with antipodal vertices, atan2({num:.2e}, {den:.2e})")
    return math.atan2(num, den)


def topological_index(field: SpinField) -> float:
    """Winding number of the unit-normalized texture.

    Each vector is normalized to the unit sphere first; a vector shorter
    than MOMENT_FLOOR aborts with the offending site. The sum is compensated
    to keep cancellation error away from the quantization scale.
    """
    terms = []
    unit = {}
    for coord, v in field.vectors.items():
        v = np.asarray(v, dtype=float)
        norm = float(np.linalg.norm(v))
        if norm < MOMENT_FLOOR:
            raise VanishingMomentError(coord, norm)
        unit[coord] = v / norm
    for (a, b, c) in field.triangles:
        terms.append(half_solid_angle(unit[a], unit[b], unit[c]))
    return math.fsum(terms) / (2.0 * math.pi)


def winding_parameter(field: SpinField) -> float:
    """Same accumulation evaluated on doubled raw vectors (no normalization).

    With spin expectations as input the doubled vectors have length <= 1;
    shrinkage below 1 diagnoses quantum fluctuations eating the texture, so
    this quantity is a stability measure rather than an integer invariant.
    """
    terms = []
    for (a, b, c) in field.triangles:
        va = 2.0 * np.asarray(field.vectors[a], dtype=float)
        vb = 2.0 * np.asarray(field.vectors[b], dtype=float)
        vc = 2.0 * np.asarray(field.vectors[c], dtype=float)
        terms.append(half_solid_angle(va, vb, vc))
    return math.fsum(terms) / (2.0 * math.pi)
