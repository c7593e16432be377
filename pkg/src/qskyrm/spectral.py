"""Diagonalization and spin-texture extraction.

Dense full-spectrum solves are the default at the working dimension (512);
an iterative lowest-k path exists for anything larger. Thermal sums over a
truncated spectrum must pass the retained-weight check below, otherwise the
truncation silently corrupts partition functions.
"""

from dataclasses import dataclass
from typing import List, Optional

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConvergenceError, DimensionCapError, TruncationError
from .lattice import CLASSICAL_SPIN, Lattice
from .topology import SpinField

DEFAULT_DENSE_CAP = 4096
DEGENERACY_GAP = 1e-10
RETAINED_WEIGHT_MIN = 0.999


@dataclass
class EigenSystem:
    """Ascending eigenvalues with matching orthonormal column eigenvectors."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    dimension: int  # full Hilbert-space dimension, even when truncated

    @property
    def k(self) -> int:
        return len(self.eigenvalues)

    @property
    def truncated(self) -> bool:
        return self.k < self.dimension


def diagonalize(H, mode: str = "full", k: Optional[int] = None,
                dense_cap: int = DEFAULT_DENSE_CAP) -> EigenSystem:
    """Solve the Hermitian eigenproblem.

    mode='full' densifies and uses LAPACK; refuses dimensions above
    dense_cap. mode='lowest' returns exactly the k algebraically smallest
    pairs via Lanczos.
    """
    dim = H.shape[0]
    if mode == "full":
        if dim > dense_cap:
            raise DimensionCapError(
                f"dense solve at dimension {dim} exceeds cap {dense_cap}")
        Hd = H.toarray() if sp.issparse(H) else np.asarray(H)
        w, v = sla.eigh(Hd)
        return EigenSystem(w, v, dim)
    if mode == "lowest":
        if k is None or not (1 <= k < dim):
            raise ValueError(f"lowest-k mode needs 1 <= k < {dim}, got {k}")
        try:
            # fixed start vector keeps reruns bit-identical (no RNG draw)
            v0 = np.full(dim, 1.0 / np.sqrt(dim))
            w, v = spla.eigsh(H, k=k, which="SA", v0=v0)
        except spla.ArpackNoConvergence as exc:
            raise ConvergenceError(
                f"Lanczos stalled: {len(exc.eigenvalues)}/{k} pairs converged"
            ) from exc
        order = np.argsort(w)
        return EigenSystem(w[order], v[:, order], dim)
    raise ValueError(f"unknown mode {mode!r}")


def spin_expectation(psi: np.ndarray, site: int, n_sites: int) -> np.ndarray:
    """(<Sx>, <Sy>, <Sz>) at one site of a spin-1/2 product space."""
    if not (0 <= site < n_sites):
        raise IndexError(f"site {site} outside 0..{n_sites - 1}")
    return spin_expectations(psi, n_sites)[site]


def spin_expectations(psi: np.ndarray, n_sites: int) -> np.ndarray:
    """(n_sites, 3) spin expectations, one reshape per site.

    Splitting the state as (left, spin_i, right) makes each single-site
    operator a 2x2 contraction: <S+> = <up|dn> gives the in-plane pair at
    once and <Sz> needs only the two sub-norms.
    """
    psi = np.asarray(psi)
    out = np.empty((n_sites, 3))
    for i in range(n_sites):
        t = psi.reshape(2 ** i, 2, 2 ** (n_sites - 1 - i))
        up, dn = t[:, 0, :], t[:, 1, :]
        splus = np.vdot(up, dn)  # <S+> = <Sx> + i <Sy>
        out[i, 0] = splus.real
        out[i, 1] = splus.imag
        out[i, 2] = 0.5 * (np.vdot(up, up).real - np.vdot(dn, dn).real)
    return out


def spin_texture(psi: np.ndarray, lattice: Lattice) -> SpinField:
    """Expectation texture over the full frame, classical ring included."""
    vals = spin_expectations(psi, lattice.n_quantum)
    vectors = {c: vals[i] for i, c in enumerate(lattice.quantum_sites)}
    for c in lattice.classical_sites:
        vectors[c] = CLASSICAL_SPIN.copy()
    return SpinField(vectors=vectors, triangles=list(lattice.triangles))


def degenerate_clusters(eigenvalues: np.ndarray,
                        gap_tol: float = DEGENERACY_GAP) -> List[List[int]]:
    """Group consecutive indices whose eigenvalue gaps fall below gap_tol.

    Eigenvectors inside a cluster are gauge-arbitrary; consumers comparing
    level-resolved quantities must sum within clusters.
    """
    clusters = [[0]]
    for i in range(1, len(eigenvalues)):
        if eigenvalues[i] - eigenvalues[i - 1] < gap_tol:
            clusters[-1].append(i)
        else:
            clusters.append([i])
    return clusters


def retained_weight_fraction(eigenvalues: np.ndarray, beta: float,
                             full_dimension: int) -> float:
    """Lower bound on the Boltzmann weight captured by a truncated spectrum.

    Missing levels lie at or above the retained maximum, so their total
    weight is at most (dim - k) exp(-beta E_max). Exact (returns 1.0) when
    nothing is truncated.
    """
    w = np.asarray(eigenvalues, dtype=float)
    k = len(w)
    if k >= full_dimension:
        return 1.0
    shift = w.min()
    z_ret = np.exp(-beta * (w - shift)).sum()
    z_missing_max = (full_dimension - k) * np.exp(-beta * (w.max() - shift))
    return float(z_ret / (z_ret + z_missing_max))


def check_thermal_truncation(eigenvalues: np.ndarray, beta: float,
                             full_dimension: int,
                             minimum: float = RETAINED_WEIGHT_MIN) -> float:
    """Fail loudly when a truncated spectrum is thermally inadequate."""
    frac = retained_weight_fraction(eigenvalues, beta, full_dimension)
    if frac < minimum:
        raise TruncationError(
            f"retained spectrum holds only {frac:.6f} of the thermal weight "
            f"at beta={beta} (need > {minimum})")
    return frac
