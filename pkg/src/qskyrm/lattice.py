"""Square-lattice spin-1/2 model with in-plane exchange, z anisotropy and DMI.

The quantum region is an n x n grid embedded in an (n+2) x (n+2) frame whose
outer ring is a classical ferromagnetic background frozen to (0, 0, 1/2).
Spin operators are S = sigma/2 with hbar = 1; all couplings are measured in
units of the exchange J. The Hamiltonian is

    H = -J sum_<ij> (Sx_i Sx_j + Sy_i Sy_j) - Delta sum_<ij> Sz_i Sz_j
        - D sum_<ij> (e_ij x z) . (S_i x S_j)

over nearest-neighbor bonds of the full frame, excluding purely classical
bonds (constants). Bonds touching the boundary fold into single-site linear
terms. Everything D-independent is collected in a matrix A and the
DMI-proportional rest in B, so H(D) = A + D * B.
"""

from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np
import scipy.sparse as sp

from .errors import DimensionCapError, LatticeError

SX = sp.csr_matrix(np.array([[0.0, 0.5], [0.5, 0.0]], dtype=complex))
SY = sp.csr_matrix(np.array([[0.0, -0.5j], [0.5j, 0.0]], dtype=complex))
SZ = sp.csr_matrix(np.array([[0.5, 0.0], [0.0, -0.5]], dtype=complex))
ID2 = sp.identity(2, dtype=complex, format="csr")

# boundary ring spins: classical, fully polarized along +z, length 1/2
CLASSICAL_SPIN = np.array([0.0, 0.0, 0.5])

DEFAULT_DIM_CAP = 4096

Coord = Tuple[int, int]


@dataclass(frozen=True)
class LatticeSpec:
    """Geometry request: quantum grid side n, with or without the frame."""

    n: int
    boundary: bool = True

    def __post_init__(self):
        if self.n < 1:
            raise LatticeError(f"grid side must be >= 1, got {self.n}")


@dataclass(frozen=True)
class ModelParams:
    """Couplings in units of J. `dmi` is the tunable drive parameter."""

    delta: float
    dmi: float
    j: float = 1.0


@dataclass
class Bond:
    """Directed nearest-neighbor bond, pointing +x or +y."""

    kind_i: str  # 'q' or 'c'
    i: int
    kind_j: str
    j: int
    direction: str  # 'x' or 'y'


@dataclass
class Lattice:
    spec: LatticeSpec
    quantum_sites: List[Coord] = field(default_factory=list)
    classical_sites: List[Coord] = field(default_factory=list)
    bonds: List[Bond] = field(default_factory=list)
    triangles: List[Tuple[Coord, Coord, Coord]] = field(default_factory=list)

    @property
    def n_quantum(self) -> int:
        return len(self.quantum_sites)

    @property
    def dimension(self) -> int:
        return 2 ** self.n_quantum


def build_lattice(spec: LatticeSpec) -> Lattice:
    """Enumerate sites, bonds and triangulation for the requested geometry.

    Quantum sites are row-major over the inner grid: index = (y-1)*n + (x-1).
    Bonds sweep +x then +y from every frame site; classical-classical pairs
    are dropped. Each plaquette of the frame splits into two CCW triangles.
    """
    n = spec.n
    qs = [(x, y) for y in range(1, n + 1) for x in range(1, n + 1)]
    if spec.boundary:
        lo, hi = 0, n + 1
        cs = [(x, y) for y in range(lo, hi + 1) for x in range(lo, hi + 1)
              if not (1 <= x <= n and 1 <= y <= n)]
    else:
        lo, hi = 1, n
        cs = []
    qidx = {c: i for i, c in enumerate(qs)}
    cidx = {c: i for i, c in enumerate(cs)}

    def tag(c):
        return ("q", qidx[c]) if c in qidx else ("c", cidx[c])

    bonds = []
    for y in range(lo, hi + 1):
        for x in range(lo, hi + 1):
            for dx, dy, d in ((1, 0, "x"), (0, 1, "y")):
                b = (x + dx, y + dy)
                if not (lo <= b[0] <= hi and lo <= b[1] <= hi):
                    continue
                ka, ia = tag((x, y))
                kb, ib = tag(b)
                if ka == "c" and kb == "c":
                    continue  # constant energy offset, dropped
                bonds.append(Bond(ka, ia, kb, ib, d))

    tris = []
    for y in range(lo, hi):
        for x in range(lo, hi):
            tris.append(((x, y), (x + 1, y), (x + 1, y + 1)))
            tris.append(((x, y), (x + 1, y + 1), (x, y + 1)))

    return Lattice(spec=spec, quantum_sites=qs, classical_sites=cs,
                   bonds=bonds, triangles=tris)


def dmi_axis(direction: str) -> np.ndarray:
    """DMI vector e_ij x z for a bond along +x or +y."""
    if direction == "x":
        return np.array([0.0, -1.0, 0.0])
    if direction == "y":
        return np.array([1.0, 0.0, 0.0])
    raise LatticeError(f"unknown bond direction {direction!r}")


def site_operator(op: sp.spmatrix, i: int, n_sites: int) -> sp.csr_matrix:
    """Embed a single-spin operator at site i of an n_sites tensor product."""
    mats = [ID2] * n_sites
    mats[i] = op
    out = mats[0]
    for m in mats[1:]:
        out = sp.kron(out, m, format="csr")
    return out.tocsr()


def hamiltonian_parts(lattice: Lattice, delta: float, j: float = 1.0,
                      dim_cap: int = DEFAULT_DIM_CAP):
    """Return sparse (A, B) with H(D) = A + D * B.

    Quantum-quantum bonds carry the full two-spin terms. A bond with one
    classical end folds to linear terms on the quantum site: the boundary
    spin contributes Sz = 1/2 and zero in-plane components, so the exchange
    piece survives only through -Delta/2 * Sz_q, and the DMI piece keeps the
    in-plane component whose sign tracks the bond orientation.
    """
    N = lattice.n_quantum
    dim = 2 ** N
    if dim > dim_cap:
        raise DimensionCapError(
            f"2^{N} = {dim} exceeds cap {dim_cap}; raise dim_cap to force")
    sx = [site_operator(SX, i, N) for i in range(N)]
    sy = [site_operator(SY, i, N) for i in range(N)]
    sz = [site_operator(SZ, i, N) for i in range(N)]
    A = sp.csr_matrix((dim, dim), dtype=complex)
    B = sp.csr_matrix((dim, dim), dtype=complex)
    for b in lattice.bonds:
        if b.kind_i == "q" and b.kind_j == "q":
            A = A - j * (sx[b.i] @ sx[b.j] + sy[b.i] @ sy[b.j]) \
                  - delta * (sz[b.i] @ sz[b.j])
            if b.direction == "x":
                # -D (e_x x z).(S_i x S_j) = +D (Sz_i Sx_j - Sx_i Sz_j)
                B = B + (sz[b.i] @ sx[b.j] - sx[b.i] @ sz[b.j])
            else:
                # -D (e_y x z).(S_i x S_j) = -D (Sy_i Sz_j - Sz_i Sy_j)
                B = B - (sy[b.i] @ sz[b.j] - sz[b.i] @ sy[b.j])
        else:
            if b.kind_i == "q":
                iq, classical_first = b.i, False
            else:
                iq, classical_first = b.j, True
            A = A - delta * 0.5 * sz[iq]
            # in-plane DMI remnant flips sign with bond orientation
            sign = 0.5 if classical_first else -0.5
            B = B + sign * (sx[iq] if b.direction == "x" else sy[iq])
    return A.tocsr(), B.tocsr()


def boundary_terms(lattice: Lattice, delta: float):
    """Accumulated linear coefficients (cx, cy, cz) per quantum site.

    cz collects the anisotropy folds; (cx, cy) collect the DMI folds and are
    reported per unit D. Useful for inspecting how the frame acts on the
    edge of the quantum region.
    """
    N = lattice.n_quantum
    coef = np.zeros((N, 3))
    for b in lattice.bonds:
        if b.kind_i == "q" and b.kind_j == "q":
            continue
        if b.kind_i == "q":
            iq, classical_first = b.i, False
        else:
            iq, classical_first = b.j, True
        coef[iq, 2] += -delta * 0.5
        sign = 0.5 if classical_first else -0.5
        coef[iq, 0 if b.direction == "x" else 1] += sign
    return coef


def build_hamiltonian(lattice: Lattice, params: ModelParams,
                      dim_cap: int = DEFAULT_DIM_CAP) -> sp.csr_matrix:
    """Sparse Hamiltonian at fixed couplings."""
    A, B = hamiltonian_parts(lattice, params.delta, params.j, dim_cap)
    return (A + params.dmi * B).tocsr()
