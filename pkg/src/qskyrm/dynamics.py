"""Finite-rate driving of H(D) = A + D*B along a linear schedule.

Propagation uses piecewise-constant steps with the Hamiltonian sampled at
step midpoints (second order in the step). Each step applies exp(-i H dt)
through a Chebyshev expansion whose truncation tail is certified against a
factorial majorant, or through an exact per-step eigendecomposition at small
dimensions. Nothing here assumes a particular integrator accuracy: every
public result is re-run with half the step until the change falls below the
requested tolerance, and failure to converge is an error, not a warning.
"""

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.special import jv

from .errors import ConvergenceError, LevelCrossingError
from .spectral import EigenSystem, degenerate_clusters, diagonalize

DENSE_COLUMN_THRESHOLD = 48
SMALL_DENSE_DIM = 64


@dataclass(frozen=True)
class QuenchProtocol:
    """Linear ramp D(t) = d0 + (d1 - d0) * rate * t over t in [0, 1/rate]."""

    d0: float
    d1: float
    rate: float
    delta: float
    j: float = 1.0

    def __post_init__(self):
        if self.rate <= 0:
            raise ValueError(f"rate must be positive, got {self.rate}")

    @property
    def tau(self) -> float:
        return 1.0 / self.rate

    def value(self, t: float) -> float:
        """DMI value at time t; the endpoint lands on d1 exactly."""
        if t < 0 or t > self.tau:
            raise ValueError(f"t={t} outside [0, {self.tau}]")
        if t == self.tau:
            return self.d1
        return self.d0 + (self.d1 - self.d0) * self.rate * t


@dataclass(frozen=True)
class StepControl:
    """Step budget and tolerances for certified propagation."""

    initial_steps: int = 2000
    max_halvings: int = 5
    global_tol: float = 1e-6     # convergence of the certified result under halving
    step_tol: float = 1e-10      # per-step series truncation bound
    gap_floor: float = 1e-8      # minimum instantaneous gap for level tracking
    phase_tol: float = 1e-4      # halving convergence for phase integrals, radians
    dense_columns: int = DENSE_COLUMN_THRESHOLD


@dataclass
class PropagationResult:
    final_state: np.ndarray
    steps: int
    step_size: float
    unitarity_defect: float
    snapshot_times: Optional[np.ndarray] = None
    snapshots: Optional[List[np.ndarray]] = None


@dataclass
class TransitionMatrix:
    """Level-to-level transition probabilities for one protocol.

    entries[m, n] is the probability of starting in eigenlevel m of H(0) and
    landing in eigenlevel n of H(tau). Rows cover the retained initial levels
    (all of them unless restricted), columns always cover the full final
    spectrum. Individual eigenvectors inside a degenerate cluster carry an
    arbitrary gauge, so level-resolved statements are only meaningful after
    summing over the clusters reported here.
    """

    entries: np.ndarray
    initial_eigenvalues: np.ndarray
    final_eigenvalues: np.ndarray
    initial_clusters: List[List[int]]
    final_clusters: List[List[int]]
    initial_levels: np.ndarray  # global indices of retained rows
    steps: int
    max_unitarity_defect: float

    @property
    def restricted(self) -> bool:
        return self.entries.shape[0] < self.entries.shape[1]

    def cluster_summed(self) -> np.ndarray:
        """Aggregate entries over initial and final degenerate clusters."""
        nI = len(self.initial_clusters)
        nF = len(self.final_clusters)
        out = np.zeros((nI, nF))
        for a, ci in enumerate(self.initial_clusters):
            rows = self.entries[ci, :]  # retained rows are indices 0..k-1
            for b, cf in enumerate(self.final_clusters):
                out[a, b] = rows[:, cf].sum()
        return out

    def off_diagonal_max(self, pairing: str = "index") -> float:
        """Largest per-state probability landing off the diagonal.

        Each cluster row of the summed matrix is divided by its member
        count, so the result is an escaped-probability per initial state,
        directly comparable across cluster sizes. pairing='index' matches an
        initial cluster to every final cluster sharing one of its level
        indices; pairing='best' lets each initial cluster claim its single
        heaviest final cluster (the most lenient reading of diagonal
        dominance, robust to level reordering along the ramp).
        """
        summed = self.cluster_summed()
        worst = 0.0
        for a, ci in enumerate(self.initial_clusters):
            row = summed[a]
            if pairing == "best":
                off = row.sum() - row.max()
            elif pairing == "index":
                members = set(ci)
                captured = sum(
                    row[b] for b, cf in enumerate(self.final_clusters)
                    if members & set(cf))
                off = row.sum() - captured
            else:
                raise ValueError(f"unknown pairing {pairing!r}")
            worst = max(worst, off / len(ci))
        return worst


@dataclass
class PhaseDecomposition:
    dynamical: float
    geometric: float
    propagated_phase: float
    residual_infidelity: float
    min_gap: float
    steps: int


@dataclass
class PhaseTrajectory:
    """Accumulated phases sampled at interior times of one ramp."""

    times: np.ndarray
    dmi_values: np.ndarray
    dynamical: np.ndarray
    geometric: np.ndarray
    propagated_phase: np.ndarray
    residual_infidelity: np.ndarray
    min_gap: float
    steps: int


def spectral_interval(A, B, d_values: Sequence[float]) -> Tuple[float, float]:
    """Gershgorin interval covering spec(A + d*B) for all sampled d.

    The bound is evaluated at the extreme drive values; since H is affine in
    d the union over the sampled endpoints covers the whole ramp.
    """
    lo, hi = math.inf, -math.inf
    for d in (min(d_values), max(d_values)):
        H = (A + d * B).tocsr()
        habs = abs(H)
        rows = np.asarray(habs.sum(axis=1)).ravel()
        diag = H.diagonal().real
        rad = rows - np.abs(diag)
        lo = min(lo, float((diag - rad).min()))
        hi = max(hi, float((diag + rad).max()))
    return lo, hi


def chebyshev_order(z: float, tol: float) -> int:
    """Smallest expansion order with certified tail below tol.

    Uses |J_k(z)| <= (z/2)^k / k! and bounds the tail by a geometric series
    once the term ratio (z/2)/(m+2) drops under 1/2.
    """
    m = max(4, int(z))
    while True:
        m += 1
        t = (z / 2.0) ** (m + 1) / math.factorial(m + 1)
        q = (z / 2.0) / (m + 2)
        if q < 0.5 and 2.0 * t / (1.0 - q) <= tol:
            return m
        if m > 2000:
            raise ConvergenceError(f"chebyshev order diverged at z={z}")


def _chebyshev_step(H, block, dt, lo, hi, tol, dense):
    """Apply exp(-i H dt) to the columns of block, tail-certified."""
    c = 0.5 * (hi + lo)
    a = 0.5 * (hi - lo) * 1.0001 + 1e-14  # inflate so spec(H) is interior
    z = a * dt
    m = chebyshev_order(z, tol)
    ks = np.arange(m + 1)
    coef = ((-1j) ** ks) * jv(ks, z)
    coef[1:] *= 2.0
    Hop = H.toarray() if (dense and sp.issparse(H)) else H

    def apply(x):
        return (Hop @ x - c * x) / a

    t0 = block
    t1 = apply(block)
    acc = coef[0] * t0 + coef[1] * t1
    for k in range(2, m + 1):
        t0, t1 = t1, 2.0 * apply(t1) - t0
        acc += coef[k] * t1
    return np.exp(-1j * c * dt) * acc


def _run_steps(A, B, protocol: QuenchProtocol, nsteps: int, block: np.ndarray,
               control: StepControl, snapshot_steps: Optional[Sequence[int]] = None):
    """Midpoint-sampled piecewise-constant sweep over the whole ramp."""
    dim = A.shape[0]
    dt = protocol.tau / nsteps
    slope = (protocol.d1 - protocol.d0) * protocol.rate
    cur = np.ascontiguousarray(block, dtype=complex)
    single = cur.ndim == 1
    if single:
        cur = cur[:, None]
    use_eigh = dim <= SMALL_DENSE_DIM
    if not use_eigh:
        lo, hi = spectral_interval(A, B, [protocol.d0, protocol.d1])
        dense = cur.shape[1] >= control.dense_columns
        Ad = A.toarray() if dense else A.tocsr()
        Bd = B.toarray() if dense else B.tocsr()
    snaps = []
    want = set(snapshot_steps or ())
    if 0 in want:
        snaps.append(cur[:, 0].copy() if single else cur.copy())
    for k in range(nsteps):
        dm = protocol.d0 + slope * (k + 0.5) * dt
        if use_eigh:
            Hd = (A + dm * B).toarray()
            w, v = sla.eigh(Hd)
            cur = v @ (np.exp(-1j * w * dt)[:, None] * (v.conj().T @ cur))
        else:
            H = Ad + dm * Bd
            cur = _chebyshev_step(H, cur, dt, lo, hi, control.step_tol, dense)
        if (k + 1) in want:
            snaps.append(cur[:, 0].copy() if single else cur.copy())
    if single:
        cur = cur[:, 0]
    return cur, snaps


def _norm_defect(state: np.ndarray) -> float:
    if state.ndim == 1:
        return abs(float(np.linalg.norm(state)) - 1.0)
    return float(np.abs(np.linalg.norm(state, axis=0) - 1.0).max())


def propagate(initial: np.ndarray, A, B, protocol: QuenchProtocol,
              control: StepControl = StepControl(),
              snapshot_times: Optional[Sequence[float]] = None) -> PropagationResult:
    """Evolve a normalized state across the ramp with certified convergence.

    The run is repeated with doubled step counts until the final state moves
    by less than control.global_tol in norm; the converged run is returned.
    Snapshot times are rounded to the nearest step boundary of each run.
    """
    initial = np.asarray(initial, dtype=complex)
    nrm = float(np.linalg.norm(initial))
    if abs(nrm - 1.0) > 1e-10:
        raise ValueError(f"initial state norm {nrm} is not 1")

    def snap_steps(nsteps):
        if snapshot_times is None:
            return None
        dt = protocol.tau / nsteps
        return [int(round(t / dt)) for t in snapshot_times]

    nsteps = control.initial_steps
    prev, _ = _run_steps(A, B, protocol, nsteps, initial, control)
    for _ in range(control.max_halvings):
        nsteps *= 2
        cur, snaps = _run_steps(A, B, protocol, nsteps, initial, control,
                                snap_steps(nsteps))
        diff = float(np.linalg.norm(cur - prev))
        if diff < control.global_tol:
            dt = protocol.tau / nsteps
            times = None
            if snapshot_times is not None:
                times = np.array([s * dt for s in snap_steps(nsteps)])
            return PropagationResult(
                final_state=cur, steps=nsteps, step_size=dt,
                unitarity_defect=_norm_defect(cur),
                snapshot_times=times, snapshots=snaps or None)
        prev = cur
    raise ConvergenceError(
        f"final state still moving {diff:.2e} after {nsteps} steps")


def transition_matrix(A, B, protocol: QuenchProtocol,
                      control: StepControl = StepControl(),
                      initial_levels: Optional[int] = None,
                      snapshot_times: Optional[Sequence[float]] = None):
    """Transition probabilities between instantaneous eigenbases.

    Every retained initial eigenstate is propagated as one column of a block;
    the block is projected on the final eigenbasis and squared. Convergence
    is certified on the probabilities themselves: per-column global phases,
    which dominate the raw state error at long ramp times, drop out here.
    When initial_levels restricts the rows, the cut is widened to the nearest
    degenerate-cluster boundary so no cluster is split.

    Returns the TransitionMatrix, or (TransitionMatrix, snapshot list) when
    snapshot_times is given; each snapshot holds the propagated block at that
    time for downstream population analysis.
    """
    start = diagonalize(A + protocol.d0 * B)
    final = diagonalize(A + protocol.d1 * B)
    clusters0 = degenerate_clusters(start.eigenvalues)
    if initial_levels is None:
        keep = start.k
    else:
        keep = int(initial_levels)
        for cl in clusters0:
            if cl[0] < keep <= cl[-1]:
                keep = cl[-1] + 1  # widen to the cluster boundary
    levels = np.arange(keep)
    block0 = start.eigenvectors[:, :keep].astype(complex)
    init_clusters = [cl for cl in clusters0 if cl[0] < keep]

    def probabilities(block):
        return np.abs(final.eigenvectors.conj().T @ block).T ** 2

    nsteps = control.initial_steps
    blk, _ = _run_steps(A, B, protocol, nsteps, block0, control)
    prev = probabilities(blk)
    for _ in range(control.max_halvings):
        nsteps *= 2
        snap_steps = None
        if snapshot_times is not None:
            dt = protocol.tau / nsteps
            snap_steps = [int(round(t / dt)) for t in snapshot_times]
        blk, snaps = _run_steps(A, B, protocol, nsteps, block0, control, snap_steps)
        cur = probabilities(blk)
        diff = float(np.abs(cur - prev).max())
        if diff < control.global_tol:
            tm = TransitionMatrix(
                entries=cur,
                initial_eigenvalues=start.eigenvalues[:keep],
                final_eigenvalues=final.eigenvalues,
                initial_clusters=init_clusters,
                final_clusters=degenerate_clusters(final.eigenvalues),
                initial_levels=levels,
                steps=nsteps,
                max_unitarity_defect=_norm_defect(blk),
            )
            if snapshot_times is not None:
                return tm, snaps
            return tm
        prev = cur
    raise ConvergenceError(
        f"transition probabilities still moving {diff:.2e} after {nsteps} steps")


def stochasticity_defects(entries: np.ndarray) -> Tuple[float, float]:
    """(row, column) deviations of the summed probabilities from 1."""
    row = float(np.abs(entries.sum(axis=1) - 1.0).max())
    col = float(np.abs(entries.sum(axis=0) - 1.0).max())
    return row, col


def _canonical_gauge(v: np.ndarray) -> np.ndarray:
    """Rephase so the largest-magnitude component is real-positive."""
    i = int(np.argmax(np.abs(v)))
    ph = v[i] / abs(v[i])
    return v / ph


def _eigenpair_window(H, level: int, dim: int):
    """Eigenvalues around `level` plus that level's vector."""
    if dim <= 128:
        w, v = sla.eigh(H.toarray() if sp.issparse(H) else H)
        return w, v[:, level]
    k = min(dim - 1, level + 3)
    es = diagonalize(H, mode="lowest", k=k)
    return es.eigenvalues, es.eigenvectors[:, level]


def _phase_sweep(A, B, protocol, level, control, nsteps, snap_steps):
    """Track one eigenlevel across the ramp on an (nsteps+1)-point grid.

    Consecutive eigenvectors are parallel transported (successive overlaps
    made real-positive), so interior gauge choices cancel telescopically and
    the accumulated discrete Berry sum up to any grid point collapses into
    the mismatch angle between the transported frame and the canonical gauge
    (largest component real-positive) at that point. Returns, per requested
    snapshot step: partial dynamical integral (trapezoid), geometric phase,
    and the canonically gauged eigenvector; plus the smallest gap met.
    """
    dim = A.shape[0]
    dt = protocol.tau / nsteps
    slope = (protocol.d1 - protocol.d0) * protocol.rate
    want = set(snap_steps)
    min_gap = math.inf
    u_prev = None
    u0 = None
    dyn_acc = 0.0
    e_prev = None
    out = {}
    for k in range(nsteps + 1):
        d = protocol.d0 + slope * min(k * dt, protocol.tau)
        H = A + d * B
        w, vk = _eigenpair_window(H, level, dim)
        e_k = w[level]
        gap = math.inf
        if level > 0:
            gap = min(gap, w[level] - w[level - 1])
        if level + 1 < len(w):
            gap = min(gap, w[level + 1] - w[level])
        if gap < control.gap_floor:
            raise LevelCrossingError(
                f"gap {gap:.3e} at t={k * dt:.4f} below floor {control.gap_floor}")
        min_gap = min(min_gap, gap)
        if u_prev is None:
            vk = _canonical_gauge(vk)
            u0 = vk
        else:
            ov = np.vdot(u_prev, vk)
            if abs(ov) < 1e-12:
                raise LevelCrossingError(
                    f"lost track of level {level} at t={k * dt:.4f}: "
                    f"consecutive overlap {abs(ov):.1e}")
            vk = vk * (abs(ov) / ov)  # parallel transport
            dyn_acc += -0.5 * dt * (e_prev + e_k)  # running trapezoid
        u_prev, e_prev = vk, e_k
        if k in want:
            u_can = _canonical_gauge(vk)
            geo = -float(np.angle(np.vdot(vk, u_can)))
            out[k] = (dyn_acc, geo, u_can)
    return out, u0, min_gap


def phase_trajectory(A, B, protocol: QuenchProtocol, level: int = 0,
                     control: StepControl = StepControl(),
                     snapshot_times: Optional[Sequence[float]] = None
                     ) -> PhaseTrajectory:
    """Dynamical/geometric split of one tracked eigenlevel along the ramp.

    Snapshot times round to the nearest step boundary; the ramp endpoint is
    always included. The grid is halved until the endpoint phases move less
    than control.phase_tol, then a certified propagation (same control) is
    compared against the phase-corrected instantaneous eigenstate at every
    snapshot. Residual infidelity is 1 - |<E_n(t)|psi(t)>|^2.
    """
    dim = A.shape[0]
    if not (0 <= level < dim):
        raise ValueError(f"level {level} outside spectrum")
    times = [protocol.tau] if snapshot_times is None else list(snapshot_times)
    if not math.isclose(times[-1], protocol.tau, rel_tol=0, abs_tol=1e-12):
        times = times + [protocol.tau]

    def snap_steps(nsteps):
        return [int(round(t / (protocol.tau / nsteps))) for t in times]

    nsteps = control.initial_steps
    out, _, _ = _phase_sweep(A, B, protocol, level, control, nsteps,
                             snap_steps(nsteps))
    prev_end = out[nsteps]
    for _ in range(control.max_halvings):
        nsteps *= 2
        steps_k = snap_steps(nsteps)
        out, u0, min_gap = _phase_sweep(A, B, protocol, level, control,
                                        nsteps, steps_k)
        end = out[nsteps]
        d_dyn = abs(end[0] - prev_end[0])
        d_geo = abs(_wrap_angle(end[1] - prev_end[1]))
        if d_dyn < control.phase_tol and d_geo < control.phase_tol:
            prop = propagate(u0, A, B, protocol, control, snapshot_times=times)
            dt = protocol.tau / nsteps
            n_snap = len(times)
            dyn = np.empty(n_snap)
            geo = np.empty(n_snap)
            prop_phase = np.empty(n_snap)
            resid = np.empty(n_snap)
            for i, s in enumerate(steps_k):
                dyn_i, geo_i, u_can = out[s]
                ov = np.vdot(u_can, prop.snapshots[i])
                dyn[i] = dyn_i
                geo[i] = _wrap_angle(geo_i)
                prop_phase[i] = float(np.angle(ov))
                resid[i] = float(max(0.0, 1.0 - abs(ov) ** 2))
            t_arr = np.array([s * dt for s in steps_k])
            slope = (protocol.d1 - protocol.d0) * protocol.rate
            return PhaseTrajectory(
                times=t_arr,
                dmi_values=protocol.d0 + slope * t_arr,
                dynamical=dyn, geometric=geo, propagated_phase=prop_phase,
                residual_infidelity=resid, min_gap=min_gap, steps=nsteps)
        prev_end = end
    raise ConvergenceError(
        f"phase integrals still moving (dyn {d_dyn:.2e}, geo {d_geo:.2e}) "
        f"after {nsteps} steps")


def phase_decomposition(A, B, protocol: QuenchProtocol, level: int = 0,
                        control: StepControl = StepControl()) -> PhaseDecomposition:
    """Endpoint phase split of an adiabatically transported eigenstate.

    The dynamical part is -integral of E_n(t) dt on the step grid; the
    geometric part is the discrete Berry sum with canonical endpoint gauges;
    the propagated phase and residual infidelity compare the actual driven
    state against the tracked eigenstate at t = tau.
    """
    traj = phase_trajectory(A, B, protocol, level, control)
    return PhaseDecomposition(
        dynamical=float(traj.dynamical[-1]),
        geometric=float(traj.geometric[-1]),
        propagated_phase=float(traj.propagated_phase[-1]),
        residual_infidelity=float(traj.residual_infidelity[-1]),
        min_gap=traj.min_gap,
        steps=traj.steps)


def _wrap_angle(x: float) -> float:
    """Map an angle to (-pi, pi]."""
    return float(math.remainder(x, 2.0 * math.pi))
