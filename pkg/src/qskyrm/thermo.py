"""Thermal ensembles and the four-stroke Otto bookkeeping.

All temperatures are in units of J with k_B = 1, entered as beta = 1/T.
Thermalization strokes are instantaneous equilibrium assignments; driven
strokes are ideal-adiabatic (population preserving) unless the caller
supplies finite-rate transition matrices, in which case the wasted work of
each driven stroke is the relative-entropy expression evaluated here.
"""

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .errors import QskyrmError


@dataclass
class ThermalEnsemble:
    beta: float
    eigenvalues: np.ndarray
    populations: np.ndarray
    logZ: float


@dataclass
class CycleReport:
    """One full cycle: hot isochore, ramp out, cold isochore, ramp back."""

    w2: float
    w4: float
    q_in: float
    dF2: float
    dF4: float
    w_irr_2: float
    w_irr_4: float
    total_work: float
    efficiency: float
    carnot_bound: float
    skyrmion_count: int
    mode: str  # 'engine' when q_in > 0 and the output ratio is positive


def log_partition(eigenvalues, beta: float) -> float:
    """log sum exp(-beta E_n), stabilized by the spectrum minimum."""
    w = np.asarray(eigenvalues, dtype=float)
    if w.size == 0:
        raise ValueError("empty spectrum")
    if beta <= 0:
        raise ValueError(f"beta must be positive, got {beta}")
    shift = w.min()
    return float(np.log(np.exp(-beta * (w - shift)).sum()) - beta * shift)


def populations(eigenvalues, beta: float) -> np.ndarray:
    """Gibbs weights e^(-beta E - logZ); sums to 1 to machine precision."""
    w = np.asarray(eigenvalues, dtype=float)
    lz = log_partition(w, beta)
    p = np.exp(-beta * w - lz)
    return p / p.sum()  # absorb the last ulp so downstream sums are exact


def thermal_ensemble(eigenvalues, beta: float) -> ThermalEnsemble:
    w = np.asarray(eigenvalues, dtype=float)
    return ThermalEnsemble(beta=beta, eigenvalues=w,
                           populations=populations(w, beta),
                           logZ=log_partition(w, beta))


def free_energy_change(eigs_from, eigs_to, beta: float) -> float:
    """F_to - F_from at fixed beta, via the stabilized log partitions."""
    return -(log_partition(eigs_to, beta) - log_partition(eigs_from, beta)) / beta


def adiabatic_stroke_work(eigs_start, eigs_end, start_populations) -> float:
    """Work of an ideal population-preserving ramp between two spectra."""
    a = np.asarray(eigs_start, dtype=float)
    b = np.asarray(eigs_end, dtype=float)
    p = np.asarray(start_populations, dtype=float)
    if not (len(a) == len(b) == len(p)):
        raise ValueError(
            f"length mismatch: {len(a)} vs {len(b)} spectra, {len(p)} populations")
    return float(((b - a) * p).sum())


def heat_in(eigs_at_d0, beta_hot: float, beta_cold: float) -> float:
    """Heat drawn from the hot bath on the D0 isochore.

    Both population sets are evaluated on the same spectrum, so this is the
    energy gained when the cold-side Gibbs weights relax to the hot ones.
    """
    w = np.asarray(eigs_at_d0, dtype=float)
    return float((w * (populations(w, beta_hot) - populations(w, beta_cold))).sum())


def irreversible_work(p0, transition_entries, eigs_end, beta: float,
                      variant: str = "equilibrium-reference") -> float:
    """Wasted work of one finite-rate stroke from its transition matrix.

    Default variant measures the propagated populations against the
    instantaneous equilibrium q_n = e^(-beta E_n(end))/Z. For a thermal p0
    this equals <W> - dF identically, and is non-negative as a relative
    entropy. The 'paper-literal' variant puts the propagated populations
    themselves inside the logarithm, which reduces to the Shannon entropy
    gain (1/beta)[H(p_end) - H(p0)]; it vanishes whenever the transition
    matrix is a permutation and is kept for comparison only.
    """
    p0 = np.asarray(p0, dtype=float)
    T = np.asarray(transition_entries, dtype=float)
    w = np.asarray(eigs_end, dtype=float)
    if beta <= 0:
        raise ValueError(f"beta must be positive, got {beta}")
    p_end = T.T @ p0
    h0 = float((p0[p0 > 0] * np.log(p0[p0 > 0])).sum())
    if variant == "equilibrium-reference":
        lz = log_partition(w, beta)
        ln_q = -beta * w - lz  # strictly finite, no zero-log hazard
        return (h0 - float(p_end @ ln_q)) / beta
    if variant == "paper-literal":
        mask = p_end > 0
        if np.any(~mask & (p_end != 0)):
            raise QskyrmError("negative propagated population")
        h_end = float((p_end[mask] * np.log(p_end[mask])).sum())
        # h0 and h_end carry the sign of sum(p ln p); the entropy gain
        # H(p_end) - H(p0) is therefore h0 - h_end
        return (h0 - h_end) / beta
    raise ValueError(f"unknown variant {variant!r}")


def mean_work(p0, transition_entries, eigs_start, eigs_end) -> float:
    """<W> of a finite-rate stroke: final mean energy minus initial."""
    p0 = np.asarray(p0, dtype=float)
    p_end = np.asarray(transition_entries, dtype=float).T @ p0
    return float(p_end @ np.asarray(eigs_end, dtype=float)
                 - p0 @ np.asarray(eigs_start, dtype=float))


def efficiency(dF2: float, dF4: float, q_in: float) -> float:
    """Output-to-input ratio (dF2 + dF4) / q_in of the cycle."""
    if q_in == 0:
        raise ValueError("q_in is zero: degenerate cycle, efficiency undefined")
    return (dF2 + dF4) / q_in


def carnot_bound(t_hot: float, t_cold: float) -> float:
    if not (t_hot > 0 and t_cold > 0):
        raise ValueError("temperatures must be positive")
    return 1.0 - t_cold / t_hot


def run_otto_cycle(eigs_d0, eigs_d1, t_hot: float, t_cold: float,
                   skyrmion_count: int = 1,
                   stroke_transitions: Optional[Tuple[np.ndarray, np.ndarray]] = None,
                   stroke_iv_beta: str = "cold") -> CycleReport:
    """Execute the four strokes between the two spectra.

    stroke_transitions, when given, holds the full transition matrices of
    the outward (D0 -> D1) and return (D1 -> D0) ramps; their wasted work is
    then added to the total. The return stroke starts from the cold-bath
    state, so its wasted work uses the cold beta by default; stroke_iv_beta
    = 'hot' references it to the bath it is about to meet instead.
    skyrmion_count scales every extensive quantity (independent working
    bodies in parallel) and cancels in the efficiency.
    """
    if not (t_hot > t_cold > 0):
        raise ValueError(f"need t_hot > t_cold > 0, got {t_hot}, {t_cold}")
    if skyrmion_count < 1:
        raise ValueError("skyrmion_count must be a positive integer")
    beta_h, beta_l = 1.0 / t_hot, 1.0 / t_cold
    w0 = np.asarray(eigs_d0, dtype=float)
    w1 = np.asarray(eigs_d1, dtype=float)

    p_hot = populations(w0, beta_h)   # stroke i: hot isochore at D0
    w2 = adiabatic_stroke_work(w0, w1, p_hot)       # stroke ii: ramp out
    p_cold = populations(w1, beta_l)  # stroke iii: cold isochore at D1
    w4 = adiabatic_stroke_work(w1, w0, p_cold)      # stroke iv: ramp back

    dF2 = free_energy_change(w0, w1, beta_h)
    dF4 = free_energy_change(w1, w0, beta_l)
    q = heat_in(w0, beta_h, beta_l)

    w_irr_2 = w_irr_4 = 0.0
    if stroke_transitions is not None:
        if stroke_iv_beta not in ("cold", "hot"):
            raise ValueError(f"stroke_iv_beta must be 'cold' or 'hot', "
                             f"got {stroke_iv_beta!r}")
        t_out, t_back = stroke_transitions
        w_irr_2 = irreversible_work(p_hot, t_out, w1, beta_h)
        beta_iv = beta_l if stroke_iv_beta == "cold" else beta_h
        w_irr_4 = irreversible_work(p_cold, t_back, w0, beta_iv)

    total = w2 + w4 + w_irr_2 + w_irr_4
    eta = efficiency(dF2, dF4, q)
    k = int(skyrmion_count)
    mode = "engine" if (q > 0 and eta > 0) else "refrigerator"
    return CycleReport(
        w2=k * w2, w4=k * w4, q_in=k * q, dF2=k * dF2, dF4=k * dF4,
        w_irr_2=k * w_irr_2, w_irr_4=k * w_irr_4, total_work=k * total,
        efficiency=eta, carnot_bound=carnot_bound(t_hot, t_cold),
        skyrmion_count=k, mode=mode)
