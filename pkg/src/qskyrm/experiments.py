"""Experiment orchestration: grids, worker pool, CSV/manifest persistence.

Each experiment kind maps a config onto a list of independent grid points.
Points run on a thread pool but are assembled strictly in grid order, and
every number a point produces is a pure function of the config, so output
bytes do not depend on the worker count. A failing point becomes an error
row plus a manifest entry instead of aborting the sweep, unless strict mode
is on. Spectra are served through a write-once disk cache shared by all
experiments; a second identical run performs no new diagonalizations.
"""

import csv
import hashlib
import json
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
import yaml

from . import cache as cache_mod
from . import thermo
from ._version import __version__
from .config import ExperimentConfig
from .dynamics import (QuenchProtocol, StepControl, phase_trajectory,
                       stochasticity_defects, transition_matrix)
from .errors import ConfigError, QskyrmError
from .lattice import LatticeSpec, build_lattice, hamiltonian_parts
from .spectral import EigenSystem, degenerate_clusters, diagonalize, spin_texture
from .thermo import populations
from .topology import topological_index, winding_parameter

NAN = float("nan")


class SpectrumStore:
    """Thread-safe provider of Hamiltonian parts and cached eigensystems."""

    def __init__(self, cache_dir=None, use_cache: bool = True):
        self.cache_dir = Path(cache_dir) if cache_dir else cache_mod.default_cache_dir()
        self.use_cache = use_cache
        self.computed = 0
        self.cache_hits = 0
        self._parts: Dict[tuple, tuple] = {}
        self._mem: Dict[str, EigenSystem] = {}
        self._lock = threading.Lock()

    def parts(self, n: int, delta: float, boundary: bool = True,
              dim_cap: int = 4096):
        key = (n, float(delta), boundary, dim_cap)
        with self._lock:
            hit = self._parts.get(key)
        if hit is not None:
            return hit
        lat = build_lattice(LatticeSpec(n=n, boundary=boundary))
        ab = hamiltonian_parts(lat, delta, dim_cap=dim_cap)
        with self._lock:
            return self._parts.setdefault(key, ab)

    def eigensystem(self, n: int, delta: float, dmi: float,
                    boundary: bool = True, dim_cap: int = 4096,
                    dense_cap: int = 4096) -> EigenSystem:
        key = cache_mod.cache_key(n, delta, dmi, boundary, mode="full")
        with self._lock:
            es = self._mem.get(key)
        if es is not None:
            return es
        if self.use_cache:
            es = cache_mod.load_spectrum(self.cache_dir, key)
            if es is not None:
                with self._lock:
                    self.cache_hits += 1
                    self._mem[key] = es
                return es
        A, B = self.parts(n, delta, boundary, dim_cap)
        es = diagonalize(A + dmi * B, mode="full", dense_cap=dense_cap)
        with self._lock:
            self.computed += 1
            self._mem[key] = es
        if self.use_cache:
            cache_mod.save_spectrum(self.cache_dir, key, es)
        return es


@dataclass
class PointOutcome:
    index: int
    params: dict
    rows: List[list] = field(default_factory=list)
    extra_files: List[str] = field(default_factory=list)
    error: Optional[str] = None
    seconds: float = 0.0


def _step_control(cfg: ExperimentConfig) -> StepControl:
    num = cfg.numeric
    return StepControl(
        initial_steps=num.initial_steps, max_halvings=num.max_halvings,
        global_tol=num.global_tol, step_tol=num.step_tol,
        gap_floor=num.gap_floor, phase_tol=num.phase_tol,
        dense_columns=num.dense_columns)


def config_hash(cfg: ExperimentConfig) -> str:
    blob = json.dumps(cfg.model_dump(), sort_keys=True)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    return str(x)


# ---------------------------------------------------------------- experiments

def _points_spectrum(cfg):
    # plain floats so params serialize into the YAML manifest
    return [{"delta": float(d), "dmi": float(v)}
            for d in cfg.model.effective_deltas()
            for v in cfg.model.dmi_points()]


def _run_spectrum(store, cfg, params):
    es = store.eigensystem(cfg.model.n, params["delta"], params["dmi"],
                           cfg.model.boundary, cfg.numeric.dim_cap,
                           cfg.numeric.dense_cap)
    w = es.eigenvalues
    head = [w[i] if i < es.k else NAN for i in range(8)]
    gap = w[1] - w[0] if es.k > 1 else NAN
    return [[params["delta"], params["dmi"], es.dimension, w[0], gap, *head]]


def _run_topology(store, cfg, params):
    es = store.eigensystem(cfg.model.n, params["delta"], params["dmi"],
                           cfg.model.boundary, cfg.numeric.dim_cap,
                           cfg.numeric.dense_cap)
    ground_cluster = degenerate_clusters(es.eigenvalues)[0]
    if len(ground_cluster) > 1:
        raise QskyrmError(
            f"ground state {len(ground_cluster)}-fold degenerate; "
            "texture gauge-ambiguous")
    lat = build_lattice(LatticeSpec(n=cfg.model.n, boundary=cfg.model.boundary))
    field_ = spin_texture(es.eigenvectors[:, 0], lat)
    c = topological_index(field_)
    q = winding_parameter(field_)
    return [[params["delta"], params["dmi"], c, q, es.eigenvalues[0]]]


def _snapshot_grid(cfg) -> np.ndarray:
    d0, d1 = cfg.protocol.d0, cfg.protocol.d1
    pts = cfg.model.dmi_points()
    lo, hi = min(d0, d1), max(d0, d1)
    return np.asarray([d for d in pts if lo - 1e-12 <= d <= hi + 1e-12])


def _run_irrwork(store, cfg, params):
    delta, rate = params["delta"], params["rate"]
    n, boundary = cfg.model.n, cfg.model.boundary
    beta = cfg.thermal.beta
    A, B = store.parts(n, delta, boundary, cfg.numeric.dim_cap)
    proto = QuenchProtocol(d0=cfg.protocol.d0, d1=cfg.protocol.d1,
                           rate=rate, delta=delta)
    grid = _snapshot_grid(cfg)
    if grid.size == 0:
        raise ConfigError("dmi grid has no points inside [d0, d1]")
    span = proto.d1 - proto.d0
    times = [(d - proto.d0) / (span * rate) for d in grid]
    tm, snaps = transition_matrix(A, B, proto, _step_control(cfg),
                                  snapshot_times=times)
    es0 = store.eigensystem(n, delta, proto.d0, boundary,
                            cfg.numeric.dim_cap, cfg.numeric.dense_cap)
    p0 = populations(es0.eigenvalues, beta)
    rows = []
    for d_end, blk in zip(grid, snaps):
        es_d = store.eigensystem(n, delta, float(d_end), boundary,
                                 cfg.numeric.dim_cap, cfg.numeric.dense_cap)
        probs = np.abs(es_d.eigenvectors.conj().T @ blk).T ** 2
        w_def = thermo.irreversible_work(p0, probs, es_d.eigenvalues, beta)
        w_lit = thermo.irreversible_work(p0, probs, es_d.eigenvalues, beta,
                                         variant="paper-literal")
        rows.append([delta, float(d_end), rate, beta, w_def, w_lit, tm.steps])
    return rows


def _run_transition(store, cfg, params, out_dir, index):
    delta, rate = params["delta"], params["rate"]
    A, B = store.parts(cfg.model.n, delta, cfg.model.boundary,
                       cfg.numeric.dim_cap)
    proto = QuenchProtocol(d0=cfg.protocol.d0, d1=cfg.protocol.d1,
                           rate=rate, delta=delta)
    tm = transition_matrix(A, B, proto, _step_control(cfg),
                           initial_levels=cfg.numeric.initial_levels)
    row_def, col_def = stochasticity_defects(tm.entries)
    if tm.restricted:
        col_def = NAN  # columns only close over the full initial basis
    extra = []
    if "matrix" in cfg.output.formats:
        name = f"matrix_{index:04d}.csv"
        with open(Path(out_dir) / name, "w", newline="", encoding="utf-8") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["m", "n", "p"])
            for m in range(tm.entries.shape[0]):
                for nn in range(tm.entries.shape[1]):
                    wr.writerow([m, nn, _fmt(tm.entries[m, nn])])
        extra.append(name)
    row = [delta, proto.d0, proto.d1, rate, tm.entries.shape[0], tm.steps,
           row_def, col_def, tm.off_diagonal_max("index"),
           tm.off_diagonal_max("best"), tm.max_unitarity_defect]
    return [row], extra


def _run_phases(store, cfg, params):
    delta, rate = params["delta"], params["rate"]
    A, B = store.parts(cfg.model.n, delta, cfg.model.boundary,
                       cfg.numeric.dim_cap)
    proto = QuenchProtocol(d0=cfg.protocol.d0, d1=cfg.protocol.d1,
                           rate=rate, delta=delta)
    grid = _snapshot_grid(cfg)
    span = proto.d1 - proto.d0
    times = [(d - proto.d0) / (span * rate) for d in grid]
    traj = phase_trajectory(A, B, proto, cfg.numeric.level,
                            _step_control(cfg), snapshot_times=times)
    rows = []
    for i in range(len(traj.times)):
        rows.append([delta, rate, cfg.numeric.level, traj.times[i],
                     traj.dmi_values[i], traj.dynamical[i], traj.geometric[i],
                     traj.propagated_phase[i], traj.residual_infidelity[i],
                     traj.min_gap, traj.steps])
    return rows


def _run_efficiency(store, cfg, params):
    delta, t_hot = params["delta"], params["t_hot"]
    th = cfg.thermal
    es0 = store.eigensystem(cfg.model.n, delta, cfg.protocol.d0,
                            cfg.model.boundary, cfg.numeric.dim_cap,
                            cfg.numeric.dense_cap)
    es1 = store.eigensystem(cfg.model.n, delta, cfg.protocol.d1,
                            cfg.model.boundary, cfg.numeric.dim_cap,
                            cfg.numeric.dense_cap)
    rep = thermo.run_otto_cycle(es0.eigenvalues, es1.eigenvalues, t_hot,
                                th.t_cold, th.skyrmion_count)
    return [[delta, cfg.protocol.d0, cfg.protocol.d1, th.t_cold, t_hot,
             rep.efficiency, rep.carnot_bound, rep.q_in, rep.w2, rep.w4,
             rep.dF2, rep.dF4, rep.total_work, rep.mode]]


def _run_otto(store, cfg, params):
    delta = params["delta"]
    th = cfg.thermal
    if th.t_hot is None:
        raise ConfigError("thermal.t_hot: required for the otto-cycle kind")
    es0 = store.eigensystem(cfg.model.n, delta, cfg.protocol.d0,
                            cfg.model.boundary, cfg.numeric.dim_cap,
                            cfg.numeric.dense_cap)
    es1 = store.eigensystem(cfg.model.n, delta, cfg.protocol.d1,
                            cfg.model.boundary, cfg.numeric.dim_cap,
                            cfg.numeric.dense_cap)
    transitions = None
    rate = NAN
    if cfg.numeric.finite_rate_strokes:
        rate = min(cfg.protocol.rates)
        A, B = store.parts(cfg.model.n, delta, cfg.model.boundary,
                           cfg.numeric.dim_cap)
        ctrl = _step_control(cfg)
        fwd = transition_matrix(A, B, QuenchProtocol(
            d0=cfg.protocol.d0, d1=cfg.protocol.d1, rate=rate, delta=delta), ctrl)
        back = transition_matrix(A, B, QuenchProtocol(
            d0=cfg.protocol.d1, d1=cfg.protocol.d0, rate=rate, delta=delta), ctrl)
        transitions = (fwd.entries, back.entries)
    rep = thermo.run_otto_cycle(es0.eigenvalues, es1.eigenvalues, th.t_hot,
                                th.t_cold, th.skyrmion_count, transitions,
                                stroke_iv_beta=th.stroke_iv_beta)
    return [[delta, cfg.protocol.d0, cfg.protocol.d1, th.t_cold, th.t_hot,
             rate, rep.w2, rep.w4, rep.q_in, rep.dF2, rep.dF4, rep.w_irr_2,
             rep.w_irr_4, rep.total_work, rep.efficiency, rep.carnot_bound,
             rep.skyrmion_count, rep.mode]]


_EXPERIMENTS = {
    "spectrum": {
        "columns": ["delta", "dmi", "dimension", "ground_energy", "gap_01",
                    "e0", "e1", "e2", "e3", "e4", "e5", "e6", "e7"],
        "points": _points_spectrum,
        "run": lambda store, cfg, params, out, i: (_run_spectrum(store, cfg, params), []),
    },
    "topology-sweep": {
        "columns": ["delta", "dmi", "topological_index", "winding_parameter",
                    "ground_energy"],
        "points": _points_spectrum,
        "run": lambda store, cfg, params, out, i: (_run_topology(store, cfg, params), []),
    },
    "irrwork-sweep": {
        "columns": ["delta", "d_end", "rate", "beta", "w_irr",
                    "w_irr_literal", "steps"],
        "points": lambda cfg: [{"delta": d, "rate": v}
                               for d in cfg.model.effective_deltas()
                               for v in sorted(cfg.protocol.rates, reverse=True)],
        "run": lambda store, cfg, params, out, i: (_run_irrwork(store, cfg, params), []),
    },
    "transition-matrix": {
        "columns": ["delta", "d0", "d1", "rate", "retained", "steps",
                    "row_sum_defect", "col_sum_defect", "off_diag_index",
                    "off_diag_best", "unitarity_defect"],
        "points": lambda cfg: [{"delta": d, "rate": v}
                               for d in cfg.model.effective_deltas()
                               for v in sorted(cfg.protocol.rates, reverse=True)],
        "run": _run_transition,
    },
    "phases": {
        "columns": ["delta", "rate", "level", "t", "dmi", "dynamical",
                    "geometric", "propagated_phase", "residual_infidelity",
                    "min_gap", "steps"],
        "points": lambda cfg: [{"delta": d, "rate": v}
                               for d in cfg.model.effective_deltas()
                               for v in sorted(cfg.protocol.rates, reverse=True)],
        "run": lambda store, cfg, params, out, i: (_run_phases(store, cfg, params), []),
    },
    "efficiency-curve": {
        "columns": ["delta", "d0", "d1", "t_cold", "t_hot", "efficiency",
                    "carnot_bound", "q_in", "w2", "w4", "dF2", "dF4",
                    "total_work", "mode"],
        "points": lambda cfg: [{"delta": d, "t_hot": float(t)}
                               for d in cfg.model.effective_deltas()
                               for t in cfg.thermal.t_hot_grid()],
        "run": lambda store, cfg, params, out, i: (_run_efficiency(store, cfg, params), []),
    },
    "otto-cycle": {
        "columns": ["delta", "d0", "d1", "t_cold", "t_hot", "rate", "w2",
                    "w4", "q_in", "dF2", "dF4", "w_irr_2", "w_irr_4",
                    "total_work", "efficiency", "carnot_bound",
                    "skyrmion_count", "mode"],
        "points": lambda cfg: [{"delta": d} for d in cfg.model.effective_deltas()],
        "run": lambda store, cfg, params, out, i: (_run_otto(store, cfg, params), []),
    },
}


def run_experiment(cfg: ExperimentConfig, out_dir=None, threads: int = 1,
                   use_cache: bool = True, strict: bool = False,
                   cache_dir=None) -> dict:
    """Execute a config across its grid and persist results + manifest.

    Returns the manifest dictionary; manifest['status'] is 'ok' when every
    point succeeded, else 'partial'. In strict mode the first failing point
    raises instead.
    """
    spec = _EXPERIMENTS[cfg.kind]
    out = Path(out_dir) if out_dir is not None else Path(cfg.output.directory)
    out.mkdir(parents=True, exist_ok=True)
    store = SpectrumStore(cache_dir=cache_dir, use_cache=use_cache)
    points = spec["points"](cfg)
    if not points:
        raise ConfigError("experiment grid is empty")

    def work(item):
        index, params = item
        t0 = time.perf_counter()
        try:
            rows, extra = spec["run"](store, cfg, params, out, index)
            return PointOutcome(index, params, rows=rows, extra_files=extra,
                                seconds=time.perf_counter() - t0)
        except QskyrmError as exc:
            if strict:
                raise
            return PointOutcome(index, params, error=f"{type(exc).__name__}: {exc}",
                                seconds=time.perf_counter() - t0)

    items = list(enumerate(points))
    if threads <= 1:
        outcomes = [work(it) for it in items]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(work, items))
    outcomes.sort(key=lambda o: o.index)

    csv_path = out / "results.csv"
    columns = spec["columns"] + ["status", "error"]
    n_err = 0
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(columns)
        for oc in outcomes:
            if oc.error is None:
                for row in oc.rows:
                    wr.writerow([_fmt(x) for x in row] + ["ok", ""])
            else:
                n_err += 1
                blanks = [_fmt(oc.params.get(c, NAN)) if c in oc.params
                          else _fmt(NAN) for c in spec["columns"]]
                wr.writerow(blanks + ["error", oc.error])

    files = ["results.csv"]
    for oc in outcomes:
        files.extend(oc.extra_files)
    files.append("manifest.yaml")
    manifest = {
        "experiment": cfg.kind,
        "config_hash": config_hash(cfg),
        "tool_version": __version__,
        "status": "ok" if n_err == 0 else "partial",
        "points_total": len(points),
        "points_failed": n_err,
        "spectra_computed": store.computed,
        "cache_hits": store.cache_hits,
        "config": cfg.model_dump(),
        "points": [
            {"index": oc.index, "params": oc.params,
             "status": "ok" if oc.error is None else "error",
             **({"error": oc.error} if oc.error else {}),
             "seconds": round(oc.seconds, 6)}
            for oc in outcomes
        ],
        "files": files,
    }
    with open(out / "manifest.yaml", "w", encoding="utf-8") as fh:
        yaml.safe_dump(manifest, fh, sort_keys=False)
    return manifest
