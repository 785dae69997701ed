"""Channel indicators predicting the useful Grover-rotation count.

The Frobenius-norm indicator C is refined by the smallest singular value
(factor alpha) and by pairwise tie proximity (factors beta1, beta2): channel
pairs whose norm ratio and folded phase difference approach the geometries
where two transmit hypotheses collide produce many near-minimal objective
values, which calls for fewer rotations.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .channel import SystemConfig, generate_instance, random_payload_bits, received_slot
from .gas import l_opt
from .hubo import W_STATE_REDUCED, build_registry
from .spaces import from_channel
from .thresholds import MvdParams, y_mvd

_ALPHA_NORM = 3.0 * math.sqrt(2.0)  # CN(0,1) magnitude at the 0.995 quantile
DEFAULT_TIE_EXPONENT = 0.2


def indicator_c(H_est: np.ndarray) -> float:
    n, m = H_est.shape
    return float(np.sum(np.abs(H_est) ** 2) / (n * m))


def _alpha(H_est: np.ndarray) -> float:
    sv = np.linalg.svd(H_est, compute_uv=False)
    sv = sv[sv > 1e-12]
    return float(sv.min() / _ALPHA_NORM)


def indicator_c1(H_est: np.ndarray, C: float | None = None) -> float:
    if C is None:
        C = indicator_c(H_est)
    return _alpha(H_est) * C


def _pair_betas(H_est: np.ndarray, a: float):
    """Minimum beta1 and beta2 over the C(M,2) user pairs.

    Each user's channel column enters through its norm; the pair's phase
    difference is the argument of the column inner product, folded into
    [0, pi/2) by the constellation's rotational symmetry.  For a single
    antenna this is exactly the scalar norm-ratio / phase-difference pair.
    The beta1 base can be negative for norm ratios above 1/sqrt(2), so its
    absolute value is taken before the fractional power.
    """
    m = H_est.shape[1]
    radii = np.linalg.norm(H_est, axis=0)
    beta1_min = 1.0
    beta2_min = 1.0
    skipped = 0
    for i in range(m):
        for j in range(i + 1, m):
            ri, rj = radii[i], radii[j]
            if ri > rj:
                ri, rj = rj, ri
            if rj <= 1e-300:
                skipped += 1
                continue
            ratio = ri / rj
            theta = math.fmod(float(np.angle(np.vdot(H_est[:, j], H_est[:, i]))),
                              0.5 * math.pi) % (0.5 * math.pi)
            g = abs(4.0 * theta / math.pi - 1.0)
            beta1 = abs((1.0 / math.sqrt(2.0) - ratio) * g) ** a
            beta2 = 1.0 - (ratio * g) ** a
            beta1_min = min(beta1_min, beta1)
            beta2_min = min(beta2_min, beta2)
    return beta1_min, beta2_min, skipped


def indicator_c2(H_est: np.ndarray, C: float | None = None,
                 a: float = DEFAULT_TIE_EXPONENT) -> float:
    if C is None:
        C = indicator_c(H_est)
    b1, b2, _ = _pair_betas(H_est, a)
    return b1 * b2 * C


def indicator_c_prime(H_est: np.ndarray, a: float = DEFAULT_TIE_EXPONENT) -> float:
    C = indicator_c(H_est)
    b1, b2, _ = _pair_betas(H_est, a)
    return _alpha(H_est) * b1 * b2 * C


def all_indicators(H_est: np.ndarray, a: float = DEFAULT_TIE_EXPONENT) -> dict[str, float]:
    C = indicator_c(H_est)
    al = _alpha(H_est)
    b1, b2, _ = _pair_betas(H_est, a)
    return {"c": C, "c1": al * C, "c2": b1 * b2 * C, "c_prime": al * b1 * b2 * C}


@dataclass
class CalibrationTable:
    """Empirical (C', L_opt) samples driving the rotation lower bound."""

    c_prime: np.ndarray
    l_opt: np.ndarray
    c_prime_max: float
    delta: float

    @staticmethod
    def from_samples(c_values, l_values) -> "CalibrationTable":
        c = np.asarray(c_values, dtype=float)
        lo = np.asarray(l_values, dtype=int)
        if c.size == 0:
            raise ValueError("calibration produced no usable samples")
        cmax = float(c.max())
        return CalibrationTable(c_prime=c, l_opt=lo, c_prime_max=cmax, delta=0.01 * cmax)

    def save(self, csv_path, cfg_hash: str = "") -> None:
        path = Path(csv_path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["c_prime", "l_opt"])
            for c, lo in zip(self.c_prime, self.l_opt):
                w.writerow([f"{c:.17g}", int(lo)])
        sidecar = path.with_suffix(path.suffix + ".meta.json")
        sidecar.write_text(json.dumps({
            "c_prime_max": self.c_prime_max,
            "delta": self.delta,
            "cfg_hash": cfg_hash,
        }))

    @staticmethod
    def load(csv_path) -> "CalibrationTable":
        path = Path(csv_path)
        with path.open() as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if header != ["c_prime", "l_opt"]:
                raise ValueError(f"unexpected calibration header {header}")
            rows = [(float(c), int(lo)) for c, lo in reader]
        meta = json.loads(path.with_suffix(path.suffix + ".meta.json").read_text())
        c = np.array([r[0] for r in rows])
        lo = np.array([r[1] for r in rows], dtype=int)
        return CalibrationTable(c_prime=c, l_opt=lo,
                                c_prime_max=meta["c_prime_max"], delta=meta["delta"])


def config_hash(cfg: SystemConfig) -> str:
    payload = json.dumps({
        "N": cfg.N, "M": cfg.M, "tau_max": cfg.tau_max, "modulation": cfg.modulation,
        "T_P": cfg.T_P, "T_D": cfg.T_D, "P_X": cfg.P_X, "snr_db": cfg.snr_db,
    }, sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


def calibrate(cfg: SystemConfig, n_samples: int, P: float = 1e-3,
              a: float = DEFAULT_TIE_EXPONENT, collect_all: bool = False,
              id_offset: int = 0):
    """Sample (indicator, L_opt) pairs at slot t = 0.

    L_opt comes from the exhaustive count of states below the MVD threshold;
    samples where the threshold undercuts the true minimum carry no marked
    state and are excluded.  id_offset keeps calibration instances disjoint
    from experiment trials drawn from the same seed.
    """
    reg = build_registry(cfg)
    params = MvdParams.from_config(cfg, P)
    y = y_mvd(params)
    n_t = None
    c_vals, l_vals = [], []
    scatter = {"c": [], "c1": [], "c2": [], "c_prime": []} if collect_all else None
    for idx in range(id_offset, id_offset + n_samples):
        inst = generate_instance(cfg, instance_id=idx)
        bits = random_payload_bits(cfg, 0, instance_id=idx)
        slot = received_slot(inst, cfg, 0, bits)
        space = from_channel(inst, slot.r, 0, cfg, W_STATE_REDUCED, reg)
        n_t = space.n_states
        ns = space.count_below(y)
        if ns == 0:
            continue
        lo = l_opt(ns, n_t)
        c_vals.append(indicator_c_prime(inst.H_est, a))
        l_vals.append(lo)
        if collect_all:
            vals = all_indicators(inst.H_est, a)
            for key in scatter:
                scatter[key].append(vals[key])
    table = CalibrationTable.from_samples(c_vals, l_vals)
    if collect_all:
        return table, scatter
    return table


def select_lmin(table: CalibrationTable, c_prime: float) -> int:
    """Minimum observed L_opt whose C' lies in the +-delta window.

    An empty window widens delta by doubling; returning zero would silently
    turn the lower bound off.
    """
    if table.c_prime.size == 0:
        raise ValueError("empty calibration table")
    delta = table.delta
    for _ in range(80):
        lo = max(0.0, c_prime - delta)
        hi = min(c_prime + delta, table.c_prime_max)
        mask = (table.c_prime >= lo) & (table.c_prime <= hi)
        if mask.any():
            return int(table.l_opt[mask].min())
        delta *= 2.0
    return int(table.l_opt.min())


def select_lmin_conventional(C: float) -> int:
    if C < 0.7:
        return 5
    if C < 1.1:
        return 6
    if C < 1.3:
        return 8
    return 12


def binned_spread(values, l_values, n_bins: int = 20,
                  lo_q: float = 10.0, hi_q: float = 90.0) -> float:
    """Average (p90 - p10) of L_opt over equal-width indicator bins."""
    values = np.asarray(values, dtype=float)
    l_values = np.asarray(l_values, dtype=float)
    edges = np.linspace(values.min(), values.max(), n_bins + 1)
    spreads = []
    for b in range(n_bins):
        upper = values < edges[b + 1] if b < n_bins - 1 else values <= edges[b + 1]
        mask = (values >= edges[b]) & upper
        if mask.sum() < 2:
            continue
        sel = l_values[mask]
        spreads.append(np.percentile(sel, hi_q) - np.percentile(sel, lo_q))
    if not spreads:
        raise ValueError("no populated bins")
    return float(np.mean(spreads))
