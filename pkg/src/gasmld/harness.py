"""Batch runners for the query-complexity, BER, calibration and gate-count
experiments, plus the single-instance solver behind the CLI.

Every run is a pure function of (config, seed): instances, noise and search
randomness come from counter-based streams keyed by trial coordinates, and
rows are canonically ordered, so repeated runs write byte-identical CSVs.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import streams
from .channel import PSK2, SystemConfig, generate_instance, objective_direct, random_payload_bits, received_slot
from .errors import ConfigError
from .gas import (AmplitudeBackend, BACKEND_AMPLITUDE, BACKEND_CIRCUIT, CircuitBackend,
                  GasParams, GasTrace, restart_iterations, run_gas)
from .gates import build_report
from .hubo import W_STATE_REDUCED, build_hubo, build_registry
from .indicators import (CalibrationTable, calibrate, config_hash, indicator_c,
                         indicator_c_prime, select_lmin, select_lmin_conventional)
from .spaces import from_channel
from .statevector import choose_qv
from .thresholds import MvdParams, mmse_detect, y_mvd

CALIBRATION_ID_OFFSET = 1_000_000

_CFG_FIELDS = {"N": int, "M": int, "tau_max": int, "modulation": str, "T_P": int,
               "T_D": int, "P_X": (int, float), "snr_db": (int, float), "seed": int}


@dataclass
class ExperimentSpec:
    name: str
    cfg: SystemConfig
    trials: int = 100
    output_dir: str = "out"
    backend: str = BACKEND_AMPLITUDE
    mvd_p: float = 1e-3
    lam: float = 8.0 / 7.0
    budget_iterations: int | None = None
    budget_rotations: int | None = None
    calibration_samples: int = 2000
    variants: list[dict] = field(default_factory=list)
    snr_sweep: list[float] = field(default_factory=list)
    detectors: list[str] = field(default_factory=list)
    grid: list[dict] = field(default_factory=list)
    q_v: int | None = None
    extra: dict = field(default_factory=dict)


def load_spec(source) -> ExperimentSpec:
    """Validate and load an experiment configuration (path or dict)."""
    if isinstance(source, (str, Path)):
        try:
            data = json.loads(Path(source).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {source}: {exc}") from exc
    else:
        data = dict(source)
    if not isinstance(data, dict):
        raise ConfigError("config root must be a JSON object")
    if "cfg" not in data or not isinstance(data["cfg"], dict):
        raise ConfigError("config requires a 'cfg' object with the system parameters")
    cfg_in = data["cfg"]
    unknown = set(cfg_in) - set(_CFG_FIELDS)
    if unknown:
        raise ConfigError(f"unknown cfg fields: {sorted(unknown)}")
    for key, typ in _CFG_FIELDS.items():
        if key in cfg_in and not isinstance(cfg_in[key], typ):
            raise ConfigError(f"cfg.{key} has wrong type {type(cfg_in[key]).__name__}")
    for key in ("N", "M", "tau_max"):
        if key not in cfg_in:
            raise ConfigError(f"cfg.{key} is required")
    try:
        cfg = SystemConfig(**cfg_in)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    gas = data.get("gas", {})
    if not isinstance(gas, dict):
        raise ConfigError("'gas' must be an object")
    spec = ExperimentSpec(
        name=data.get("name", "experiment"),
        cfg=cfg,
        trials=int(data.get("trials", 100)),
        output_dir=data.get("output_dir", "out"),
        backend=gas.get("backend", BACKEND_AMPLITUDE),
        mvd_p=float(gas.get("mvd_p", 1e-3)),
        lam=float(gas.get("lambda", 8.0 / 7.0)),
        budget_iterations=gas.get("budget_iterations"),
        budget_rotations=gas.get("budget_rotations"),
        calibration_samples=int(data.get("calibration", {}).get("samples", 2000)),
        variants=data.get("variants", []),
        snr_sweep=list(data.get("snr_sweep", [])),
        detectors=list(data.get("detectors", [])),
        grid=list(data.get("grid", [])),
        q_v=gas.get("q_v"),
        extra={k: v for k, v in data.items() if k not in {
            "name", "cfg", "trials", "output_dir", "gas", "calibration",
            "variants", "snr_sweep", "detectors", "grid"}},
    )
    if spec.trials < 1:
        raise ConfigError("trials must be >= 1")
    if spec.backend not in (BACKEND_AMPLITUDE, BACKEND_CIRCUIT):
        raise ConfigError(f"unknown backend {spec.backend!r}")
    return spec


def fmt(value) -> str:
    """Floats carry 17 significant digits so CSVs round-trip exactly."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.17g}"
    return str(value)


def write_csv(path, header: list[str], rows: list[tuple]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [",".join(header)]
    lines.extend(",".join(fmt(v) for v in row) for row in rows)
    path.write_text("\n".join(lines) + "\n")
    return path


def _calibration_table(cfg: SystemConfig, spec: ExperimentSpec) -> CalibrationTable:
    return calibrate(cfg, spec.calibration_samples, P=spec.mvd_p,
                     id_offset=CALIBRATION_ID_OFFSET)


def _resolve_lmin(policy: str, inst, table: CalibrationTable | None) -> int:
    if policy in ("zero", None):
        return 0
    if policy == "conventional-c":
        return select_lmin_conventional(indicator_c(inst.H_est))
    if policy == "proposed-cprime":
        if table is None:
            raise ConfigError("proposed-cprime lower bound requires a calibration table")
        return select_lmin(table, indicator_c_prime(inst.H_est))
    raise ConfigError(f"unknown lmin policy {policy!r}")


def _gas_backend(spec: ExperimentSpec, inst, r, t, cfg, prep, space):
    if spec.backend == BACKEND_AMPLITUDE:
        return AmplitudeBackend(space)
    poly, reg = build_hubo(inst, r, t, cfg)
    q_v = spec.q_v or choose_qv(poly, 0.0, prep)
    return CircuitBackend(poly, reg, prep, q_v)


def run_query_cdf(spec: ExperimentSpec):
    """First-hit query complexities of the configured GAS variants.

    Row schema: variant, trial, cd_queries, qd_rotations, converged.
    """
    cfg = spec.cfg
    if not spec.variants:
        raise ConfigError("query-cdf requires a 'variants' list")
    reg = build_registry(cfg)
    needs_table = any(v.get("lmin") == "proposed-cprime" for v in spec.variants)
    table = _calibration_table(cfg, spec) if needs_table else None
    rows = []
    for trial in range(spec.trials):
        inst = generate_instance(cfg, instance_id=trial)
        bits = random_payload_bits(cfg, 0, instance_id=trial)
        slot = received_slot(inst, cfg, 0, bits)
        w_space = from_channel(inst, slot.r, 0, cfg, W_STATE_REDUCED, reg)
        oracle_min = w_space.min_value()
        for vi, variant in enumerate(spec.variants):
            prep = variant.get("prep", W_STATE_REDUCED)
            space = w_space if prep == W_STATE_REDUCED else \
                from_channel(inst, slot.r, 0, cfg, prep, reg)
            backend = _gas_backend(spec, inst, slot.r, 0, cfg, prep, space)
            lmin = _resolve_lmin(variant.get("lmin", "zero"), inst, table)
            y0 = None
            if variant.get("threshold", "random") == "mvd":
                y0 = y_mvd(MvdParams.from_config(cfg, spec.mvd_p))
            restart = bool(variant.get("restart", False))
            params = GasParams(
                lam=spec.lam, threshold_policy=variant.get("threshold", "random"),
                y0=y0, lmin=lmin, restart_enabled=restart,
                restart_after=restart_iterations(lmin, backend.n_states, 1) if restart else None,
                budget_iterations=spec.budget_iterations,
                budget_rotations=spec.budget_rotations,
                enforce_one_hot=True)
            rng = streams.substream(cfg.seed, streams.TRIAL, trial, vi)
            trace = run_gas(backend, params, rng, oracle_min=oracle_min,
                            stop_at_optimum=True, record_trace=False)
            if trace.converged:
                cd, qd = trace.reached_optimum_at
                # re-verify against the exhaustive oracle; no mismatch tolerated
                b, _, d = reg.split_assignment(trace.final_x)
                check = objective_direct(inst, slot.r, 0, b, d)
                if check > oracle_min + 1e-9 * (1.0 + abs(oracle_min)):
                    raise RuntimeError(
                        f"converged run disagrees with exhaustive search: "
                        f"E={check!r} > minimum {oracle_min!r}")
            else:
                cd, qd = trace.cd_queries, trace.qd_rotations
            rows.append((variant["name"], trial, cd, qd, trace.converged))
    rows.sort(key=lambda r: (r[0], r[1]))
    return rows


GAS_DETECTORS = {"gas-mvd", "gas-mmse", "gas-rand"}


def run_ber(spec: ExperimentSpec):
    """Bit error rates per detector and SNR point.

    Row schema: detector, snr_db, t_p, bits, errors, ber.  Returns the rows
    plus auxiliary per-(detector, snr) first-hit rotation counts.
    """
    cfg0 = spec.cfg
    detectors = spec.detectors or ["exhaustive", "gas-mvd"]
    snrs = spec.snr_sweep or [cfg0.snr_db]
    reg = build_registry(cfg0)
    n_b = reg.n_b
    rows = []
    aux: dict[tuple[str, float], list[int]] = {}
    for snr in snrs:
        cfg = cfg0.with_snr(snr)
        ymvd = y_mvd(MvdParams.from_config(cfg, spec.mvd_p))
        errors = {d: 0 for d in detectors}
        nbits = {d: 0 for d in detectors}
        for trial in range(spec.trials):
            inst = generate_instance(cfg, instance_id=trial)
            for t in range(cfg.T_D):
                bits_true = random_payload_bits(cfg, t, instance_id=trial)
                slot = received_slot(inst, cfg, t, bits_true)
                space = from_channel(inst, slot.r, t, cfg, W_STATE_REDUCED, reg)
                backend = AmplitudeBackend(space)
                e_min = space.min_value()
                for di, det in enumerate(detectors):
                    bits_hat, trace = _detect(det, spec, cfg, inst, slot, space,
                                              backend, ymvd, trial, t, di, e_min)
                    errors[det] += int(np.sum(bits_hat[:n_b] != bits_true))
                    nbits[det] += n_b
                    if trace is not None:
                        # censored first hits enter the statistics as +inf
                        qd_hit = (trace.reached_optimum_at[1]
                                  if trace.reached_optimum_at is not None else math.inf)
                        aux.setdefault((det, snr), []).append(qd_hit)
        for det in detectors:
            rows.append((det, float(snr), cfg.T_P, nbits[det], errors[det],
                         errors[det] / max(1, nbits[det])))
    rows.sort(key=lambda r: (r[0], r[1]))
    return rows, aux


def _detect(det, spec, cfg, inst, slot, space, backend, ymvd,
            trial, t, det_index, e_min):
    if det == "exhaustive":
        return space.assignment(space.argmin_ordinal()), None
    if det == "mmse":
        bits, _ = mmse_detect(inst, slot.r, t, cfg)
        return bits, None
    rng = streams.substream(cfg.seed, streams.GAS, trial, t, det_index)
    if det == "gas-mvd":
        # threshold comparison runs the plain adaptive schedule (no rotation
        # lower bound: its calibration is specific to one SNR point)
        params = GasParams(
            lam=spec.lam, threshold_policy="mvd", y0=ymvd, lmin=0,
            restart_enabled=True,
            restart_after=restart_iterations(0, backend.n_states, 1),
            budget_iterations=spec.budget_iterations,
            budget_rotations=spec.budget_rotations)
    elif det == "gas-mmse":
        x0, y0 = mmse_detect(inst, slot.r, t, cfg)
        params = GasParams(lam=spec.lam, threshold_policy="mmse", y0=y0, x0=x0,
                           budget_iterations=spec.budget_iterations,
                           budget_rotations=spec.budget_rotations)
    elif det == "gas-rand":
        params = GasParams(lam=spec.lam, threshold_policy="random",
                           budget_iterations=spec.budget_iterations,
                           budget_rotations=spec.budget_rotations)
    else:
        raise ConfigError(f"unknown detector {det!r}")
    trace = run_gas(backend, params, rng, oracle_min=e_min,
                    stop_at_optimum=False, record_trace=False)
    return trace.final_x, trace


def run_calibration(spec: ExperimentSpec, out_dir: Path | None = None):
    """Scatter of (indicator value, L_opt) for all four indicators."""
    cfg = spec.cfg
    table, scatter = calibrate(cfg, spec.calibration_samples, P=spec.mvd_p,
                               collect_all=True)
    rows = []
    for key in ("c", "c1", "c2", "c_prime"):
        for value, lo in zip(scatter[key], table.l_opt):
            rows.append((key, float(value), int(lo)))
    rows.sort(key=lambda r: (r[0], r[1], r[2]))
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        table.save(out_dir / "calibration_table.csv", cfg_hash=config_hash(cfg))
    return rows, table


def run_gate_count(spec: ExperimentSpec) -> list[dict]:
    if not spec.grid:
        raise ConfigError("gate-count requires a 'grid' list")
    reports = []
    for cell in spec.grid:
        try:
            rep = build_report(int(cell["M"]), int(cell["tau_max"]),
                               int(cell.get("q_v", 1)),
                               cell.get("modulation", PSK2))
        except KeyError as exc:
            raise ConfigError(f"gate-count grid cell missing {exc}") from exc
        reports.append(json.loads(rep.to_json()))
    return reports


def solve_single(spec: ExperimentSpec, dump_state: Path | None = None) -> GasTrace:
    """One GAS run on a fresh instance, printing a full iteration trace."""
    cfg = spec.cfg
    reg = build_registry(cfg)
    inst = generate_instance(cfg, instance_id=0)
    bits = random_payload_bits(cfg, 0, instance_id=0)
    slot = received_slot(inst, cfg, 0, bits)
    space = from_channel(inst, slot.r, 0, cfg, W_STATE_REDUCED, reg)

    poly, _ = build_hubo(inst, slot.r, 0, cfg)
    q_v = spec.q_v or choose_qv(poly, 0.0, W_STATE_REDUCED)
    backend_kind = spec.backend
    if backend_kind == "auto":
        backend_kind = BACKEND_CIRCUIT if reg.q_k + q_v <= 22 else BACKEND_AMPLITUDE
    if backend_kind == BACKEND_CIRCUIT:
        backend = CircuitBackend(poly, reg, W_STATE_REDUCED, q_v)
        if dump_state is not None:
            ymvd = y_mvd(MvdParams.from_config(cfg, spec.mvd_p))
            backend.circuit.prepare(ymvd).dump(dump_state)
    else:
        backend = AmplitudeBackend(space)
    ymvd = y_mvd(MvdParams.from_config(cfg, spec.mvd_p))
    lmin = select_lmin_conventional(indicator_c(inst.H_est))
    params = GasParams(
        lam=spec.lam, threshold_policy="mvd", y0=ymvd, lmin=lmin,
        restart_enabled=True,
        restart_after=restart_iterations(lmin, backend.n_states, 1),
        budget_iterations=spec.budget_iterations,
        budget_rotations=spec.budget_rotations)
    rng = streams.substream(cfg.seed, streams.GAS, 0, 0, 0)
    return run_gas(backend, params, rng, oracle_min=space.min_value(),
                   stop_at_optimum=True, record_trace=True)
