"""Grover adaptive search with two interchangeable execution backends.

The amplitude backend draws measurement outcomes from the closed-form success
probability sin^2((2L+1) arcsin sqrt(Ns/Nt)) over an enumerated space; the
circuit backend simulates A_y and G^L on a dense statevector and samples the
key register.  Both expose measure(y, L, rng) -> (state id, objective value).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import spaces, statevector
from .hubo import W_STATE_REDUCED, HuboPolynomial, VarRegistry

LMIN_ZERO = "zero"
LMIN_CONVENTIONAL_C = "conventional-c"
LMIN_PROPOSED_CPRIME = "proposed-cprime"

BACKEND_AMPLITUDE = "amplitude"
BACKEND_CIRCUIT = "circuit"


def success_probability(Ns: int, Nt: int, L: int) -> float:
    if not 0 <= Ns <= Nt:
        raise ValueError("need 0 <= Ns <= Nt")
    if Ns == 0:
        return 0.0
    return math.sin((2 * L + 1) * math.asin(math.sqrt(Ns / Nt))) ** 2


def l_opt(Ns: int, Nt: int) -> int:
    if Ns < 1:
        raise ValueError("l_opt needs at least one marked state")
    return int(math.floor((math.pi / 4.0) * math.sqrt(Nt / Ns)))


def restart_iterations(L_min: int, Nt: int, Ns: int = 1) -> int:
    """Consecutive-failure count at which the threshold is declared infeasible:
    smallest I with (1 - P_success)^I <= 1e-3 at the worst-case rotation L_min."""
    if Ns < 1:
        raise ValueError("Ns must be >= 1")
    c = abs(math.cos((2 * L_min + 1) * math.asin(math.sqrt(Ns / Nt))))
    if c == 0.0:
        return 1
    return max(1, math.ceil(-3.0 / (2.0 * math.log10(c))))


@dataclass
class GasParams:
    lam: float = 8.0 / 7.0
    threshold_policy: str = "random"   # random | mvd | mmse | sdr (label only)
    y0: float | None = None            # resolved threshold; None -> sample x0
    x0: np.ndarray | None = None       # optional seeded incumbent (mmse/sdr)
    lmin: int = 0
    restart_enabled: bool = False
    restart_after: int | None = None   # iterations without update before restart
    budget_iterations: int | None = None
    budget_rotations: int | None = None
    # detection runs on the full space must emit a decodable (one-hot) delay;
    # generic HUBO minimization has no such constraint
    enforce_one_hot: bool = False

    def __post_init__(self):
        if not 1.0 < self.lam < 4.0 / 3.0:
            raise ValueError("growth factor must satisfy 1 < lambda < 4/3")
        if self.restart_enabled and self.restart_after is None:
            raise ValueError("restart enabled but no restart_after supplied")


@dataclass
class GasIteration:
    i: int
    y: float
    L: int
    k: float
    x_key: int
    Ex: float
    accepted: bool
    cum_rot: int
    restarted: bool


@dataclass
class GasTrace:
    q_k: int = 0
    iterations: list[GasIteration] = field(default_factory=list)
    final_x: np.ndarray | None = None
    final_y: float = math.inf
    best_E: float = math.inf
    invalid_final: bool = False
    reached_optimum_at: tuple[int, int] | None = None  # (cd queries, qd rotations)
    cd_queries: int = 0
    qd_rotations: int = 0

    @property
    def converged(self) -> bool:
        return self.reached_optimum_at is not None

    def to_jsonl(self) -> str:
        lines = []
        for it in self.iterations:
            lines.append(json.dumps({
                "i": it.i, "y": it.y, "L": it.L, "k": it.k,
                "x": format(it.x_key, "b").zfill(self.q_k),
                "Ex": it.Ex, "accepted": it.accepted,
                "cum_rot": it.cum_rot, "restart": it.restarted,
            }))
        return "\n".join(lines)


class AmplitudeBackend:
    """Closed-form measurement sampling over an enumerated search space."""

    def __init__(self, space: spaces.EnumeratedSpace):
        self.space = space
        self.reg = space.reg
        self.n_states = space.n_states
        self.always_valid = space.prep == W_STATE_REDUCED

    def measure(self, y: float, L: int, rng: np.random.Generator):
        space = self.space
        ns = space.count_below(y)
        if ns == 0:
            ordinal = space.sample_uniform(rng)
        elif rng.random() < success_probability(ns, space.n_states, L):
            ordinal = space.sample_marked(ns, rng)
        else:
            ordinal = space.sample_unmarked(ns, rng)
        return ordinal, space.value_of(ordinal)

    def sample_uniform(self, rng: np.random.Generator):
        ordinal = self.space.sample_uniform(rng)
        return ordinal, self.space.value_of(ordinal)

    def assignment(self, ordinal: int) -> np.ndarray:
        return self.space.assignment(ordinal)


class CircuitBackend:
    """Dense-statevector measurement via the Grover circuit.

    Exact measurement distributions are cached per (y, L): repeated shots at
    the same circuit sample the cached marginal instead of re-simulating.
    """

    def __init__(self, poly: HuboPolynomial, reg: VarRegistry, prep: str, q_v: int,
                 cache_size: int = 8):
        self.circuit = statevector.GroverCircuit(poly, reg, prep, q_v)
        self.reg = reg
        self.q_v = q_v
        self.e_vec = self.circuit.e_vec
        self._support_keys = np.flatnonzero(self.circuit.support)
        self.n_states = int(self._support_keys.size)
        self.always_valid = prep == W_STATE_REDUCED
        self._cache: dict[tuple[float, int], np.ndarray] = {}
        self._cache_size = cache_size

    def distribution(self, y: float, L: int) -> np.ndarray:
        """Exact key-register measurement distribution after G^L A_y |0>."""
        key = (float(y), int(L))
        p = self._cache.get(key)
        if p is None:
            sv = self.circuit.run(y, L)
            p = sv.key_marginal()
            p = p / p.sum()
            if len(self._cache) >= self._cache_size:
                self._cache.pop(next(iter(self._cache)))
            self._cache[key] = p
        return p

    def measure(self, y: float, L: int, rng: np.random.Generator):
        p = self.distribution(y, L)
        key = int(rng.choice(p.size, p=p))
        return key, float(self.e_vec[key])

    def sample_uniform(self, rng: np.random.Generator):
        key = int(self._support_keys[rng.integers(self.n_states)])
        return key, float(self.e_vec[key])

    def assignment(self, key: int) -> np.ndarray:
        q = self.reg.q_k
        return np.array([(key >> (q - 1 - i)) & 1 for i in range(q)], dtype=np.uint8)


def backend_amplitude(poly: HuboPolynomial, reg: VarRegistry, prep: str, y: float,
                      L: int, rng: np.random.Generator,
                      space: spaces.EnumeratedSpace | None = None) -> np.ndarray:
    """One measurement from the amplitude-level backend."""
    if space is None:
        space = spaces.from_polynomial(poly, reg, prep)
    backend = AmplitudeBackend(space)
    ordinal, _ = backend.measure(y, L, rng)
    return backend.assignment(ordinal)


def backend_circuit(poly: HuboPolynomial, reg: VarRegistry, prep: str, y: float,
                    L: int, q_v: int, rng: np.random.Generator) -> np.ndarray:
    """One measurement from the circuit-level backend."""
    backend = CircuitBackend(poly, reg, prep, q_v)
    key, _ = backend.measure(y, L, rng)
    return backend.assignment(key)


def is_valid_assignment(reg: VarRegistry, bits: np.ndarray) -> bool:
    """True when every delay block is exactly one-hot."""
    _, _, d = reg.split_assignment(bits)
    return bool(np.all(d.reshape(reg.M, reg.taud).sum(axis=1) == 1))


def run_gas(backend, params: GasParams, rng: np.random.Generator,
            oracle_min: float | None = None, stop_at_optimum: bool = False,
            record_trace: bool = True) -> GasTrace:
    """Adaptive-threshold Grover search (baseline and improved variants).

    Each iteration samples L uniformly from {L_min, ..., L_min + ceil(k-1)},
    measures, accepts strictly improving values (resetting k), and otherwise
    grows k by the factor lambda up to sqrt(Nt).  With restart enabled, a run
    of restart_after consecutive iterations without any update since the last
    (re)start resamples the incumbent, resets the threshold to its value and
    drops L_min to zero.

    oracle_min is instrumentation: the first measurement attaining it is
    recorded as (cd, qd); with stop_at_optimum the run also halts there.  The
    detection output is the incumbent when its delay blocks are one-hot, else
    the best valid assignment seen.
    """
    reg = backend.reg
    trace = GasTrace(q_k=reg.q_k)
    n_t = backend.n_states
    cap = math.sqrt(1 << reg.q_k)
    budget_iter = params.budget_iterations or int(math.ceil(10 * math.sqrt(n_t)))
    budget_rot = params.budget_rotations or int(math.ceil(50 * math.sqrt(n_t)))
    check_valid = params.enforce_one_hot and not backend.always_valid

    cd = 0
    cum_rot = 0
    lmin = params.lmin
    inc_bits: np.ndarray | None = None
    inc_E = math.inf
    best_valid_bits: np.ndarray | None = None
    best_valid_E = math.inf
    reached = None

    def note_valid(bits, ex):
        nonlocal best_valid_bits, best_valid_E
        if ex < best_valid_E and (not check_valid or is_valid_assignment(reg, bits)):
            best_valid_bits, best_valid_E = bits, ex

    def is_optimum_hit(bits, ex) -> bool:
        # invalid assignments can undercut the one-hot minimum on the full space
        if oracle_min is None or ex > oracle_min:
            return False
        return not check_valid or is_valid_assignment(reg, bits)

    if params.y0 is not None:
        y = params.y0
        if params.x0 is not None:
            inc_bits = np.asarray(params.x0, dtype=np.uint8)
            inc_E = params.y0
            note_valid(inc_bits, inc_E)
    else:
        state0, e0 = backend.sample_uniform(rng)
        cd += 1
        y = e0
        inc_bits, inc_E = backend.assignment(state0), e0
        note_valid(inc_bits, inc_E)
        if is_optimum_hit(inc_bits, e0):
            reached = (cd, 0)

    updated_since_restart = False
    since_restart = 0
    k = 1.0
    i = 0
    stop = stop_at_optimum and reached is not None

    while not stop and i < budget_iter:
        span = math.ceil(k - 1.0)
        L = lmin + int(rng.integers(0, span + 1))
        if cum_rot + L > budget_rot:
            break
        state, ex = backend.measure(y, L, rng)
        cd += 1
        cum_rot += L

        accepted = ex < y
        need_bits = accepted or check_valid or record_trace or \
            (oracle_min is not None and reached is None and ex <= oracle_min)
        bits = backend.assignment(state) if need_bits else None

        if reached is None and bits is not None and is_optimum_hit(bits, ex):
            reached = (cd, cum_rot)
            if stop_at_optimum:
                stop = True

        if accepted:
            inc_bits, inc_E = bits, ex
            y = ex
            k = 1.0
            updated_since_restart = True
        else:
            k = min(params.lam * k, cap)
        if ex < best_valid_E:
            if bits is None:
                bits = backend.assignment(state)
            note_valid(bits, ex)

        restarted = False
        since_restart += 1
        if (params.restart_enabled and not updated_since_restart
                and not stop and since_restart >= params.restart_after):
            state0, e0 = backend.sample_uniform(rng)
            cd += 1
            y = e0
            inc_bits, inc_E = backend.assignment(state0), e0
            note_valid(inc_bits, e0)
            lmin = 0
            k = 1.0
            since_restart = 0
            restarted = True
            if reached is None and is_optimum_hit(inc_bits, e0):
                reached = (cd, cum_rot)
                if stop_at_optimum:
                    stop = True

        if record_trace:
            trace.iterations.append(GasIteration(
                i=i, y=y, L=L, k=k, x_key=int(state), Ex=float(ex),
                accepted=accepted, cum_rot=cum_rot, restarted=restarted))
        i += 1

    trace.cd_queries = cd
    trace.qd_rotations = cum_rot
    trace.final_y = y
    trace.reached_optimum_at = reached
    trace.best_E = min(inc_E, best_valid_E)

    # detection output: the lowest-objective decodable assignment seen
    if best_valid_bits is not None and best_valid_E <= inc_E:
        trace.final_x = best_valid_bits
    elif inc_bits is not None and (not check_valid or is_valid_assignment(reg, inc_bits)):
        trace.final_x = inc_bits
    elif best_valid_bits is not None:
        trace.final_x = best_valid_bits
        trace.invalid_final = True
    else:
        trace.final_x = inc_bits
        trace.invalid_final = inc_bits is not None
    return trace
