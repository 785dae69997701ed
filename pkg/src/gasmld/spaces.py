"""Vectorized enumeration of GAS search spaces.

A search space is the set of key assignments a state preparation can reach,
together with the objective value of every assignment.  Values factor per
user, so the full table is assembled by broadcasting per-user contribution
tables over the product space instead of looping over assignments.

Key index convention: registry variable i maps to bit weight 2^(q_k - 1 - i),
i.e. variable 0 is the most significant bit of the integer key index.  The
statevector simulator uses the same convention.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import PSK2, ChannelInstance, SystemConfig, map_symbols
from .errors import CapacityError
from .hubo import HADAMARD_FULL, W_STATE_REDUCED, HuboPolynomial, VarRegistry

MAX_ENUMERABLE = 1 << 24


@dataclass
class EnumeratedSpace:
    """Objective values over an enumerable search space, sorted for counting."""

    reg: VarRegistry
    prep: str
    e_values: np.ndarray      # objective per state ordinal
    key_indices: np.ndarray   # big-endian key index per state ordinal, uint64
    order: np.ndarray         # ordinals sorted by objective value
    e_sorted: np.ndarray

    @property
    def n_states(self) -> int:
        return self.e_values.size

    def count_below(self, y: float) -> int:
        """Number of states with E(x) - y < 0 (strict)."""
        return int(np.searchsorted(self.e_sorted, y, side="left"))

    def min_value(self) -> float:
        return float(self.e_sorted[0])

    def argmin_ordinal(self) -> int:
        return int(self.order[0])

    def sample_uniform(self, rng: np.random.Generator) -> int:
        return int(rng.integers(self.n_states))

    def sample_marked(self, n_marked: int, rng: np.random.Generator) -> int:
        return int(self.order[rng.integers(n_marked)])

    def sample_unmarked(self, n_marked: int, rng: np.random.Generator) -> int:
        return int(self.order[rng.integers(n_marked, self.n_states)])

    def assignment(self, ordinal: int) -> np.ndarray:
        """Decode a state ordinal to the 0/1 assignment in registry order."""
        q = self.reg.q_k
        idx = int(self.key_indices[ordinal])
        return np.array([(idx >> (q - 1 - i)) & 1 for i in range(q)], dtype=np.uint8)

    def value_of(self, ordinal: int) -> float:
        return float(self.e_values[ordinal])


def _key_weights(reg: VarRegistry) -> np.ndarray:
    q = reg.q_k
    return np.array([1 << (q - 1 - i) for i in range(q)], dtype=np.uint64)


def _broadcast_sum(parts: list[np.ndarray]) -> np.ndarray:
    """Sum per-user tables over the product space; last axis is preserved."""
    acc = parts[0]
    for p in parts[1:]:
        acc = acc[..., None, :] + p
    return acc.reshape(-1, acc.shape[-1])


def from_channel(inst: ChannelInstance, r: np.ndarray, t: int, cfg: SystemConfig,
                 prep: str, reg: VarRegistry) -> EnumeratedSpace:
    """Build the space directly from the matrix model (fast path).

    Per user the contribution to H D s is a small table over that user's
    local choices; the objective over the whole product space follows by
    broadcasting.
    """
    if reg.n_c:
        raise ValueError("spaces are built for the solver path (parity fixed)")
    M, taud, N = cfg.M, cfg.taud, cfg.N
    weights = _key_weights(reg)
    phases = np.exp(1j * 2.0 * np.pi * inst.f_est[:, None] * (t - np.arange(taud)[None, :]))

    n_bbits = 1 if cfg.modulation == PSK2 else 2
    bit_combos = np.array(np.meshgrid(*([[0, 1]] * n_bbits), indexing="ij"),
                          dtype=np.uint8).reshape(n_bbits, -1).T  # (2^n_bbits, n_bbits)

    contribs = []
    idx_parts = []
    for m in range(M):
        h = inst.H_est[:, m]
        sym = np.array([map_symbols(cfg.modulation, t, bits)[0] for bits in bit_combos])
        if prep == W_STATE_REDUCED:
            d_factors = phases[m]                                  # (taud,)
            d_idx = weights[[reg.d_position(m, k) for k in range(taud)]]
        elif prep == HADAMARD_FULL:
            masks = np.arange(1 << taud, dtype=np.uint64)
            shifts = np.arange(taud, dtype=np.uint64)
            sel = ((masks[:, None] >> shifts[None, :]) & np.uint64(1)).astype(float)
            d_factors = sel @ phases[m]                            # (2^taud,)
            d_idx = sel.astype(np.uint64) @ weights[[reg.d_position(m, k) for k in range(taud)]]
        else:
            raise ValueError(f"unknown preparation {prep!r}")
        b_idx = bit_combos.astype(np.uint64) @ weights[[reg.b_position(m, s) for s in range(n_bbits)]]
        local = np.einsum("b,d,n->bdn", sym, d_factors, h).reshape(-1, N)
        local_idx = (b_idx[:, None] + d_idx[None, :]).reshape(-1)
        contribs.append(local)
        idx_parts.append(local_idx)

    n_total = 1
    for c in contribs:
        n_total *= c.shape[0]
    if n_total > MAX_ENUMERABLE:
        raise CapacityError(f"search space of {n_total} states exceeds {MAX_ENUMERABLE}")

    signal = _broadcast_sum(contribs)
    e = np.sum(np.abs(np.asarray(r)[None, :] - signal) ** 2, axis=1)
    key_idx = _broadcast_sum([p[:, None] for p in idx_parts]).ravel()
    order = np.argsort(e, kind="stable")
    return EnumeratedSpace(reg=reg, prep=prep, e_values=e,
                           key_indices=key_idx, order=order, e_sorted=e[order])


def poly_values_over_keys(poly: HuboPolynomial, q_k: int) -> np.ndarray:
    """Evaluate the polynomial at every key index 0 .. 2^q_k - 1."""
    n = 1 << q_k
    if n > MAX_ENUMERABLE:
        raise CapacityError(f"2^{q_k} key states exceed {MAX_ENUMERABLE}")
    xs = np.arange(n, dtype=np.uint64)
    e = np.full(n, poly.constant, dtype=float)
    for vars_, coeff in poly.terms.items():
        mask = np.uint64(0)
        for i in vars_:
            mask |= np.uint64(1 << (q_k - 1 - i))
        e[(xs & mask) == mask] += coeff
    return e


def from_polynomial(poly: HuboPolynomial, reg: VarRegistry, prep: str) -> EnumeratedSpace:
    """Build the space from polynomial values (used for generic objectives)."""
    q = reg.q_k
    e_full = poly_values_over_keys(poly, q)
    if prep == HADAMARD_FULL:
        key_idx = np.arange(1 << q, dtype=np.uint64)
        e = e_full
    elif prep == W_STATE_REDUCED:
        weights = _key_weights(reg)
        nb = reg.n_b + reg.n_c
        b_idx = np.zeros(1, dtype=np.uint64)
        for i in range(nb):
            b_idx = (b_idx[:, None] + np.array([0, weights[i]], dtype=np.uint64)).ravel()
        parts = [b_idx]
        for m in range(reg.M):
            parts.append(weights[[reg.d_position(m, k) for k in range(reg.taud)]])
        key_idx = _broadcast_sum([p[:, None] for p in parts]).ravel()
        e = e_full[key_idx]
    else:
        raise ValueError(f"unknown preparation {prep!r}")
    order = np.argsort(e, kind="stable")
    return EnumeratedSpace(reg=reg, prep=prep, e_values=e, key_indices=key_idx,
                           order=order, e_sorted=e[order])
