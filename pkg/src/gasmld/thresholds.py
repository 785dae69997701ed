"""Initial thresholds for the adaptive search: random, MVD, MMSE.

Under correct detection only noise and estimation error remain in the
residual, so the objective minimum is gamma distributed with integer shape N.
Inverting its survival function at a small exceedance probability P gives a
threshold that almost always sits just above the true minimum.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .channel import PSK2, ChannelInstance, SystemConfig, objective_direct, psk2_base
from .hubo import HuboPolynomial, VarRegistry, evaluate
from .spaces import EnumeratedSpace


def mvd_rate(sigma_v2: float, tp_px: float) -> float:
    """Gamma rate of the per-antenna residual power sigma_v^2 (1 + 1/(T_P P_X)).

    sigma_v v_n and e_n are independent complex Gaussians, so their variances
    add; the amplitude-level combination (sqrt(T_P P_X)/(sqrt(T_P P_X)+1))^2 /
    sigma_v^2 is a conservative bound, not the distribution, and fails the
    distributional check this module is validated against.
    """
    if tp_px <= 0:
        return 1.0 / sigma_v2
    return 1.0 / (sigma_v2 * (1.0 + 1.0 / tp_px))


@dataclass(frozen=True)
class MvdParams:
    N: int
    lambda_v: float
    P: float

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be >= 1")
        if not 0.0 < self.P < 1.0:
            raise ValueError("P must lie in (0, 1)")
        if self.P < 1e-12:
            raise ValueError("P below 1e-12 drives the threshold to infinity")
        if self.lambda_v <= 0:
            raise ValueError("rate must be positive")

    @staticmethod
    def from_config(cfg: SystemConfig, P: float) -> "MvdParams":
        return MvdParams(N=cfg.N, lambda_v=mvd_rate(cfg.sigma_v2, cfg.T_P * cfg.P_X), P=P)


def regularized_gamma_q(N: int, x: float) -> float:
    """Q(N, x) = e^-x sum_{n<N} x^n / n!, the integer-shape survival function."""
    if N < 1:
        raise ValueError("shape must be a positive integer")
    if x < 0:
        raise ValueError("x must be >= 0")
    term = 1.0
    total = 1.0
    for n in range(1, N):
        term *= x / n
        total += term
    return math.exp(-x) * total


def y_mvd(params: MvdParams) -> float:
    """Threshold with exceedance probability P: (1/lambda) Q^{-1}(N, P)."""
    if params.N == 1:
        return -math.log(params.P) / params.lambda_v
    lo, hi = 0.0, 1.0
    while regularized_gamma_q(params.N, hi) > params.P:
        hi *= 2.0
    # Q is strictly decreasing, so plain bisection cannot fail
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        q = regularized_gamma_q(params.N, mid)
        if abs(q - params.P) <= 1e-12:
            return mid / params.lambda_v
        if q > params.P:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi) / params.lambda_v


def mmse_detect(inst: ChannelInstance, r: np.ndarray, t: int, cfg: SystemConfig):
    """Per-delay-combination linear MMSE with constellation quantization.

    Returns (assignment bits over the registry layout, objective value) of
    the best combination.
    """
    M, taud = cfg.M, cfg.taud
    sigma2 = inst.sigma_v ** 2
    k = np.arange(taud)
    phases = np.exp(1j * 2.0 * np.pi * inst.f_est[:, None] * (t - k[None, :]))
    best_bits = None
    best_val = math.inf
    eye = np.eye(cfg.N)
    for combo in itertools.product(range(taud), repeat=M):
        d_phase = phases[np.arange(M), combo]
        A = inst.H_est * d_phase[None, :]
        G = A @ A.conj().T + sigma2 * eye
        try:
            s_hat = A.conj().T @ np.linalg.solve(G, r)
        except np.linalg.LinAlgError:
            s_hat = A.conj().T @ (np.linalg.pinv(G) @ r)
        bits_b = _quantize_bits(cfg, t, s_hat)
        d = np.zeros(M * taud, dtype=np.uint8)
        for m, kk in enumerate(combo):
            d[m * taud + kk] = 1
        val = objective_direct(inst, r, t, bits_b, d)
        if val < best_val:
            best_val = val
            best_bits = np.concatenate([bits_b, d])
    return best_bits, float(best_val)


def _quantize_bits(cfg: SystemConfig, t: int, s_hat: np.ndarray) -> np.ndarray:
    """Map soft symbol estimates to the nearest constellation point's bits.

    Boundary values quantize toward bit 0 (the +1 symbol)."""
    if cfg.modulation == PSK2:
        base = psk2_base(t)
        proj = np.real(np.conj(base) * s_hat)
        return (proj < 0).astype(np.uint8)
    bits = np.empty(2 * cfg.M, dtype=np.uint8)
    bits[0::2] = (np.real(s_hat) < 0).astype(np.uint8)
    bits[1::2] = (np.imag(s_hat) < 0).astype(np.uint8)
    return bits


def y_mmse(inst: ChannelInstance, r: np.ndarray, t: int, cfg: SystemConfig) -> float:
    return mmse_detect(inst, r, t, cfg)[1]


def y_rand(poly: HuboPolynomial, reg: VarRegistry, rng: np.random.Generator,
           space: EnumeratedSpace) -> tuple[np.ndarray, float]:
    """Uniform sample over the preparation-consistent space and its value."""
    ordinal = space.sample_uniform(rng)
    bits = space.assignment(ordinal)
    return bits, evaluate(poly, bits)
