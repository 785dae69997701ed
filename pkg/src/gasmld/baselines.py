"""Classical reference detectors: exhaustive search and the SDR initializer.

Exhaustive enumeration over the one-hot space is the correctness oracle for
every convergence claim.  The semidefinite relaxation drops the rank-1
constraint from the real-valued quadratic form, solves the small SDP by
projected gradient descent with alternating feasibility projections, and
quantizes the last column of the optimizer back to symbols.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .channel import PSK2, ChannelInstance, SystemConfig, objective_direct, psk2_base
from .hubo import W_STATE_REDUCED, build_registry
from .spaces import EnumeratedSpace, from_channel


def exhaustive_mld(inst: ChannelInstance, r: np.ndarray, t: int, cfg: SystemConfig,
                   space: EnumeratedSpace | None = None):
    """Full enumeration of the one-hot space.

    Returns (argmin assignment, sorted objective values); the value multiset
    is reused for marked-state counting and rotation statistics.
    """
    if space is None:
        reg = build_registry(cfg)
        space = from_channel(inst, r, t, cfg, W_STATE_REDUCED, reg)
    return space.assignment(space.argmin_ordinal()), space.e_sorted.copy()


def _delay_diag(inst: ChannelInstance, t: int, combo) -> np.ndarray:
    m = np.arange(len(combo))
    return np.exp(1j * 2.0 * np.pi * inst.f_est[m] * (t - np.asarray(combo)))


def realify(inst: ChannelInstance, r: np.ndarray, t: int, combo):
    """Stack the complex model into the real block form.

    H D becomes [[Re, -Im], [Im, Re]] and r becomes [Re; Im], so the real
    residual norm reproduces the complex one exactly.
    """
    HD = inst.H_est * _delay_diag(inst, t, combo)[None, :]
    r_bar = np.concatenate([np.real(r), np.imag(r)])
    H_bar = np.block([[np.real(HD), -np.imag(HD)], [np.imag(HD), np.real(HD)]])
    return r_bar, H_bar


@dataclass
class SdpProblem:
    cost: np.ndarray      # (dim+1) x (dim+1) symmetric block matrix
    dim: int              # number of +-1 symbol variables


def build_sdp(inst: ChannelInstance, r: np.ndarray, t: int, cfg: SystemConfig,
              combo) -> SdpProblem:
    """Assemble the quadratic form over [s_bar, a] with s_bar in {+-1}^dim.

    For QPSK the 1/sqrt(2) symbol scale moves into the channel so the real
    and imaginary parts are +-1; for pi/2-BPSK the deterministic phase is
    absorbed the same way, leaving M real +-1 variables.
    """
    d_phase = _delay_diag(inst, t, combo)
    if cfg.modulation == PSK2:
        Ht = inst.H_est * d_phase[None, :] * psk2_base(t)
        A = np.concatenate([np.real(Ht), np.imag(Ht)], axis=0)
    else:
        HD = inst.H_est * d_phase[None, :] / math.sqrt(2.0)
        A = np.block([[np.real(HD), -np.imag(HD)], [np.imag(HD), np.real(HD)]])
    r_bar = np.concatenate([np.real(r), np.imag(r)])
    dim = A.shape[1]
    cost = np.empty((dim + 1, dim + 1))
    cost[:dim, :dim] = A.T @ A
    cost[:dim, dim] = -A.T @ r_bar
    cost[dim, :dim] = -r_bar @ A
    cost[dim, dim] = r_bar @ r_bar
    return SdpProblem(cost=cost, dim=dim)


def _project_psd(W: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(0.5 * (W + W.T))
    vals = np.clip(vals, 0.0, None)
    return (vecs * vals) @ vecs.T


def _polish_feasible(W: np.ndarray, iters: int, tol: float) -> np.ndarray:
    for _ in range(iters):
        W = _project_psd(W)
        np.fill_diagonal(W, 1.0)
        dev = -min(0.0, float(np.linalg.eigvalsh(0.5 * (W + W.T)).min()))
        if dev <= tol:
            break
    return 0.5 * (W + W.T)


def solve_sdr(problem: SdpProblem, max_iter: int = 2000, tol: float = 1e-9):
    """ADMM splitting for min Tr(W Q) over the unit-diagonal PSD cone.

    The affine step pins the diagonal and takes the linear-cost gradient in
    closed form, the PSD step is an eigenvalue projection, and a scaled dual
    couples them.  The recorded objective history holds the best feasible
    iterate seen so far, hence is non-increasing; the returned W satisfies
    the constraints to 1e-6 even when the iteration cap is hit.
    """
    Q = problem.cost
    n = problem.dim + 1
    rho = max(1.0, float(np.linalg.norm(Q)) / n)
    Z = np.eye(n)
    U = np.zeros((n, n))
    best = np.eye(n)
    best_obj = float(np.sum(best * Q))
    history = [best_obj]
    converged = False

    def consider(cand):
        nonlocal best, best_obj
        cand = _polish_feasible(cand, iters=3, tol=1e-9)
        obj = float(np.sum(cand * Q))
        if obj < best_obj:
            best, best_obj = cand, obj
            history.append(obj)

    for it in range(1, max_iter + 1):
        X = Z - U - Q / rho
        np.fill_diagonal(X, 1.0)
        Z_new = _project_psd(X + U)
        U = U + X - Z_new
        r_prim = float(np.linalg.norm(X - Z_new))
        Z = Z_new
        if it % 10 == 0 or r_prim < tol:
            consider(Z.copy())
        if r_prim < tol:
            converged = True
            break
    consider(Z.copy())
    info = {"converged": converged, "objective_history": history,
            "iterations": len(history) - 1}
    return best, info


def quantize_pm1(x: np.ndarray) -> np.ndarray:
    """Nearest of {+-1}; zero maps to +1."""
    return np.where(np.asarray(x) >= 0.0, 1.0, -1.0)


def sdr_detect(inst: ChannelInstance, r: np.ndarray, t: int, cfg: SystemConfig):
    """Best quantized SDR solution over all delay combinations."""
    M, taud = cfg.M, cfg.taud
    best_bits = None
    best_val = math.inf
    for combo in itertools.product(range(taud), repeat=M):
        problem = build_sdp(inst, r, t, cfg, combo)
        W, _ = solve_sdr(problem)
        s_hat = quantize_pm1(W[:problem.dim, problem.dim])
        if cfg.modulation == PSK2:
            bits_b = ((1.0 - s_hat) / 2.0).astype(np.uint8)
        else:
            bits_b = np.empty(2 * M, dtype=np.uint8)
            bits_b[0::2] = ((1.0 - s_hat[:M]) / 2.0).astype(np.uint8)
            bits_b[1::2] = ((1.0 - s_hat[M:]) / 2.0).astype(np.uint8)
        d = np.zeros(M * taud, dtype=np.uint8)
        for m, kk in enumerate(combo):
            d[m * taud + kk] = 1
        val = objective_direct(inst, r, t, bits_b, d)
        if val < best_val:
            best_val = val
            best_bits = np.concatenate([bits_b, d])
    return best_bits, float(best_val)


def y_sdr(inst: ChannelInstance, r: np.ndarray, t: int, cfg: SystemConfig) -> float:
    return sdr_detect(inst, r, t, cfg)[1]
