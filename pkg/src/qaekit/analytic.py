"""Closed-form optima, explicit constructions and infeasibility certificates."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .channels import ChannelError, KrausChannel, compose, reset_channel
from .matcore import as_cmatrix, eig_hermitian, is_projector, kyfan_sum, top_projector
from .qae import per_sample_fidelity
from .sources import SIGMA, SourceEnsemble, phase_state

FEASIBLE_TOL = 1e-9
ZERO_TOL = 1e-12


@dataclass(frozen=True)
class GramCriterionReport:
    g_alpha: np.ndarray = field(repr=False)
    g_beta: np.ndarray = field(repr=False)
    m_matrix: np.ndarray = field(repr=False)
    min_eigenvalue: float
    feasible: bool
    undefined_entries: int
    forced_infeasible: bool = False


@dataclass(frozen=True)
class ConcentrationReport:
    m: int
    s_m: float
    eta_m: float
    lower_bound_ratio: float
    b_mu_lower: float
    projector: np.ndarray = field(repr=False)
    xi: np.ndarray = field(repr=False)

    @property
    def quadratic_floor(self) -> float:
        return (1 - 1 / self.m) * self.s_m ** 2 + self.s_m / self.m


# ------------------------------------------------------------------ Haar

def haar_optimum(d: int, m: int) -> float:
    if not 1 <= m <= d:
        raise ValueError(f"need 1 <= m <= d, got d={d}, m={m}")
    return (d + m * m) / (d * (d + 1))


def haar_optimal_pair(d: int, m: int, rank_one: bool = True) -> tuple[KrausChannel, KrausChannel]:
    """Keep the m-dimensional factor of C^m ⊗ C^(d/m); refill the rest.

    The decoder refills with |0> when ``rank_one`` and with the maximally
    mixed state otherwise; both are optimal on Haar inputs.
    """
    if d % m:
        raise ValueError(f"m={m} must divide d={d}")
    r = d // m
    eye = np.eye(m)
    basis_r = np.eye(r)
    enc = KrausChannel(d, m, tuple(np.kron(eye, basis_r[b].reshape(1, r)) for b in range(r)))
    if rank_one:
        dec = KrausChannel(m, d, (np.kron(eye, basis_r[0].reshape(r, 1)),))
    else:
        dec = KrausChannel(m, d, tuple(np.kron(eye, basis_r[b].reshape(r, 1)) / np.sqrt(r)
                                       for b in range(r)))
    return enc, dec


def haar_mixture_value(d: int, m: int, c: float) -> float:
    if not 0 < c < 1:
        raise ValueError(f"c must lie in (0, 1), got {c}")
    if not 1 <= m <= d:
        raise ValueError(f"need 1 <= m <= d, got d={d}, m={m}")
    return 1 - c * (d + m) * (d - m) / (d * (d + 1))


# ---------------------------------------------------------- phase family

def phase_family_achiever() -> tuple[KrausChannel, KrausChannel]:
    """Trace out the second qubit, then re-expand with a rank-two decoder."""
    e = np.eye(2)
    enc = KrausChannel(4, 2, tuple(np.kron(e, e[b].reshape(1, 2)) for b in range(2)))
    ket00 = np.array([1, 0, 0, 0], dtype=complex)
    ket11 = np.array([0, 0, 0, 1], dtype=complex)
    a0 = (np.outer(ket00, e[0]) / np.sqrt(3) + np.sqrt(2 / 3) * np.outer(SIGMA, e[1]))
    a1 = (np.sqrt(2 / 3) * np.outer(SIGMA, e[0]) + np.outer(ket11, e[1]) / np.sqrt(3))
    dec = KrausChannel(2, 4, (a0, a1))
    return enc, dec


def decoder_k1_extension(n: int) -> tuple[KrausChannel, KrausChannel]:
    """Phase-family pair lifted to n qubits by discarding and re-preparing |0...0>."""
    if n < 2:
        raise ValueError("n must be at least 2")
    enc2, dec2 = phase_family_achiever()
    if n == 2:
        return enc2, dec2
    r = 2 ** (n - 2)
    basis_r = np.eye(r)
    enc = KrausChannel(2 ** n, 2, tuple(k @ np.kron(np.eye(4), basis_r[b].reshape(1, r))
                                         for k in enc2.kraus for b in range(r)))
    dec = KrausChannel(2, 2 ** n, tuple(np.kron(a, basis_r[0].reshape(r, 1)) for a in dec2.kraus))
    return enc, dec


def isometric_upper_bound(src: SourceEnsemble, m: int) -> float:
    return kyfan_sum(src.mean_state().rho_bar, m)


# ----------------------------------------------------- Gram criterion

def _gram(states: np.ndarray) -> np.ndarray:
    return states.conj() @ states.T


def gram_criterion(inputs, outputs) -> GramCriterionReport:
    """Test whether some channel can map each input ket to its output ket.

    A channel doing so exists iff ``G_in = M ∘ G_out`` for a positive
    semidefinite M with unit diagonal.  Entries where both Gram matrices
    vanish are unconstrained and set to zero.
    """
    a = np.array(inputs, dtype=complex)
    b = np.array(outputs, dtype=complex)
    if a.ndim != 2 or b.ndim != 2 or len(a) != len(b):
        raise ValueError("inputs and outputs must be equal-length lists of kets")
    for st in (a, b):
        if np.abs(np.linalg.norm(st, axis=1) - 1).max() > 1e-10:
            raise ValueError("all kets must have unit norm")
    ga, gb = _gram(a), _gram(b)
    mm = np.zeros_like(ga)
    undefined = 0
    forced = False
    for i in range(len(a)):
        for j in range(len(a)):
            if abs(gb[i, j]) > ZERO_TOL:
                mm[i, j] = ga[i, j] / gb[i, j]
            elif abs(ga[i, j]) > ZERO_TOL:
                forced = True
            else:
                undefined += 1
    herm = 0.5 * (mm + mm.conj().T)
    min_eig = float(np.linalg.eigvalsh(herm).min())
    diag_ok = bool(np.abs(np.diag(mm) - 1).max() <= 1e-10)
    feasible = (not forced) and diag_ok and min_eig >= -FEASIBLE_TOL
    return GramCriterionReport(ga, gb, mm, min_eig, feasible, undefined, forced)


def eta_state(t: float, gamma: float = 0.0) -> np.ndarray:
    return np.array([np.cos(t), 0, 0, np.exp(1j * gamma) * np.sin(t)], dtype=complex)


def projector_t(t: float, gamma: float = 0.0) -> np.ndarray:
    eta = eta_state(t, gamma)
    return np.outer(SIGMA, SIGMA.conj()) + np.outer(eta, eta.conj())


def phase_rotation(beta: float) -> np.ndarray:
    """diag(1, e^{i beta}) on both qubits."""
    w = np.diag([1, np.exp(1j * beta)])
    return np.kron(w, w)


def projected_phase_states(t: float, gamma: float, phis: Sequence[float]) -> np.ndarray:
    if not 0 <= t <= np.pi / 2:
        raise ValueError(f"t must lie in [0, pi/2], got {t}")
    p = projector_t(t, gamma)
    out = []
    for phi in phis:
        v = p @ phase_state(phi)
        out.append(v / np.linalg.norm(v))
    return np.array(out)


def witness_phases(t: float) -> np.ndarray:
    """Phase sets whose projected images admit no channel."""
    if abs(np.sin(2 * t) - 1) < 1e-12:
        return np.array([0.0, np.pi / 6, 5 * np.pi / 6])
    return np.array([0.0, np.pi / 2, np.pi, 3 * np.pi / 2])


def gram_witness(t: float, gamma: float = 0.0) -> GramCriterionReport:
    """Gram test for inputs Psi_phi and outputs P_{t,gamma} Psi_phi (normalized).

    A nonzero gamma is absorbed by shifting every phase by gamma/2.
    """
    phis = witness_phases(t) + gamma / 2
    inputs = np.array([phase_state(p) for p in phis])
    return gram_criterion(inputs, projected_phase_states(t, gamma, phis))


NAMED_WITNESSES = {
    "t-pi4": (np.pi / 4, 0.0),
    "t0-fourphase": (0.0, 0.0),
}


# ------------------------------------------------------- reset channels

def _check_projector(p, d: int, m: int) -> np.ndarray:
    p = as_cmatrix(p)
    if p.shape != (d, d) or not is_projector(p):
        raise ChannelError("P must be an orthogonal projector on C^d")
    if abs(np.trace(p).real - m) > 1e-10:
        raise ChannelError(f"P has rank {np.trace(p).real:.3f}, expected {m}")
    return p


def projector_isometry(p, xi, m: int) -> np.ndarray:
    """Isometry V: C^m -> C^d with V V^† = P and V|0> = xi."""
    p = as_cmatrix(p)
    xi = np.asarray(xi, dtype=complex).reshape(-1)
    if np.linalg.norm(p @ xi - xi) > 1e-9 or abs(np.linalg.norm(xi) - 1) > 1e-10:
        raise ChannelError("xi must be a unit vector in the image of P")
    rest = p - np.outer(xi, xi.conj())
    w, q = np.linalg.eigh(0.5 * (rest + rest.conj().T))
    others = q[:, w > 0.5]
    if others.shape[1] != m - 1:
        raise ChannelError("projector rank does not match m")
    return np.column_stack([xi, others[:, ::-1]])


def projector_pair(p, xi, d: int, m: int) -> tuple[KrausChannel, KrausChannel]:
    """Encoder ``V^† P rho P V + Tr((I-P) rho)|0><0|`` with decoder ``V . V^†``."""
    p = _check_projector(p, d, m)
    v = projector_isometry(p, xi, m)
    w, q = np.linalg.eigh(np.eye(d) - p)
    perp = q[:, w > 0.5]
    e0 = np.zeros(m, dtype=complex)
    e0[0] = 1.0
    enc = KrausChannel(d, m, (v.conj().T,) + tuple(np.outer(e0, perp[:, j].conj())
                                                    for j in range(perp.shape[1])))
    dec = KrausChannel(m, d, (v,))
    return enc, dec


def reset_construction(p, d: int, m: int) -> tuple[KrausChannel, KrausChannel]:
    p = _check_projector(p, d, m)
    e0 = np.zeros(d, dtype=complex)
    e0[0] = 1.0
    if np.linalg.norm(p @ e0 - e0) >= 1e-10:
        raise ChannelError("|0> is not in the image of P")
    return projector_pair(p, e0, d, m)


def coordinate_projector(d: int, m: int) -> np.ndarray:
    """Projector onto the first m computational basis states."""
    p = np.zeros((d, d), dtype=complex)
    p[:m, :m] = np.eye(m)
    return p


def reset_pipeline(d: int, m: int) -> KrausChannel:
    enc, dec = reset_construction(coordinate_projector(d, m), d, m)
    return compose(dec, enc)


def universal_first_order(d: int, m: int) -> float:
    return (d - m) / (d - 1)


# ------------------------------------------------- concentration bound

def concentration_bound(src: SourceEnsemble, m: int) -> ConcentrationReport:
    """Ky-Fan mass of the mean state and the fidelity of the projector pair
    built on its top-m eigenspace."""
    if not 1 <= m <= src.dim:
        raise ValueError(f"m={m} out of range for dimension {src.dim}")
    ms = src.mean_state()
    s = ms.s_m(m)
    eta = 1.0 - s
    p = top_projector(ms.rho_bar, m)
    states, weights = src.quadrature()
    pp = np.real(np.einsum("na,ab,nb->n", states.conj(), p, states))
    proj = states @ p.T  # rows P psi
    e_p2 = float(np.dot(weights, pp ** 2))
    y = np.einsum("n,na,nb->ab", weights * (1 - pp), proj, proj.conj())
    yw, yq = eig_hermitian(0.5 * (y + y.conj().T))
    if yw[0] > 1e-14:
        xi = yq[:, 0]
    else:
        xi = eig_hermitian(ms.rho_bar)[1][:, 0]
    xi = p @ xi
    xi = xi / np.linalg.norm(xi)
    b = e_p2 + float(np.real(xi.conj() @ y @ xi))
    ratio = 1 - (1 - 1 / m) * eta
    return ConcentrationReport(m, s, eta, ratio, b, p, xi)


# ------------------------------------------------------- fixed encoder

def fixed_encoder_gap(epsilon: float) -> tuple[float, float]:
    """Best isometric versus constant decoder behind an encoder that outputs I/2.

    The source is |00> with probability 1 - eps and |11> otherwise.
    """
    if not 0 < epsilon < 0.5:
        raise ValueError(f"epsilon must lie in (0, 1/2), got {epsilon}")
    states = np.zeros((2, 4), dtype=complex)
    states[0, 0] = 1.0
    states[1, 3] = 1.0
    probs = np.array([1 - epsilon, epsilon])
    rho = np.einsum("n,na,nb->ab", probs, states, states.conj())
    # an isometric decoder W gives Tr(W (I/2) W^† rho) = Tr(P rho)/2 with rank(P) = 2
    isometric = kyfan_sum(rho, 2) / 2
    enc = discard_encoder()
    const = KrausChannel(2, 4, tuple(np.outer(states[0], np.eye(2)[b]) for b in range(2)))
    nonisometric = float(np.dot(probs, per_sample_fidelity(enc, const, states)))
    return float(isometric), nonisometric


def discard_encoder() -> KrausChannel:
    """Two-qubit to one-qubit channel ``rho -> Tr(rho) I/2``."""
    e2, e4 = np.eye(2), np.eye(4)
    return KrausChannel(4, 2, tuple(np.outer(e2[a], e4[j]) / np.sqrt(2)
                                    for a in range(2) for j in range(4)))


def reset_first_order_pair(d: int, m: int) -> tuple[KrausChannel, float]:
    """Reset channel on the first m basis states and its universal slope."""
    return reset_channel(coordinate_projector(d, m), d), universal_first_order(d, m)
