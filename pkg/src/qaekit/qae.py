"""(n, k, n_B, n_E) quantum autoencoders built from two unitaries.

The encoder applies ``U`` to ``A ⊗ B`` (input register followed by ``n_B``
ancillas prepared in |0>) and keeps the top ``k`` qubits as the latent
register C, discarding D.  The decoder applies ``V`` to ``C ⊗ E`` and keeps
the top ``n`` qubits F, discarding G.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .channels import ChannelError, KrausChannel, choi_to_kraus, embed_kraus_isometry, to_choi
from .matcore import (as_cmatrix, check_hermitian, complete_isometry, eig_hermitian,
                      generator_from_unitary, unitary_from_generator)

CLAMP_TOL = 1e-8


@dataclass(frozen=True)
class QaeArchitecture:
    n: int
    k: int
    nB: int
    nE: int

    def __post_init__(self):
        if not self.n > self.k >= 1:
            raise ValueError(f"need n > k >= 1, got n={self.n}, k={self.k}")
        if self.nB < 0:
            raise ValueError("nB must be nonnegative")
        if self.nE < self.n - self.k:
            raise ValueError(f"nE={self.nE} is below n - k = {self.n - self.k}")

    @property
    def d(self) -> int:
        return 2 ** self.n

    @property
    def m(self) -> int:
        return 2 ** self.k

    @property
    def dim_u(self) -> int:
        return 2 ** (self.n + self.nB)

    @property
    def dim_v(self) -> int:
        return 2 ** (self.k + self.nE)

    @property
    def enc_capacity(self) -> int:
        """Dimension of the discarded register D."""
        return 2 ** (self.n + self.nB - self.k)

    @property
    def dec_capacity(self) -> int:
        """Dimension of the discarded register G."""
        return 2 ** (self.k + self.nE - self.n)

    @property
    def label(self) -> str:
        return f"({self.n},{self.k},{self.nB},{self.nE})"

    @classmethod
    def parse(cls, text: str) -> "QaeArchitecture":
        parts = text.strip().strip("()").replace(" ", "").split(",")
        if len(parts) != 4:
            raise ValueError(f"architecture needs four integers, got {text!r}")
        return cls(*(int(p) for p in parts))


@dataclass(frozen=True)
class QaeParams:
    arch: QaeArchitecture
    gen_U: np.ndarray = field(repr=False)
    gen_V: np.ndarray = field(repr=False)

    def __post_init__(self):
        hu = check_hermitian(self.gen_U)
        hv = check_hermitian(self.gen_V)
        if hu.shape != (self.arch.dim_u,) * 2:
            raise ValueError(f"gen_U has shape {hu.shape}, expected {self.arch.dim_u}")
        if hv.shape != (self.arch.dim_v,) * 2:
            raise ValueError(f"gen_V has shape {hv.shape}, expected {self.arch.dim_v}")
        object.__setattr__(self, "gen_U", hu)
        object.__setattr__(self, "gen_V", hv)

    @property
    def U(self) -> np.ndarray:
        return unitary_from_generator(self.gen_U)

    @property
    def V(self) -> np.ndarray:
        return unitary_from_generator(self.gen_V)


@dataclass(frozen=True)
class FidelityReport:
    mean_fidelity: float
    mean_infidelity: float
    stderr: float
    per_sample: np.ndarray | None = field(default=None, repr=False)


def params_from_unitaries(arch: QaeArchitecture, U, V) -> QaeParams:
    return QaeParams(arch, generator_from_unitary(U), generator_from_unitary(V))


def encoder_from_unitary(arch: QaeArchitecture, U) -> KrausChannel:
    U = as_cmatrix(U)
    if U.shape != (arch.dim_u, arch.dim_u):
        raise ValueError(f"encoder unitary has shape {U.shape}, expected {arch.dim_u}")
    w = U[:, :: 2 ** arch.nB]  # columns with the B register in |0>
    stack = w.reshape(arch.m, arch.enc_capacity, arch.d)
    return KrausChannel(arch.d, arch.m, tuple(stack[:, b, :] for b in range(arch.enc_capacity)))


def decoder_from_unitary(arch: QaeArchitecture, V) -> KrausChannel:
    V = as_cmatrix(V)
    if V.shape != (arch.dim_v, arch.dim_v):
        raise ValueError(f"decoder unitary has shape {V.shape}, expected {arch.dim_v}")
    w = V[:, :: 2 ** arch.nE]
    stack = w.reshape(arch.d, arch.dec_capacity, arch.m)
    return KrausChannel(arch.m, arch.d, tuple(stack[:, g, :] for g in range(arch.dec_capacity)))


def encoder_channel(p: QaeParams) -> KrausChannel:
    return encoder_from_unitary(p.arch, p.U)


def decoder_channel(p: QaeParams) -> KrausChannel:
    return decoder_from_unitary(p.arch, p.V)


def pipeline(p: QaeParams) -> tuple[KrausChannel, KrausChannel]:
    return encoder_channel(p), decoder_channel(p)


def _as_state_matrix(samples, dim: int) -> np.ndarray:
    psi = np.asarray(samples, dtype=complex)
    if psi.ndim == 1:
        psi = psi[None, :]
    if psi.ndim != 2 or psi.shape[1] != dim:
        raise ValueError(f"states must have dimension {dim}, got shape {psi.shape}")
    return psi


def per_sample_fidelity(enc: KrausChannel, dec: KrausChannel, samples) -> np.ndarray:
    """``<psi|(D∘E)(|psi><psi|)|psi>`` for each row of ``samples``."""
    if dec.dim_in != enc.dim_out or dec.dim_out != enc.dim_in:
        raise ChannelError(
            f"dimension chain mismatch: enc {enc.dim_in}->{enc.dim_out}, "
            f"dec {dec.dim_in}->{dec.dim_out}")
    psi = _as_state_matrix(samples, enc.dim_in)
    ek = enc.stacked()
    dk = dec.stacked()
    left = np.einsum("jca,na->njc", ek, psi)
    right = np.einsum("ixc,nx->nic", dk, psi.conj())
    amp = np.einsum("nic,njc->nij", right, left)
    return np.sum(np.abs(amp.reshape(len(psi), -1)) ** 2, axis=1)


def average_fidelity(enc: KrausChannel, dec: KrausChannel, samples,
                     weights: Sequence[float] | None = None,
                     keep_samples: bool = False) -> FidelityReport:
    """Mean reconstruction fidelity over sample states.

    With ``weights`` the mean is the weighted sum (quadrature rules); the
    reported stderr is then zero since the value is not a sample estimate.
    """
    f = per_sample_fidelity(enc, dec, samples)
    if f.min() < -CLAMP_TOL or f.max() > 1 + CLAMP_TOL:
        raise ChannelError(f"fidelity outside [0, 1] beyond roundoff: [{f.min()}, {f.max()}]")
    f = np.clip(f, 0.0, 1.0)
    if weights is None:
        mean = float(np.sum(f) / len(f))
        se = float(np.std(f, ddof=1) / np.sqrt(len(f))) if len(f) > 1 else 0.0
    else:
        w = np.asarray(weights, dtype=float)
        if w.shape != f.shape:
            raise ValueError("weights must match the number of samples")
        mean = float(min(1.0, max(0.0, np.sum(w * f))))
        se = 0.0
    return FidelityReport(mean, 1.0 - mean, se, f if keep_samples else None)


def _place_columns(full: np.ndarray, n_used: int, stride: int) -> np.ndarray:
    """Move the first ``n_used`` columns to positions ``0, stride, 2*stride, ...``."""
    size = full.shape[0]
    target = np.arange(n_used) * stride
    rest = np.setdiff1d(np.arange(size), target)
    out = np.empty_like(full)
    out[:, target] = full[:, :n_used]
    out[:, rest] = full[:, n_used:]
    return out


def _compressed(ch: KrausChannel, capacity: int) -> KrausChannel:
    if ch.n_kraus <= capacity:
        return ch
    small = choi_to_kraus(to_choi(ch))
    if small.n_kraus > capacity:
        raise ChannelError(f"Kraus rank {small.n_kraus} exceeds capacity {capacity}")
    return small


def embed_encoder(ch: KrausChannel, arch: QaeArchitecture) -> np.ndarray:
    """Encoder unitary U whose QAE encoder reproduces ``ch``."""
    if (ch.dim_in, ch.dim_out) != (arch.d, arch.m):
        raise ChannelError(f"channel {ch.dim_in}->{ch.dim_out} does not fit {arch.label}")
    ch = _compressed(ch, arch.enc_capacity)
    full = embed_kraus_isometry(ch.kraus, arch.enc_capacity)
    return _place_columns(full, arch.d, 2 ** arch.nB)


def embed_decoder(ch: KrausChannel, arch: QaeArchitecture) -> np.ndarray:
    """Decoder unitary V whose QAE decoder reproduces ``ch``."""
    if (ch.dim_in, ch.dim_out) != (arch.m, arch.d):
        raise ChannelError(f"channel {ch.dim_in}->{ch.dim_out} does not fit {arch.label}")
    ch = _compressed(ch, arch.dec_capacity)
    full = embed_kraus_isometry(ch.kraus, arch.dec_capacity)
    return _place_columns(full, arch.m, 2 ** arch.nE)


def embed_pair(enc: KrausChannel, dec: KrausChannel, arch: QaeArchitecture) -> QaeParams:
    return params_from_unitaries(arch, embed_encoder(enc, arch), embed_decoder(dec, arch))


def _ancilla_rotation(vec: np.ndarray) -> np.ndarray:
    """Unitary W with W|0> = vec."""
    return complete_isometry(vec.reshape(-1, 1))


def _gauge_fixed_eigh(rho) -> tuple[np.ndarray, np.ndarray]:
    w, q = eig_hermitian(rho)
    # make the largest-magnitude entry of each eigenvector real positive
    idx = np.argmax(np.abs(q), axis=0)
    ph = q[idx, np.arange(q.shape[1])]
    return w, q * (np.abs(ph) / ph)


def _check_density(rho, dim: int, name: str) -> np.ndarray:
    rho = check_hermitian(rho)
    if rho.shape != (dim, dim):
        raise ValueError(f"{name} must be {dim}x{dim}, got {rho.shape}")
    if abs(np.trace(rho).real - 1) > 1e-9 or np.linalg.eigvalsh(rho).min() < -1e-9:
        raise ValueError(f"{name} is not a density matrix")
    return rho


def purify_ancilla_gauge(p: QaeParams, sigma_B, tau_E,
                         weight_cut: float = 1e-14) -> list[tuple[float, QaeParams]]:
    """Split a mixed-ancilla QAE into pure-ancilla QAEs.

    Each component rotates the ancilla registers so that |0> is mapped to an
    eigenvector of the ancilla state; the mixed-ancilla fidelity is the
    weighted sum of component fidelities.
    """
    arch = p.arch
    sigma = _check_density(sigma_B, 2 ** arch.nB, "sigma_B")
    tau = _check_density(tau_E, 2 ** arch.nE, "tau_E")
    pw, pv = _gauge_fixed_eigh(sigma)
    qw, qv = _gauge_fixed_eigh(tau)
    U, V = p.U, p.V
    eye_a = np.eye(arch.d)
    eye_c = np.eye(arch.m)
    out = []
    for r in range(len(pw)):
        if pw[r] <= weight_cut:
            continue
        u_r = U @ np.kron(eye_a, _ancilla_rotation(pv[:, r]))
        for s in range(len(qw)):
            if qw[s] <= weight_cut:
                continue
            v_s = V @ np.kron(eye_c, _ancilla_rotation(qv[:, s]))
            out.append((float(pw[r] * qw[s]), params_from_unitaries(arch, u_r, v_s)))
    return out


def mixed_ancilla_pipeline(p: QaeParams, sigma_B, tau_E) -> tuple[KrausChannel, KrausChannel]:
    """Encoder and decoder channels when the ancillas start in mixed states."""
    arch = p.arch
    sigma = _check_density(sigma_B, 2 ** arch.nB, "sigma_B")
    tau = _check_density(tau_E, 2 ** arch.nE, "tau_E")

    def channel(Uni, anc, din, dout, cap):
        w, q = np.linalg.eigh(anc)
        kraus = []
        for lam, vec in zip(w, q.T):
            if lam <= 0:
                continue
            iso = Uni @ np.kron(np.eye(din), vec.reshape(-1, 1)) * np.sqrt(lam)
            st = iso.reshape(dout, cap, din)
            kraus.extend(st[:, b, :] for b in range(cap))
        return KrausChannel(din, dout, tuple(kraus))

    enc = channel(p.U, sigma, arch.d, arch.m, arch.enc_capacity)
    dec = channel(p.V, tau, arch.m, arch.d, arch.dec_capacity)
    return enc, dec
