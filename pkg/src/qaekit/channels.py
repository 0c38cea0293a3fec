"""Quantum channels in Kraus and Choi form.

Choi convention: ``Lambda = sum_ij |i><j| ⊗ Phi(|i><j|)`` with the input
factor most significant.  Reshaped to a 4-index tensor ``L[a, b, a', b']``
(input a, output b) this reads ``L[a, b, a', b'] = sum_k K[b, a] conj(K[b', a'])``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .matcore import MatrixError, as_cmatrix, complete_isometry, is_projector

TP_TOL = 1e-9
CP_TOL = 1e-9
FIX_TOL = 1e-8
KRAUS_CUT = 1e-10


class ChannelError(ValueError):
    """Raised for malformed channels or unmet channel preconditions."""


@dataclass(frozen=True)
class KrausChannel:
    """A linear map ``rho -> sum_i K_i rho K_i^†``.

    Shapes are checked on construction; trace preservation is checked by
    :func:`validate_cptp` so that non-TP lists can still be inspected.
    Zero Kraus operators are allowed (padding).
    """

    dim_in: int
    dim_out: int
    kraus: tuple = field(repr=False)

    def __post_init__(self):
        mats = tuple(as_cmatrix(k) for k in self.kraus)
        if not mats:
            raise ChannelError("a channel needs at least one Kraus operator")
        for k in mats:
            if k.shape != (self.dim_out, self.dim_in):
                raise ChannelError(
                    f"Kraus shape {k.shape} differs from ({self.dim_out}, {self.dim_in})")
        object.__setattr__(self, "kraus", mats)

    @classmethod
    def from_kraus(cls, kraus: Sequence, check_tp: bool = True) -> "KrausChannel":
        mats = [as_cmatrix(k) for k in kraus]
        if not mats:
            raise ChannelError("a channel needs at least one Kraus operator")
        dout, din = mats[0].shape
        ch = cls(din, dout, tuple(mats))
        if check_tp:
            rep = validate_cptp(ch)
            if not rep.tp:
                raise ChannelError(
                    f"Kraus list is not trace preserving (violation {rep.max_violation:.3e})")
        return ch

    @property
    def n_kraus(self) -> int:
        return len(self.kraus)

    def stacked(self) -> np.ndarray:
        """Kraus operators as an array of shape (r, dim_out, dim_in)."""
        return np.stack(self.kraus)

    def __call__(self, rho) -> np.ndarray:
        return apply(self, rho)


@dataclass(frozen=True)
class ChoiMatrix:
    dim_in: int
    dim_out: int
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = as_cmatrix(self.matrix)
        size = self.dim_in * self.dim_out
        if m.shape != (size, size):
            raise ChannelError(f"Choi matrix shape {m.shape} does not match {size}x{size}")
        object.__setattr__(self, "matrix", m)

    def tensor4(self) -> np.ndarray:
        return self.matrix.reshape(self.dim_in, self.dim_out, self.dim_in, self.dim_out)


@dataclass(frozen=True)
class CptpReport:
    cp: bool
    tp: bool
    max_violation: float


@dataclass(frozen=True)
class BlockDecomposition:
    """Kraus blocks relative to the split span{|0>} ⊕ H_perp.

    For each Kraus operator ``A_i``: ``A_i|0> = alpha_i|0>``, the top row
    restricted to H_perp is ``v_i^†`` and ``B_i`` is the H_perp block.
    """

    alphas: np.ndarray
    vs: np.ndarray
    bs: np.ndarray
    S: float
    T: float

    @property
    def dim(self) -> int:
        return self.bs.shape[1] + 1


def validate_cptp(ch: KrausChannel) -> CptpReport:
    ks = ch.stacked()
    comp = np.einsum("kba,kbc->ac", ks.conj(), ks)
    tp_err = float(np.linalg.norm(comp - np.eye(ch.dim_in)))
    lam = np.linalg.eigvalsh(to_choi(ch).matrix)
    cp_err = float(max(0.0, -lam.min()))
    return CptpReport(cp=cp_err <= CP_TOL, tp=tp_err <= TP_TOL,
                      max_violation=max(tp_err, cp_err))


def apply(ch: KrausChannel, rho) -> np.ndarray:
    rho = as_cmatrix(rho)
    if rho.shape != (ch.dim_in, ch.dim_in):
        raise ChannelError(f"input shape {rho.shape} does not match dim_in={ch.dim_in}")
    ks = ch.stacked()
    return np.einsum("kab,bc,kdc->ad", ks, rho, ks.conj())


def to_choi(ch: KrausChannel) -> ChoiMatrix:
    ks = ch.stacked()
    lam = np.einsum("kba,kdc->abcd", ks, ks.conj())
    n = ch.dim_in * ch.dim_out
    return ChoiMatrix(ch.dim_in, ch.dim_out, lam.reshape(n, n))


def choi_apply(lam: ChoiMatrix, rho) -> np.ndarray:
    """Tr_in(Lambda (rho^T ⊗ I))."""
    rho = as_cmatrix(rho)
    if rho.shape != (lam.dim_in, lam.dim_in):
        raise ChannelError(f"input shape {rho.shape} does not match dim_in={lam.dim_in}")
    return np.einsum("abcd,ca->bd", lam.tensor4(), rho.T)


def choi_to_kraus(lam: ChoiMatrix, cut: float = KRAUS_CUT) -> KrausChannel:
    """Kraus operators from the spectral decomposition of the Choi matrix."""
    w, q = np.linalg.eigh(lam.matrix)
    wmax = w.max()
    if wmax <= 0:
        raise ChannelError("Choi matrix has no positive eigenvalue")
    kraus = []
    for val, vec in zip(w[::-1], q.T[::-1]):
        if val <= cut * wmax:
            break
        kraus.append(np.sqrt(val) * vec.reshape(lam.dim_in, lam.dim_out).T)
    return KrausChannel(lam.dim_in, lam.dim_out, tuple(kraus))


def link_product(lam2: ChoiMatrix, lam1: ChoiMatrix) -> ChoiMatrix:
    """Choi matrix of ``Phi2 ∘ Phi1`` from the two Choi matrices.

    Contracts the shared middle system with a partial transpose on the
    first factor, i.e. ``Tr_B[(Lambda1^{T_B} ⊗ I_C)(I_A ⊗ Lambda2)]``.
    """
    if lam1.dim_out != lam2.dim_in:
        raise ChannelError(
            f"middle dimensions differ: {lam1.dim_out} vs {lam2.dim_in}")
    l1 = lam1.tensor4()  # [a, b, a', b']
    l2 = lam2.tensor4()  # [b, c, b', c']
    out = np.einsum("abAB,bcBC->acAC", l1, l2)
    n = lam1.dim_in * lam2.dim_out
    return ChoiMatrix(lam1.dim_in, lam2.dim_out, out.reshape(n, n))


def kraus_rank(lam: ChoiMatrix | KrausChannel, tol: float = 1e-8) -> int:
    if tol <= 0:
        raise ValueError("tol must be positive")
    if isinstance(lam, KrausChannel):
        lam = to_choi(lam)
    w = np.linalg.eigvalsh(lam.matrix)
    wmax = w.max()
    if wmax <= 0:
        return 0
    return int(np.sum(w > tol * wmax))


def stinespring(ch: KrausChannel) -> np.ndarray:
    """Isometry ``V = sum_i K_i ⊗ |i>_E`` (environment least significant)."""
    ks = ch.stacked()
    r = ks.shape[0]
    # V[(b, i), a] = K_i[b, a]
    return ks.transpose(1, 0, 2).reshape(ch.dim_out * r, ch.dim_in)


def compose(second: KrausChannel, first: KrausChannel) -> KrausChannel:
    """Kraus family {D_i E_j} of ``second ∘ first``."""
    if first.dim_out != second.dim_in:
        raise ChannelError(
            f"cannot compose: {first.dim_out} outputs into {second.dim_in} inputs")
    kraus = tuple(d @ e for d in second.kraus for e in first.kraus)
    return KrausChannel(first.dim_in, second.dim_out, kraus)


def identity_channel(d: int) -> KrausChannel:
    return KrausChannel(d, d, (np.eye(d, dtype=complex),))


def unitary_channel(u) -> KrausChannel:
    u = as_cmatrix(u)
    return KrausChannel(u.shape[1], u.shape[0], (u,))


def reset_channel(p, d: int) -> KrausChannel:
    """``rho -> P rho P + Tr((I - P) rho)|0><0|`` for a projector P fixing |0>."""
    p = as_cmatrix(p)
    if p.shape != (d, d):
        raise ChannelError(f"projector shape {p.shape} does not match d={d}")
    if not is_projector(p):
        raise ChannelError("P is not an orthogonal projector")
    e0 = np.zeros(d, dtype=complex)
    e0[0] = 1.0
    if np.linalg.norm(p @ e0 - e0) >= 1e-10:
        raise ChannelError("|0> is not in the image of P")
    m = int(round(np.trace(p).real))
    comp = np.eye(d) - p
    w, q = np.linalg.eigh(comp)
    perp = q[:, w > 0.5]
    if perp.shape[1] != d - m:
        raise ChannelError("projector rank is inconsistent with its complement")
    kraus = [p] + [np.outer(e0, perp[:, j].conj()) for j in range(d - m)]
    return KrausChannel(d, d, tuple(kraus))


def fixes_vacuum(ch: KrausChannel, tol: float = FIX_TOL) -> bool:
    if ch.dim_in != ch.dim_out:
        return False
    d = ch.dim_in
    rho0 = np.zeros((d, d), dtype=complex)
    rho0[0, 0] = 1.0
    return bool(np.linalg.norm(apply(ch, rho0) - rho0) < tol)


def block_decompose(ch: KrausChannel) -> BlockDecomposition:
    if not fixes_vacuum(ch):
        raise ChannelError("channel does not fix |0><0|")
    ks = ch.stacked()
    col_leak = np.abs(ks[:, 1:, 0]).max() if ch.dim_in > 1 else 0.0
    if col_leak > np.sqrt(FIX_TOL):
        raise ChannelError(f"Kraus operators move |0> out of its span ({col_leak:.2e})")
    alphas = ks[:, 0, 0].copy()
    vs = ks[:, 0, 1:].conj()
    bs = ks[:, 1:, 1:].copy()
    S = float(np.sum(np.abs(vs) ** 2))
    T = float(np.sum(np.abs(bs) ** 2))
    return BlockDecomposition(alphas=alphas, vs=vs, bs=bs, S=S, T=T)


def block_identity_residuals(bd: BlockDecomposition) -> tuple[float, float, float]:
    """Residuals of the three block identities implied by trace preservation."""
    q = bd.dim - 1
    r1 = abs(np.sum(np.abs(bd.alphas) ** 2) - 1.0)
    r2 = float(np.linalg.norm(np.einsum("i,ij->j", bd.alphas, bd.vs)))
    acc = (np.einsum("ia,ib->ab", bd.vs, bd.vs.conj())
           + np.einsum("iba,ibc->ac", bd.bs.conj(), bd.bs))
    r3 = float(np.linalg.norm(acc - np.eye(q)))
    return float(r1), r2, r3


def first_order_coefficient(bd: BlockDecomposition, d: int) -> float:
    """Slope of the infidelity at small epsilon for a vacuum-fixing channel."""
    if d < 2:
        raise ValueError("d must be at least 2")
    traces = np.einsum("ijj->i", bd.bs)
    cross = float(np.real(np.sum(bd.alphas.conj() * traces)))
    return 2.0 - (bd.S + 2.0 * cross) / (d - 1)


# ---------------------------------------------------------------- text format

def _fmt(x: float) -> str:
    return "%.16e" % x


def dumps_channel(ch: KrausChannel) -> str:
    lines = [f"{ch.dim_in} {ch.dim_out} {ch.n_kraus}"]
    for k in ch.kraus:
        flat = k.reshape(-1)
        vals = np.empty(2 * flat.size)
        vals[0::2] = flat.real
        vals[1::2] = flat.imag
        lines.append(" ".join(_fmt(v) for v in vals))
    return "\n".join(lines) + "\n"


def loads_channel(text: str) -> KrausChannel:
    rows = [ln.split() for ln in text.splitlines() if ln.strip()]
    if not rows:
        raise ChannelError("empty channel file")
    try:
        din, dout, nk = (int(t) for t in rows[0])
    except ValueError as exc:
        raise ChannelError(f"bad channel header: {' '.join(rows[0])!r}") from exc
    if min(din, dout, nk) < 1:
        raise ChannelError("channel header values must be positive")
    if len(rows) != nk + 1:
        raise ChannelError(f"expected {nk} Kraus lines, found {len(rows) - 1}")
    kraus = []
    for row in rows[1:]:
        if len(row) != 2 * din * dout:
            raise ChannelError(f"Kraus line has {len(row)} values, expected {2 * din * dout}")
        try:
            vals = np.array([float(t) for t in row])
        except ValueError as exc:
            raise ChannelError("non-numeric entry in Kraus line") from exc
        kraus.append((vals[0::2] + 1j * vals[1::2]).reshape(dout, din))
    return KrausChannel(din, dout, tuple(kraus))


def save_channel(ch: KrausChannel, path) -> None:
    Path(path).write_text(dumps_channel(ch))


def load_channel(path) -> KrausChannel:
    return loads_channel(Path(path).read_text())


def embed_kraus_isometry(kraus: Sequence[np.ndarray], capacity: int) -> np.ndarray:
    """Stack Kraus operators into ``sum_i K_i ⊗ |i>`` padded to ``capacity`` slots.

    Returns a unitary whose leading columns (those fed by a |0> ancilla)
    realise the stacked isometry.  Used by the QAE embedding routines.
    """
    ks = [as_cmatrix(k) for k in kraus]
    if len(ks) > capacity:
        raise ChannelError(f"{len(ks)} Kraus operators exceed capacity {capacity}")
    dout, din = ks[0].shape
    pad = ks + [np.zeros((dout, din), dtype=complex)] * (capacity - len(ks))
    iso = np.stack(pad).transpose(1, 0, 2).reshape(dout * capacity, din)
    try:
        return complete_isometry(iso)
    except MatrixError as exc:
        raise ChannelError(str(exc)) from exc
