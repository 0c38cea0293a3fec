"""Pure-state source ensembles and exact average-fidelity functionals."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .channels import KrausChannel
from .matcore import eig_hermitian
from .qae import per_sample_fidelity

KINDS = ("haar", "mu1", "phase", "phase_extended", "empirical", "eigen")

SIGMA = np.array([0, 1, 1, 0], dtype=complex) / np.sqrt(2)


class SourceError(ValueError):
    pass


def phase_qubit(phi: float) -> np.ndarray:
    return np.array([1.0, np.exp(1j * phi)], dtype=complex) / np.sqrt(2)


def phase_state(phi: float, n: int = 2) -> np.ndarray:
    """``psi_phi ⊗ psi_phi`` padded with |0> on the remaining ``n - 2`` qubits."""
    q = phase_qubit(phi)
    v = np.kron(q, q)
    if n > 2:
        pad = np.zeros(2 ** (n - 2), dtype=complex)
        pad[0] = 1.0
        v = np.kron(v, pad)
    return v


def phase_states(phis: Sequence[float], n: int = 2) -> np.ndarray:
    return np.array([phase_state(p, n) for p in phis])


def haar_states(dim: int, count: int, rng: np.random.Generator) -> np.ndarray:
    z = rng.standard_normal((count, dim)) + 1j * rng.standard_normal((count, dim))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def two_design(dim: int) -> tuple[np.ndarray, np.ndarray]:
    """Signed-weight rule on the unit sphere of C^dim exact for degree (2, 2).

    Points are the basis vectors and ``(e_i + i^s e_j)/sqrt(2)`` for i < j,
    s = 0..3.  The basis weights are negative when dim > 3.
    """
    pts = [np.eye(dim, dtype=complex)[i] for i in range(dim)]
    wts = [(3.0 - dim) / (dim * (dim + 1))] * dim
    for i in range(dim):
        for j in range(i + 1, dim):
            for s in range(4):
                v = np.zeros(dim, dtype=complex)
                v[i] = 1.0
                v[j] = 1j ** s
                pts.append(v / np.sqrt(2))
                wts.append(1.0 / (dim * (dim + 1)))
    return np.array(pts), np.array(wts)


@dataclass(frozen=True)
class MeanState:
    rho_bar: np.ndarray = field(repr=False)
    s: np.ndarray
    eta: np.ndarray

    def s_m(self, m: int) -> float:
        return float(self.s[m - 1])

    def eta_m(self, m: int) -> float:
        return float(self.eta[m - 1])

    @classmethod
    def from_rho(cls, rho, spectrum=None) -> "MeanState":
        """``spectrum`` overrides the numerical eigenvalues when known exactly."""
        if spectrum is None:
            w, _ = eig_hermitian(rho)
        else:
            w = np.sort(np.asarray(spectrum, dtype=float))[::-1]
        s = np.cumsum(w)
        return cls(np.asarray(rho, dtype=complex), s, 1.0 - s)


@dataclass(frozen=True)
class SourceEnsemble:
    """A distribution over pure states of dimension ``dim``.

    Build instances with the ``haar``, ``mu1``, ``phase``, ``phase_extended``,
    ``empirical`` and ``eigen`` constructors.
    """

    dim: int
    kind: str
    seed: int = 0
    epsilon: float | None = None
    n: int | None = None
    states: np.ndarray | None = field(default=None, repr=False)
    rho: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SourceError(f"unknown source kind {self.kind!r}")

    @classmethod
    def haar(cls, dim: int, seed: int = 0) -> "SourceEnsemble":
        return cls(dim, "haar", seed)

    @classmethod
    def mu1(cls, dim: int, epsilon: float, seed: int = 0) -> "SourceEnsemble":
        if not 0 < epsilon < 1:
            raise SourceError(f"epsilon must lie in (0, 1), got {epsilon}")
        if dim < 2:
            raise SourceError("mu1 needs dim >= 2")
        return cls(dim, "mu1", seed, epsilon=float(epsilon))

    @classmethod
    def phase(cls, seed: int = 0) -> "SourceEnsemble":
        return cls(4, "phase", seed, n=2)

    @classmethod
    def phase_extended(cls, n: int, seed: int = 0) -> "SourceEnsemble":
        if n < 2:
            raise SourceError("phase_extended needs n >= 2")
        return cls(2 ** n, "phase_extended", seed, n=n)

    @classmethod
    def empirical(cls, states, seed: int = 0) -> "SourceEnsemble":
        st = np.array(states, dtype=complex)
        if st.ndim != 2 or len(st) == 0:
            raise SourceError("empirical source needs a nonempty 2-d array of states")
        norms = np.linalg.norm(st, axis=1)
        if np.abs(norms - 1).max() > 1e-10:
            raise SourceError("empirical states must have unit norm")
        st.setflags(write=False)
        return cls(st.shape[1], "empirical", seed, states=st)

    @classmethod
    def eigen(cls, rho, seed: int = 0) -> "SourceEnsemble":
        rho = np.array(rho, dtype=complex)
        w = np.linalg.eigvalsh(rho)
        if abs(np.trace(rho).real - 1) > 1e-9 or w.min() < -1e-9:
            raise SourceError("eigen source needs a density matrix")
        return cls(rho.shape[0], "eigen", seed, rho=rho)

    # ------------------------------------------------------------ sampling

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(self.seed)

    def sample(self, count: int, rng: np.random.Generator | None = None) -> np.ndarray:
        """``count`` states as rows; reproducible from ``seed`` when ``rng`` is omitted."""
        rng = self.rng() if rng is None else rng
        if self.kind == "haar":
            return haar_states(self.dim, count, rng)
        if self.kind == "mu1":
            phi = haar_states(self.dim - 1, count, rng)
            out = np.zeros((count, self.dim), dtype=complex)
            out[:, 0] = np.sqrt(1 - self.epsilon)
            out[:, 1:] = np.sqrt(self.epsilon) * phi
            return out
        if self.kind in ("phase", "phase_extended"):
            phis = rng.uniform(0.0, 2 * np.pi, size=count)
            return phase_states(phis, self.n)
        if self.kind == "empirical":
            idx = rng.integers(0, len(self.states), size=count)
            return self.states[idx].copy()
        w, q = np.linalg.eigh(self.rho)
        w = np.clip(w, 0, None)
        idx = rng.choice(len(w), size=count, p=w / w.sum())
        return q.T[idx].copy()

    # ---------------------------------------------------------- moments

    def mean_state(self) -> MeanState:
        d = self.dim
        spectrum = None
        if self.kind == "haar":
            rho = np.eye(d, dtype=complex) / d
            spectrum = np.full(d, 1.0 / d)
        elif self.kind == "mu1":
            rho = np.zeros((d, d), dtype=complex)
            rho[0, 0] = 1 - self.epsilon
            rho[1:, 1:] = np.eye(d - 1) * self.epsilon / (d - 1)
            spectrum = np.r_[1 - self.epsilon, np.full(d - 1, self.epsilon / (d - 1))]
        elif self.kind in ("phase", "phase_extended"):
            core = (0.25 * np.diag([1, 0, 0, 0]) + 0.25 * np.diag([0, 0, 0, 1])
                    + 0.5 * np.outer(SIGMA, SIGMA.conj())).astype(complex)
            rho = np.zeros((d, d), dtype=complex)
            stride = d // 4
            rho[::stride, ::stride] = core
            spectrum = np.r_[0.5, 0.25, 0.25, np.zeros(d - 3)]
        elif self.kind == "empirical":
            st = self.states
            rho = st.T @ st.conj() / len(st)
        else:
            rho = self.rho.copy()
        return MeanState.from_rho(rho, spectrum)

    def quadrature(self) -> tuple[np.ndarray, np.ndarray]:
        """States and weights reproducing the ensemble average of any
        functional of degree at most two in ``psi`` and two in ``conj(psi)``."""
        d = self.dim
        if self.kind == "haar":
            return two_design(d)
        if self.kind == "mu1":
            pts, wts = two_design(d - 1)
            omegas = np.exp(2j * np.pi * np.arange(3) / 3)
            states, weights = [], []
            for om in omegas:
                block = np.zeros((len(pts), d), dtype=complex)
                block[:, 0] = np.sqrt(1 - self.epsilon)
                block[:, 1:] = np.sqrt(self.epsilon) * om * pts
                states.append(block)
                weights.append(wts / 3)
            return np.concatenate(states), np.concatenate(weights)
        if self.kind in ("phase", "phase_extended"):
            phis = 2 * np.pi * np.arange(5) / 5
            return phase_states(phis, self.n), np.full(5, 0.2)
        if self.kind == "empirical":
            return self.states.copy(), np.full(len(self.states), 1.0 / len(self.states))
        w, q = np.linalg.eigh(self.rho)
        keep = w > 1e-14
        return q.T[keep].copy(), w[keep] / w[keep].sum()

    def exact_fidelity(self, enc: KrausChannel, dec: KrausChannel) -> float:
        states, weights = self.quadrature()
        return float(np.dot(weights, per_sample_fidelity(enc, dec, states)))


# -------------------------------------------------------- closed forms

def _pipeline_kraus(enc: KrausChannel, dec: KrausChannel) -> np.ndarray:
    if enc.dim_out != dec.dim_in or enc.dim_in != dec.dim_out:
        raise SourceError("encoder and decoder do not form a pipeline on one space")
    return np.einsum("iab,jbc->ijac", dec.stacked(), enc.stacked()).reshape(
        -1, enc.dim_in, enc.dim_in)


def exact_haar_fidelity(enc: KrausChannel, dec: KrausChannel) -> float:
    ks = _pipeline_kraus(enc, dec)
    d = enc.dim_in
    tr = np.einsum("kaa->k", ks)
    return float(1.0 / (d + 1) + np.sum(np.abs(tr) ** 2) / (d * (d + 1)))


def exact_mu1_fidelity(enc: KrausChannel, dec: KrausChannel, epsilon: float) -> float:
    """Exact average fidelity over ``sqrt(1-eps)|0> + sqrt(eps)|phi>``,
    ``phi`` uniform on the unit sphere orthogonal to |0>."""
    if not 0 <= epsilon <= 1:
        raise SourceError(f"epsilon must lie in [0, 1], got {epsilon}")
    ks = _pipeline_kraus(enc, dec)
    d = enc.dim_in
    q = d - 1
    alpha = ks[:, 0, 0]
    r = ks[:, 0, 1:]
    c = ks[:, 1:, 0]
    b = ks[:, 1:, 1:]
    trb = np.einsum("kaa->k", b)
    zero = np.sum(np.abs(alpha) ** 2)
    one = (np.sum(np.abs(r) ** 2) + np.sum(np.abs(c) ** 2)
           + 2 * np.sum(np.real(alpha.conj() * trb))) / q
    two = (np.sum(np.abs(b) ** 2) + np.sum(np.abs(trb) ** 2)) / (q * (q + 1))
    e = float(epsilon)
    return float((1 - e) ** 2 * zero + e * (1 - e) * one + e ** 2 * two)


def five_point_phase_fidelity(enc: KrausChannel, dec: KrausChannel) -> float:
    """Exact phase-family average from the five phases 2*pi*j/5."""
    if enc.dim_in != 4:
        raise SourceError("five-point evaluation needs a two-qubit pipeline")
    phis = 2 * np.pi * np.arange(5) / 5
    return float(np.mean(per_sample_fidelity(enc, dec, phase_states(phis))))


# ----------------------------------------------------------- state files

def dumps_states(states) -> str:
    st = np.asarray(states, dtype=complex)
    if st.ndim != 2:
        raise SourceError("states must be a 2-d array")
    lines = [f"{st.shape[1]} {st.shape[0]}"]
    for row in st:
        vals = np.empty(2 * row.size)
        vals[0::2] = row.real
        vals[1::2] = row.imag
        lines.append(" ".join("%.16e" % v for v in vals))
    return "\n".join(lines) + "\n"


def loads_states(text: str) -> np.ndarray:
    rows = [ln.split() for ln in text.splitlines() if ln.strip()]
    if not rows:
        raise SourceError("empty state file")
    try:
        dim, count = (int(t) for t in rows[0])
    except ValueError as exc:
        raise SourceError(f"bad state-file header {' '.join(rows[0])!r}") from exc
    if dim < 1 or count < 1:
        raise SourceError("state file declares no states")
    if len(rows) - 1 != count:
        raise SourceError(f"header declares {count} states, file has {len(rows) - 1}")
    out = np.empty((count, dim), dtype=complex)
    for i, row in enumerate(rows[1:]):
        if len(row) != 2 * dim:
            raise SourceError(f"state {i} has {len(row)} values, expected {2 * dim}")
        try:
            vals = np.array([float(t) for t in row])
        except ValueError as exc:
            raise SourceError(f"non-numeric value in state {i}") from exc
        out[i] = vals[0::2] + 1j * vals[1::2]
    return out


def save_states(states, path) -> None:
    Path(path).write_text(dumps_states(states))


def load_states(path) -> np.ndarray:
    return loads_states(Path(path).read_text())


def load_empirical(path, seed: int = 0) -> SourceEnsemble:
    return SourceEnsemble.empirical(load_states(path), seed=seed)
