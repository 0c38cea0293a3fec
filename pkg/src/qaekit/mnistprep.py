"""MNIST images to pure states with a fixed fraction of mass on the first
``2**k`` amplitudes.

Pipeline: unitary 2-D DFT, shift DC to the grid centre, order bins by radius,
keep the first ``2**n`` coefficients, rescale the tail so the head carries
the requested energy, normalize.
"""

from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

SIDE = 28
CENTER = 14
IDX_IMAGES_MAGIC = 2051
MAX_QUBITS = 9
# tail energy below this fraction of the head energy is DFT roundoff
TAIL_ZERO_RATIO = 1e-20


class PrepError(ValueError):
    pass


@dataclass(frozen=True)
class PrepConfig:
    n: int = 3
    k: int = 1
    head_energy: float = 0.9

    def __post_init__(self):
        if not self.n > self.k >= 1:
            raise PrepError(f"need n > k >= 1, got n={self.n}, k={self.k}")
        if self.n > MAX_QUBITS:
            raise PrepError(
                f"n={self.n} gives 2**n >= {SIDE * SIDE} coefficients; at most n={MAX_QUBITS} "
                "is supported because only 784 Fourier coefficients exist")
        if not 0 < self.head_energy < 1:
            raise PrepError("head_energy must lie in (0, 1)")

    @property
    def d(self) -> int:
        return 2 ** self.n

    @property
    def m(self) -> int:
        return 2 ** self.k


@dataclass(frozen=True)
class PreparedState:
    psi: np.ndarray
    head_mass: float
    degenerate: bool


# ----------------------------------------------------------------- IDX

def _open(path):
    path = Path(path)
    return gzip.open(path, "rb") if path.suffix == ".gz" else open(path, "rb")


def read_idx(path) -> np.ndarray:
    """Images from an IDX3 file as an (N, 28, 28) float array in [0, 1]."""
    with _open(path) as fh:
        raw = fh.read()
    if len(raw) < 16:
        raise PrepError("IDX file is shorter than its header")
    magic, count, rows, cols = struct.unpack(">IIII", raw[:16])
    if magic != IDX_IMAGES_MAGIC:
        raise PrepError(f"bad IDX magic {magic:#010x}, expected {IDX_IMAGES_MAGIC:#010x}")
    need = count * rows * cols
    if len(raw) - 16 < need:
        raise PrepError(f"IDX file truncated: {len(raw) - 16} pixel bytes, expected {need}")
    pix = np.frombuffer(raw, dtype=np.uint8, count=need, offset=16)
    return pix.reshape(count, rows, cols).astype(float) / 255.0


def write_idx(path, images) -> None:
    """Write uint8 images (or floats in [0, 1]) as IDX3; gzip if the name ends in .gz."""
    arr = np.asarray(images)
    if arr.ndim != 3:
        raise PrepError("images must have shape (N, rows, cols)")
    if arr.dtype != np.uint8:
        arr = np.rint(np.clip(arr, 0, 1) * 255).astype(np.uint8)
    payload = struct.pack(">IIII", IDX_IMAGES_MAGIC, *arr.shape) + arr.tobytes()
    path = Path(path)
    if path.suffix == ".gz":
        # no stored name and a fixed mtime keep the bytes independent of path and time
        with open(path, "wb") as raw, gzip.GzipFile(filename="", fileobj=raw, mode="wb",
                                                    mtime=0) as fh:
            fh.write(payload)
    else:
        path.write_bytes(payload)


# ------------------------------------------------------------ features

def dft_matrix(size: int = SIDE) -> np.ndarray:
    j = np.arange(size)
    return np.exp(-2j * np.pi * np.outer(j, j) / size)


_DFT = dft_matrix()


def unitary_dft2(img) -> np.ndarray:
    x = np.asarray(img, dtype=float)
    if x.shape != (SIDE, SIDE):
        raise PrepError(f"image must be {SIDE}x{SIDE}, got {x.shape}")
    return _DFT @ x @ _DFT / SIDE


def shift_center(f: np.ndarray) -> np.ndarray:
    return np.roll(f, (CENTER, CENTER), axis=(0, 1))


def radial_order() -> np.ndarray:
    """Row-major bin indices sorted by squared distance from the centre;
    ties keep row-major order."""
    y, x = np.mgrid[0:SIDE, 0:SIDE]
    r2 = (y - CENTER) ** 2 + (x - CENTER) ** 2
    return np.argsort(r2.reshape(-1), kind="stable")


_ORDER = radial_order()


def prepare_state(img, cfg: PrepConfig) -> PreparedState:
    x = np.asarray(img, dtype=float)
    if not np.any(x):
        raise PrepError("all-zero image has no normalizable state")
    coeffs = shift_center(unitary_dft2(x)).reshape(-1)[_ORDER][: cfg.d]
    u, v = coeffs[: cfg.m], coeffs[cfg.m:]
    nu, nv = np.vdot(u, u).real, np.vdot(v, v).real
    if nu == 0:
        raise PrepError("head coefficients vanish; no state can carry the head energy")
    degenerate = nv <= TAIL_ZERO_RATIO * nu
    if degenerate:
        alpha = 0.0
    else:
        e = cfg.head_energy
        alpha = np.sqrt((1 - e) / e) * np.sqrt(nu / nv)
    psi = np.concatenate([u, alpha * v])
    psi = psi / np.linalg.norm(psi)
    head = float(np.sum(np.abs(psi[: cfg.m]) ** 2))
    return PreparedState(psi, head, bool(degenerate))


def prepare_dataset(path, cfg: PrepConfig, count: int) -> tuple[np.ndarray, np.ndarray]:
    """First ``count`` images of an IDX file as states, in file order.

    Returns the states and each state's head mass.
    """
    images = read_idx(path)
    if len(images) < count:
        raise PrepError(f"file holds {len(images)} images, {count} requested")
    states = np.empty((count, cfg.d), dtype=complex)
    heads = np.empty(count)
    for i in range(count):
        prep = prepare_state(images[i], cfg)
        states[i] = prep.psi
        heads[i] = prep.head_mass
    return states, heads


def head_mass_fraction(heads, target: float, tol: float = 1e-9) -> float:
    heads = np.asarray(heads)
    return float(np.mean(np.abs(heads - target) <= tol))
