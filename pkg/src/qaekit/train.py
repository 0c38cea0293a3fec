"""Gradient training of QAE generators.

Both unitaries are parameterized as ``exp(iH)``.  The loss is the mean
infidelity over a batch; its gradient with respect to each Hermitian
generator is computed in closed form through the spectral differential of
the matrix exponential and fed to Adam.
"""

from __future__ import annotations

import csv
import functools
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .matcore import eig_hermitian
from .mnistprep import PrepConfig, prepare_dataset
from .qae import QaeArchitecture, QaeParams
from .sources import SourceEnsemble, load_states

DEGENERATE_GAP = 1e-9


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 500
    learning_rate: float = 1e-3
    batch_size: int = 64
    seed: int = 0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    init_scale: float = 0.01
    steps_per_epoch: int | None = None

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")
        if not (0 <= self.adam_beta1 < 1 and 0 <= self.adam_beta2 < 1):
            raise ValueError("Adam betas must lie in [0, 1)")
        if self.epochs < 0:
            raise ValueError("epochs must be nonnegative")
        if self.init_scale < 0:
            raise ValueError("init_scale must be nonnegative")


@dataclass(frozen=True)
class Dataset:
    """States as rows, optionally with quadrature weights.

    A weighted dataset is treated as an exact rule: every optimizer step
    uses all of it and no shuffling happens.
    """

    states: np.ndarray = field(repr=False)
    weights: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        st = np.asarray(self.states, dtype=complex)
        if st.ndim != 2 or len(st) == 0:
            raise ValueError("dataset needs a nonempty 2-d array of states")
        object.__setattr__(self, "states", st)
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float)
            if w.shape != (len(st),):
                raise ValueError("weights must match the number of states")
            object.__setattr__(self, "weights", w)

    @property
    def exact(self) -> bool:
        return self.weights is not None

    def __len__(self) -> int:
        return len(self.states)


@dataclass(frozen=True)
class TrainTrace:
    arch: QaeArchitecture
    seed: int
    per_epoch: np.ndarray = field(repr=False)  # (epochs, 2): train, test infidelity
    initial: tuple[float, float]
    final_params: QaeParams = field(repr=False)

    @property
    def final_test(self) -> float:
        return float(self.per_epoch[-1, 1]) if len(self.per_epoch) else self.initial[1]

    @property
    def final_train(self) -> float:
        return float(self.per_epoch[-1, 0]) if len(self.per_epoch) else self.initial[0]


def hermitian_noise(dim: int, rng: np.random.Generator, scale: float) -> np.ndarray:
    a = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return scale * 0.5 * (a + a.conj().T)


def init_params(arch: QaeArchitecture, cfg: TrainConfig,
                rng: np.random.Generator | None = None) -> QaeParams:
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    hu = hermitian_noise(arch.dim_u, rng, cfg.init_scale)
    hv = hermitian_noise(arch.dim_v, rng, cfg.init_scale)
    return QaeParams(arch, hu, hv)


# ------------------------------------------------------------ gradients

def _expm_parts(h: np.ndarray):
    w, q = eig_hermitian(h)
    ph = np.exp(1j * w)
    u = (q * ph) @ q.conj().T
    return u, w, q, ph


def _exp_kernel(w: np.ndarray, ph: np.ndarray) -> np.ndarray:
    """Divided differences of lambda -> exp(i lambda)."""
    dw = w[:, None] - w[None, :]
    close = np.abs(dw) < DEGENERATE_GAP
    safe = np.where(close, 1.0, dw)
    gam = (ph[:, None] - ph[None, :]) / safe
    diag_limit = 1j * 0.5 * (ph[:, None] + ph[None, :])
    return np.where(close, diag_limit, gam)


def _pull_back(g_u: np.ndarray, w: np.ndarray, q: np.ndarray, ph: np.ndarray) -> np.ndarray:
    """Map dF/d(conj U) to the Hermitian gradient ``G`` with dF = Tr(G dH)."""
    gt = q.conj().T @ g_u @ q
    z = q @ (np.conj(_exp_kernel(w, ph)) * gt) @ q.conj().T
    return z + z.conj().T


def _forward(arch: QaeArchitecture, u: np.ndarray, v: np.ndarray, psi: np.ndarray):
    sb, se = 2 ** arch.nB, 2 ** arch.nE
    wu = u[:, ::sb]
    wv = v[:, ::se].reshape(arch.d, arch.dec_capacity, arch.m)
    a = (psi @ wu.T).reshape(len(psi), arch.m, arch.enc_capacity)
    mm = np.einsum("nx,xgc->ngc", psi.conj(), wv)
    amp = mm @ a
    f = np.sum(np.abs(amp.reshape(len(psi), -1)) ** 2, axis=1)
    return f, a, mm, amp


def batch_fidelities(p: QaeParams, states) -> np.ndarray:
    psi = np.asarray(states, dtype=complex)
    return _forward(p.arch, p.U, p.V, psi)[0]


def infidelity(p: QaeParams, data: Dataset) -> float:
    f = batch_fidelities(p, data.states)
    if data.exact:
        val = 1.0 - float(np.dot(data.weights, f))
    else:
        val = 1.0 - float(np.sum(f) / len(f))
    return min(1.0, max(0.0, val))


def loss_and_gradient(p: QaeParams, batch, weights=None) -> tuple[float, np.ndarray, np.ndarray]:
    """Mean infidelity and its gradients with respect to both generators.

    The gradients ``G`` satisfy ``d loss = Tr(G_U dH_U) + Tr(G_V dH_V)`` for
    Hermitian perturbations and are themselves Hermitian.
    """
    arch = p.arch
    psi = np.asarray(batch, dtype=complex)
    if psi.ndim != 2 or len(psi) == 0 or psi.shape[1] != arch.d:
        raise ValueError(f"batch must be a nonempty (N, {arch.d}) array")
    if weights is None:
        wts = np.full(len(psi), 1.0 / len(psi))
    else:
        wts = np.asarray(weights, dtype=float)
    u, wu_eig, qu, phu = _expm_parts(p.gen_U)
    v, wv_eig, qv, phv = _expm_parts(p.gen_V)
    f, a, mm, amp = _forward(arch, u, v, psi)
    loss = 1.0 - float(np.dot(wts, f))

    # dF/d(conj W_U): outer((M^† A)_flat, conj psi)
    mha = np.conj(np.swapaxes(mm, 1, 2)) @ amp  # (N, m, dD)
    g_wu = np.einsum("n,nr,nx->rx", wts, mha.reshape(len(psi), -1), psi.conj())
    # dF/d(conj W_V)[(x, g), c] = sum_b A[g, b] psi[x] conj(a[c, b])
    g_wv = np.einsum("n,ngb,nx,ncb->xgc", wts, amp, psi, a.conj())
    g_u = np.zeros_like(u)
    g_u[:, :: 2 ** arch.nB] = g_wu
    g_v = np.zeros_like(v)
    g_v[:, :: 2 ** arch.nE] = g_wv.reshape(arch.dim_v, arch.m)
    grad_u = -_pull_back(g_u, wu_eig, qu, phu)
    grad_v = -_pull_back(g_v, wv_eig, qv, phv)
    return loss, grad_u, grad_v


# ---------------------------------------------------------------- Adam

class Adam:
    """Adam on complex arrays, treating real and imaginary parts as
    independent coordinates."""

    def __init__(self, lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        self.t = 0

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> dict:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        out = {}
        for key, x in params.items():
            g = grads[key]
            g2 = g.real ** 2 + 1j * g.imag ** 2
            if key not in self.m:
                self.m[key] = np.zeros_like(x)
                self.v[key] = np.zeros_like(x)
            self.m[key] = b1 * self.m[key] + (1 - b1) * g
            self.v[key] = b2 * self.v[key] + (1 - b2) * g2
            mhat = self.m[key] / (1 - b1 ** self.t)
            vhat = self.v[key] / (1 - b2 ** self.t)
            step = (mhat.real / (np.sqrt(vhat.real) + self.eps)
                    + 1j * mhat.imag / (np.sqrt(vhat.imag) + self.eps))
            out[key] = x - self.lr * step
        return out


# ------------------------------------------------------------- training

def _streams(seed: int) -> tuple[np.random.Generator, np.random.Generator, np.random.Generator]:
    """Independent generators for data, initialization and shuffling."""
    data, init, shuffle = np.random.SeedSequence(seed).spawn(3)
    return (np.random.default_rng(data), np.random.default_rng(init),
            np.random.default_rng(shuffle))


def train(arch: QaeArchitecture, train_data: Dataset, test_data: Dataset,
          cfg: TrainConfig, init: QaeParams | None = None) -> TrainTrace:
    if train_data.states.shape[1] != arch.d or test_data.states.shape[1] != arch.d:
        raise ValueError(f"data dimension does not match {arch.label}")
    _, init_rng, shuffle_rng = _streams(cfg.seed)
    p = init_params(arch, cfg, init_rng) if init is None else init
    opt = Adam(cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps)
    n = len(train_data)
    if cfg.steps_per_epoch is not None:
        steps = cfg.steps_per_epoch
    else:
        steps = math.ceil(n / cfg.batch_size)
    initial = (infidelity(p, train_data), infidelity(p, test_data))
    hist = np.zeros((cfg.epochs, 2))
    params = {"U": p.gen_U, "V": p.gen_V}
    for epoch in range(cfg.epochs):
        if train_data.exact:
            batches = [(train_data.states, train_data.weights)] * steps
        else:
            order = shuffle_rng.permutation(n)
            batches = [(train_data.states[order[i:i + cfg.batch_size]], None)
                       for i in range(0, n, cfg.batch_size)]
        for states, wts in batches:
            cur = QaeParams(arch, params["U"], params["V"])
            _, gu, gv = loss_and_gradient(cur, states, wts)
            params = opt.step(params, {"U": gu, "V": gv})
        p = QaeParams(arch, params["U"], params["V"])
        hist[epoch] = infidelity(p, train_data), infidelity(p, test_data)
    return TrainTrace(arch, cfg.seed, hist, initial, p)


# ----------------------------------------------------------- experiments

MODES = ("sampled", "five_point", "exact_mu1")
SOURCES = ("haar", "mu1", "phase", "phase_extended", "empirical", "mnist")
_INT_KEYS = {"epochs", "batch", "reps", "train", "test", "steps_per_epoch"}
_FLOAT_KEYS = {"epsilon", "lr", "init_scale", "head_energy"}
_LIST_KEYS = {"n", "k", "nB", "nE", "seeds"}
_STR_KEYS = {"source", "mode", "path", "name"}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentSpec:
    source: str
    archs: tuple[QaeArchitecture, ...]
    seeds: tuple[int, ...]
    epochs: int = 500
    lr: float = 1e-3
    batch: int = 64
    mode: str = "sampled"
    epsilon: float | None = None
    path: str | None = None
    n_train: int = 2000
    n_test: int = 1000
    init_scale: float = 0.01
    head_energy: float = 0.9
    steps_per_epoch: int | None = None
    name: str = "experiment"

    def config(self, seed: int) -> TrainConfig:
        steps = self.steps_per_epoch
        if steps is None and self.mode != "sampled":
            # quadrature modes take as many steps per epoch as sampled training would
            steps = math.ceil(self.n_train / self.batch)
        return TrainConfig(epochs=self.epochs, learning_rate=self.lr, batch_size=self.batch,
                           seed=seed, init_scale=self.init_scale, steps_per_epoch=steps)


def parse_descriptor(text: str) -> ExperimentSpec:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, val = (s.strip() for s in line.split("=", 1))
        known = _INT_KEYS | _FLOAT_KEYS | _LIST_KEYS | _STR_KEYS
        if key not in known:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in raw:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        raw[key] = val
    try:
        ints = {k: int(raw[k]) for k in _INT_KEYS if k in raw}
        floats = {k: float(raw[k]) for k in _FLOAT_KEYS if k in raw}
        lists = {k: [int(t) for t in raw[k].split(",") if t.strip()]
                 for k in _LIST_KEYS if k in raw}
    except ValueError as exc:
        raise ConfigError(f"bad numeric value: {exc}") from exc
    for key in ("source", "n", "k", "nB", "nE"):
        if key not in raw:
            raise ConfigError(f"missing required key {key!r}")
    source = raw["source"]
    if source not in SOURCES:
        raise ConfigError(f"unknown source {source!r}; choose from {', '.join(SOURCES)}")
    mode = raw.get("mode", "sampled")
    if mode not in MODES:
        raise ConfigError(f"unknown mode {mode!r}; choose from {', '.join(MODES)}")
    if mode == "five_point" and source != "phase":
        raise ConfigError("five_point mode needs source = phase")
    if mode == "exact_mu1" and source != "mu1":
        raise ConfigError("exact_mu1 mode needs source = mu1")
    if source == "mu1" and "epsilon" not in floats:
        raise ConfigError("source mu1 needs epsilon")
    if source in ("empirical", "mnist") and "path" not in raw:
        raise ConfigError(f"source {source} needs path")

    cols = [lists[k] for k in ("n", "k", "nB", "nE")]
    width = max(len(c) for c in cols)
    for c in cols:
        if len(c) not in (1, width):
            raise ConfigError("n, k, nB, nE lists must have equal length or length 1")
    try:
        archs = tuple(QaeArchitecture(*(c[i] if len(c) > 1 else c[0] for c in cols))
                      for i in range(width))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    seeds_list = lists.get("seeds", [0])
    reps = ints.get("reps")
    if len(seeds_list) == 1 and reps is not None:
        seeds = tuple(seeds_list[0] + r for r in range(reps))
    elif reps is not None and reps != len(seeds_list):
        raise ConfigError("reps disagrees with the number of listed seeds")
    else:
        seeds = tuple(seeds_list)
    if source == "phase_extended" and len({a.n for a in archs}) != 1:
        raise ConfigError("phase_extended needs a single n")
    try:
        return ExperimentSpec(
            source=source, archs=archs, seeds=seeds,
            epochs=ints.get("epochs", 500), lr=floats.get("lr", 1e-3),
            batch=ints.get("batch", 64), mode=mode, epsilon=floats.get("epsilon"),
            path=raw.get("path"), n_train=ints.get("train", 2000),
            n_test=ints.get("test", 1000), init_scale=floats.get("init_scale", 0.01),
            head_energy=floats.get("head_energy", 0.9),
            steps_per_epoch=ints.get("steps_per_epoch"), name=raw.get("name", "experiment"))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _source_for(spec: ExperimentSpec, n: int):
    d = 2 ** n
    if spec.source == "haar":
        return SourceEnsemble.haar(d)
    if spec.source == "mu1":
        return SourceEnsemble.mu1(d, spec.epsilon)
    if spec.source == "phase":
        if n != 2:
            raise ConfigError("source phase is defined on two qubits; use phase_extended")
        return SourceEnsemble.phase()
    if spec.source == "phase_extended":
        return SourceEnsemble.phase_extended(n)
    return None


@functools.lru_cache(maxsize=8)
def _mnist_states(path: str, n: int, k: int, head_energy: float, count: int) -> np.ndarray:
    states, _ = prepare_dataset(path, PrepConfig(n, k, head_energy), count)
    states.setflags(write=False)
    return states


def _file_states(spec: ExperimentSpec, n: int, k: int) -> np.ndarray:
    total = spec.n_train + spec.n_test
    if spec.source == "mnist":
        return _mnist_states(spec.path, n, k, spec.head_energy, total)
    states = load_states(spec.path)
    if states.shape[1] != 2 ** n:
        raise ConfigError(f"state file has dimension {states.shape[1]}, architecture needs {2 ** n}")
    if len(states) < total:
        raise ConfigError(f"state file has {len(states)} states, {total} needed")
    return states[:total]


def experiment_data(spec: ExperimentSpec, arch: QaeArchitecture, seed: int) -> tuple[Dataset, Dataset]:
    """Training and test sets for one architecture and seed.

    Sampled sources draw the training states from the seed's data stream, so
    every architecture with the same n sees the same states; their test set
    is the exact averaging rule of the ensemble.  File sources are split in
    order.
    """
    if spec.source in ("empirical", "mnist"):
        st = _file_states(spec, arch.n, arch.k)
        return Dataset(st[: spec.n_train]), Dataset(st[spec.n_train:])
    src = _source_for(spec, arch.n)
    qs, qw = src.quadrature()
    exact = Dataset(qs, qw)
    if spec.mode != "sampled":
        return exact, exact
    data_rng, _, _ = _streams(seed)
    return Dataset(src.sample(spec.n_train, data_rng)), exact


@dataclass
class ExperimentResult:
    spec: ExperimentSpec
    traces: dict[str, list[TrainTrace]]
    outputs: list[Path] = field(default_factory=list)

    def finals(self, label: str) -> np.ndarray:
        return np.array([t.final_test for t in self.traces[label]])

    def summary_rows(self) -> list[dict]:
        rows = []
        for label, traces in self.traces.items():
            fin = self.finals(label)
            mean = float(np.mean(fin))
            std = float(np.std(fin, ddof=1)) if len(fin) > 1 else 0.0
            rows.append({"arch": label, "reps": len(fin), "final_test_mean": mean,
                         "final_test_std": std, "band_low": mean - 2 * std,
                         "band_high": mean + 2 * std,
                         "final_train_mean": float(np.mean([t.final_train for t in traces]))})
        return rows


def run_experiment(spec: ExperimentSpec, out_dir=None) -> ExperimentResult:
    """Train every architecture for every seed; optionally write CSVs.

    Files: ``<name>_epochs.csv`` with one row per epoch, seed and
    architecture, and ``<name>_summary.csv`` with final means and
    two-sigma bands across seeds.
    """
    traces: dict[str, list[TrainTrace]] = {a.label: [] for a in spec.archs}
    for seed in spec.seeds:
        for arch in spec.archs:
            tr, te = experiment_data(spec, arch, seed)
            traces[arch.label].append(train(arch, tr, te, spec.config(seed)))
    result = ExperimentResult(spec, traces)
    if out_dir is not None:
        result.outputs = write_experiment(result, Path(out_dir))
    return result


def write_experiment(result: ExperimentResult, out_dir: Path) -> list[Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    name = result.spec.name
    epochs_path = out_dir / f"{name}_epochs.csv"
    summary_path = out_dir / f"{name}_summary.csv"
    with open(epochs_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch", "train_infidelity", "test_infidelity", "seed", "arch"])
        for label, traces in result.traces.items():
            for tr in traces:
                for e, (a, b) in enumerate(tr.per_epoch, 1):
                    w.writerow([e, repr(float(a)), repr(float(b)), tr.seed, label])
    rows = result.summary_rows()
    with open(summary_path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        for row in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    return [epochs_path, summary_path]


def with_epochs(spec: ExperimentSpec, epochs: int) -> ExperimentSpec:
    return replace(spec, epochs=epochs)
