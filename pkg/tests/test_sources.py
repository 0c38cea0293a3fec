from pathlib import Path

import numpy as np
import pytest
from conftest import random_channel
from hypothesis import given
from hypothesis import strategies as st

from qaekit import analytic
from qaekit.channels import KrausChannel, apply, compose
from qaekit.matcore import random_density, random_unitary
from qaekit.mnistprep import PrepConfig, prepare_dataset
from qaekit.qae import per_sample_fidelity
from qaekit.sources import (MeanState, SourceEnsemble, SourceError, dumps_states,
                            exact_haar_fidelity, exact_mu1_fidelity, five_point_phase_fidelity,
                            haar_states, load_empirical, loads_states, phase_states, save_states,
                            two_design)

MNIST = Path(__file__).resolve().parents[1] / "data" / "mnist5k-images-idx3-ubyte.gz"
seeds = st.integers(0, 2 ** 32 - 1)


def empirical_mean(states):
    return states.T @ states.conj() / len(states)


def monte_carlo(enc, dec, states):
    f = per_sample_fidelity(enc, dec, states)
    return f.mean(), f.std(ddof=1) / np.sqrt(len(f))


def trapezoid_phase(enc, dec, n=10000):
    # periodic trapezoid on n equally spaced phases
    phis = 2 * np.pi * np.arange(n) / n
    return per_sample_fidelity(enc, dec, phase_states(phis)).mean()


def identity_pair(d):
    return KrausChannel(d, d, (np.eye(d),)), KrausChannel(d, d, (np.eye(d),))


def random_pipeline(rng, d, m):
    return (random_channel(rng, d, m, int(rng.integers(1, 4))),
            random_channel(rng, m, d, int(rng.integers(1, 3))))


# -------------------------------------------------------------- sampling

def test_mu1_samples_overlap():
    s = SourceEnsemble.mu1(4, 0.1, seed=3).sample(200)
    assert np.abs(np.abs(s[:, 0]) ** 2 - 0.9).max() < 1e-12
    assert np.abs(np.linalg.norm(s, axis=1) - 1).max() < 1e-12


def test_phase_samples_are_product_states():
    for v in SourceEnsemble.phase(seed=1).sample(50):
        sv = np.linalg.svd(v.reshape(2, 2), compute_uv=False)
        assert sv[1] < 1e-12


def test_haar_mean_state_converges():
    s = SourceEnsemble.haar(4, seed=11).sample(50000)
    assert np.linalg.norm(empirical_mean(s) - np.eye(4) / 4) < 0.02


def test_sampling_reproducible():
    for src in (SourceEnsemble.haar(8, 5), SourceEnsemble.mu1(4, 0.2, 5),
                SourceEnsemble.phase(5), SourceEnsemble.phase_extended(3, 5)):
        assert np.array_equal(src.sample(30), src.sample(30))


def test_phase_extended_pads_zero():
    s = SourceEnsemble.phase_extended(4, seed=2).sample(10)
    assert s.shape == (10, 16)
    assert np.abs(s.reshape(10, 4, 4)[:, :, 1:]).max() == 0


def test_eigen_samples_are_eigenvectors(rng):
    rho = random_density(3, rng)
    src = SourceEnsemble.eigen(rho)
    for v in src.sample(10):
        lam = np.real(v.conj() @ rho @ v)
        assert np.abs(rho @ v - lam * v).max() < 1e-10


def test_invalid_sources():
    for bad in (0.0, 1.0, -0.1):
        with pytest.raises(SourceError):
            SourceEnsemble.mu1(4, bad)
    with pytest.raises(SourceError):
        SourceEnsemble.empirical(np.ones((2, 3)))
    with pytest.raises(SourceError):
        SourceEnsemble.empirical(np.zeros((0, 3)))
    with pytest.raises(SourceError):
        SourceEnsemble.eigen(np.eye(2))


# ------------------------------------------------------------ mean state

def test_phase_mean_state():
    ms = SourceEnsemble.phase().mean_state()
    w = np.linalg.eigvalsh(ms.rho_bar)[::-1]
    assert np.abs(w - [0.5, 0.25, 0.25, 0]).max() < 1e-12
    assert abs(ms.s_m(2) - 0.75) < 1e-12 and abs(ms.eta_m(2) - 0.25) < 1e-12


def test_phase_mean_state_matches_dense_average():
    phis = 2 * np.pi * np.arange(1000) / 1000
    rho = empirical_mean(phase_states(phis))
    assert np.abs(SourceEnsemble.phase().mean_state().rho_bar - rho).max() < 1e-12


def test_haar_mean_state():
    ms = SourceEnsemble.haar(4).mean_state()
    assert np.abs(ms.rho_bar - np.eye(4) / 4).max() == 0
    assert abs(ms.s_m(2) - 0.5) < 1e-15


def test_mu1_mean_state_monte_carlo():
    src = SourceEnsemble.mu1(4, 0.3, seed=4)
    ms = src.mean_state()
    assert np.abs(np.linalg.eigvalsh(ms.rho_bar)[::-1] - [0.7, 0.1, 0.1, 0.1]).max() < 1e-12
    assert np.abs(empirical_mean(src.sample(100000)) - ms.rho_bar).max() < 0.01


@pytest.mark.parametrize("src", [SourceEnsemble.haar(4, 1), SourceEnsemble.mu1(4, 0.25, 1)])
def test_mean_state_rate(src):
    exact = src.mean_state().rho_bar
    errs = {}
    for n in (1000, 10000):
        trials = [np.linalg.norm(empirical_mean(src.sample(n, np.random.default_rng(s))) - exact)
                  for s in range(20)]
        errs[n] = np.sqrt(np.mean(np.square(trials)))
    # 1/sqrt(N) predicts a ratio of sqrt(10)
    assert 2.0 < errs[1000] / errs[10000] < 5.0


@given(seeds, st.integers(2, 6))
def test_mean_state_invariants(seed, d):
    ms = MeanState.from_rho(random_density(d, np.random.default_rng(seed)))
    assert np.all(np.diff(ms.s) >= -1e-12)
    assert abs(ms.s_m(d) - 1) < 1e-10
    assert np.array_equal(ms.eta, 1 - ms.s)


# ----------------------------------------------------- 2-design quadrature

@given(seeds, st.integers(2, 6))
def test_two_design_second_moment(seed, d):
    pts, wts = two_design(d)
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    y = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    vals = np.einsum("na,ab,nb->n", pts.conj(), x, pts) * np.einsum("na,ab,nb->n", pts.conj(), y, pts)
    expected = (np.trace(x @ y) + np.trace(x) * np.trace(y)) / (d * (d + 1))
    assert abs(np.dot(wts, vals) - expected) < 1e-12


# -------------------------------------------------------- Haar closed form

def test_haar_rank_one_refill():
    enc, dec = analytic.haar_optimal_pair(4, 2)
    assert abs(exact_haar_fidelity(enc, dec) - 0.4) < 1e-12


def test_haar_unitary_pipeline(rng):
    u = random_unitary(4, rng)
    assert abs(exact_haar_fidelity(KrausChannel(4, 4, (u,)), KrausChannel(4, 4, (u.conj().T,))) - 1) < 1e-12


def test_haar_closed_form_matches_monte_carlo():
    rng = np.random.default_rng(99)
    enc, dec = random_pipeline(rng, 4, 2)
    mean, se = monte_carlo(enc, dec, haar_states(4, 100000, rng))
    assert abs(exact_haar_fidelity(enc, dec) - mean) < 3 * se


@given(seeds, st.sampled_from([(4, 2), (8, 2), (8, 4), (3, 2)]))
def test_haar_closed_form_matches_quadrature(seed, dm):
    enc, dec = random_pipeline(np.random.default_rng(seed), *dm)
    assert abs(exact_haar_fidelity(enc, dec) - SourceEnsemble.haar(dm[0]).exact_fidelity(enc, dec)) < 1e-12


def test_haar_dimension_mismatch(rng):
    with pytest.raises(SourceError):
        exact_haar_fidelity(random_channel(rng, 4, 2, 2), random_channel(rng, 2, 3, 2))


# ---------------------------------------------------------- mu1 closed form

@pytest.mark.parametrize("eps", [0.0, 0.1, 0.5, 1.0])
def test_mu1_identity(eps):
    assert abs(exact_mu1_fidelity(*identity_pair(4), eps) - 1) < 1e-12


def test_mu1_reset_slope():
    enc, dec = analytic.reset_construction(analytic.coordinate_projector(4, 2), 4, 2)
    eps = 1e-5
    slope = (1 - exact_mu1_fidelity(enc, dec, eps)) / eps
    assert abs(slope - 2 / 3) < 1e-5 * (2 / 3)


def test_mu1_reset_full_polynomial():
    # hand expansion with E|phi_1|^2 = 1/3, E|phi_1|^4 = 1/6 on the orthocomplement
    enc, dec = analytic.reset_construction(analytic.coordinate_projector(4, 2), 4, 2)
    for eps in (1e-5, 0.1, 0.5, 0.9):
        assert abs(exact_mu1_fidelity(enc, dec, eps) - (1 - 2 * eps / 3 - eps ** 2 / 6)) < 1e-12


def test_mu1_is_quadratic(rng):
    enc, dec = random_pipeline(rng, 4, 2)
    xs = np.array([0.1, 0.2, 0.3])
    coef = np.polyfit(xs, [exact_mu1_fidelity(enc, dec, x) for x in xs], 2)
    assert abs(np.polyval(coef, 0.4) - exact_mu1_fidelity(enc, dec, 0.4)) < 1e-9


@given(seeds, st.sampled_from([(4, 2), (8, 2), (3, 2)]), st.floats(0.01, 0.99))
def test_mu1_closed_form_matches_quadrature(seed, dm, eps):
    enc, dec = random_pipeline(np.random.default_rng(seed), *dm)
    quad = SourceEnsemble.mu1(dm[0], eps).exact_fidelity(enc, dec)
    assert abs(exact_mu1_fidelity(enc, dec, eps) - quad) < 1e-12


def test_mu1_closed_form_matches_monte_carlo():
    rng = np.random.default_rng(5)
    enc, dec = random_pipeline(rng, 4, 2)
    mean, se = monte_carlo(enc, dec, SourceEnsemble.mu1(4, 0.3).sample(100000, rng))
    assert abs(exact_mu1_fidelity(enc, dec, 0.3) - mean) < 3 * se


@given(seeds)
def test_mu1_at_zero_is_vacuum_fidelity(seed):
    enc, dec = random_pipeline(np.random.default_rng(seed), 4, 2)
    vac = np.zeros((4, 4))
    vac[0, 0] = 1
    assert abs(exact_mu1_fidelity(enc, dec, 0.0) - apply(compose(dec, enc), vac)[0, 0].real) < 1e-12


def test_mu1_range(rng):
    with pytest.raises(SourceError):
        exact_mu1_fidelity(*identity_pair(4), 1.5)


# ---------------------------------------------------------- five-point rule

def test_five_point_rank_two():
    assert abs(five_point_phase_fidelity(*analytic.phase_family_achiever()) - 0.75) < 1e-12


def test_five_point_identity():
    assert abs(five_point_phase_fidelity(*identity_pair(4)) - 1) < 1e-12


def test_five_point_matches_dense_quadrature():
    rng = np.random.default_rng(50)
    for _ in range(50):
        enc, dec = random_pipeline(rng, 4, 2)
        assert abs(five_point_phase_fidelity(enc, dec) - trapezoid_phase(enc, dec)) < 1e-9


def test_five_point_wrong_dimension(rng):
    with pytest.raises(SourceError):
        five_point_phase_fidelity(*identity_pair(8))


def test_phase_extended_quadrature(rng):
    enc, dec = random_pipeline(rng, 8, 2)
    src = SourceEnsemble.phase_extended(3)
    phis = 2 * np.pi * np.arange(4000) / 4000
    dense = per_sample_fidelity(enc, dec, phase_states(phis, 3)).mean()
    assert abs(src.exact_fidelity(enc, dec) - dense) < 1e-9


# ------------------------------------------------------------- state files

def test_state_file_round_trip(rng, tmp_path):
    states = haar_states(4, 25, rng)
    path = tmp_path / "s.txt"
    save_states(states, path)
    src = load_empirical(path)
    assert np.array_equal(src.states, states)
    assert path.read_text().splitlines()[0] == "4 25"


def test_state_file_precision(rng):
    states = haar_states(3, 2, rng)
    first = dumps_states(states).splitlines()[1].split()[0]
    assert len(first.split("e")[0].replace("-", "").replace(".", "")) == 17


def test_mnist_file_loads_with_head_mass(tmp_path):
    states, _ = prepare_dataset(MNIST, PrepConfig(3, 1, 0.9), 50)
    path = tmp_path / "mnist.txt"
    save_states(states, path)
    src = load_empirical(path)
    head = np.sum(np.abs(src.states[:, :2]) ** 2, axis=1)
    assert np.abs(head - 0.9).max() < 1e-9


@pytest.mark.parametrize("text", ["", "\n\n", "4\n", "2 1\n1 0 0\n", "2 2\n1 0 0 0\n",
                                  "2 1\n1 0 a 0\n", "x y\n"])
def test_state_file_malformed(text):
    with pytest.raises(SourceError):
        loads_states(text)


def test_empty_file_error(tmp_path):
    path = tmp_path / "empty.txt"
    path.write_text("")
    with pytest.raises(SourceError):
        load_empirical(path)


def test_empirical_iteration_order(rng, tmp_path):
    states = haar_states(2, 10, rng)
    src = SourceEnsemble.empirical(states)
    q, w = src.quadrature()
    assert np.array_equal(q, states) and np.allclose(w, 0.1)


@pytest.mark.parametrize("src", [SourceEnsemble.haar(8), SourceEnsemble.mu1(4, 0.9),
                                 SourceEnsemble.mu1(8, 0.1), SourceEnsemble.phase(),
                                 SourceEnsemble.phase_extended(4)])
def test_closed_form_spectrum_matches_eigensolver(src):
    ms = src.mean_state()
    w = np.linalg.eigvalsh(ms.rho_bar)[::-1]
    assert np.abs(np.cumsum(w) - ms.s).max() < 1e-12
