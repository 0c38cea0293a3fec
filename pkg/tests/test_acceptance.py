"""Acceptance criteria 1-12, each at its stated tolerance and time budget.

Every test records a (number, passed, detail) tuple before asserting so the
terminal summary prints one line per criterion.
"""

import time

import numpy as np
import pytest
from conftest import ACCEPTANCE, random_channel, vacuum_fixing_channel

from qaekit import analytic
from qaekit.channels import (apply, block_decompose, choi_apply, choi_to_kraus, compose,
                             first_order_coefficient, link_product, stinespring, to_choi)
from qaekit.matcore import partial_trace, random_density, random_hermitian, tensor
from qaekit.mnistprep import PrepConfig, head_mass_fraction, prepare_dataset
from qaekit.qae import (QaeArchitecture, QaeParams, decoder_channel, encoder_channel,
                        per_sample_fidelity, purify_ancilla_gauge)
from qaekit.sources import (SourceEnsemble, exact_haar_fidelity, exact_mu1_fidelity,
                            five_point_phase_fidelity, haar_states, phase_states)
from qaekit.train import ExperimentSpec, run_experiment
from test_sources import MNIST

A = QaeArchitecture


def record(num, ok, detail):
    ACCEPTANCE.append((num, bool(ok), detail))
    assert ok, f"criterion {num}: {detail}"


def dense_phase_average(enc, dec, points=10000):
    phis = 2 * np.pi * np.arange(points) / points
    return per_sample_fidelity(enc, dec, phase_states(phis)).mean()


def pooled_sigma(a, b):
    return np.sqrt((np.var(a, ddof=1) + np.var(b, ddof=1)) / 2)


# ---------------------------------------------------------------------- 1

def test_criterion_01_haar_optimum():
    t0 = time.perf_counter()
    rng = np.random.default_rng(101)
    worst_exact, worst_z = 0.0, 0.0
    for d, m in [(4, 2), (8, 2), (8, 4), (16, 2)]:
        enc, dec = analytic.haar_optimal_pair(d, m)
        target = (d + m * m) / (d * (d + 1))
        worst_exact = max(worst_exact, abs(exact_haar_fidelity(enc, dec) - target))
        f = per_sample_fidelity(enc, dec, haar_states(d, 20000, rng))
        worst_z = max(worst_z, abs(f.mean() - target) / (f.std(ddof=1) / np.sqrt(len(f))))
    dt = time.perf_counter() - t0
    ok = worst_exact < 1e-12 and worst_z < 3 and dt < 10
    record(1, ok, f"max|exact-opt|={worst_exact:.1e} max MC z={worst_z:.2f} time={dt:.2f}s")


# ---------------------------------------------------------------------- 2

def test_criterion_02_phase_achiever():
    t0 = time.perf_counter()
    enc, dec = analytic.phase_family_achiever()
    phis = np.random.default_rng(202).uniform(0, 2 * np.pi, 10)
    per_phi = np.abs(per_sample_fidelity(enc, dec, phase_states(phis)) - 0.75).max()
    five = abs(five_point_phase_fidelity(enc, dec) - 0.75)
    dt = time.perf_counter() - t0
    ok = per_phi < 1e-12 and five < 1e-12 and dt < 1
    record(2, ok, f"max per-phi dev={per_phi:.1e} five-point dev={five:.1e} time={dt:.3f}s")


# ---------------------------------------------------------------------- 3

def test_criterion_03_five_point_exactness():
    t0 = time.perf_counter()
    rng = np.random.default_rng(303)
    worst = 0.0
    for _ in range(50):
        enc = random_channel(rng, 4, 2, int(rng.integers(1, 5)))
        dec = random_channel(rng, 2, 4, int(rng.integers(1, 4)))
        worst = max(worst, abs(five_point_phase_fidelity(enc, dec) - dense_phase_average(enc, dec)))
    dt = time.perf_counter() - t0
    record(3, worst < 1e-9 and dt < 30, f"max |five-point - 1e4 grid|={worst:.1e} time={dt:.2f}s")


# ---------------------------------------------------------------------- 4

def test_criterion_04_gram_certificates():
    t0 = time.perf_counter()
    r1 = analytic.gram_witness(np.pi / 4)
    r0 = analytic.gram_witness(0.0)
    dt = time.perf_counter() - t0
    ok = (abs(r1.min_eigenvalue + 0.75) < 1e-9 and abs(r0.min_eigenvalue + 0.2) < 1e-9
          and not r1.feasible and not r0.feasible and dt < 1)
    record(4, ok, f"t=pi/4 min_eig={r1.min_eigenvalue:.12f} s=0 min_eig={r0.min_eigenvalue:.12f} "
                  f"time={dt:.3f}s")


# ---------------------------------------------------------------------- 5

def test_criterion_05_reset_first_order():
    t0 = time.perf_counter()
    eps = 1e-5
    worst_rel, worst_block = 0.0, 0.0
    for d, m in [(4, 2), (8, 2), (8, 4)]:
        c_star = (d - m) / (d - 1)
        p = analytic.coordinate_projector(d, m)
        enc, dec = analytic.reset_construction(p, d, m)
        slope = (1 - exact_mu1_fidelity(enc, dec, eps)) / eps
        worst_rel = max(worst_rel, abs(slope - c_star) / c_star)
        c_block = first_order_coefficient(block_decompose(compose(dec, enc)), d)
        worst_block = max(worst_block, abs(c_block - c_star))
    dt = time.perf_counter() - t0
    ok = worst_rel < 1e-5 and worst_block < 1e-9 and dt < 5
    record(5, ok, f"max rel slope err={worst_rel:.2e} max block err={worst_block:.1e} time={dt:.2f}s")


# ---------------------------------------------------------------------- 6

def test_criterion_06_quadratic_law():
    t0 = time.perf_counter()
    rng = np.random.default_rng(606)
    eps = np.array([0.05, 0.2, 0.45, 0.8])
    worst = 0.0
    for _ in range(20):
        d, m = [(4, 2), (8, 2), (8, 4)][int(rng.integers(0, 3))]
        enc = vacuum_fixing_channel(rng, d, m, int(rng.integers(1, 4)) * (d // m))
        dec = vacuum_fixing_channel(rng, m, d, int(rng.integers(1, 3)))
        vals = np.array([exact_mu1_fidelity(enc, dec, e) for e in eps])
        coef = np.polyfit(eps, vals, 2)
        worst = max(worst, np.abs(np.polyval(coef, eps) - vals).max())
    dt = time.perf_counter() - t0
    record(6, worst < 1e-9 and dt < 10, f"max quadratic residual={worst:.1e} time={dt:.2f}s")


# ---------------------------------------------------------------------- 7

@pytest.mark.slow
def test_criterion_07_mu1_architecture_ordering():
    t0 = time.perf_counter()
    archs = (A(2, 1, 0, 1), A(2, 1, 0, 2), A(2, 1, 1, 2))
    spec = ExperimentSpec(source="mu1", epsilon=0.1, archs=archs, seeds=(0, 1, 2, 3, 4),
                          epochs=500, batch=64, lr=1e-3)
    res = run_experiment(spec)
    f = [res.finals(a.label) for a in archs]
    means = [x.mean() for x in f]
    gaps = [(means[0] - means[1]) / pooled_sigma(f[0], f[1]),
            (means[1] - means[2]) / pooled_sigma(f[1], f[2]),
            (means[0] - means[2]) / pooled_sigma(f[0], f[2])]
    dt = time.perf_counter() - t0
    ok = (means[0] > means[1] > means[2] and min(gaps) > 2
          and 0.09 <= means[0] <= 0.115 and 0.060 <= means[2] <= 0.075 and dt < 900)
    record(7, ok, "means=" + ", ".join(f"{m:.5f}" for m in means)
           + f" min gap/pooled sigma={min(gaps):.0f} time={dt:.0f}s")


# ---------------------------------------------------------------------- 8

@pytest.mark.slow
def test_criterion_08_phase_family_gap():
    t0 = time.perf_counter()
    iso, non = A(2, 1, 1, 1), A(2, 1, 1, 2)
    spec = ExperimentSpec(source="phase", mode="five_point", archs=(iso, non),
                          seeds=(0, 1, 2, 3, 4), epochs=500, batch=64, lr=1e-3)
    res = run_experiment(spec)
    f_iso, f_non = res.finals(iso.label), res.finals(non.label)
    dt = time.perf_counter() - t0
    ok = (f_non.max() <= 0.2501 and f_iso.min() >= 0.2501 and f_iso.min() > f_non.min()
          and dt < 600)
    record(8, ok, f"nE=1 finals [{f_iso.min():.7f}, {f_iso.max():.7f}] "
                  f"nE=2 finals [{f_non.min():.7f}, {f_non.max():.7f}] time={dt:.0f}s")


# ---------------------------------------------------------------------- 9

@pytest.mark.slow
def test_criterion_09_mnist_ancilla_gap():
    t0 = time.perf_counter()
    conv, base, extra = A(3, 1, 0, 2), A(3, 1, 1, 2), A(3, 1, 1, 3)
    spec = ExperimentSpec(source="mnist", path=str(MNIST), archs=(conv, base, extra),
                          seeds=(0, 1, 2, 3, 4), epochs=500, batch=64, lr=1e-3)
    res = run_experiment(spec)
    m_conv, m_base, m_extra = (res.finals(a.label).mean() for a in (conv, base, extra))
    small = abs(m_base - m_extra)
    large = abs(m_base - m_conv)
    dt = time.perf_counter() - t0
    ok = small < 0.1 * large and dt < 1200
    record(9, ok, f"means {m_conv:.5f}/{m_base:.5f}/{m_extra:.5f} "
                  f"ratio={small / large:.3f} time={dt:.0f}s")


# --------------------------------------------------------------------- 10

def test_criterion_10_concentration_bound():
    t0 = time.perf_counter()
    rep = analytic.concentration_bound(SourceEnsemble.phase(), 2)
    enc, dec = analytic.projector_pair(rep.projector, rep.xi, 4, 2)
    direct = dense_phase_average(enc, dec, 4000)
    dt = time.perf_counter() - t0
    ok = (rep.s_m == 0.75 and rep.eta_m == 0.25 and rep.lower_bound_ratio == 0.875
          and rep.b_mu_lower >= 0.65625 - 1e-10 and abs(direct - rep.b_mu_lower) < 1e-9
          and dt < 5)
    record(10, ok, f"s2={rep.s_m} eta2={rep.eta_m} ratio={rep.lower_bound_ratio} "
                   f"b_mu_lower={rep.b_mu_lower:.12f} |direct-b|={abs(direct - rep.b_mu_lower):.1e} "
                   f"time={dt:.2f}s")


# --------------------------------------------------------------------- 11

def _units(d):
    for i in range(d):
        for j in range(d):
            e = np.zeros((d, d), dtype=complex)
            e[i, j] = 1
            yield e


def _mixed_direct(p, sigma, tau, psi):
    arch = p.arch
    out = []
    for v in psi:
        big = p.U @ tensor(np.outer(v, v.conj()), sigma) @ p.U.conj().T
        c = partial_trace(big, (arch.m, arch.enc_capacity))
        rec = partial_trace(p.V @ tensor(c, tau) @ p.V.conj().T, (arch.d, arch.dec_capacity))
        out.append(np.real(v.conj() @ rec @ v))
    return float(np.mean(out))


def test_criterion_11_channel_calculus():
    t0 = time.perf_counter()
    rng = np.random.default_rng(1111)
    dims = [2, 3, 4]
    err = {"choi": 0.0, "link": 0.0, "stine": 0.0, "gauge": 0.0}
    convex_ok = True
    for _ in range(100):
        a, b, c = (int(rng.choice(dims)) for _ in range(3))
        ch = random_channel(rng, a, b, int(rng.integers(1, 4)))
        back = choi_to_kraus(to_choi(ch))
        err["choi"] = max(err["choi"], max(np.abs(apply(ch, e) - apply(back, e)).max()
                                           for e in _units(a)))
        ch2 = random_channel(rng, b, c, int(rng.integers(1, 4)))
        lam = link_product(to_choi(ch2), to_choi(ch))
        err["link"] = max(err["link"], max(np.abs(choi_apply(lam, e) - apply(ch2, apply(ch, e))).max()
                                           for e in _units(a)))
        v = stinespring(ch)
        rho = random_density(a, rng)
        red = partial_trace(v @ rho @ v.conj().T, (b, ch.n_kraus))
        err["stine"] = max(err["stine"], np.abs(red - apply(ch, rho)).max())
    arch = A(2, 1, 1, 2)
    psi = haar_states(4, 16, rng)
    for _ in range(100):
        p = QaeParams(arch, random_hermitian(arch.dim_u, rng), random_hermitian(arch.dim_v, rng))
        sigma, tau = random_density(2, rng), random_density(4, rng)
        mixed = _mixed_direct(p, sigma, tau, psi)
        comps = purify_ancilla_gauge(p, sigma, tau)
        vals = [per_sample_fidelity(encoder_channel(q), decoder_channel(q), psi).mean()
                for _, q in comps]
        err["gauge"] = max(err["gauge"], abs(sum(w * x for (w, _), x in zip(comps, vals)) - mixed))
        convex_ok &= max(vals) >= mixed - 1e-12
    dt = time.perf_counter() - t0
    ok = (err["choi"] < 1e-9 and err["link"] < 1e-9 and err["stine"] < 1e-10
          and err["gauge"] < 1e-9 and convex_ok and dt < 60)
    record(11, ok, " ".join(f"{k}={v:.1e}" for k, v in err.items())
           + f" convexity={'ok' if convex_ok else 'violated'} time={dt:.1f}s")


# --------------------------------------------------------------------- 12

def test_criterion_12_mnist_head_energy():
    t0 = time.perf_counter()
    _, heads = prepare_dataset(MNIST, PrepConfig(3, 1, 0.9), 3000)
    frac = head_mass_fraction(heads, 0.9, 1e-9)
    dt = time.perf_counter() - t0
    record(12, frac >= 0.99 and dt < 30, f"fraction with head mass 0.9={frac:.4f} time={dt:.2f}s")
