import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from qaekit.channels import KrausChannel
from qaekit.matcore import random_isometry

settings.register_profile(
    "qaekit", deadline=None, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("qaekit")

ACCEPTANCE = []


def random_channel(rng, din, dout, rank):
    """Random CPTP map from a Haar isometry C^din -> C^dout ⊗ C^rank.

    The rank is raised to ceil(din/dout) when needed so the isometry exists.
    """
    rank = max(rank, -(-din // dout))
    v = random_isometry(dout * rank, din, rng)
    return KrausChannel(din, dout, tuple(v.reshape(dout, rank, din).transpose(1, 0, 2)))


def vacuum_fixing_channel(rng, din, dout, rank):
    """Random channel with K_i|0> proportional to |0> for every Kraus operator."""
    rank = max(rank, -(-din // dout))
    chi = rng.standard_normal(rank) + 1j * rng.standard_normal(rank)
    chi /= np.linalg.norm(chi)
    w0 = np.kron(np.eye(dout)[0], chi)
    g = rng.standard_normal((dout * rank, din)) + 1j * rng.standard_normal((dout * rank, din))
    g[:, 0] = w0
    q, r = np.linalg.qr(g)
    q = q * (np.diag(r) / np.abs(np.diag(r)))
    return KrausChannel(din, dout, tuple(q.reshape(dout, rank, din).transpose(1, 0, 2)))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num, ok, detail in sorted(ACCEPTANCE):
        terminalreporter.write_line(f"criterion {num:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
