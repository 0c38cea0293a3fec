"""Walk through the closed-form results and check each against simulation.

Run with ``python demos/closed_forms.py``. Takes a few seconds.
"""
import numpy as np

from qaekit import analytic
from qaekit.channels import block_decompose, compose, first_order_coefficient, kraus_rank
from qaekit.qae import per_sample_fidelity
from qaekit.sources import (SourceEnsemble, exact_haar_fidelity, exact_mu1_fidelity,
                            five_point_phase_fidelity, haar_states)

rng = np.random.default_rng(7)

# Haar-average optimum: compress a 4-dim state into 2 dims
d, m = 4, 2
enc, dec = analytic.haar_optimal_pair(d, m)
f = per_sample_fidelity(enc, dec, haar_states(d, 20000, rng))
print(f"Haar optimum     exact={exact_haar_fidelity(enc, dec):.6f} "
      f"MC={f.mean():.6f} +- {f.std(ddof=1) / np.sqrt(len(f)):.6f}")

# Phase family: an isometric encoder cannot beat 3/4, the achiever hits it for every phase
enc, dec = analytic.phase_family_achiever()
print(f"phase achiever   five-point={five_point_phase_fidelity(enc, dec):.12f}")

# Gram feasibility: negative eigenvalues certify that no unitary exists
for t in (0.0, np.pi / 8, np.pi / 4):
    rep = analytic.gram_witness(t)
    print(f"gram t={t:.4f}    feasible={rep.feasible} min_eig={rep.min_eigenvalue:+.6f}")

# Reset construction: Kraus rank d-m+1 and a first-order slope of (d-m)/(d-1)
p = analytic.coordinate_projector(d, m)
enc, dec = analytic.reset_construction(p, d, m)
pipe = compose(dec, enc)
eps = 1e-4
print(f"reset pipeline   rank={kraus_rank(pipe)} "
      f"slope={(1 - exact_mu1_fidelity(enc, dec, eps)) / eps:.6f} "
      f"block coefficient={first_order_coefficient(block_decompose(pipe), d):.6f} "
      f"target={(d - m) / (d - 1):.6f}")

# Concentration of the phase-family mean state
rep = analytic.concentration_bound(SourceEnsemble.phase(), m)
print(f"concentration    s_m={rep.s_m} eta_m={rep.eta_m} ratio={rep.lower_bound_ratio} "
      f"achieved={rep.b_mu_lower:.6f}")
