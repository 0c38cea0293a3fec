"""Train two small autoencoders on the phase family and watch them separate.

The decoder with one extra ancilla qubit escapes the isometric ceiling and
settles near infidelity 1/4, while the isometric one stalls above it. Uses
exact five-point averaging so the curves carry no sampling noise.
"""
from qaekit.qae import QaeArchitecture
from qaekit.train import ExperimentSpec, run_experiment

archs = (QaeArchitecture(2, 1, 1, 1), QaeArchitecture(2, 1, 1, 2))
spec = ExperimentSpec(source="phase", mode="five_point", archs=archs, seeds=(0,),
                      epochs=150, batch=64, lr=1e-3)
res = run_experiment(spec)

for arch in archs:
    print(f"{arch.label}  final infidelity {res.finals(arch.label).mean():.6f}")
