"""OTOCs in brickwork circuits of perturbed dual-unitary gates."""
from .amplitudes import ScatteringAmplitudes, compute_amplitudes
from .brute_force import CircuitColumnSpec, FoldedColumnOperator, otoc_exact
from .gate_core import Gate, du_gate_q2, make_gate, perturb, random_du_gate_q2, random_hermitian
from .mcs import boundaries, otoc_mcs, projected_transfer
from .path_integral import front_params, otoc_1step, otoc_2step

__all__ = [
    "Gate", "make_gate", "du_gate_q2", "random_du_gate_q2", "random_hermitian", "perturb",
    "ScatteringAmplitudes", "compute_amplitudes",
    "CircuitColumnSpec", "FoldedColumnOperator", "otoc_exact",
    "projected_transfer", "boundaries", "otoc_mcs",
    "otoc_1step", "otoc_2step", "front_params",
]
