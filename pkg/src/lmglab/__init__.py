"""Desk-scale numerics for the Lipkin-Meshkov-Glick model.

Subpackages by concern:

- ``spin_core``: parity blocks of the Hamiltonian and Bloch coherent states
- ``spectral``: diagonalization, coupling sweeps, crossing location
- ``classical``: energy surface, trajectories, fixed points, density of
  states, EBK actions, Hamiltonian flow
- ``phase_space``: Husimi fields, Wehrl entropy, orbit line integrals
- ``dynamics``: quantum quenches and the truncated Wigner approximation
- ``cli``: the batch command-line driver
"""

from .spin_core import CouplingParams, SpinSpace

__version__ = "0.1.0"
__all__ = ["CouplingParams", "SpinSpace", "__version__"]
