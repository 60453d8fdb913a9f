"""Weak-field light-matter response from pulse-pair quantum-simulator protocols.

Submodules:

- ``liouville``: vectorization and Lindblad superoperators
- ``models``: matter, mode and auxiliary-qubit models, presets
- ``continuum``: exact two-time Green's functions and wavepacket convolution
- ``protocol``: square-pulse single-mode protocol and reconstruction
- ``sampling``: shot noise, error propagation and trial budgets
- ``auxiliary``: eliminating a fast-decaying auxiliary qubit
- ``analysis``: spectra and sampling-interval scans
- ``config``, ``tables``, ``cli``: configuration, file formats and commands
"""

from .continuum import GreensTable, Wavepacket, convolve, gaussian_wavepacket, greens_exact, greens_table_exact
from .models import CompositeModel, MatterModel, ModeSpec, AuxSpec, preset_example1, preset_example2, single_emitter
from .protocol import ProtocolConfig, protocol_run, reconstruct_greens

__version__ = "0.1.0"

__all__ = [
    "AuxSpec",
    "CompositeModel",
    "GreensTable",
    "MatterModel",
    "ModeSpec",
    "ProtocolConfig",
    "Wavepacket",
    "convolve",
    "gaussian_wavepacket",
    "greens_exact",
    "greens_table_exact",
    "preset_example1",
    "preset_example2",
    "protocol_run",
    "reconstruct_greens",
    "single_emitter",
]
