"""hudtrace: gameplay telemetry from battle-royale HUD video frames.

Pipeline stages: ingest (frames) -> vision (HUD reading) -> telemetry
(samples, game segmentation, track filtering) -> derive (per-game metrics)
-> maps (heat grids, hot spots) -> stats (rank correlations).  The synth
module generates ground-truth scenarios and renders HUD frames from them,
serving as the test oracle for the whole chain.
"""

__version__ = "0.1.0"

from ._kernels import HAS_NUMBA, set_use_numba, use_numba
from .phases import Phase

__all__ = ["HAS_NUMBA", "Phase", "set_use_numba", "use_numba", "__version__"]
