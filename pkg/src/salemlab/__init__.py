"""salemlab: high-precision laboratory for substitution suspension flows.

Modules by concern: `subst` (combinatorics of substitutions and return
words), `algebra` (roots, classification, eigenbases), `lattice` (return-word
lattices, duals, nearest points), `ekspansion` (digit expansions, scales,
rates), `spectral` (flows, twisted integrals, ball bounds), `bernoulli`
(transform products, decay experiments, orbit witnesses), `cli` (commands).
"""

from .config import RunConfig, load_config

__all__ = ["RunConfig", "load_config"]
__version__ = "0.1.0"
