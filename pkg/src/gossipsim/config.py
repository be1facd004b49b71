"""Tunable constants, frozen before any acceptance run.

Everything an algorithm needs to compute its own phase schedule lives here,
so that every node can derive round boundaries locally from globally known
quantities (n, c, conductance, these constants).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace


@dataclass(frozen=True)
class Config:
    # Spreading-time bound: T(n) = ceil(alpha * ln(n) / phi).  alpha is our
    # calibration of the hidden constant in the gossip spreading bound.
    alpha: float = 8.0

    # Message budget: max bits per message = budget_const * ceil(log2 N)^2.
    budget_const: int = 64

    # Sketch cell field widths (wrapping moduli, in bits).
    sketch_count_bits: int = 8
    sketch_check_bits: int = 40

    # Sampler failure probability in algorithm runs is 1/n^3; unit tests use
    # a looser value so statistical assertions run quickly.
    delta_exponent: int = 3

    # General-graph algorithm: degree threshold and star discovery length,
    # both as multiples of n^delta * ln n.
    threshold_const: float = 4.0
    star_probe_const: float = 8.0

    # Tree-merging phase count multiplier (phases = tm_const * ceil(log2 n)).
    tm_const: int = 4
    # Cap on scheduled tree depth in the merging part, times n^(1-delta)*ln n.
    kappa_const: float = 4.0

    # MPX decomposition.
    beta_mpx: float = 0.25
    # Frozen constants for the whp structural checks (criterion-style tests).
    c_mpx_depth: int = 16    # cluster tree depth <= c_mpx_depth * log2 n
    c_deg: int = 64          # spanner max degree <= c_deg * log2 n
    c_str: int = 32          # spanner stretch <= c_str * log2 n

    # Rounds granted per simulated CONGEST round during rumor spreading
    # (round-robin window; larger actual degrees just rotate across phases).
    spread_congest_const: int = 4

    # Rumor-spreading phase budget multiplier per diameter estimate.
    spread_phase_const: int = 2

    # Merge-stall retries per phase before the run is declared failed.
    stall_retries: int = 3

    # MST: fragments stop initiating beyond diameter mst_diam_const * sqrt(n).
    mst_diam_const: int = 2

    def T(self, n: int, phi) -> int:
        """Spreading-time bound for an n-node region of conductance phi."""
        return max(1, math.ceil(self.alpha * math.log(max(n, 2)) / float(phi)))

    def delta_sk(self, n: int) -> float:
        return 1.0 / float(max(n, 2) ** self.delta_exponent)

    def with_(self, **kw) -> "Config":
        return replace(self, **kw)


DEFAULTS = Config()
