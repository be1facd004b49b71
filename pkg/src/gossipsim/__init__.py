"""gossipsim: a synchronous gossip-network simulator.

One contact per node per round, polylog-bit messages, deterministic seeds.
Ships rumor-spreading algorithms for weak-conductance and general graphs,
graph sketches for cut-edge sampling, and an experiment harness.
"""

from .config import Config, DEFAULTS
from .engine import MessageBudget, Trace, run, simulate_congest_round
from .graphs import Graph, GraphSpec, generate, conductance_exact, \
    weak_conductance_exact, diameter, load_edgelist, save_edgelist

__all__ = [
    "Config", "DEFAULTS",
    "Graph", "GraphSpec", "generate", "conductance_exact",
    "weak_conductance_exact", "diameter", "load_edgelist", "save_edgelist",
    "MessageBudget", "Trace", "run", "simulate_congest_round",
]
