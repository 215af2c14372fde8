"""lcoracle — fully dynamic approximate distance oracle on length-constrained expanders.

Algorithmic layers, bottom up:
- lcoracle.graph        — dynamic graph, unit updates, walks
- lcoracle.covers       — neighborhood covers and their shortcut graphs
- lcoracle.lcflow       — h-length flows, moving cuts, cutmatch
- lcoracle.router       — router graphs and their oblivious routing
- lcoracle.certified_ed — certified expander decompositions
- lcoracle.sparsifier   — vertex sparsifiers and their chains
- lcoracle.hierarchy    — expander hierarchy over doubling lengths
- lcoracle.emulator     — emulator stack (and lcoracle.alldist)
- lcoracle.oracle       — low-distance oracles, the oracle stack, simple paths
- lcoracle.multiflow    — multiplicative-weights vertex-capacitated flow
- lcoracle.trace / lcoracle.report — trace files, replay, reports

Surfaces follow a core/protocol/server/cli split:
- lcoracle.core      — config layering and the shared `*_impl` verbs
- lcoracle.protocol  — return-shape TypedDicts used by both surfaces
- lcoracle.server    — FastMCP server (MCP surface)
- lcoracle.cli       — click CLI (lco binary)
"""

__version__ = "0.1.0"
