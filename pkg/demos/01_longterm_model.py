"""How much does a cell gain from cooperating, before any channel is seen?

The long-term model prices a coalition with large-scale gains only: sharing
CSI costs pilot and feedback symbols in every coherence block, and in return
the coalition aligns its internal interference away. This script walks
through that trade-off for a single drop.
"""

import math

from bscluster import CoalitionStructure, Scenario, ThroughputModel, ergodic_rate_nats, generate_network
from bscluster.longterm import csi_feasible, csi_overhead_symbols, prelog_phase1

# Rayleigh ergodic rate in closed form, against the naive log2(1 + SNR)
print("average SNR   ergodic rate   log2(1+SNR)   [bits/s/Hz]")
for snr_db in (0, 10, 20, 30):
    rho = 10 ** (snr_db / 10)
    print(f"{snr_db:8d} dB   {ergodic_rate_nats(rho) / math.log(2):12.3f}   {math.log2(1 + rho):11.3f}")

sc = Scenario.paper(num_cells=6)
net = generate_network(sc, 3)
model = ThroughputModel(sc, net)
print(f"\nDrop with {sc.num_cells} cells, coherence block of {net.coherence_symbols} symbols "
      f"({sc.ms_speed_kmh} km/h).")

# A coalition pays overhead quadratically in its size, so large ones only fit slow channels
for size in range(1, 6):
    members = list(range(size))
    print(f"coalition of {size}: {csi_overhead_symbols(members, sc):5d} overhead symbols, "
          f"CSI feasible {csi_feasible(members, sc, net)}, phase-1 prelog {prelog_phase1(members, sc, net):.4f}")

# Who wants to team up with cell 0?
print("\ncell 0 throughput alone and with each neighbour:")
alone = model.cell_throughput(0, {0})
print(f"  alone          {alone:7.3f}")
for j in range(1, sc.num_cells):
    print(f"  with cell {j}    {model.cell_throughput(0, {0, j}):7.3f}")

for name, S in (("singletons", CoalitionStructure.singletons(6)), ("grand", CoalitionStructure.grand(6)),
                ("pairs", CoalitionStructure([[0, 1], [2, 3], [4, 5]]))):
    print(f"{name:>10}: sum throughput {model.sum_throughput(S):7.3f}")
print("The grand coalition of 6 cells is not IIA feasible with 8x2 antennas, so it earns nothing.")
