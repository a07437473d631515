"""Cells cluster themselves by proposing deviations and voting on them.

Starting from singletons, each cell proposes the moves that would raise its
own long-term throughput; the members of the target coalition accept only
if nobody among them loses. We run the protocol on one drop, print the
deviation log and compare the outcome with the exhaustive optimum.
"""

from bscluster import (
    ATTACH_ONLY,
    CoalitionStructure,
    Scenario,
    ThroughputModel,
    generate_network,
    is_individually_stable,
    optimal_structure,
    run_formation,
)

sc = Scenario.paper(num_cells=8, ms_speed_kmh=3.0)
net = generate_network(sc, 17)
model = ThroughputModel(sc, net)

S, trace = run_formation(model)
print("deviation log:")
print(trace.to_log())
print(f"final structure {S}, {trace.num_proposals} proposals in total")
print(f"individually stable: {is_individually_stable(S, trace.states, model)}")

best, best_value = optimal_structure(sc, net, model=model)
single = model.sum_throughput(CoalitionStructure.singletons(8))
print(f"\nsingletons   {single:8.3f}")
print(f"formation    {model.sum_throughput(S):8.3f}")
print(f"optimum      {best_value:8.3f}   {best}")

S_attach, t_attach = run_formation(model, mode=ATTACH_ONLY)
print(f"attach only  {model.sum_throughput(S_attach):8.3f}   ({t_attach.num_proposals} proposals)")

# Faster channels shorten the coherence block and shrink the coalitions
for speed in (3.0, 30.0, 90.0):
    s = sc.replace(ms_speed_kmh=speed)
    n = generate_network(s, 17)
    S_v, _ = run_formation(ThroughputModel(s, n))
    print(f"{speed:5.0f} km/h: L_c = {n.coherence_symbols:6d}, mean coalition size {S_v.mean_size():.2f}")
