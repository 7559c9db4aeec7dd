"""
Power flow on the bundled 37-node feeder
========================================

Load the feeder, put a load at one node, and watch the line flows and the
squared voltages respond.
"""
import numpy as np

from contsrtp.grid import NodalDemandSchedule, bundled_network, check_constraints, default_limits, solve_lindistflow

topo = bundled_network()
print(topo.node_count, "nodes, substation at", topo.substation_voltage, "V")

# the path from node 10 back to the substation
node, path = 10, [10]
while node != 0:
    node = topo.parent_of(node)
    path.append(node)
print("path to the substation:", " <- ".join(map(str, path)))
print("line 10 rating:", topo.s_max[9], "kVA")

# six four-hour slots with a load ramping up at node 10
slots = 6
demand = np.zeros((topo.node_count, slots))
demand[9] = np.linspace(2, 20, slots)
sol = solve_lindistflow(topo, NodalDemandSchedule(demand))

print("\nflow on line 10 (kW):", np.round(sol.flow_p[9], 2))
print("flow on line 1  (kW):", np.round(sol.flow_p[0], 2))
volts = np.sqrt(sol.u[9])
print("voltage at node 10 (V):", np.round(volts, 1))

# each flow is the demand of the subtree below the line
assert np.allclose(sol.flow_p, topo.subtree_matrix @ demand)

limits = default_limits(topo)
report = check_constraints(sol, limits)
print("\nviolations:", report.counts)
print("slots with a violation:", np.flatnonzero(report.by_slot()) + 1)
print("overloaded lines:", report.lines())
