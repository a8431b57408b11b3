"""
Choosing a within-block order
=============================

Seven treatments in blocks of four ordered units. Which order of treatments
inside a block should every block follow, and how much is lost by picking
the wrong one?
"""

# %%
import numpy as np

from trendblock import efficiency_table, optimal_order, optimality_breakpoints, order_stats

# %%
# The answer depends only on lambda0 / lambda1. Below 1/20 the order with
# two mirrored pairs wins, between 1/20 and 9/20 a single mirrored pair,
# above that four distinct treatments.
for iv in optimality_breakpoints(7, 4):
    print(f"{iv.label:5s} optimal for lambda0/lambda1 in [{iv.lo:.3f}, {iv.hi}]")

# %%
for lam0, lam1 in [(0.0, 1.0), (0.1, 1.0), (0.25, 0.1)]:
    order = optimal_order(7, 4, lam0, lam1)
    st = order_stats(order, lam0, lam1)
    print(lam0, lam1, order, "s =", st.s, "T = %.3f" % st.T)

# %%
# Efficiency of each candidate relative to the best one, in percent.
table = efficiency_table(7, 4)
print("order  " + "  ".join(f"{a:.3f}/{c:.1f}" for a, c in table.columns))
for label, row in zip(table.rows, table.percents):
    print(f"{label:6s} " + "  ".join(f"{x:9d}" for x in row))

# %%
# pi_1 never drops below 86% on this grid, the safest choice when the
# variance components are poorly known.
print("worst case per order:", {r: int(x) for r, x in zip(table.rows, np.min(table.percents, axis=1))})
