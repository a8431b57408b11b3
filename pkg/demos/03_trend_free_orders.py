"""
Trend-free and nearly trend-free orders
=======================================

With k >= 2v some treatments must repeat several times in a block. A
trend-free order makes each treatment orthogonal to the linear trend; when
that is impossible the nearly trend-free order gets as close as the
parity allows.
"""

# %%
import math

from trendblock import e1, optimal_order, order_stats, tf_ntf_order
from trendblock.orders import min_trend_loading_bruteforce

for v, k, variant in [(2, 5, "A"), (3, 6, "B"), (3, 8, "C"), (3, 8, "NTF")]:
    order = tf_ntf_order(v, k, variant)
    st = order_stats(order, 0, 1, v=v)
    print(f"{variant:4s} v={v} k={k} {order}  n={st.n}  h={[round(x, 4) for x in st.h]}")

# %%
# In a block of 8 an odd number of copies can never cancel the trend: the
# best loading over every placement is 1/sqrt(168).
print(min_trend_loading_bruteforce(8, 3), 1 / math.sqrt(168))

# %%
# Which of the two wins depends on lambda0 against lambda1/168.
for lam0 in (0.0, 1 / 168, 0.125):
    print(f"lambda0={lam0:.4f}  E1={e1(3, 8, lam0, 1.0):.5f}  ->",
          optimal_order(3, 8, lam0, 1.0))
