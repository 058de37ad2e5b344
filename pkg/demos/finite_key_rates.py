"""Finite-key rates against block size, next to the asymptotic value.

Run with ``python3 demos/finite_key_rates.py``.
"""

# %%
import numpy as np

from qkdfinite import security as sec

qber = 0.01
budget = sec.SecurityBudget()
asymptotic = 1 - 2.1 * sec.binary_entropy(qber)
print(f"asymptotic 1 - h(Q) - 1.1 h(Q) = {asymptotic:.4f}")

# %%
for M in np.logspace(4, 8, 9).astype(int):
    rep = sec.optimize_rate(int(M), qber, budget)
    print(f"M={M:>10d}  n={rep.n:>10d}  l={rep.l_max:>10d}  r={rep.r_per_signal:.4f}  "
          f"ratio={rep.r_per_signal / asymptotic:.3f}")

# %% The two finite-size correction terms side by side.
for n in (10 ** 4, 10 ** 6, 10 ** 8):
    print(n, sec.finite_size_correction(n, budget, "thesis"),
          sec.finite_size_correction(n, budget, "literature"))
