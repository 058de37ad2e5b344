"""Amplitude damping: quantum capacity and coherent-information curves.

Run with ``python3 demos/capacity_curves.py``. Plots are drawn when
matplotlib is installed and otherwise the numbers are printed.
"""

# %%
import numpy as np

from qkdfinite import capacity as cap

gammas = np.linspace(0.0, 0.5, 21)
points = cap.capacity_sweep(gammas)
for p in points[::4]:
    print(f"gamma={p.gamma:.3f}  Q={p.q:.6f}  a*={p.a_star:.4f}")

# %% The optimal input population drifts below 1/2 as damping grows.
a = np.linspace(0.0, 1.0, 201)
curves = {g: np.array([v for _, v in cap.coherent_info_curve(g, a)]) for g in (0.0, 0.2, 0.4, 0.5, 0.75)}
for g, I in curves.items():
    print(f"gamma={g:.2f}  max I={I.max():+.4f} at a={a[I.argmax()]:.3f}")

# %% Degrading map for gamma < 1/2.
for g in (0.1, 0.3, 0.45):
    print(f"gamma={g}  gamma'={cap.degrading_parameter(g):.4f}  degradable={cap.is_degradable_ad(g)}")

# %%
try:
    import matplotlib.pyplot as plt
except ImportError:
    plt = None

if plt is not None:
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    ax1.plot(gammas, [p.q for p in points], marker="o")
    ax1.set_xlabel("gamma")
    ax1.set_ylabel("Q")
    for g, I in curves.items():
        ax2.plot(a, I, label=f"gamma={g}")
    ax2.axhline(0, color="grey", lw=0.5)
    ax2.set_xlabel("a")
    ax2.set_ylabel("I(a)")
    ax2.legend()
    fig.tight_layout()
    plt.show()
