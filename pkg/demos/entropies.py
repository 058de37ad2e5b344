"""Smooth entropies of small distributions and of a Bell state.

Run with ``python3 demos/entropies.py``.
"""

# %%
import numpy as np

from qkdfinite import entropy as en
from qkdfinite import quantum as qc

p = np.array([0.5, 0.25, 0.125, 0.125])
print("H =", en.shannon_entropy(p), " H_min =", en.min_entropy(p), " H_max =", en.max_entropy(p))
for eps in (0.0, 0.05, 0.1, 0.2):
    print(f"eps={eps:.2f}  H_min^eps={en.smooth_min_entropy_classical(p, eps):.4f}  "
          f"H_max^eps={en.smooth_max_entropy_classical(p, eps):.4f}")

# %% Guessing X from Y.
pxy = np.array([[0.4, 0.1], [0.2, 0.3]])
print("p_guess =", en.guessing_probability(pxy), " H_min(X|Y) =", en.conditional_min_entropy_classical(pxy))

# %% Entanglement makes the conditional min-entropy negative.
bell = qc.projector(qc.ket(1, 0, 0, 1) / np.sqrt(2))
print("H_min(A|B) Bell =", en.quantum_conditional_min_entropy(bell, 2, 2))
print("H_max(A|B) Bell =", en.quantum_conditional_max_entropy(bell, 2, 2))
