"""Why the rotation angles are tied.

Each row of a useful unitary, applied to every symbol vector, yields the
same set of points.  One mixture then describes every mixed resource.
"""

# %%
import numpy as np

from bfia.constellation import make_constellation
from bfia.rotations import general_orthogonal, mean_set, random_useful_unitary, verify_theorem3

qpsk = make_constellation("psk", 4)
rng = np.random.default_rng(1)

# %%
# A tied 4x4 rotation: three angles, every row gives the same 256 points.
u = random_useful_unitary(4, rng)
print(verify_theorem3(u, qpsk))
print("first row points:", np.round(np.sort_complex(mean_set(u.matrix, 0, qpsk))[:4], 4), "...")

# %%
# Six independent angles break the symmetry between rows.
v = general_orthogonal(4, rng.uniform(0, 2 * np.pi, 6))
print(verify_theorem3(v, qpsk))
