"""How many streams fit, and where they go.

Run with ``python demos/01_alignment_layout.py``.
"""

# %%
# The stream budget per user shrinks by one for every extra user sharing
# the extended channel.  Broadcast and interference channels only differ
# once the antenna counts do.
from bfia.channel import draw_channel
from bfia.precoder import Scenario, build_precoders, check_alignment, max_spac
from bfia.rotations import random_useful_unitary

import numpy as np

for kind, k, m, n, l in [("ic", 2, 1, 1, 3), ("ic", 3, 1, 1, 4), ("bc", 3, 2, 2, 2), ("ic", 3, 2, 3, 2)]:
    s = Scenario(kind, k, m, n, l)
    print(f"{kind.upper()} K={k} M={m} N={n} L={l}: {max_spac(s)}")

# %%
# Three users over four resources.  Each user owns one private resource
# and shares the last d - 1 = 1 with everyone else.
s = Scenario("ic", 3, 1, 1, 4)
rng = np.random.default_rng(0)
d = max_spac(s).d_max
p = build_precoders(s, d, [random_useful_unitary(d, rng).matrix for _ in range(s.k)])
for j, sup in enumerate(p.supports):
    print(f"user {j} occupies resources {sup}")
dm = p.dim_map(0)
print(f"receiver 0: pure {dm.pure}, mixed {dm.mixed}, interference-only {dm.interference_only}")

# %%
# The rank checks hold for almost every fading draw: the interference
# leaves room, the union fills the space, and the overlap is one dimension
# short of the desired signal.
rep = check_alignment(draw_channel(s, 1.0, 1.0, rng), p)
for r in rep.receivers:
    print(f"rx {r.receiver}: rank I={r.interference_rank} rank union={r.union_rank} overlap={r.intersection_dim}")
print("all receivers pass:", rep.passed)
