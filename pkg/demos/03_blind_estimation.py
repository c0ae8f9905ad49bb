"""Learning the interference from the data alone.

The resources that carry a single interferer reveal its mixture.  EM fits
it, and because of the tied rotations the same mixture applies on the
resource where that interferer overlaps the desired signal.
"""

# %%
import numpy as np
from scipy.optimize import linear_sum_assignment

from bfia.channel import draw_channel, exact_interference_cov, snr_to_sigma2, transmit
from bfia.constellation import enumerate_vectors, make_constellation
from bfia.estimate import estimate_covariance, estimate_interference_pdf
from bfia.precoder import Scenario, build_precoders
from bfia.rotations import random_useful_unitary

qpsk = make_constellation("psk", 4)
rng = np.random.default_rng(3)
s = Scenario("ic", 2, 1, 1, 3)
p = build_precoders(s, 2, [random_useful_unitary(2, rng).matrix for _ in range(2)])
sigma2 = snr_to_sigma2(20)
ch = draw_channel(s, 1.0, sigma2, rng)
y = transmit(ch, p, rng.integers(4, size=(2, 500, 2)), qpsk, rng).y[0]

# %%
# Fit 16 components (all QPSK pairs) to 500 samples and match them to truth.
est = estimate_interference_pdf(y, 0, p, qpsk, sigma2=sigma2, rng=rng)
fitted = est.per_interferer[1].means
true = ch.gains[0, 1, 0, 0] * (enumerate_vectors(qpsk, 2) @ np.asarray(p.unitaries[1])[0])
cost = np.abs(true[:, None] - fitted[None, :])
r, c = linear_sum_assignment(cost)
print(f"worst mean error over 16 components: {cost[r, c].max():.4f}")

# %%
# The second-order view converges as blocks accumulate.
exact = exact_interference_cov(ch, p, 0)
y_big = transmit(ch, p, rng.integers(4, size=(2, 10_000, 2)), qpsk, rng).y[0]
for t in (100, 1000, 10_000):
    err = np.linalg.norm(estimate_covariance(y_big[:t], 0, p, sigma2=sigma2).R - exact) / np.linalg.norm(exact)
    print(f"{t:>6} blocks: relative covariance error {err:.2e}")
