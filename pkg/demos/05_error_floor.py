"""Overloading the channel.

Two users on one resource: the covariance receiver cannot separate them and
floors, while the likelihood receiver with full channel knowledge keeps
improving because the finite alphabet is still distinguishable.
"""

# %%
from bfia.harness import SimConfig, run_ber
from bfia.precoder import Scenario

cfg = SimConfig(Scenario("ic", 2, 1, 1, 1), 1, seed=7, detectors="md-known,ml-known",
                snr_db=(10, 20, 30), realizations=100, blocks=300, allow_infeasible=True)
table = run_ber(cfg)
for det in ("md-known", "ml-known"):
    snr, ber = table.curve(det)
    print(det.ljust(9), "  ".join(f"{s:.0f} dB: {b:.4f}" for s, b in zip(snr, ber)))
