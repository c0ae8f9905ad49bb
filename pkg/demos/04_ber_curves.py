"""Bit error rates for the four receivers.

A small Monte Carlo sweep for two users over three resources.  Increase
``realizations`` for smoother curves.
"""

# %%
from bfia.harness import SimConfig, format_results, paired_difference, run_ber
from bfia.precoder import Scenario

cfg = SimConfig(Scenario("ic", 2, 1, 1, 3), 2, seed=11, detectors="md-known,md-est,ml-known,ml-blind",
                snr_db=(0, 10, 20, 30), realizations=10, blocks=300, all_users=True)
table = run_ber(cfg)
print(format_results(table))

# %%
# All detectors share every draw, so differences carry paired errors.
for snr in cfg.snr_db:
    diff, se = paired_difference(table, "md-known", "ml-blind", snr)
    print(f"{snr:>4.0f} dB: MD minus blind ML = {diff:.4f} +/- {se:.4f}")
