"""Stand-by limit cycle: the three-mode rule controller holds the pressure
between its thresholds at a fraction of the minimum-production gas use.

Writes standby_cycle.png and prints the cycle statistics exported to the
high-level model.
"""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from genunit import hybrid, lowctl

rec, stats = lowctl.simulate_standby(n_steps=200)
hl = hybrid.nominal_boiler_hl_map()
print("limit-cycle statistics:", stats)
print(f"high-level constants: q_g_SB={hl.q_g_sb}, q_s_SB={hl.q_s_sb}")
print(f"cycle mean vs exported constant: "
      f"{abs(stats['q_g_mean'] - hl.q_g_sb) / hl.q_g_sb * 100:.2f}%")

fig, axes = plt.subplots(3, 1, figsize=(9, 8), sharex=True)
t = rec["t"] / 60.0
axes[0].plot(t, rec["p_bar"])
for level, style in ((9.5, "r--"), (10.0, "g:"), (10.5, "r--")):
    axes[0].axhline(level, ls=style[1:], color=style[0], alpha=0.6)
axes[0].set_ylabel("pressure [bar]")
axes[1].step(t, rec["q_g"], where="post")
axes[1].set_ylabel("burner gas [kg/s]")
axes[2].step(t, rec["phase"], where="post")
axes[2].set_yticks([1, 2, 3], ["impulse", "low steady", "lowest firing"])
axes[2].set_ylabel("controller mode")
axes[2].set_xlabel("time [min]")
for ax in axes:
    ax.grid(alpha=0.3)
fig.tight_layout()
fig.savefig("standby_cycle.png", dpi=120)
print("wrote standby_cycle.png")
