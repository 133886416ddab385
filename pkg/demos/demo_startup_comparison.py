"""Startup strategies side by side: staged manual firing vs the
successive-linearization MPC, with the temperature-rate bound overlaid.

Writes startup_comparison.png and prints the duration/energy table.
"""

from dataclasses import replace

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from genunit import plant, startup, thermo

x0 = startup.cold_initial_state()
stress = startup.rate_limit_stress_params()
shell = replace(stress[plant.IT_W], p0=thermo.p_sat(x0[plant.IT_W]))

print("running closed-loop MPC startup...")
lpv = startup.run_startup_lpv(x0)
print("running manual staged startup...")
manual = startup.manual_startup_profile(x0)

rows = [("MPC (closed loop)", lpv), ("manual (staged)", manual)]
print(f"\n{'procedure':<20}{'duration [s]':>14}{'energy [MJ]':>14}"
      f"{'rate violations':>18}")
for name, rec in rows:
    viol = plant.rate_violations(rec["x"], 6.0, stress, p0=shell.p0)
    print(f"{name:<20}{rec['duration_s']:>14.0f}"
          f"{rec['energy_J'] / 1e6:>14.1f}{len(viol):>18}")
print(f"\nduration ratio MPC/manual: "
      f"{lpv['duration_s'] / manual['duration_s']:.2f}")

fig, axes = plt.subplots(3, 1, figsize=(9, 10), sharex=True)
for name, rec in rows:
    t = rec["t"] / 60.0
    axes[0].plot(t, rec["p"] / 1e5, label=name)
    axes[1].plot(t, rec["x"][:, plant.IT_W], label=name)
    rates = np.diff(rec["x"][:, plant.IT_W]) / 6.0
    axes[2].plot(t[:-1], rates, label=name)
lims = [plant.max_temp_rate(shell,
                            max(thermo.p_sat(min(max(T, 274.0), 600.0)),
                                shell.p0))
        for T in lpv["x"][:-1, plant.IT_W]]
axes[2].plot(lpv["t"][:-1] / 60.0, lims, "k--", label="rate bound")
axes[0].axhline(9.93, color="gray", ls=":", label="99.3% of setpoint")
axes[0].set_ylabel("pressure [bar]")
axes[1].set_ylabel("water temperature [K]")
axes[2].set_ylabel("dT_w/dt [K/s]")
axes[2].set_xlabel("time [min]")
for ax in axes:
    ax.legend()
    ax.grid(alpha=0.3)
fig.tight_layout()
fig.savefig("startup_comparison.png", dpi=120)
print("wrote startup_comparison.png")
