"""24-hour unit commitment with a mid-horizon gas-price increase.

The first half runs on cheap gas (the engine covers the electric demand and
sells the surplus); at step 48 the gas price triples, after which the
engine is held at minimum production just to feed the recovered exhaust
into the boiler while the grid covers the rest. A short steam gap parks the
boiler in stand-by, a long one shuts it down with a timed restart.

Writes day_schedule.png and schedule.csv.
"""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from genunit import hybrid, scheduler

N = 96
pe = np.concatenate([np.full(48, 1.0e6), np.full(48, 1.4e6)])
qs = np.where(np.arange(N) < 48, 0.2, 0.14)
qs[52:58] = 0.0   # short gap: stand-by
qs[64:92] = 0.0   # long gap: off + timed restart
lam_gas = np.where(np.arange(N) < 48, 405.0, 1140.0)
demand = scheduler.DemandProfile(P_e=pe, q_s=qs)
prices = scheduler.PriceProfile(lam_gas=lam_gas,
                                lam_sell=np.full(N, 3.0e-5),
                                lam_buy=np.full(N, 5.0e-5))

mld = hybrid.compile_mld()
print("solving the 96-step unit commitment...")
sched = scheduler.solve_uc(mld, demand, prices,
                           init_modes={"CHP": "ON", "FTB": "ON0"},
                           gap=5e-4)
scheduler.schedule_to_csv(sched, "schedule.csv")
print(f"objective: {sched.objective:.2f}; schedule.csv written")

fig, axes = plt.subplots(4, 1, figsize=(10, 11), sharex=True)
k = np.arange(N)
chp_levels = {"OFF": 0, "CS": 1, "HS": 2, "ON": 3}
ftb_levels = {"OFF": 0, "CS": 1, "HS": 2, "SB": 3, "ON0": 4, "ON1": 5}
axes[0].step(k, [chp_levels[m] for m in sched.chp_mode], where="post")
axes[0].set_yticks(list(chp_levels.values()),
                   list(chp_levels.keys()))
axes[0].set_ylabel("CHP mode")
axes[1].step(k, sched.P_e / 1e6, where="post", label="CHP supply")
axes[1].step(k, sched.P_purch / 1e6, where="post", label="grid purchase")
axes[1].step(k, demand.P_e / 1e6, where="post", ls="--", color="k",
             label="demand")
axes[1].set_ylabel("electric power [MW]")
axes[1].legend()
axes[2].step(k, [ftb_levels[m] for m in sched.ftb_mode], where="post")
axes[2].set_yticks(list(ftb_levels.values()), list(ftb_levels.keys()))
axes[2].set_ylabel("boiler mode")
axes[3].step(k, sched.q_s_out, where="post", label="delivered steam")
axes[3].step(k, demand.q_s, where="post", ls="--", color="k",
             label="demand")
axes[3].axvline(48, color="r", ls=":", label="gas price switch")
axes[3].set_ylabel("steam [kg/s]")
axes[3].set_xlabel("high-level step (15 min)")
axes[3].legend()
for ax in axes:
    ax.grid(alpha=0.3)
fig.tight_layout()
fig.savefig("day_schedule.png", dpi=120)
print("wrote day_schedule.png")
