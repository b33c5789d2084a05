"""Heat one core of a 2x2 grid with a bursty load and read off its lifetimes.

Run: python demos/reliability_walkthrough.py
"""

import numpy as np

from relmap.config import SimConfig
from relmap.reliability import core_lifetimes, rainflow
from relmap.thermal import ThermalState, step

cfg = SimConfig().replace(grid={"rows": 2, "cols": 2})
tcfg = cfg.thermal_config()
params = cfg.reliability_params()

# core 0 alternates 40 s at 8 W with 20 s idle; the others idle throughout
state = ThermalState.idle(tcfg)
history = [state.temps.copy()]
for t in range(600):
    power = [8.0 if t % 60 < 40 else tcfg.idle_power] + [tcfg.idle_power] * 3
    state = step(state, power, tcfg)
    history.append(state.temps.copy())
temps = np.array(history)

print("final temperatures (K):", np.round(state.temps, 2))
cycles = rainflow(temps[:, 0], tcfg.dt)
full = [c for c in cycles if c.weight == 1.0]
print(f"core 0: {len(full)} full cycles, {len(cycles) - len(full)} half cycles")
print(f"  largest range {max(c.amplitude for c in cycles):.2f} K")

for core in range(4):
    tc, nbti, hci, em = core_lifetimes(temps[:, core], params, tcfg.dt)
    print(f"core {core}: TC {tc:8.2f} y  NBTI {nbti:6.2f} y  HCI {hci:6.2f} y  EM {em:6.2f} y")
