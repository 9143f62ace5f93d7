"""
Seed sweep behind the reference calibration
===========================================

The reference error model (gain 0.22, noise 0.012) was picked so the three
rules separate clearly. This sweep reruns the scenario over ten seeds and
shows how often the separation holds.
"""

import sys

from alertlab import experiment

spec = experiment.load_reference_spec()
n = int(sys.argv[1]) if len(sys.argv) > 1 else 10

# Seed-only variations: each gets seed + index, the fault schedule stays fixed.
results = experiment.run_batch(spec, [{} for _ in range(n)], parallelism=4)

print("seed  Base90 tp/eps/multi  Win120 tp/eps  For60 tp/eps  separated")
held = 0
for r in results:
    b, w, f = (r.reports[k] for k in ("Base90", "Win120", "For60"))
    multi = sum(rec.episode_count >= 2 for rec in b.records)
    ok = b.tp >= 5 and multi >= 1 and w.tp < b.tp and f.episodes < b.episodes
    held += ok
    cells = (f"{b.tp}/{b.episodes}/{multi}", f"{w.tp}/{w.episodes}", f"{f.tp}/{f.episodes}")
    print(f"{r.spec.seed:>4}  {cells[0]:<19}  {cells[1]:<13}  {cells[2]:<12}  {'yes' if ok else 'no'}")
print(f"{held}/{n} seeds separate the rules")

# A gain sweep at a fixed seed shows why the default gain of 0.8 is not
# used here: at that strength every rule catches every pattern.
for gain in (0.15, 0.22, 0.3, 0.5, 0.8):
    r = experiment.run_experiment(experiment.apply_overrides(spec, {"error_model.loss_to_error_gain": gain}))
    print(f"gain {gain:<4}", {k: f"{v.tp}/{v.tp + v.fn}" for k, v in r.reports.items()})
