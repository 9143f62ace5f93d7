"""
How the detection policy changes the score
==========================================

The same firing episodes can score very differently depending on how
late after a fault an alert may still count, and whether phases are
scored on their own or merged into patterns.
"""

from alertlab import experiment, matcher
from alertlab.matcher import MatchPolicy

spec = experiment.load_reference_spec()
result = experiment.run_experiment(spec)

print(f"{'rule':<7} {'granularity':<11} {'grace':>5}  tp/units  fp  precision  recall")
for name, episodes in result.episodes.items():
    for granularity in ("pattern", "phase"):
        for grace in (0, 30, 90):
            policy = MatchPolicy(grace_after_end=grace, granularity=granularity)
            rep = matcher.classify(episodes, result.schedule, policy, rule_name=name)
            precision = rep.precision if isinstance(rep.precision, str) else f"{rep.precision:.3f}"
            print(f"{name:<7} {granularity:<11} {grace:>5}  {rep.tp:>2}/{rep.tp + rep.fn:<5} {rep.fp:>3}  "
                  f"{precision:>9}  {rep.recall:.3f}")

# The held rule fires late: its firings land after the faults end, so it
# looks useless with a 30 s grace and much better with a longer one.
