"""
Mimicking a cover protocol
==========================

A steganographic tool reshapes its packet lengths to match the allowed
traffic.  The length feature becomes useless, but timing was never touched,
so a censor willing to pay for timing measurements still catches it.
"""
from censorcost import load_scenario, run_scenario
from censorcost.evaluation import evaluation_traffic, single_feature_errors

s = load_scenario("figure2-steganography")
mimic = s.tool_schedule[1]

# Balanced error of a one-feature classifier: 0.5 is a coin flip.
plain = single_feature_errors(*evaluation_traffic(s, s.tool_schedule[0]), s)
shaped = single_feature_errors(*evaluation_traffic(s, mimic), s)
for fid in s.catalog.ids:
    print(f"{fid:10s} plain {plain[fid]:.3f}   {mimic.id} {shaped[fid]:.3f}")

for r in run_scenario(s):
    print(f"cycle {r.cycle}: tool {r.tool:24s} features {r.feature_set}"
          f"  fn {r.confusion.fn_rate:.3f}  cost {r.breakdown.total:.2f}")
