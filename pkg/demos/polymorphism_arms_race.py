"""
A censor, a polymorphic tool, and a classifier that stops working
=================================================================

Three development cycles.  The evader starts with an unobfuscated tunnel,
then switches to a tool that scatters its packet lengths over a wide range.
With a frozen classifier the censor keeps last cycle's model for one cycle,
so we can watch the false negatives pile up before it reselects features.
"""
from censorcost import load_scenario, run_scenario
from censorcost.reports import text_table
from censorcost.armsrace import CSV_COLUMNS

s = load_scenario("figure1-polymorphism")
print(s.name, "with", s.traffic.n_flows, "flows per cycle, tools:",
      [t.id for t in s.tool_schedule])

reports = run_scenario(s)
print(text_table(CSV_COLUMNS, [r.row() for r in reports]))

# Cycle 1: mean packet length alone separates the tunnel, cheaply.
# Cycle 2: same model, new tool.  Lengths now overlap with allowed traffic.
# Cycle 3: the censor pays to implement a timing feature and recovers.
first, frozen, after = reports
print(f"fn_rate  {first.confusion.fn_rate:.3f} -> {frozen.confusion.fn_rate:.3f}"
      f" -> {after.confusion.fn_rate:.3f}")
print(f"cycle cost rose from {first.breakdown.total:.2f} to {after.breakdown.total:.2f};"
      f" {after.breakdown.implementation:.2f} of that is new implementation work")

# Without freezing, the censor adapts in the very cycle the tool changes.
adaptive = run_scenario(s.with_options(frozen_classifier=False))
print("adaptive censor, cycle 2 features:", adaptive[1].feature_set,
      f"fn_rate {adaptive[1].confusion.fn_rate:.3f}")
