"""
Re-evaluating four tunnel designs against one censor
====================================================

Each preset is scored under the same catalog and demand, and every catalog
feature is checked for whether the tool blinds it.
"""
from censorcost import load_scenario
from censorcost.armsrace import AccuracyDemand
from censorcost.evaluation import compare_tools
from censorcost.reports import SCORE_COLUMNS, score_rows, text_table

s = load_scenario("tool-reeval")
ranked = compare_tools(list(s.tools.values()), s, flags=True)
print(text_table(SCORE_COLUMNS, score_rows(ranked)))

for sc in ranked:
    blinded = [f.feature_id for f in sc.flags if f.obfuscated]
    print(f"{sc.tool_id:18s} blinds {blinded or 'nothing'}")

# A censor that tolerates more misses needs less: scores can only fall.
lax = AccuracyDemand(0.3, 0.05)
for sc in compare_tools(list(s.tools.values()), s, lax, flags=False):
    print(f"{sc.tool_id:18s} score under a 30% miss budget: {sc.score:.2f}")
