"""The entanglement score and rank aggregation across tasks.

Each task has a theoretically correct uncertainty measure (ambiguity:
aleatoric, shift detection: epistemic, calibration: total). The score is the
signed angular distance of (wrong, correct) performance from the diagonal,
scaled to [-1, 1]: positive means the correct measure wins (disentangled),
negative means the wrong one does (entangled).
"""

from uqtangle import assign_measures, delta, make_task_result, rank_models

# --- geometry of the score -----------------------------------------------------
print("delta(correct, wrong, +1) examples")
for uc, uw in ((0.9, 0.3), (0.6, 0.6), (0.3, 0.9), (0.9, 0.0)):
    print(f"  correct={uc:.1f} wrong={uw:.1f} -> {delta(uc, uw, +1):+.4f}")
print("for error-style scores (lower better) the sign flips:")
print(f"  ace_correct=0.05 ace_wrong=0.20 -> {delta(0.05, 0.20, -1):+.4f}")

# --- measure assignment ----------------------------------------------------------
for task in ("oodd", "amb", "cal"):
    spec = assign_measures(task)
    better = "higher" if spec.sign > 0 else "lower"
    print(f"\ntask {task}: correct={spec.correct_measure} wrong={spec.wrong_measure} "
          f"({better} is better)")

# --- rank aggregation -------------------------------------------------------------
# three models, two tasks; ranks averaged over splits within a task, then tasks
def row(model, task, split, **scores):
    values = {"au": 0.0, "eu": 0.0, "tu": 0.0}
    values.update(scores)
    return make_task_result(model, assign_measures(task), split, values)


results = [
    row("ensemble", "oodd", "all", eu=0.93, au=0.61),
    row("dropout", "oodd", "all", eu=0.81, au=0.74),
    row("single", "oodd", "all", eu=0.58, au=0.66),
    row("ensemble", "amb", "id", au=0.55, eu=0.21),
    row("dropout", "amb", "id", au=0.49, eu=0.33),
    row("single", "amb", "id", au=0.51, eu=0.02),
    row("ensemble", "amb", "ood", au=0.40, eu=0.18),
    row("dropout", "amb", "ood", au=0.37, eu=0.25),
    row("single", "amb", "ood", au=0.42, eu=0.03),
]

print("\nmean performance ranks (1 = best):")
for model, rank in sorted(rank_models(results, key="performance").items(), key=lambda kv: kv[1]):
    print(f"  {model:10s} {rank:.2f}")
print("mean entanglement ranks (1 = least entangled):")
for model, rank in sorted(rank_models(results, key="delta").items(), key=lambda kv: kv[1]):
    print(f"  {model:10s} {rank:.2f}")
