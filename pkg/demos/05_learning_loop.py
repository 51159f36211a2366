"""Learning walkthrough: corrections fix an out-of-distribution policy, and
online tabular fine-tuning beats cloning alone.

Run:  python3 demos/05_learning_loop.py   (takes ~15 s)
"""

from telesync.harness.experiments import hitl_analog, odss_analog

print("=== corrections vs. out-of-distribution placements ===")
print("A policy cloned from in-distribution demonstrations only is helpless")
print("when goals move to the opposite half-plane; mixing in scripted-")
print("intervenor corrections covers the failure region.\n")
result = odss_analog(seed=7)
print(f"  base policy : {result.base_successes}/{result.rollouts} on OOD placements")
print(f"  after mixing: {result.mixed_successes}/{result.rollouts}")
print(f"  ({result.detail['correction_successes']}/50 correction episodes were rescued)")

print("\n=== online fine-tuning with human-in-the-loop corrections ===")
print("Stage 1: the geometric reward head stands in for a trained classifier.")
print("Stage 2: clone 20 slow, partially-covering demonstrations.")
print("Stage 3: 50 online episodes; corrections land in the offline replay")
print("partition, policy steps in the online partition; tabular Q updates")
print("draw symmetric batches from both.\n")
hitl = hitl_analog(seed=3)
print(f"  cloning only : {hitl.bc_successes}/{hitl.rollouts}, mean length {hitl.bc_mean_length:.1f}")
print(f"  after tuning : {hitl.final_successes}/{hitl.rollouts}, mean length {hitl.final_mean_length:.1f}")

lengths = [p.mean_intervention_length for p in hitl.hitl.curve]
print("\n  mean intervention length per online episode:")
for start in range(0, len(lengths), 10):
    chunk = lengths[start : start + 10]
    print("   ", " ".join(f"{x:5.1f}" for x in chunk))
print("\n(the learner leans on the human early, then interventions shrink)")
