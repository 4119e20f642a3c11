"""The measurement-assisted protocol and the gates it produces.

Run with ``python demos/02_entangling_gate.py``.
"""
import numpy as np

from anyonweave.gates import CEG, EG, J, circulant, equal_up_to_phase, extract_gate, is_entangling, register_state
from anyonweave.protocol import execute, expected_attempts, load_script, sample_counts, tag_probabilities

np.set_printoptions(precision=4, suppress=True)
r3 = np.sqrt(3)

script = load_script("ceg_winning")
print(f"script {script.name}: {len(script.steps)} steps on anyons {script.leaves}, plan {script.plan}")

# one forced run along the planned outcomes
trace = execute(script, register_state({"11": 1}), "forced")
print(f"forced run: {len(trace.outcomes)} measurements, probability {trace.probability:.6g}, result {trace.tag}")

eg = extract_gate(script, options={"final_twist": False})
print("\ngate on |11>, |13>, |31>, |33> without the final twist:\n", eg)
print("matches EG:", equal_up_to_phase(eg, EG))

ceg = extract_gate(script)
print("\nwith the final twist on the right qubit:\n", ceg)
print("matches CEG:", equal_up_to_phase(ceg, CEG))
print("CEG = 1/4 I + i sqrt3/4 J - 3/4 J^2 + i sqrt3/4 J^3:",
      np.allclose(circulant(0.25, 0.25j * r3, -0.75, 0.25j * r3), CEG))
print("entangling:", is_entangling(CEG))

# every outcome, not just the planned ones
probs = tag_probabilities(script, register_state({"11": 1}))
print("\nexact end-point probabilities on |11> (loops included):")
for tag, p in sorted(probs.items()):
    print(f"  {tag:14s} {p:.4f}")
# a pass ends at a result or when the run loops back to a state it has seen,
# so this counts loop iterations too
print(f"expected passes until the gate: {expected_attempts(script, register_state({'11': 1}), 'gate-produced'):.1f}")

# sampling agrees with the exact numbers (about ten seconds)
runs, counts = 100_000, {}
for (_, tag), n in sample_counts(script, register_state({"11": 1}), runs, seed=1).items():
    counts[tag] = counts.get(tag, 0) + n
print(f"{runs} sampled runs:")
for tag, n in sorted(counts.items()):
    sd = np.sqrt(probs[tag] * (1 - probs[tag]) / runs)
    print(f"  {tag:14s} {n / runs:.4f}  ({(n / runs - probs[tag]) / sd:+.1f} sigma)")
