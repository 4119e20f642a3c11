"""Recovery branches and the qutrit projection.

Run with ``python demos/03_recoveries.py``.
"""
import numpy as np

from anyonweave.gates import REC4, equal_up_to_phase, extract_gate, register_state, register_vector
from anyonweave.protocol import execute, load_script, qutrit_amplitudes, qutrit_state, run_process_p

np.set_printoptions(precision=4, suppress=True)

# main measurement outcome 4: a different gate, or its inverse after one
# extra fusion outcome 2
main4 = load_script("recovery_main4")
u = extract_gate(main4)
print("gate after main outcome 4:\n", u, "\nmatches the expected shape:", equal_up_to_phase(u, REC4))
plan = list(main4.plan)
plan[-1] = 2
v = extract_gate(main4, plan)
print("with one extra fusion outcome 2, U V is the identity:", equal_up_to_phase(u @ v, np.eye(4)))

# main measurement outcome 2: the input comes back
main2 = load_script("recovery_main2")
bell = register_state({"11": 1, "33": 1})
passes = execute(main2, bell, "enumerate")
intact = [t for t in passes.traces if t.tag == "intact-input"]
ok = all(equal_up_to_phase(register_vector(t.final_state), register_vector(bell)) for t in intact)
print(f"\n{len(intact)} passes of {main2.name} return (|11>+|33>)/sqrt2 intact: {ok}")

# projecting a qutrit onto |2> or onto its 0/4 part
state = qutrit_state(0.6, 0.48, 0.64)
print("\nqutrit amplitudes in:", qutrit_amplitudes(state))
for seed in range(4):
    t = run_process_p(state, seed=seed)
    print(f"  seed {seed}: {t.tag:17s} after {len(t.outcomes)} measurements ->",
          qutrit_amplitudes(t.final_state) if t.final_state.leaves == (2, 2, 2, 2) else "(ancilla kept)")
exact = run_process_p(state, "enumerate").terminals
print("exact end points:", {tag: round(p, 4) for (_, tag), p in exact.items()})
