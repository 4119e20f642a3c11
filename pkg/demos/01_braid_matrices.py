"""From the SU(2)_4 tables to the braid matrices used by the gate protocol.

Run with ``python demos/01_braid_matrices.py``.
"""
import numpy as np

from anyonweave import category
from anyonweave.hilbert import apply_braid, apply_braid_word, enumerate_basis, operator_matrix

np.set_printoptions(precision=4, suppress=True)

print("quantum dimensions d_0..d_4:", [round(category.qdim(a), 6) for a in category.CHARGES])
print("2 x 2 fuses to", category.fusion_outcomes(2, 2), "and 1 x 2 to", category.fusion_outcomes(1, 2))
print(f"pentagon residual {category.pentagon_residual():.1e}, hexagon residual {category.hexagon_residual():.1e}")

# a qubit is four anyons 1 2 2 1 with total charge 0; the internal label after
# the first two leaves is 1 or 3
print("\nqubit basis:", [lbl.internal for lbl in enumerate_basis((1, 2, 2, 1), 0)])
twist = operator_matrix(lambda s: apply_braid(apply_braid(s, 1), 1), (1, 2, 2, 1), 0)
print("full twist of the two middle anyons on a qubit:\n", twist)

# a qutrit is four 2-anyons; the label after two leaves is 0, 2 or 4
print("\nqutrit basis:", [lbl.internal for lbl in enumerate_basis((2, 2, 2, 2), 0)])
twist = operator_matrix(lambda s: apply_braid(apply_braid(s, 1), 1), (2, 2, 2, 2), 0)
print("full twist of the two middle anyons on a qutrit:\n", twist)

word = operator_matrix(lambda s: apply_braid_word(s, [(0, 1), (1, 1), (0, 1)]), (2, 2, 2, 2), 0)
word = word * (abs(word[0, 0]) / word[0, 0])
print("braid word s0 s1 s0 on the qutrit, phase fixed so entry (1,1) is real:\n", word.real)
print("equals the F-matrix F(2,2,2,2):", np.allclose(word, category.f_matrix(2, 2, 2, 2)))
