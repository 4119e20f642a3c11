"""Regenerate ``su2k4_symbols.json`` from the diagram-evaluation oracle.

    python tests/make_golden.py [output-path]

Admissibility is decided by the oracle itself (a theta net is nonzero iff its
labels are admissible), so the file does not depend on the package at all.
"""
import itertools
import json
import sys
from pathlib import Path

import tl_oracle as oracle

CHARGES = range(5)
DEFAULT_OUT = Path(__file__).resolve().parents[1] / "src" / "anyonweave" / "data" / "su2k4_symbols.json"


def _z(v):
    v = complex(v)
    return {"re": v.real, "im": v.imag}


def build():
    out = {}
    triples = [t for t in itertools.product(CHARGES, repeat=3) if abs(oracle.theta_net(*t)) > 1e-9]
    ok = set(triples)
    for t in triples:
        out[f"theta{list(t)}"] = _z(oracle.theta_net(*t))
        out[f"R{list(t)}"] = _z(oracle.r_eigenvalue(*t))
    for a, b, c, d, e, f in itertools.product(CHARGES, repeat=6):
        if {(a, b, e), (e, c, d), (b, c, f), (a, f, d)} <= ok:
            key = [a, b, c, d, e, f]
            out[f"tet{key}"] = _z(oracle.tet_net(*key))
            out[f"F{key}"] = _z(oracle.unitary_f(*key))
    for a in CHARGES:
        out[f"twist[{a}]"] = _z(oracle.twist_eigenvalue(a))
    return out


if __name__ == "__main__":
    target = Path(sys.argv[1]) if len(sys.argv) > 1 else DEFAULT_OUT
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(json.dumps(build(), indent=1, sort_keys=True) + "\n", encoding="utf-8")
    print(f"wrote {target}")
