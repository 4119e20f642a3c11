"""Recoupling data of the Kauffman-Jones SU(2) level 4 theory.

Charges are the integers 0..4 (twice the spin). Everything is tabulated once
from closed-form formulas at ``A = i exp(-i pi/12)`` and frozen:

* theta and tetrahedral nets in Kauffman-Lins normalization (they depend on
  the loop value ``delta = -A**2 - A**-2 = sqrt(3)`` only),
* F-symbols in the unitary gauge obtained by normalizing every trivalent
  vertex with the square root of its theta net,
* R-symbols and ribbon twists from the bracket at ``A``.

Conventions
-----------
``F[a, b, c, d][e, f]`` is the amplitude of the right-associated tree
``a (b c)_f -> d`` in the left-associated tree ``(a b)_e c -> d``.
``R[a, b, c]`` is the eigenvalue of a positive (counterclockwise) exchange of
``a`` (left) and ``b`` (right) fusing to ``c``.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from types import MappingProxyType
from typing import Mapping

import numpy as np

LEVEL = 4
CHARGES = tuple(range(LEVEL + 1))
KAUFFMAN_A = 1j * np.exp(-1j * np.pi / 12)

GOLDEN_PATH = Path(__file__).with_name("data") / "su2k4_symbols.json"


class CategoryError(ValueError):
    """Raised for labels that violate the fusion rules."""


def quantum_integer(n: int) -> float:
    """[n] = sin(n pi / 6) / sin(pi / 6), the Chebyshev value at delta = sqrt(3)."""
    if n < 0:
        raise ValueError(f"quantum_integer needs n >= 0, got {n}")
    # the sines are exact enough; snap the integers so dims compare exactly
    value = math.sin(n * math.pi / (LEVEL + 2)) / math.sin(math.pi / (LEVEL + 2))
    nearest = round(value)
    return float(nearest) if abs(value - nearest) < 1e-13 else value


def _qfact(n: int) -> float:
    """Kauffman-Lins factorial of the signed integers (-1)**(k-1) [k]."""
    out = 1.0
    for k in range(1, n + 1):
        out *= (-1) ** (k - 1) * quantum_integer(k)
    return out


def _check_charge(a: int) -> None:
    if a not in CHARGES:
        raise CategoryError(f"charge {a!r} outside 0..{LEVEL}")


def qdim(a: int) -> float:
    _check_charge(a)
    return quantum_integer(a + 1)


@lru_cache(maxsize=None)
def admissible(a: int, b: int, c: int) -> bool:
    """Level-4 fusion rule: parity, triangle inequality and a+b+c <= 2k."""
    for x in (a, b, c):
        _check_charge(x)
    return (a + b + c) % 2 == 0 and abs(a - b) <= c <= a + b and a + b + c <= 2 * LEVEL


@lru_cache(maxsize=None)
def fusion_outcomes(a: int, b: int) -> tuple[int, ...]:
    return tuple(c for c in CHARGES if admissible(a, b, c))


def _theta_formula(a: int, b: int, c: int) -> float:
    m, n, p = (a + b - c) // 2, (b + c - a) // 2, (a + c - b) // 2
    return (-1) ** (m + n + p) * (_qfact(m + n + p + 1) * _qfact(m) * _qfact(n) * _qfact(p)
            / (_qfact(m + n) * _qfact(n + p) * _qfact(m + p)))


def _tet_formula(a: int, b: int, c: int, d: int, e: int, f: int) -> float:
    """Tetrahedral net with vertices (a,b,e), (c,d,e), (b,c,f), (a,f,d)."""
    faces = [(a + b + e) // 2, (c + d + e) // 2, (b + c + f) // 2, (a + f + d) // 2]
    squares = [(a + b + c + d) // 2, (a + c + e + f) // 2, (b + d + e + f) // 2]
    prefactor = 1.0
    for i in faces:
        for j in squares:
            prefactor *= _qfact(j - i)
    for x in (a, b, c, d, e, f):
        prefactor /= _qfact(x)
    total = 0.0
    for s in range(max(faces), min(squares) + 1):
        den = 1.0
        for i in faces:
            den *= _qfact(s - i)
        for j in squares:
            den *= _qfact(j - s)
        total += (-1) ** s * _qfact(s + 1) / den
    return prefactor * total


def _r_formula(a: int, b: int, c: int) -> complex:
    exponent = (c * (c + 2) - a * (a + 2) - b * (b + 2)) // 2
    return (-1) ** ((a + b - c) // 2) * KAUFFMAN_A ** exponent


def _twist_formula(a: int) -> complex:
    return (-1) ** a * KAUFFMAN_A ** (a * (a + 2))


def _snap(z: complex, tol: float = 1e-14) -> complex:
    re, im = z.real, z.imag
    return complex(0.0 if abs(re) < tol else re, 0.0 if abs(im) < tol else im)


@dataclass(frozen=True)
class CategoryData:
    """Frozen tables of all symbols; keys are admissible label tuples only."""

    kauffman_A: complex
    loop_value: float
    qdims: Mapping[int, float]
    theta: Mapping[tuple, float]
    tet: Mapping[tuple, float]
    fmatrix: Mapping[tuple, float]
    rsymbol: Mapping[tuple, complex]
    twist: Mapping[int, complex]
    _fblocks: Mapping[tuple, tuple] = field(repr=False, default=MappingProxyType({}))

    @classmethod
    def build(cls) -> "CategoryData":
        triples = [t for t in itertools.product(CHARGES, repeat=3) if admissible(*t)]
        theta = {t: _theta_formula(*t) for t in triples}
        tet = {}
        fsym = {}
        for a, b, c, d, e, f in itertools.product(CHARGES, repeat=6):
            if not (admissible(a, b, e) and admissible(e, c, d)
                    and admissible(b, c, f) and admissible(a, f, d)):
                continue
            t = _tet_formula(a, b, c, d, e, f)
            tet[(a, b, c, d, e, f)] = t
            norm = theta[(a, b, e)] * theta[(e, c, d)] * theta[(b, c, f)] * theta[(a, f, d)]
            fsym[(a, b, c, d, e, f)] = t * math.sqrt(qdim(e) * qdim(f) / norm)
        blocks = {}
        for a, b, c, d in itertools.product(CHARGES, repeat=4):
            rows = tuple(e for e in fusion_outcomes(a, b) if admissible(e, c, d))
            cols = tuple(f for f in fusion_outcomes(b, c) if admissible(a, f, d))
            if not rows:
                continue
            mat = np.array([[fsym[(a, b, c, d, e, f)] for f in cols] for e in rows])
            mat.setflags(write=False)
            blocks[(a, b, c, d)] = (rows, cols, mat)
        return cls(
            kauffman_A=KAUFFMAN_A,
            loop_value=float((-KAUFFMAN_A**2 - KAUFFMAN_A**-2).real),
            qdims=MappingProxyType({a: qdim(a) for a in CHARGES}),
            theta=MappingProxyType(theta),
            tet=MappingProxyType(tet),
            fmatrix=MappingProxyType(fsym),
            rsymbol=MappingProxyType({t: _snap(_r_formula(*t)) for t in triples}),
            twist=MappingProxyType({a: _snap(_twist_formula(a)) for a in CHARGES}),
            _fblocks=MappingProxyType(blocks),
        )

    def f_block(self, a: int, b: int, c: int, d: int):
        """(row labels e, column labels f, unitary matrix) for F^{abc}_d."""
        try:
            return self._fblocks[(a, b, c, d)]
        except KeyError:
            raise CategoryError(f"inadmissible external labels {(a, b, c, d)}") from None

    def to_json(self) -> dict:
        """Symbol tables in the golden-file layout."""
        out = {}
        for kind, table in (("theta", self.theta), ("tet", self.tet),
                            ("F", self.fmatrix), ("R", self.rsymbol)):
            for key, val in table.items():
                z = complex(val)
                out[f"{kind}{list(key)}"] = {"re": z.real, "im": z.imag}
        for a, z in self.twist.items():
            out[f"twist[{a}]"] = {"re": z.real, "im": z.imag}
        return out


@lru_cache(maxsize=1)
def su2_4() -> CategoryData:
    """The shared, immutable table instance."""
    return CategoryData.build()


def theta_symbol(a: int, b: int, c: int) -> float:
    if not admissible(a, b, c):
        raise CategoryError(f"theta symbol needs an admissible triple, got {(a, b, c)}")
    return su2_4().theta[(a, b, c)]


def tet_symbol(a: int, b: int, c: int, d: int, e: int, f: int) -> float:
    key = (a, b, c, d, e, f)
    try:
        return su2_4().tet[key]
    except KeyError:
        raise CategoryError(f"inadmissible tetrahedron {key}") from None


def f_symbol(a: int, b: int, c: int, d: int, e: int, f: int) -> float:
    """Single entry F^{abc}_{d; e f}; zero for inadmissible labels."""
    return su2_4().fmatrix.get((a, b, c, d, e, f), 0.0)


def f_matrix(a: int, b: int, c: int, d: int) -> np.ndarray:
    """F^{abc}_d with rows indexed by e in a x b, columns by f in b x c.

    Use :func:`f_matrix_labels` for the row and column charges.
    """
    return su2_4().f_block(a, b, c, d)[2]


def f_matrix_labels(a: int, b: int, c: int, d: int) -> tuple[tuple[int, ...], tuple[int, ...]]:
    rows, cols, _ = su2_4().f_block(a, b, c, d)
    return rows, cols


def r_symbol(a: int, b: int, c: int) -> complex:
    if not admissible(a, b, c):
        raise CategoryError(f"R symbol needs an admissible triple, got {(a, b, c)}")
    return su2_4().rsymbol[(a, b, c)]


def twist_phase(a: int) -> complex:
    _check_charge(a)
    return su2_4().twist[a]


# -- consistency checks -------------------------------------------------------

def pentagon_residual(data: CategoryData | None = None) -> float:
    """Largest deviation in the pentagon equation over all admissible labels.

    For leaves a, b, c, d with total e, the two recoupling paths from
    (((ab)_f c)_g d) to (a (b (cd)_k)_l) must agree.
    """
    data = data or su2_4()
    F = data.fmatrix
    worst = 0.0
    for a, b, c, d, e in itertools.product(CHARGES, repeat=5):
        for f in fusion_outcomes(a, b):
            for g in fusion_outcomes(f, c):
                if not admissible(g, d, e):
                    continue
                for k in fusion_outcomes(c, d):
                    for l in fusion_outcomes(b, k):
                        if not admissible(a, l, e):
                            continue
                        lhs = F.get((f, c, d, e, g, k), 0.0) * F.get((a, b, k, e, f, l), 0.0)
                        rhs = sum(F.get((a, b, c, g, f, h), 0.0) * F.get((a, h, d, e, g, l), 0.0)
                                  * F.get((b, c, d, l, h, k), 0.0) for h in CHARGES)
                        worst = max(worst, abs(lhs - rhs))
    return worst


def hexagon_residual(data: CategoryData | None = None) -> float:
    """Largest deviation in both hexagon equations (R and R^-1)."""
    data = data or su2_4()
    F, R = data.fmatrix, data.rsymbol
    worst = 0.0
    for a, b, c, d in itertools.product(CHARGES, repeat=4):
        for e in fusion_outcomes(c, a):
            if not admissible(e, b, d):
                continue
            for g in fusion_outcomes(c, b):
                if not admissible(a, g, d):
                    continue
                for inv in (False, True):
                    r = (lambda t: np.conj(R[t])) if inv else (lambda t: R[t])
                    lhs = r((c, a, e)) * F.get((a, c, b, d, e, g), 0.0) * r((c, b, g))
                    rhs = sum(F.get((c, a, b, d, e, f), 0.0) * r((c, f, d))
                              * F.get((a, b, c, d, f, g), 0.0)
                              for f in fusion_outcomes(a, b) if admissible(c, f, d))
                    worst = max(worst, abs(lhs - rhs))
    return worst


def unitarity_residual(data: CategoryData | None = None) -> float:
    data = data or su2_4()
    worst = 0.0
    for rows, cols, mat in data._fblocks.values():
        if len(rows) != len(cols):
            return math.inf
        worst = max(worst, float(np.max(np.abs(mat @ mat.conj().T - np.eye(len(rows))))))
    return worst


def dimension_residual(data: CategoryData | None = None) -> float:
    """max |sum_c N_ab^c d_c - d_a d_b|."""
    data = data or su2_4()
    d = data.qdims
    return max(abs(sum(d[c] for c in fusion_outcomes(a, b)) - d[a] * d[b])
               for a, b in itertools.product(CHARGES, repeat=2))


def ribbon_residual(data: CategoryData | None = None) -> float:
    """max |R^{ab}_c R^{ba}_c - theta_c / (theta_a theta_b)|."""
    data = data or su2_4()
    R, tw = data.rsymbol, data.twist
    return max(abs(R[(a, b, c)] * R[(b, a, c)] - tw[c] / (tw[a] * tw[b]))
               for (a, b, c) in R)


def load_golden(path: str | Path | None = None) -> dict:
    with open(path or GOLDEN_PATH, encoding="utf-8") as fh:
        return json.load(fh)


def golden_mismatches(golden: dict, data: CategoryData | None = None,
                      tol: float = 1e-9) -> list[tuple[str, float]]:
    """Symbols whose tabulated value differs from the golden file by more than tol.

    Missing keys on either side count as mismatches with infinite deviation.
    """
    ours = (data or su2_4()).to_json()
    bad = []
    for key in sorted(set(ours) | set(golden)):
        if key not in ours or key not in golden:
            bad.append((key, math.inf))
            continue
        a, b = ours[key], golden[key]
        dev = abs(complex(a["re"], a["im"]) - complex(b["re"], b["im"]))
        if not dev <= tol:
            bad.append((key, dev))
    return bad
