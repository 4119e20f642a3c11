"""Multi-anyon states in the caterpillar fusion-tree basis.

A basis vector for leaves ``l_0 .. l_{n-1}`` is the path ``x_0 .. x_{n-1}``
where ``x_k`` is the total charge of leaves ``0..k``; ``x_0 = l_0`` and
``x_{n-1}`` is the total charge. :class:`FusionTreeLabel` stores the interior
of that path.

Operations that need a different bracketing (braids, measurements of a
contiguous range, fusions, insertions) temporarily move to a *group basis* in
which the leaves ``lo..hi`` are fused among themselves first; see
:func:`_to_group` for the slot layout.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Mapping, Sequence

import numpy as np

from .category import admissible, f_symbol, fusion_outcomes, r_symbol, twist_phase

Path = tuple  # full fusion path x_0 .. x_{n-1}

_PRUNE = 1e-15


class HilbertError(ValueError):
    pass


class ImpossibleOutcome(HilbertError):
    """A forced measurement outcome has (numerically) zero probability."""


@dataclass(frozen=True, order=True)
class FusionTreeLabel:
    leaves: tuple
    internal: tuple
    total: int

    @property
    def path(self) -> Path:
        return _label_to_path(self.leaves, self.internal, self.total)


def _label_to_path(leaves, internal, total) -> Path:
    n = len(leaves)
    if n == 0:
        return ()
    if n == 1:
        return (leaves[0],)
    return (leaves[0],) + tuple(internal) + (total,)


def _path_to_label(leaves, path, total) -> FusionTreeLabel:
    return FusionTreeLabel(tuple(leaves), tuple(path[1:-1]) if len(path) > 2 else (), total)


@lru_cache(maxsize=None)
def _paths(leaves: tuple, total: int) -> tuple:
    if not leaves:
        return ((),) if total == 0 else ()
    partial = [(leaves[0],)]
    for leaf in leaves[1:]:
        partial = [p + (x,) for p in partial for x in fusion_outcomes(p[-1], leaf)]
    return tuple(p for p in partial if p[-1] == total)


@lru_cache(maxsize=None)
def _index(leaves: tuple, total: int) -> dict:
    return {p: i for i, p in enumerate(_paths(leaves, total))}


def enumerate_basis(leaves: Sequence[int], total: int) -> list[FusionTreeLabel]:
    """All admissible caterpillar labelings, in lexicographic path order."""
    leaves = tuple(leaves)
    return [_path_to_label(leaves, p, total) for p in _paths(leaves, total)]


def basis_dimension(leaves: Sequence[int], total: int) -> int:
    return len(_paths(tuple(leaves), total))


@dataclass(frozen=True)
class MeasurementOutcome:
    observable: str  # "total" (interferometry) or "fuse"
    lo: int
    hi: int
    outcome: int
    probability: float

    def to_json(self) -> dict:
        return {"observable": self.observable, "range": [self.lo, self.hi],
                "outcome": self.outcome, "probability": self.probability}


@dataclass(frozen=True)
class AnyonState:
    """Superposition of caterpillar trees sharing leaves and total charge.

    ``amps`` maps full paths to amplitudes. States are values: every
    operation returns a new instance.
    """

    leaves: tuple
    total: int
    amps: Mapping[Path, complex] = field(compare=False)

    # -- construction ---------------------------------------------------------
    @classmethod
    def basis(cls, leaves: Sequence[int], internal: Sequence[int] = (), total: int = 0) -> "AnyonState":
        leaves = tuple(leaves)
        path = _label_to_path(leaves, tuple(internal), total)
        if path not in _index(leaves, total):
            raise HilbertError(f"inadmissible labeling {internal} for leaves {leaves} total {total}")
        return cls(leaves, total, {path: 1.0 + 0j})

    @classmethod
    def from_labels(cls, leaves: Sequence[int], total: int,
                    amplitudes: Mapping[Sequence[int], complex]) -> "AnyonState":
        """Build from {internal labels: amplitude}; not normalized."""
        leaves = tuple(leaves)
        amps = {}
        for internal, a in amplitudes.items():
            path = _label_to_path(leaves, tuple(internal), total)
            if path not in _index(leaves, total):
                raise HilbertError(f"inadmissible labeling {internal} for leaves {leaves}")
            amps[path] = amps.get(path, 0) + complex(a)
        return cls(leaves, total, amps)

    @classmethod
    def from_vector(cls, leaves: Sequence[int], total: int, vec) -> "AnyonState":
        leaves = tuple(leaves)
        paths = _paths(leaves, total)
        vec = np.asarray(vec, dtype=complex)
        if vec.shape != (len(paths),):
            raise HilbertError(f"vector of length {vec.shape} for a {len(paths)}-dim space")
        return cls(leaves, total, {p: complex(v) for p, v in zip(paths, vec) if v != 0})

    # -- inspection -----------------------------------------------------------
    @property
    def n(self) -> int:
        return len(self.leaves)

    def vector(self) -> np.ndarray:
        idx = _index(self.leaves, self.total)
        out = np.zeros(len(idx), dtype=complex)
        for p, a in self.amps.items():
            out[idx[p]] += a
        return out

    def labels(self) -> dict[FusionTreeLabel, complex]:
        return {_path_to_label(self.leaves, p, self.total): a for p, a in sorted(self.amps.items())}

    def amplitude(self, internal: Sequence[int]) -> complex:
        return complex(self.amps.get(_label_to_path(self.leaves, tuple(internal), self.total), 0.0))

    def norm(self) -> float:
        return float(np.sqrt(sum(abs(a) ** 2 for a in self.amps.values())))

    def normalized(self) -> "AnyonState":
        nrm = self.norm()
        if nrm == 0:
            raise HilbertError("cannot normalize the zero vector")
        return AnyonState(self.leaves, self.total, {p: a / nrm for p, a in self.amps.items()})

    def inner(self, other: "AnyonState") -> complex:
        """<self|other>; zero when the leaf configurations differ."""
        if self.leaves != other.leaves or self.total != other.total:
            return 0j
        return complex(sum(np.conj(a) * other.amps.get(p, 0) for p, a in self.amps.items()))

    def __add__(self, other: "AnyonState") -> "AnyonState":
        if self.leaves != other.leaves or self.total != other.total:
            raise HilbertError("cannot add states on different leaf configurations")
        amps = dict(self.amps)
        for p, a in other.amps.items():
            amps[p] = amps.get(p, 0) + a
        return AnyonState(self.leaves, self.total, amps)

    def __mul__(self, scalar: complex) -> "AnyonState":
        return AnyonState(self.leaves, self.total, {p: a * scalar for p, a in self.amps.items()})

    __rmul__ = __mul__

    # -- serialization --------------------------------------------------------
    def to_json(self) -> dict:
        return {
            "leaves": list(self.leaves),
            "total": self.total,
            "amplitudes": [
                {"internal": list(p[1:-1]) if len(p) > 2 else [], "re": a.real, "im": a.imag}
                for p, a in sorted(self.amps.items())
            ],
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "AnyonState":
        return cls.from_labels(data["leaves"], data["total"],
                               {tuple(e["internal"]): complex(e["re"], e["im"])
                                for e in data["amplitudes"]})

    def dumps(self) -> str:
        return json.dumps(self.to_json())


# -- group-basis transforms -----------------------------------------------------
#
# For a range lo..hi with lo >= 1 the group basis after absorbing leaf k holds
#   slot j < lo        : x_j (unchanged prefix; slot lo-1 is the prefix charge)
#   slot lo <= j < k   : g_{j+1}, total charge of leaves lo..j+1
#   slot j >= k        : x_j
# so at k = hi the group charge sits in slot hi-1 and slot hi is x_hi.

def _accumulate(out: dict, key, val):
    out[key] = out.get(key, 0) + val


def _group_step(amps, leaves, lo, k):
    out = {}
    leaf = leaves[k + 1]
    for q, amp in amps.items():
        prefix = q[lo - 1]
        g_k = q[k - 1] if k > lo else leaves[lo]
        x_k, x_next = q[k], q[k + 1]
        for g in fusion_outcomes(g_k, leaf):
            if not admissible(prefix, g, x_next):
                continue
            coeff = f_symbol(prefix, g_k, leaf, x_next, x_k, g)
            if coeff:
                _accumulate(out, q[:k] + (g,) + q[k + 1:], amp * coeff)
    return out


def _group_unstep(amps, leaves, lo, k):
    out = {}
    leaf = leaves[k + 1]
    for q, amp in amps.items():
        prefix = q[lo - 1]
        g_k = q[k - 1] if k > lo else leaves[lo]
        g, x_next = q[k], q[k + 1]
        for x_k in fusion_outcomes(prefix, g_k):
            if not admissible(x_k, leaf, x_next):
                continue
            coeff = f_symbol(prefix, g_k, leaf, x_next, x_k, g)
            if coeff:
                _accumulate(out, q[:k] + (x_k,) + q[k + 1:], amp * np.conj(coeff))
    return out


def _to_group(amps, leaves, lo, hi):
    if lo == 0:
        return dict(amps)
    for k in range(lo, hi):
        amps = _group_step(amps, leaves, lo, k)
    return amps


def _from_group(amps, leaves, lo, hi):
    if lo == 0:
        return dict(amps)
    for k in reversed(range(lo, hi)):
        amps = _group_unstep(amps, leaves, lo, k)
    return amps


def _group_slot(lo, hi):
    return hi if lo == 0 else hi - 1


def _prune(amps):
    return {p: a for p, a in amps.items() if abs(a) > _PRUNE}


def _check_range(state: AnyonState, lo: int, hi: int):
    if not (0 <= lo <= hi < state.n):
        raise HilbertError(f"range {lo}..{hi} outside leaves 0..{state.n - 1}")


# -- operations -------------------------------------------------------------------

def apply_f_move(state: AnyonState, site: int, inverse: bool = False) -> AnyonState:
    """Recouple leaves ``site, site+1`` into a pair.

    The returned state lives in the pair basis: its internal label at
    ``site - 1`` is the channel of the pair rather than ``x_site``. Apply with
    ``inverse=True`` to return to the caterpillar basis. Site 0 is the
    identity, the pair there is already the first internal edge.
    """
    if not (0 <= site <= state.n - 2):
        raise HilbertError(f"no recoupling site {site} for {state.n} leaves")
    if site == 0:
        return state
    move = _from_group if inverse else _to_group
    return AnyonState(state.leaves, state.total, move(state.amps, state.leaves, site, site + 1))


def apply_braid(state: AnyonState, i: int, sign: int = 1) -> AnyonState:
    """Exchange leaves i and i+1; sign +1 is the positive generator sigma_i."""
    if not (0 <= i < state.n - 1):
        raise HilbertError(f"braid index {i} out of range for {state.n} leaves")
    if sign not in (1, -1):
        raise HilbertError("braid sign must be +1 or -1")
    leaves = state.leaves
    a, b = leaves[i], leaves[i + 1]
    swapped = leaves[:i] + (b, a) + leaves[i + 2:]

    def phase(c):
        r = r_symbol(a, b, c)
        return r if sign > 0 else np.conj(r)

    if i == 0:
        amps = {(b,) + p[1:]: amp * phase(p[1]) for p, amp in state.amps.items()}
        return AnyonState(swapped, state.total, amps)
    grouped = _to_group(state.amps, leaves, i, i + 1)
    grouped = {q: amp * phase(q[i]) for q, amp in grouped.items()}
    return AnyonState(swapped, state.total, _prune(_from_group(grouped, swapped, i, i + 1)))


def apply_braid_word(state: AnyonState, word: Iterable[tuple[int, int]]) -> AnyonState:
    for i, sign in word:
        state = apply_braid(state, i, sign)
    return state


def apply_twist(state: AnyonState, lo: int, hi: int, sign: int = 1) -> AnyonState:
    """Dehn twist around leaves lo..hi: phase theta_c on their total charge c."""
    _check_range(state, lo, hi)
    if lo == hi:
        t = twist_phase(state.leaves[lo])
        return state * (t if sign > 0 else np.conj(t))
    grouped = _to_group(state.amps, state.leaves, lo, hi)
    slot = _group_slot(lo, hi)
    out = {}
    for q, amp in grouped.items():
        t = twist_phase(q[slot])
        out[q] = amp * (t if sign > 0 else np.conj(t))
    return AnyonState(state.leaves, state.total, _prune(_from_group(out, state.leaves, lo, hi)))


def charge_distribution(state: AnyonState, lo: int, hi: int) -> dict[int, float]:
    """Born probabilities of the total charge of leaves lo..hi (state normalized)."""
    _check_range(state, lo, hi)
    if lo == hi:
        return {state.leaves[lo]: 1.0}
    grouped = _to_group(state.amps, state.leaves, lo, hi)
    slot = _group_slot(lo, hi)
    weights: dict[int, float] = {}
    for q, amp in grouped.items():
        weights[q[slot]] = weights.get(q[slot], 0.0) + abs(amp) ** 2
    total = sum(weights.values())
    return {c: w / total for c, w in sorted(weights.items()) if w / total > 1e-14}


def _choose(dist: Mapping[int, float], outcome, rng) -> int:
    if outcome is not None:
        if dist.get(outcome, 0.0) < 1e-12:
            raise ImpossibleOutcome(f"impossible outcome {outcome}; distribution {dict(dist)}")
        return outcome
    if rng is None:
        raise HilbertError("need either a forced outcome or an rng")
    charges = sorted(dist)
    r = rng.random()
    acc = 0.0
    for c in charges:
        acc += dist[c]
        if r < acc:
            return c
    return charges[-1]


def _project_grouped(state, lo, hi, outcome, rng):
    dist = charge_distribution(state, lo, hi)
    c = _choose(dist, outcome, rng)
    if lo == hi:
        return c, dist[c], dict(state.amps)
    grouped = _to_group(state.amps, state.leaves, lo, hi)
    slot = _group_slot(lo, hi)
    kept = {q: a for q, a in grouped.items() if q[slot] == c}
    nrm = np.sqrt(sum(abs(a) ** 2 for a in kept.values()))
    return c, dist[c], {q: a / nrm for q, a in kept.items()}


def measure_total_charge(state: AnyonState, lo: int, hi: int, *, outcome: int | None = None,
                         rng: np.random.Generator | None = None) -> tuple[MeasurementOutcome, AnyonState]:
    """Projective measurement of the total charge of leaves lo..hi (inclusive).

    Pass ``outcome`` to force a result (``ImpossibleOutcome`` if it has
    probability below 1e-12) or ``rng`` to sample from the Born rule.
    """
    _check_range(state, lo, hi)
    c, prob, grouped = _project_grouped(state, lo, hi, outcome, rng)
    amps = grouped if lo == hi else _prune(_from_group(grouped, state.leaves, lo, hi))
    return (MeasurementOutcome("total", lo, hi, c, prob), AnyonState(state.leaves, state.total, amps))


def fuse_pair(state: AnyonState, i: int, *, outcome: int | None = None,
              rng: np.random.Generator | None = None) -> tuple[MeasurementOutcome, AnyonState]:
    """Fuse leaves i and i+1 into a single leaf carrying the measured channel.

    A vacuum outcome removes both leaves.
    """
    if not (0 <= i < state.n - 1):
        raise HilbertError(f"cannot fuse leaves {i}, {i + 1} of {state.n}")
    c, prob, grouped = _project_grouped(state, i, i + 1, outcome, rng)
    leaves = state.leaves
    if c == 0:
        new_leaves = leaves[:i] + leaves[i + 2:]
    else:
        new_leaves = leaves[:i] + (c,) + leaves[i + 2:]
    amps = {}
    for q, a in grouped.items():
        if i == 0:
            path = q[2:] if c == 0 else (c,) + q[2:]
        else:
            path = q[:i] + q[i + 2:] if c == 0 else q[:i] + q[i + 1:]
        amps[path] = amps.get(path, 0) + a
    return (MeasurementOutcome("fuse", i, i + 1, c, prob), AnyonState(new_leaves, state.total, amps))


def insert_block(state: AnyonState, position: int, block: AnyonState) -> AnyonState:
    """Place a total-charge-0 cluster before leaf ``position``."""
    if block.total != 0:
        raise HilbertError("only vacuum-charged clusters can be inserted")
    if not (0 <= position <= state.n):
        raise HilbertError(f"insert position {position} outside 0..{state.n}")
    m = block.n
    leaves = state.leaves[:position] + block.leaves + state.leaves[position:]
    amps = {}
    for p, a in state.amps.items():
        for y, b in block.amps.items():
            if position == 0:
                q = y + p
            else:
                q = p[:position] + y[1:] + (p[position - 1],) + p[position:]
            amps[q] = amps.get(q, 0) + a * b
    if position > 0 and m >= 2:
        amps = _prune(_from_group(amps, leaves, position, position + m - 1))
    return AnyonState(leaves, state.total, amps)


def create_pair(state: AnyonState, position: int, charge: int) -> AnyonState:
    """Bring a pair of ``charge`` anyons out of the vacuum before leaf ``position``."""
    return insert_block(state, position, AnyonState.basis((charge, charge), (), 0))


def qubit_ancilla() -> AnyonState:
    """(|1> + |3>)/sqrt(2) on the four anyons 1 2 2 1."""
    s = 1 / np.sqrt(2)
    return AnyonState.from_labels((1, 2, 2, 1), 0, {(1, 1): s, (3, 1): s})


def qutrit_ancilla() -> AnyonState:
    """(|0> + |4>)/sqrt(2) on the four anyons 2 2 2 2."""
    s = 1 / np.sqrt(2)
    return AnyonState.from_labels((2, 2, 2, 2), 0, {(0, 2): s, (4, 2): s})


ANCILLAS = {"qubit": qubit_ancilla, "qutrit": qutrit_ancilla}


def inject_ancilla(state: AnyonState, position: int, name: str) -> AnyonState:
    try:
        block = ANCILLAS[name]()
    except KeyError:
        raise HilbertError(f"unknown ancilla {name!r}; known: {sorted(ANCILLAS)}") from None
    return insert_block(state, position, block)


def entanglement_defect(state: AnyonState, lo: int, hi: int) -> float:
    """1 - (largest Schmidt weight) between leaves lo..hi and the rest.

    Only meaningful when the range has definite total charge 0; zero means
    the cluster factors out of the state.
    """
    block, _, _ = _schmidt(state, lo, hi)
    return block


def _schmidt(state, lo, hi):
    grouped = _to_group(state.amps, state.leaves, lo, hi)
    rows, cols, entries = {}, {}, []
    for q, a in grouped.items():
        r, c = q[:lo] + q[hi:], q[lo:hi]
        entries.append((rows.setdefault(r, len(rows)), cols.setdefault(c, len(cols)), a))
    mat = np.zeros((len(rows), len(cols)), dtype=complex)
    for i, j, a in entries:
        mat[i, j] += a
    u, s, vh = np.linalg.svd(mat, full_matrices=False)
    weights = s ** 2
    defect = float(1 - weights[0] / weights.sum())
    # fix the cluster's phase so that its largest amplitude is real positive
    v = vh[0]
    k = int(np.argmax(np.abs(v) > np.abs(v).max() - 1e-12))
    reduced = mat @ (np.conj(v) * (v[k] / abs(v[k])))
    return defect, list(rows), reduced


def discard_block(state: AnyonState, lo: int, hi: int, tol: float = 1e-9) -> AnyonState:
    """Remove leaves lo..hi, which must carry charge 0 and be unentangled."""
    _check_range(state, lo, hi)
    if lo == hi:
        raise HilbertError("a single anyon of nonzero charge cannot be discarded")
    dist = charge_distribution(state, lo, hi)
    if dist.get(0, 0.0) < 1 - tol:
        raise HilbertError(f"cluster {lo}..{hi} does not carry charge 0: {dist}")
    defect, rows, reduced = _schmidt(state, lo, hi)
    if defect > tol:
        raise HilbertError(f"cluster {lo}..{hi} is entangled with the rest (defect {defect:.3g})")
    leaves = state.leaves[:lo] + state.leaves[hi + 1:]
    # rows hold x_0..x_{lo-1} then x_hi..; x_hi repeats x_{lo-1} (or is 0 at lo=0)
    amps = {r[:lo] + r[lo + 1:]: complex(a) for r, a in zip(rows, reduced) if abs(a) > _PRUNE}
    return AnyonState(leaves, state.total, amps)


def operator_matrix(op, leaves: Sequence[int], total: int, out_leaves: Sequence[int] | None = None) -> np.ndarray:
    """Dense matrix of a linear state map on the caterpillar basis."""
    leaves = tuple(leaves)
    out_leaves = tuple(out_leaves) if out_leaves is not None else leaves
    basis = _paths(leaves, total)
    idx = _index(out_leaves, total)
    mat = np.zeros((len(idx), len(basis)), dtype=complex)
    for j, p in enumerate(basis):
        res = op(AnyonState(leaves, total, {p: 1.0 + 0j}))
        if res.leaves != out_leaves:
            raise HilbertError(f"operator changed leaves to {res.leaves}")
        for q, a in res.amps.items():
            mat[idx[q], j] += a
    return mat
