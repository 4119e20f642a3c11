"""Protocol scripts: a small line-oriented DSL and its interpreter.

Grammar (one statement per line, ``;`` also separates statements, ``#``
starts a comment)::

    protocol <name>
    anyons: <charge> ... [total <charge>]
    option <flag> on|off
    plan: <charge>, ...              default outcomes for forced runs
    include <script>                 splice another script's steps
    steps:                           optional marker
    label <name>:
    inject <ancilla> at <pos>
    braid <i> <+|-> [<i> <+|-> ...]
    fmove <site>
    create <charge> at <pos>
    fuse <i> { <charge> -> <target>, ... }
    measure <lo>..<hi> { <charge> -> <target>, ..., * -> <target> }
    discard <lo>..<hi>
    goto <label>
    result <tag>
    end

Branch targets are labels, ``next`` (fall through) or ``end``. Any
non-branching statement may carry a trailing ``if <flag>`` or
``if not <flag>``. Ranges are inclusive.

Execution builds a graph whose nodes are (statement, state up to phase) at
measurements with more than one possible outcome. Runs of deterministic
statements are collapsed into edges, so repeated sampling, forced replay and
exhaustive enumeration share the same cached Hilbert-space work.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .category import CHARGES, admissible, fusion_outcomes
from .hilbert import (
    ANCILLAS,
    AnyonState,
    HilbertError,
    ImpossibleOutcome,
    MeasurementOutcome,
    apply_braid,
    charge_distribution,
    create_pair,
    discard_block,
    fuse_pair,
    inject_ancilla,
    measure_total_charge,
)

DEFAULT_BUDGET = 10_000
PROB_EPS = 1e-12
SHIPPED = ("ceg_winning", "recovery_fusion2", "recovery_twist4", "recovery_qutrit2",
           "recovery_main4", "recovery_main2", "process_p")
RESULT_TAGS = ("gate-produced", "inverse-gate", "intact-input", "retry")


class ProtocolError(ValueError):
    pass


class ParseError(ProtocolError):
    def __init__(self, message: str, line: int = 0, column: int = 0, source: str = "<script>"):
        self.line, self.column, self.source = line, column, source
        super().__init__(f"{source}:{line}:{column}: {message}")


class StepBudgetExceeded(ProtocolError):
    pass


# -- AST ------------------------------------------------------------------------

@dataclass(frozen=True)
class Step:
    kind: str
    args: tuple = ()
    branches: Mapping[object, str] = field(default_factory=dict)
    condition: tuple | None = None  # (flag, wanted value)
    line: int = 0
    source: str = "<script>"
    column: int = 1
    target_columns: Mapping[str, int] = field(default_factory=dict, compare=False)

    def where(self) -> str:
        return f"{self.source}:{self.line}"


@dataclass(frozen=True)
class ProtocolScript:
    name: str
    leaves: tuple
    total: int
    steps: tuple
    labels: Mapping[str, int]
    options: Mapping[str, bool] = field(default_factory=dict)
    plan: tuple | None = None

    def resolve_options(self, overrides: Mapping[str, bool] | None = None) -> dict:
        opts = dict(self.options)
        for key, val in (overrides or {}).items():
            if key not in opts:
                raise ProtocolError(f"script {self.name!r} has no option {key!r}; known: {sorted(opts)}")
            opts[key] = bool(val)
        return opts


# -- parsing ----------------------------------------------------------------------

_IDENT = r"[A-Za-z_][A-Za-z0-9_\-/]*"
_INT = r"-?\d+"


def _split_statements(text: str, src: str = "<script>"):
    """Yield (line, column, statement) with comments stripped."""
    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0]
        start = 0
        depth = 0
        opened = 0
        for i, ch in enumerate(body + ";"):
            if ch == "{":
                depth += 1
                opened = i
            elif ch == "}":
                depth -= 1
                if depth < 0:
                    raise ParseError("unmatched '}'", lineno, i + 1, src)
            elif ch == ";" and i == len(body) and depth:
                raise ParseError("unclosed '{'", lineno, opened + 1, src)
            elif ch == ";" and depth == 0:
                chunk = body[start:i]
                stripped = chunk.strip()
                if stripped:
                    yield lineno, start + len(chunk) - len(chunk.lstrip()) + 1, stripped
                start = i + 1


class _Parser:
    def __init__(self, search: Sequence[Path]):
        self.search = list(search)
        self.name = None
        self.leaves = None
        self.total = 0
        self.options: dict[str, bool] = {}
        self.plan = None
        self.steps: list[Step] = []
        self.labels: dict[str, int] = {}
        self.label_where: dict[str, tuple] = {}
        self.including: list[str] = []

    # errors carry the statement position
    def fail(self, msg, line, col, src):
        raise ParseError(msg, line, col, src)

    def charge(self, tok, line, col, src):
        if not re.fullmatch(_INT, tok):
            self.fail(f"expected a charge, got {tok!r}", line, col, src)
        c = int(tok)
        if c not in CHARGES:
            self.fail(f"charge {c} is not one of {list(CHARGES)}", line, col, src)
        return c

    def index(self, tok, line, col, src):
        if not re.fullmatch(r"\d+", tok):
            self.fail(f"expected a non-negative index, got {tok!r}", line, col, src)
        return int(tok)

    def parse_text(self, text: str, src: str):
        for line, col, stmt in _split_statements(text, src):
            self.statement(stmt, line, col, src)

    def statement(self, stmt, line, col, src):
        pos = (line, col, src)
        if stmt.startswith("steps:"):
            rest = stmt[len("steps:"):].strip()
            if rest:
                self.statement(rest, line, col + len(stmt) - len(rest), src)
            return
        if stmt.startswith("anyons:"):
            if self.including:
                return  # an included script's header is ignored
            toks = stmt[len("anyons:"):].split()
            total = 0
            if "total" in toks:
                k = toks.index("total")
                if k != len(toks) - 2:
                    self.fail("expected 'total <charge>' at the end of anyons:", *pos)
                total = self.charge(toks[-1], *pos)
                toks = toks[:k]
            if not toks:
                self.fail("anyons: needs at least one charge", *pos)
            self.leaves = tuple(self.charge(t, *pos) for t in toks)
            self.total = total
            return
        if stmt.startswith("plan:"):
            if self.including:
                return
            toks = [t for t in re.split(r"[\s,]+", stmt[len("plan:"):]) if t]
            self.plan = tuple(self.charge(t, *pos) for t in toks)
            return
        head, _, rest = stmt.partition(" ")
        rest = rest.strip()
        if head == "protocol":
            if not re.fullmatch(_IDENT, rest):
                self.fail(f"bad protocol name {rest!r}", *pos)
            if not self.including:
                self.name = rest
            return
        if head == "option":
            m = re.fullmatch(rf"({_IDENT})\s+(on|off)", rest)
            if not m:
                self.fail("expected 'option <flag> on|off'", *pos)
            self.options.setdefault(m.group(1), m.group(2) == "on")
            return
        if head == "include":
            self.include(rest, *pos)
            return
        if head == "label":
            m = re.fullmatch(rf"({_IDENT})\s*:", rest)
            if not m:
                self.fail("expected 'label <name>:'", *pos)
            name = m.group(1)
            if name in ("next", "end"):
                self.fail(f"{name!r} is reserved", *pos)
            if name in self.labels:
                self.fail(f"label {name!r} already defined at line {self.label_where[name][0]}", *pos)
            self.labels[name] = len(self.steps)
            self.label_where[name] = pos
            return
        self.steps.append(self.step(head, rest, *pos))

    def include(self, name, line, col, src):
        if not re.fullmatch(_IDENT, name):
            self.fail(f"bad include name {name!r}", line, col, src)
        if name in self.including:
            self.fail(f"recursive include of {name!r}", line, col, src)
        path = None
        for d in self.search:
            cand = Path(d) / f"{name}.proto"
            if cand.is_file():
                path = cand
                break
        if path is None:
            self.fail(f"cannot find included script {name!r}", line, col, src)
        self.including.append(name)
        self.parse_text(path.read_text(encoding="utf-8"), path.name)
        self.including.pop()

    def step(self, head, rest, line, col, src):
        pos = (line, col, src)
        cond = None
        m = re.fullmatch(rf"(.*?)\s+if\s+(not\s+)?({_IDENT})", rest) if "{" not in rest else None
        if m and head not in ("fuse", "measure"):
            rest, cond = m.group(1).strip(), (m.group(3), m.group(2) is None)
        if head in ("end",) and rest:
            m2 = re.fullmatch(rf"if\s+(not\s+)?({_IDENT})", rest)
            if not m2:
                self.fail("unexpected text after 'end'", *pos)
            rest, cond = "", (m2.group(2), m2.group(1) is None)

        def mk(kind, args=(), branches=None, target_columns=None):
            return Step(kind, tuple(args), dict(branches or {}), cond, line, src, col,
                        dict(target_columns or {}))

        if head == "inject":
            m = re.fullmatch(rf"({_IDENT})\s+at\s+(\S+)", rest)
            if not m:
                self.fail("expected 'inject <ancilla> at <pos>'", *pos)
            if m.group(1) not in ANCILLAS:
                self.fail(f"unknown ancilla {m.group(1)!r}; known: {sorted(ANCILLAS)}", *pos)
            return mk("inject", (m.group(1), self.index(m.group(2), *pos)))
        if head == "braid":
            toks = rest.split()
            if not toks or len(toks) % 2:
                self.fail("expected 'braid <i> <+|-> [...]'", *pos)
            word = []
            for i_tok, s_tok in zip(toks[::2], toks[1::2]):
                if s_tok not in ("+", "-"):
                    self.fail(f"braid sign must be + or -, got {s_tok!r}", *pos)
                word.append((self.index(i_tok, *pos), 1 if s_tok == "+" else -1))
            return mk("braid", (tuple(word),))
        if head == "fmove":
            return mk("fmove", (self.index(rest, *pos),))
        if head == "create":
            m = re.fullmatch(r"(\S+)\s+at\s+(\S+)", rest)
            if not m:
                self.fail("expected 'create <charge> at <pos>'", *pos)
            return mk("create", (self.charge(m.group(1), *pos), self.index(m.group(2), *pos)))
        if head in ("fuse", "measure"):
            m = re.fullmatch(r"([^{]*?)\s*\{(.*)\}", rest)
            if not m:
                self.fail(f"expected '{head} ... {{ <charge> -> <target>, ... }}'", *pos)
            where, body = m.group(1).strip(), m.group(2)
            if head == "fuse":
                args = (self.index(where, *pos),)
            else:
                r = re.fullmatch(r"(\d+)\s*\.\.\s*(\d+)", where)
                if not r:
                    self.fail(f"expected a range 'lo..hi', got {where!r}", *pos)
                lo, hi = int(r.group(1)), int(r.group(2))
                if lo > hi:
                    self.fail(f"empty range {lo}..{hi}", *pos)
                args = (lo, hi)
            branches, tcols = {}, {}
            bcol = col + len(head) + 1 + rest.index("{") + 1
            for part in body.split(","):
                if not part.strip():
                    continue
                b = re.fullmatch(rf"\s*(\*|{_INT})\s*->\s*({_IDENT})\s*", part)
                if not b:
                    self.fail(f"malformed branch {part.strip()!r}", line, bcol, src)
                key = "*" if b.group(1) == "*" else self.charge(b.group(1), line, bcol, src)
                if key in branches:
                    self.fail(f"outcome {key} handled twice", line, bcol, src)
                branches[key] = b.group(2)
                tcols.setdefault(b.group(2), bcol + b.start(2))
                bcol += len(part) + 1
            if not branches:
                self.fail("a measurement needs at least one branch", *pos)
            return mk(head, args, branches, tcols)
        if head == "discard":
            r = re.fullmatch(r"(\d+)\s*\.\.\s*(\d+)", rest)
            if not r or int(r.group(1)) >= int(r.group(2)):
                self.fail("expected 'discard lo..hi' with lo < hi", *pos)
            return mk("discard", (int(r.group(1)), int(r.group(2))))
        if head == "goto":
            if not re.fullmatch(_IDENT, rest):
                self.fail("expected 'goto <label>'", *pos)
            return mk("goto", (rest,), target_columns={rest: col + len(head) + 1})
        if head == "result":
            if not re.fullmatch(_IDENT, rest):
                self.fail("expected 'result <tag>'", *pos)
            return mk("result", (rest,))
        if head == "end":
            return mk("end")
        self.fail(f"unknown statement {head!r}", *pos)

    def finish(self) -> ProtocolScript:
        if self.leaves is None:
            raise ParseError("missing 'anyons:' header", 1, 1, "<script>")
        for st in self.steps:
            targets = list(st.branches.values())
            if st.kind == "goto":
                targets.append(st.args[0])
            for t in targets:
                if t not in ("next", "end") and t not in self.labels:
                    raise ParseError(f"unresolved label {t!r}", st.line,
                                     st.target_columns.get(t, st.column), st.source)
            if st.condition and st.condition[0] not in self.options:
                raise ParseError(f"unknown option {st.condition[0]!r}", st.line, st.column, st.source)
        script = ProtocolScript(self.name or "unnamed", self.leaves, self.total, tuple(self.steps),
                                dict(self.labels), dict(self.options), self.plan)
        _check_static(script)
        return script


def _range_charges(leaves: Sequence[int]) -> set:
    if not leaves:
        return {0}
    acc = {leaves[0]}
    for leaf in leaves[1:]:
        acc = {c for a in acc for c in fusion_outcomes(a, leaf)}
    return acc


def _check_static(script: ProtocolScript) -> None:
    """Track leaf charges along every control path; check ranges and branches."""
    n_steps = len(script.steps)
    seen: dict[int, set] = {}
    work = [(0, script.leaves)]
    while work:
        pc, leaves = work.pop()
        if pc >= n_steps:
            continue
        if leaves in seen.setdefault(pc, set()):
            continue
        if len(seen[pc]) > 64:
            continue  # leaf shapes should not diverge; stop exploring
        seen[pc].add(leaves)
        st = script.steps[pc]

        def err(msg):
            raise ParseError(msg, st.line, st.column, st.source)

        def jump(target):
            if target == "end":
                return None
            return pc + 1 if target == "next" else script.labels[target]

        succ = []
        n = len(leaves)
        if st.kind == "inject":
            name, p = st.args
            if p > n:
                err(f"inject position {p} beyond {n} anyons")
            succ.append((pc + 1, leaves[:p] + ANCILLAS[name]().leaves + leaves[p:]))
        elif st.kind == "create":
            c, p = st.args
            if p > n:
                err(f"create position {p} beyond {n} anyons")
            succ.append((pc + 1, leaves[:p] + (c, c) + leaves[p:]))
        elif st.kind == "braid":
            cur = list(leaves)
            for i, _ in st.args[0]:
                if i >= n - 1:
                    err(f"braid index {i} out of range for {n} anyons")
                cur[i], cur[i + 1] = cur[i + 1], cur[i]
            succ.append((pc + 1, tuple(cur)))
        elif st.kind == "fmove":
            if st.args[0] > n - 2:
                err(f"no recoupling site {st.args[0]} for {n} anyons")
            succ.append((pc + 1, leaves))
        elif st.kind == "discard":
            lo, hi = st.args
            if hi >= n:
                err(f"range {lo}..{hi} beyond {n} anyons")
            if 0 not in _range_charges(leaves[lo:hi + 1]):
                err(f"cluster {lo}..{hi} can never carry charge 0")
            succ.append((pc + 1, leaves[:lo] + leaves[hi + 1:]))
        elif st.kind in ("fuse", "measure"):
            if st.kind == "fuse":
                i = st.args[0]
                if i >= n - 1:
                    err(f"cannot fuse anyons {i}, {i + 1} of {n}")
                lo, hi = i, i + 1
            else:
                lo, hi = st.args
                if hi >= n:
                    err(f"range {lo}..{hi} beyond {n} anyons")
            # a range charge must combine with the rest to the declared total
            rest = _range_charges(leaves[:lo] + leaves[hi + 1:])
            possible = {c for c in _range_charges(leaves[lo:hi + 1])
                        if any(admissible(c, d, script.total) for d in rest)}
            missing = sorted(c for c in possible if c not in st.branches)
            if missing and "*" not in st.branches:
                err(f"outcome(s) {missing} of {st.kind} not handled")
            for c in sorted(possible):
                t = jump(st.branches.get(c, st.branches.get("*")))
                if t is None:
                    continue
                if st.kind == "fuse":
                    i = st.args[0]
                    new = leaves[:i] + ((c,) if c else ()) + leaves[i + 2:]
                else:
                    new = leaves
                succ.append((t, new))
        elif st.kind == "goto":
            succ.append((script.labels[st.args[0]], leaves))
            if st.condition:
                succ.append((pc + 1, leaves))
        elif st.kind in ("result", "end"):
            if st.condition:
                succ.append((pc + 1, leaves))
        if st.condition and st.kind not in ("goto", "result", "end"):
            succ.append((pc + 1, leaves))
        work.extend(s for s in succ if s[0] is not None)


def parse(text: str, *, name: str | None = None, search: Sequence[str | Path] = ()) -> ProtocolScript:
    """Parse script text; ``include`` looks in ``search`` then the shipped scripts."""
    parser = _Parser([*map(Path, search), _scripts_dir()])
    parser.parse_text(text, name or "<script>")
    return parser.finish()


def _scripts_dir() -> Path:
    return Path(str(resources.files("anyonweave") / "scripts"))


def load_script(name_or_path: str | Path) -> ProtocolScript:
    """Load a shipped script by name or any ``.proto`` file by path."""
    p = Path(name_or_path)
    if not p.is_file():
        p = _scripts_dir() / f"{name_or_path}.proto"
        if not p.is_file():
            raise ProtocolError(f"no script {name_or_path!r}; shipped: {', '.join(SHIPPED)}")
    p = p.resolve()
    key = (p, p.stat().st_mtime_ns)
    if key not in _LOADED:
        _LOADED[key] = parse(p.read_text(encoding="utf-8"), name=p.name, search=[p.parent])
    return _LOADED[key]


_LOADED: dict = {}


# -- traces ---------------------------------------------------------------------

@dataclass
class RunTrace:
    script: str
    outcomes: list
    final_state: AnyonState
    probability: float
    tag: str | None
    seed: int | None = None
    forced: tuple | None = None
    steps: int = 0
    end_line: int = 0

    def to_json_lines(self) -> str:
        lines = [json.dumps(o.to_json()) for o in self.outcomes]
        lines.append(json.dumps({
            "script": self.script, "seed": self.seed,
            "forced": list(self.forced) if self.forced is not None else None,
            "result": self.tag, "probability": self.probability, "steps": self.steps,
            "end_line": self.end_line, "state": self.final_state.to_json(),
        }))
        return "\n".join(lines)

    @classmethod
    def from_json_lines(cls, text: str) -> "RunTrace":
        rows = [json.loads(x) for x in text.splitlines() if x.strip()]
        *outs, last = rows
        outcomes = [MeasurementOutcome(o["observable"], o["range"][0], o["range"][1],
                                       o["outcome"], o["probability"]) for o in outs]
        forced = tuple(last["forced"]) if last["forced"] is not None else None
        return cls(last["script"], outcomes, AnyonState.from_json(last["state"]), last["probability"],
                   last["result"], last["seed"], forced, last["steps"], last["end_line"])


@dataclass
class Enumeration:
    """Loop-free passes through a script plus exact end-point probabilities.

    A pass stops at a ``result``/``end`` statement or, tagged ``retry``, when
    it comes back to a (statement, state) it already went through, so the
    pass probabilities sum to one. ``terminals`` maps (line, tag) of each
    ``result`` statement to its probability with loops taken into account.
    """
    traces: list
    terminals: dict

    @property
    def total(self) -> float:
        return sum(t.probability for t in self.traces)


# -- execution graph ------------------------------------------------------------

def _state_key(state: AnyonState):
    """Hashable form of a normalized state modulo global phase."""
    items = sorted(state.amps.items())
    mags = np.array([abs(a) for _, a in items])
    k = int(np.argmax(mags > mags.max() - 1e-9))
    ph = items[k][1] / abs(items[k][1])
    rounded = tuple((p, round((a / ph).real, 9) + 0.0, round((a / ph).imag, 9) + 0.0)
                    for p, a in items if abs(a) > 1e-12)
    return state.leaves, state.total, rounded


@dataclass
class _Edge:
    outcome: int
    probability: float
    records: tuple
    phase: complex
    steps: int
    target: int


@dataclass
class _Node:
    pc: int
    state: AnyonState
    terminal: bool = False
    tag: str | None = None
    end_line: int = 0
    edges: list | None = None  # branch nodes only, filled lazily


class _Graph:
    def __init__(self, script: ProtocolScript, options: Mapping[str, bool], budget: int):
        self.script, self.options, self.budget = script, options, budget
        self.nodes: list[_Node] = []
        self.index: dict = {}

    def node_for(self, pc, state, terminal=False, tag=None, end_line=0):
        key = (pc, terminal, tag, _state_key(state))
        if key in self.index:
            nid = self.index[key]
            rep = self.nodes[nid].state
            return nid, rep.inner(state)
        nid = len(self.nodes)
        self.nodes.append(_Node(pc, state, terminal, tag, end_line))
        self.index[key] = nid
        return nid, 1.0 + 0j

    def _active(self, st: Step) -> bool:
        return st.condition is None or self.options[st.condition[0]] == st.condition[1]

    def _target(self, pc, name):
        if name == "end":
            return None
        return pc + 1 if name == "next" else self.script.labels[name]

    def advance(self, pc, state, records=()):
        """Run deterministic statements; return (node id, phase, records, steps)."""
        steps = list(self.script.steps)
        records = list(records)
        count = 0
        while True:
            if count > self.budget:
                raise StepBudgetExceeded(f"more than {self.budget} deterministic steps from {steps[pc].where()}")
            if pc is None or pc >= len(steps):
                nid, ph = self.node_for(len(steps), state, True, None, 0)
                return nid, ph, tuple(records), count
            st = steps[pc]
            count += 1
            if not self._active(st):
                pc += 1
                continue
            try:
                if st.kind == "inject":
                    state = inject_ancilla(state, st.args[1], st.args[0])
                elif st.kind == "create":
                    state = create_pair(state, st.args[1], st.args[0])
                elif st.kind == "braid":
                    for i, sign in st.args[0]:
                        state = apply_braid(state, i, sign)
                elif st.kind == "discard":
                    state = discard_block(state, *st.args)
                elif st.kind == "fmove":
                    pass  # states are always held in the caterpillar basis
                elif st.kind == "goto":
                    pc = self.script.labels[st.args[0]]
                    continue
                elif st.kind in ("result", "end"):
                    tag = st.args[0] if st.kind == "result" else None
                    nid, ph = self.node_for(pc, state, True, tag, st.line)
                    return nid, ph, tuple(records), count
                else:
                    dist = self._distribution(st, state)
                    if len(dist) > 1:
                        nid, ph = self.node_for(pc, state)
                        return nid, ph, tuple(records), count
                    (c, _), = dist.items()
                    rec, state = self._project(st, state, c)
                    records.append(rec)
                    pc = self._target(pc, st.branches.get(c, st.branches.get("*")))
                    continue
            except ImpossibleOutcome:
                raise
            except HilbertError as exc:
                raise ProtocolError(f"{st.where()}: {exc}") from None
            pc += 1

    @staticmethod
    def _distribution(st, state):
        if st.kind == "fuse":
            i = st.args[0]
            return charge_distribution(state, i, i + 1)
        return charge_distribution(state, *st.args)

    @staticmethod
    def _project(st, state, c):
        if st.kind == "fuse":
            return fuse_pair(state, st.args[0], outcome=c)
        return measure_total_charge(state, *st.args, outcome=c)

    def edges(self, nid):
        node = self.nodes[nid]
        if node.edges is None:
            st = self.script.steps[node.pc]
            out = []
            for c, p in self._distribution(st, node.state).items():
                if p < PROB_EPS:
                    continue
                rec, post = self._project(st, node.state, c)
                nxt = self._target(node.pc, st.branches.get(c, st.branches.get("*")))
                target, ph, recs, count = self.advance(nxt, post, (rec,))
                out.append(_Edge(c, p, recs, ph, count + 1, target))
            node.edges = out
        return node.edges


_GRAPHS: dict = {}


def _graph(script, state, options, budget):
    key = (id(script), tuple(sorted(options.items())), budget, _state_key(state))
    entry = _GRAPHS.get(key)
    if entry is None or entry[0] is not script:
        g = _Graph(script, options, budget)
        start = g.advance(0, state)
        entry = (script, g, start)
        if len(_GRAPHS) > 256:
            _GRAPHS.clear()
        _GRAPHS[key] = entry
    return entry[1], entry[2]


def _check_input(script: ProtocolScript, state: AnyonState) -> AnyonState:
    if tuple(state.leaves) != script.leaves or state.total != script.total:
        raise ProtocolError(f"input leaves {state.leaves} total {state.total} do not match "
                            f"script {script.name!r}: {script.leaves} total {script.total}")
    nrm = state.norm()
    if nrm == 0:
        raise ProtocolError("zero input state")
    return state.normalized() if abs(nrm - 1) > 1e-12 else state


def _finish(graph, nid, phase, records, prob, steps, script, seed=None, forced=None):
    node = graph.nodes[nid]
    return RunTrace(script.name, list(records), node.state * phase, prob, node.tag,
                    seed, forced, steps, node.end_line)


def execute(script: ProtocolScript, state: AnyonState, mode: str = "sample", *, seed: int | None = None,
            outcomes: Sequence[int] | None = None, options: Mapping[str, bool] | None = None,
            budget: int = DEFAULT_BUDGET):
    """Run a script on ``state``.

    ``mode`` is ``"sample"`` (Born rule, numpy PCG64 seeded with ``seed``; one
    uniform draw per measurement with several possible outcomes, outcomes
    taken in ascending order), ``"forced"`` (``outcomes`` are consumed by
    those measurements only; defaults to the script's plan) or
    ``"enumerate"`` (every loop-free pass; returns an :class:`Enumeration`).
    """
    state = _check_input(script, state)
    opts = script.resolve_options(options)
    graph, (nid, phase, records, steps) = _graph(script, state, opts, budget)
    if mode == "enumerate":
        return _enumerate(graph, nid, phase, records, steps, script)
    if mode == "sample":
        if seed is None:
            raise ProtocolError("sample mode needs a seed")
        rng = np.random.Generator(np.random.PCG64(seed))

        def choose(edges, k):
            r = rng.random()
            acc = 0.0
            for e in edges:
                acc += e.probability
                if r < acc:
                    return e
            return edges[-1]
    elif mode == "forced":
        plan = tuple(outcomes) if outcomes is not None else script.plan
        if plan is None:
            raise ProtocolError(f"script {script.name!r} has no plan; pass forced outcomes")

        def choose(edges, k):
            node = graph.nodes[cur]
            st = script.steps[node.pc]
            if k >= len(plan):
                raise ProtocolError(f"forced outcomes exhausted at {st.where()} "
                                    f"(possible: {[e.outcome for e in edges]})")
            for e in edges:
                if e.outcome == plan[k]:
                    return e
            dist = {e.outcome: round(float(e.probability), 12) for e in edges}
            raise ImpossibleOutcome(f"impossible outcome {plan[k]} at {st.where()}; distribution {dist}")
    else:
        raise ProtocolError(f"unknown mode {mode!r}")

    records, prob, k = list(records), 1.0, 0
    cur = nid
    while not graph.nodes[cur].terminal:
        e = choose(graph.edges(cur), k)
        k += 1
        records.extend(e.records)
        prob *= e.probability
        phase *= e.phase
        steps += e.steps
        if steps > budget:
            raise StepBudgetExceeded(f"step budget {budget} exhausted")
        cur = e.target
    if mode == "forced" and k < len(plan):
        raise ProtocolError(f"{len(plan) - k} forced outcome(s) left unused: {list(plan[k:])}")
    return _finish(graph, cur, phase, records, prob, steps, script, seed,
                   plan if mode == "forced" else None)


def _enumerate(graph, nid, phase, records, steps, script, max_traces=1_000_000):
    traces = []
    stack = [(nid, phase, tuple(records), 1.0, steps, frozenset(), ())]
    while stack:
        cur, ph, recs, prob, count, seen, plan = stack.pop()
        node = graph.nodes[cur]
        if node.terminal or cur in seen:
            # ``forced`` holds the branching choices, so each pass replays in forced mode
            trace = _finish(graph, cur, ph, recs, prob, count, script, forced=plan)
            if not node.terminal:
                trace.tag, trace.end_line = "retry", script.steps[node.pc].line
            traces.append(trace)
            if len(traces) > max_traces:
                raise ProtocolError(f"more than {max_traces} passes; enumerate is not practical here")
            continue
        seen = seen | {cur}
        for e in reversed(graph.edges(cur)):
            stack.append((e.target, ph * e.phase, recs + e.records, prob * e.probability,
                          count + e.steps, seen, plan + (e.outcome,)))
    return Enumeration(traces, _absorb(graph, nid))


def _absorb(graph, nid) -> dict:
    order, pos = [], {}
    stack = [nid]
    while stack:
        cur = stack.pop()
        if cur in pos:
            continue
        pos[cur] = len(order)
        order.append(cur)
        if not graph.nodes[cur].terminal:
            stack.extend(e.target for e in graph.edges(cur))
    if graph.nodes[nid].terminal:
        node = graph.nodes[nid]
        return {(node.end_line, node.tag): 1.0}
    transient = [n for n in order if not graph.nodes[n].terminal]
    terminal = [n for n in order if graph.nodes[n].terminal]
    ti = {n: i for i, n in enumerate(transient)}
    ki = {n: i for i, n in enumerate(terminal)}
    q = np.zeros((len(transient), len(transient)))
    r = np.zeros((len(transient), len(terminal)))
    for n in transient:
        for e in graph.edges(n):
            if e.target in ti:
                q[ti[n], ti[e.target]] += e.probability
            else:
                r[ti[n], ki[e.target]] += e.probability
    absorb = np.linalg.solve(np.eye(len(transient)) - q, r)[ti[nid]]
    out: dict = {}
    for n, p in zip(terminal, absorb):
        node = graph.nodes[n]
        key = (node.end_line, node.tag)
        out[key] = out.get(key, 0.0) + float(p)
    return out


def terminal_distribution(script: ProtocolScript, state: AnyonState,
                          options: Mapping[str, bool] | None = None, budget: int = DEFAULT_BUDGET) -> dict:
    """Exact probability of ending at each (result line, tag), loops included.

    Solves the absorbing Markov chain on the execution graph.
    """
    state = _check_input(script, state)
    graph, (nid, *_) = _graph(script, state, script.resolve_options(options), budget)
    return _absorb(graph, nid)


def tag_probabilities(script, state, options=None) -> dict:
    out: dict = {}
    for (_, tag), p in terminal_distribution(script, state, options).items():
        out[tag] = out.get(tag, 0.0) + p
    return out


def expected_attempts(script: ProtocolScript, state: AnyonState, tag: str,
                      options: Mapping[str, bool] | None = None) -> float:
    """Expected number of passes until one ends with ``tag``.

    Every other pass, ``retry`` included, counts as a failed attempt that
    is started again.
    """
    en = execute(script, state, "enumerate", options=options)
    p = sum(t.probability for t in en.traces if t.tag == tag)
    if p < PROB_EPS:
        raise ProtocolError(f"result {tag!r} is unreachable from this input")
    return 1.0 / p


def sample_counts(script: ProtocolScript, state: AnyonState, runs: int, seed: int = 0,
                  options: Mapping[str, bool] | None = None) -> dict:
    """Counts of (result line, tag) over ``runs`` runs seeded seed, seed+1, ..."""
    counts: dict = {}
    for k in range(runs):
        t = execute(script, state, "sample", seed=seed + k, options=options)
        key = (t.end_line, t.tag)
        counts[key] = counts.get(key, 0) + 1
    return counts


# -- Process (P) ----------------------------------------------------------------

def qutrit_state(c0: complex = 0, c2: complex = 0, c4: complex = 0) -> AnyonState:
    """c0|0> + c2|2> + c4|4> on 2 2 2 2, normalized."""
    amps = {(q, 2): a for q, a in ((0, c0), (2, c2), (4, c4)) if a}
    return AnyonState.from_labels((2, 2, 2, 2), 0, amps).normalized()


def run_process_p(state: AnyonState, mode: str = "sample", **kwargs):
    """Project a 2 2 2 2 qutrit onto |2> or onto its 0/4 part.

    Result tags are ``projected-to-2`` and ``projected-to-0/4``.
    """
    return execute(load_script("process_p"), state, mode, **kwargs)


def qutrit_amplitudes(state: AnyonState) -> np.ndarray:
    """(a0, a2, a4) of a 2 2 2 2 qutrit state."""
    if state.leaves != (2, 2, 2, 2):
        raise ProtocolError(f"not a qutrit: leaves {state.leaves}")
    return np.array([state.amplitude((q, 2)) for q in (0, 2, 4)])
