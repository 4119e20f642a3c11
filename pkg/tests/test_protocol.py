import math

import numpy as np
import pytest

from anyonweave.gates import equal_up_to_phase, register_state, register_vector
from anyonweave.hilbert import (
    ImpossibleOutcome, apply_braid_word, charge_distribution, create_pair, fuse_pair, measure_total_charge,
)
from anyonweave.protocol import (
    SHIPPED,
    ParseError,
    ProtocolError,
    RunTrace,
    StepBudgetExceeded,
    execute,
    expected_attempts,
    load_script,
    parse,
    qutrit_amplitudes,
    qutrit_state,
    run_process_p,
    sample_counts,
    tag_probabilities,
    terminal_distribution,
)

R3 = math.sqrt(3)


# -- parsing -----------------------------------------------------------------------------

def test_minimal_script():
    s = parse("anyons: 1 1; steps: fuse 0 {0->end}")
    assert s.leaves == (1, 1) and s.total == 0
    assert len(s.steps) == 1 and s.steps[0].kind == "fuse"
    assert s.steps[0].branches == {0: "end"}


@pytest.mark.parametrize("name", SHIPPED)
def test_shipped_scripts_parse(name):
    s = load_script(name)
    assert s.steps and s.leaves


def test_winning_script_shape():
    s = load_script("ceg_winning")
    kinds = [st.kind for st in s.steps]
    assert kinds.count("measure") >= 2
    # a full twist is the same generator twice in a row
    assert any(st.kind == "braid" and len(st.args[0]) == 2 and st.args[0][0] == st.args[0][1]
               for st in s.steps)
    # a separation loop jumps backwards
    assert any(st.kind == "goto" and s.labels[st.args[0]] < i for i, st in enumerate(s.steps))


@pytest.mark.parametrize("text, line, column, fragment", [
    ("anyons: 2 2\nfuse 0 {0 -> nowhere, * -> end}", 2, 14, "unresolved label 'nowhere'"),
    ("anyons: 2 2 2 2\n  measure 1..2 {0 -> end}", 2, 3, "not handled"),
    ("anyons: 1 5", 1, 1, "charge 5"),
    ("anyons: 1 1\nfrobnicate 3", 2, 1, "unknown statement"),
    ("anyons: 1 1\n braid 3 +", 2, 2, "out of range"),
    ("anyons: 1 1\nfuse 0 {0 -> end", 2, 8, "unclosed"),
    ("anyons: 1 1\nfuse 0 {0 => end}", 2, 9, "malformed branch"),
    ("anyons: 1 1\ngoto x", 2, 6, "unresolved label 'x'"),
    ("fuse 0 {0 -> end}", 1, 1, "missing 'anyons:'"),
])
def test_parse_errors_carry_position(text, line, column, fragment):
    with pytest.raises(ParseError) as info:
        parse(text)
    assert (info.value.line, info.value.column) == (line, column)
    assert fragment in str(info.value)


def test_include_option_and_condition(tmp_path):
    (tmp_path / "body.proto").write_text("option swap off\nbraid 0 + 0 + if swap\nresult intact-input\n")
    text = "anyons: 1 2 2 1\noption swap on\ninclude body\n"
    s = parse(text, search=[tmp_path])
    state = register_state({"11": 1}).__class__.basis((1, 2, 2, 1), (1, 1), 0)
    on = execute(s, state, "forced", outcomes=[])
    off = execute(s, state, "forced", outcomes=[], options={"swap": False})
    assert not np.allclose(on.final_state.vector(), off.final_state.vector())
    with pytest.raises(ProtocolError):
        s.resolve_options({"nosuch": True})


def test_unknown_script():
    with pytest.raises(ProtocolError):
        load_script("no_such_script")


# -- execution modes --------------------------------------------------------------------------

def test_forced_winning_column():
    s = load_script("ceg_winning")
    t = execute(s, register_state({"11": 1}), "forced", options={"final_twist": False})
    assert t.tag == "gate-produced"
    vec = register_vector(t.final_state)
    assert equal_up_to_phase(vec, np.array([-0.5, 0, 0, -0.5j * R3]), 1e-9)


def test_forced_impossible_outcome():
    s = load_script("ceg_winning")
    with pytest.raises(ImpossibleOutcome):
        execute(s, register_state({"11": 1}), "forced", outcomes=[4, 0, 0, 0, 0, 0, 0])


def test_forced_plan_length_is_checked():
    s = load_script("ceg_winning")
    with pytest.raises(ProtocolError):
        execute(s, register_state({"11": 1}), "forced", outcomes=[0, 0])
    with pytest.raises(ProtocolError):
        execute(s, register_state({"11": 1}), "forced", outcomes=list(s.plan) + [0])


def test_input_must_match_declared_anyons():
    with pytest.raises(ProtocolError):
        execute(load_script("ceg_winning"), qutrit_state(1, 0, 0), "sample", seed=0)


def test_sampling_is_reproducible():
    s = load_script("ceg_winning")
    state = register_state({"13": 1, "31": 1j})
    a = execute(s, state, "sample", seed=42)
    b = execute(s, state, "sample", seed=42)
    assert a.outcomes == b.outcomes and a.tag == b.tag
    assert np.allclose(a.final_state.vector(), b.final_state.vector())
    assert a.seed == 42


def test_sampling_needs_seed():
    with pytest.raises(ProtocolError):
        execute(load_script("ceg_winning"), register_state({"11": 1}), "sample")


def test_trace_json_round_trip():
    t = execute(load_script("ceg_winning"), register_state({"11": 1}), "sample", seed=3)
    back = RunTrace.from_json_lines(t.to_json_lines())
    assert back.outcomes == t.outcomes
    assert (back.tag, back.seed, back.probability, back.steps) == (t.tag, t.seed, t.probability, t.steps)
    assert np.allclose(back.final_state.vector(), t.final_state.vector())


def test_path_probability_is_product_of_steps():
    t = execute(load_script("recovery_main2"), register_state({"33": 1}), "sample", seed=5)
    assert t.probability == pytest.approx(np.prod([o.probability for o in t.outcomes]), rel=1e-10)


def test_step_budget():
    s = parse("anyons: 1 1\nlabel spin:\nbraid 0 +\ngoto spin")
    with pytest.raises(StepBudgetExceeded):
        execute(s, register_state({"11": 1}).__class__.basis((1, 1), (), 0), "sample", seed=0, budget=50)


# -- enumeration ------------------------------------------------------------------------------

@pytest.mark.parametrize("name", ["ceg_winning", "recovery_main4"])
def test_enumeration_sums_to_one(name):
    s = load_script(name)
    en = execute(s, register_state({"31": 1}), "enumerate")
    assert en.total == pytest.approx(1.0, abs=1e-9)
    assert sum(en.terminals.values()) == pytest.approx(1.0, abs=1e-9)
    for t in en.traces:
        assert t.probability == pytest.approx(np.prod([o.probability for o in t.outcomes]), rel=1e-10)


def test_two_twos_fusion_sub_branches():
    s = load_script("recovery_fusion2")
    en = execute(s, register_state({"11": 1}), "enumerate")
    seqs = set()
    for t in en.traces:
        fus = [o for o in t.outcomes if o.observable == "fuse" and o.lo == 1]
        if fus:
            first = fus[0].outcome
            seqs.add((first,) if first == 0 else (first, fus[1].outcome))
    # a 2 or 4 forces one more fusion, which can only give 2
    assert seqs == {(0,), (2, 2), (4, 2)}


def test_terminal_distribution_matches_samples():
    s = load_script("ceg_winning")
    state = register_state({"11": 1})
    exact = terminal_distribution(s, state)
    counts = sample_counts(s, state, 2000, seed=11)
    for key, p in exact.items():
        sd = math.sqrt(2000 * p * (1 - p))
        assert abs(counts.get(key, 0) - 2000 * p) <= 4 * sd


def test_tag_probabilities():
    probs = tag_probabilities(load_script("ceg_winning"), register_state({"11": 1}))
    assert probs["gate-produced"] == pytest.approx(0.125, abs=1e-9)
    assert probs["inverse-gate"] == pytest.approx(0.125, abs=1e-9)
    assert probs["intact-input"] == pytest.approx(0.75, abs=1e-9)


def test_expected_attempts_deterministic_script():
    s = parse("anyons: 1 1\nfuse 0 {0 -> done}\nlabel done:\nresult intact-input")
    state = register_state({"11": 1}).__class__.basis((1, 1), (), 0)
    assert expected_attempts(s, state, "intact-input") == pytest.approx(1.0)


def test_expected_attempts_two_equiprobable_restarts():
    s = load_script("process_p")
    assert expected_attempts(s, qutrit_state(1, 0, 1), "projected-to-0/4") == pytest.approx(2.0, abs=1e-12)


def test_expected_attempts_of_winning_path():
    s = load_script("ceg_winning")
    state = register_state({"11": 1})
    en = execute(s, state, "enumerate")
    won = sum(t.probability for t in en.traces if t.tag == "gate-produced")
    assert expected_attempts(s, state, "gate-produced") == pytest.approx(1 / won)
    forced = execute(s, state, "forced")
    assert any(t.outcomes == forced.outcomes and t.probability == pytest.approx(forced.probability)
               for t in en.traces)


def test_expected_attempts_unreachable():
    with pytest.raises(ProtocolError):
        expected_attempts(load_script("process_p"), qutrit_state(0, 1, 0), "projected-to-0/4")


# -- process P ---------------------------------------------------------------------------------

def test_process_p_on_two_projects_to_two():
    en = run_process_p(qutrit_state(0, 1, 0), "enumerate")
    first = {}
    for t in en.traces:
        c = t.outcomes[0].outcome
        first[c] = first.get(c, 0.0) + t.probability
        if c in (0, 4):
            assert t.tag == "projected-to-2"
    assert en.terminals == {(12, "projected-to-2"): pytest.approx(1.0)}
    # ancilla 2 with a qutrit 2 may still fuse to 2; see the decisions ledger
    assert first[0] + first[4] == pytest.approx(0.5, abs=1e-12)


def test_process_p_zero_four_superposition():
    en = run_process_p(qutrit_state(1, 0, 1), "enumerate")
    assert {tag for (_, tag) in en.terminals} == {"projected-to-0/4"}
    for t in en.traces:
        if t.tag == "projected-to-0/4":
            a = qutrit_amplitudes(t.final_state)
            assert abs(a[1]) < 1e-12
            assert abs(a[0]) == pytest.approx(abs(a[2]), abs=1e-12)


def test_process_p_halves_the_two_weight():
    rng = np.random.default_rng(0)
    c = rng.normal(size=3) + 1j * rng.normal(size=3)
    state = create_pair(qutrit_state(*c), 0, 2)
    before = qutrit_amplitudes(qutrit_state(*c))
    p2 = charge_distribution(state, 1, 3)[2]
    _, post = measure_total_charge(state, 1, 3, outcome=2)
    # unnormalized qutrit weights after the outcome 2
    weights = {q: sum(abs(a) ** 2 for p, a in post.amps.items() if p[3] == q) * p2 for q in (0, 2, 4)}
    factors = [math.sqrt(weights[q]) / abs(b) for q, b in zip((0, 2, 4), before)]
    assert factors[1] == pytest.approx(1 / math.sqrt(2), abs=1e-12)
    assert factors[0] == pytest.approx(1.0, abs=1e-12) and factors[2] == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("c", [(1, 0, 0), (0, 1, 0), (0.3, 1j, -0.5)])
def test_process_p_restarts_with_intact_qutrit(c):
    state = qutrit_state(*c)
    assert any(t.tag == "retry" for t in run_process_p(state, "enumerate").traces)
    # replay the two restart branches: pair charge 0, or 4 and then 2
    _, post = measure_total_charge(create_pair(state, 0, 2), 1, 3, outcome=2)
    post = apply_braid_word(post, [(0, 1), (1, 1), (0, 1)])
    back = [fuse_pair(post, 0, outcome=0)[1]]
    if charge_distribution(post, 0, 1).get(4, 0) > 1e-12:
        back.append(fuse_pair(fuse_pair(post, 0, outcome=4)[1], 0, outcome=2)[1])
    for r in back:
        assert equal_up_to_phase(r.vector(), state.vector(), 1e-9)


def test_process_p_sampled_runs_finish():
    for seed in range(20):
        t = run_process_p(qutrit_state(1, 1, 1), seed=seed)
        assert t.tag in ("projected-to-2", "projected-to-0/4")


def test_enumerated_passes_replay_in_forced_mode():
    s = load_script("recovery_main4")
    state = register_state({"13": 1})
    en = execute(s, state, "enumerate")
    for t in en.traces[::37]:
        if t.tag == "retry":
            continue
        again = execute(s, state, "forced", outcomes=t.forced)
        assert again.tag == t.tag and again.end_line == t.end_line
        assert again.probability == pytest.approx(t.probability, rel=1e-10)


@pytest.mark.parametrize("name, tag", [
    ("ceg_winning", "gate-produced"), ("recovery_fusion2", "inverse-gate"), ("recovery_twist4", "gate-produced"),
    ("recovery_qutrit2", "intact-input"), ("recovery_main4", "gate-produced"), ("recovery_main2", "intact-input"),
])
def test_shipped_plans_run_on_every_input(name, tag):
    s = load_script(name)
    for amps in [{"11": 1}, {"13": 1}, {"31": 1}, {"33": 1}, {"11": 1, "33": 1}]:
        assert execute(s, register_state(amps), "forced").tag == tag
