"""Symbolic-transition-system construction, interpretation, and the
equivalence oracle against the pushdown engine."""

import dataclasses

import pytest

from conftest import load_flow_graph

from genprog import random_program

from flowmc.flowgraph import translate
from flowmc.pds import UnsatisfiableInitError, explore, induce, sample_run
from flowmc.sts import (
    MUTATIONS,
    BoundMismatchError,
    StsError,
    compare_with_pds,
    execute_sts,
    mutate_sts,
    project_state,
    sts_initial_states,
    sts_of_flow_graph,
    sts_successors,
)


def test_stee_action_inventory(stee):
    sts = sts_of_flow_graph(stee)
    assert [a.name for a in sts.actions] == [
        "m1_to_m2",
        "m1_to_m4",
        "m2_call_steering",
        "m3_to_m1",
        "m4_stutter",
        "s1_to_s2",
        "s2_to_s3",
        "s3_to_s4",
        "s4_return",
    ]
    call = next(a for a in sts.actions if a.kind == "call")
    assert call.name == "m2_call_steering"
    assert call.push_node == "n_m3"  # the continuation node rides the stack
    assert call.target == "n_s1"
    ret = next(a for a in sts.actions if a.kind == "return")
    assert ret.source == "n_s4"


def test_stee_variables(stee):
    sts = sts_of_flow_graph(stee)
    kinds = [v.kind for v in sts.variables]
    assert kinds.count("node") == 1 and kinds.count("stack") == 1
    assert sts.scalar_names == (
        "primary_ok",
        "sndary_active",
        "steering__primary_info",
        "steering__sndary_info",
    )
    assert sts.init.node == "n_m1"
    assert dict(sts.init.locals_values) == {
        "steering__primary_info": False,
        "steering__sndary_info": False,
    }


def test_minimal_sts_never_touches_the_stack():
    sts = sts_of_flow_graph(load_flow_graph("minimal"))
    assert len(sts.actions) == 1
    action = sts.actions[0]
    assert action.kind == "silent"
    report = execute_sts(sts)
    assert len(report.states) == 1
    assert all(s.stack == () for s in report.states)


def test_one_call_one_return_action():
    sts = sts_of_flow_graph(load_flow_graph("callret"))
    kinds = [a.kind for a in sts.actions]
    assert kinds.count("call") == 1
    assert kinds.count("return") == 1


def test_action_exclusivity_on_node(stee):
    # the node variable fully dispatches the disjunction
    sts = sts_of_flow_graph(stee)
    for action in sts.actions:
        assert action.source in sts.node_values
        assert not action.skip_source_test


def test_execute_matches_pds_node_coverage(stee):
    sts = sts_of_flow_graph(stee)
    pds = induce(stee)
    report = execute_sts(sts)
    pds_nodes = {c.top.node for c in explore(pds, max_stack=4).visited}
    sts_nodes = {s.node for s in report.states}
    assert sts_nodes == pds_nodes == {f"n_m{i}" for i in range(1, 5)} | {
        f"n_s{i}" for i in range(1, 5)
    }


def test_capacity_zero_blocks_calls():
    with pytest.raises(StsError):
        sts_of_flow_graph(load_flow_graph("callret"), stack_capacity=0)
    sts = sts_of_flow_graph(load_flow_graph("callret"), stack_capacity=1)
    shallow = dataclasses.replace(sts, stack_capacity=1)
    report = execute_sts(shallow)
    assert not any(cause == "stack-overflow" for _, cause in report.deadlocks)
    # with the bound respected at 1 frame the call still fits; force zero room
    cramped = dataclasses.replace(sts, stack_capacity=0)
    report = execute_sts(cramped)
    assert any(cause == "stack-overflow" for _, cause in report.deadlocks)


def test_stack_encoding_matches_pds_along_runs(stee):
    sts = sts_of_flow_graph(stee)
    pds = induce(stee)
    trace = sample_run(pds, 10, seed=5)
    # replay the PDS trace inside the STS via the projection
    states = {project_state(sts, s): s for s in sts_initial_states(sts)}
    current = next(s for c, s in states.items() if c == trace.configurations[0])
    for config in trace.configurations[1:]:
        succ, _ = sts_successors(sts, current)
        matches = [s for s in succ if project_state(sts, s) == config]
        assert len(matches) == 1
        current = matches[0]
        # element-wise stack agreement under the encoding
        assert len(current.stack) == config.depth - 1
        for slot, frame in zip(current.stack, config.stack[1:]):
            assert slot[0] == frame.node


def test_push_pop_inverse():
    sts = sts_of_flow_graph(load_flow_graph("boolcall"))
    state = sts_initial_states(sts)[0]
    pushed, _ = sts_successors(sts, state)
    call_states = [s for s in pushed if s.stack]
    assert call_states
    for s in call_states:
        top = s.stack[0]
        rest = s.stack[1:]
        assert ((top,) + rest)[0] == top and ((top,) + rest)[1:] == rest


@pytest.mark.parametrize("name", ["stee", "minimal", "callret", "guarded", "boolcall", "smallguard"])
def test_translation_crosscheck_equivalent(name):
    fg = load_flow_graph(name)
    verdict = compare_with_pds(sts_of_flow_graph(fg), induce(fg), max_stack=4)
    assert verdict.equivalent, (verdict.reason, verdict.witness)


@pytest.mark.parametrize("kind", MUTATIONS)
def test_mutations_are_caught(stee, kind):
    pds = induce(stee)
    sts = mutate_sts(sts_of_flow_graph(stee), kind)
    verdict = compare_with_pds(sts, pds, max_stack=4)
    assert not verdict.equivalent
    assert verdict.reason


def test_bound_mismatch():
    fg = load_flow_graph("minimal")
    with pytest.raises(BoundMismatchError):
        compare_with_pds(sts_of_flow_graph(fg, stack_capacity=2), induce(fg), max_stack=5)


@pytest.mark.parametrize("seed", range(60))
def test_bisimulation_on_generated_programs(seed):
    prog = random_program(seed)
    fg = translate(prog)
    try:
        pds = induce(fg)
    except UnsatisfiableInitError:
        return
    verdict = compare_with_pds(sts_of_flow_graph(fg, stack_capacity=6), pds, max_stack=6)
    assert verdict.equivalent, (seed, verdict.reason, verdict.witness)


def test_recursion_bounded_by_stack_capacity():
    fg = load_flow_graph("recur")
    pds = induce(fg)
    report = explore(pds, max_stack=6)
    assert not report.truncated
    assert report.max_stack_depth == 3
    verdict = compare_with_pds(sts_of_flow_graph(fg, stack_capacity=8), pds, max_stack=6)
    assert verdict.equivalent, (verdict.reason, verdict.witness)
