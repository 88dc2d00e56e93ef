import random

import pytest

from neunets.engine.pipeline__test import run_config
from neunets.engine.state import TRANSITIONS, CandidateRecord, IllegalTransitionError, PipelineState, Stage

TERMINAL = {Stage.COMPLETED, Stage.STOPPED, Stage.FAILED}


def test_terminal_stages():
    assert {stage for stage in Stage if stage.terminal} == TERMINAL


@pytest.mark.parametrize("seed", range(20))
def test_random_event_sequences_only_take_declared_transitions(seed):
    rng = random.Random(seed)
    state = PipelineState(id="p", config=run_config())
    visited = [state.stage]
    for _ in range(50):
        target = rng.choice(list(Stage))
        before = state.stage
        if target in TRANSITIONS[before]:
            state.transition(target)
            visited.append(target)
        else:
            with pytest.raises(IllegalTransitionError):
                state.transition(target)
            assert state.stage is before
    for previous, current in zip(visited, visited[1:]):
        assert current in TRANSITIONS[previous]
    # nothing follows a terminal stage
    assert all(stage not in TERMINAL for stage in visited[:-1])


def test_the_happy_path():
    state = PipelineState(id="p", config=run_config())
    for stage in [Stage.VALIDATED, Stage.SYNTHESIZING, Stage.FINALIZING, Stage.COMPLETED]:
        state.transition(stage)
    assert state.stage is Stage.COMPLETED


def test_finalizing_cannot_be_stopped():
    state = PipelineState(id="p", config=run_config(), stage=Stage.FINALIZING)
    with pytest.raises(IllegalTransitionError) as e:
        state.transition(Stage.STOPPED)
    assert e.value.current is Stage.FINALIZING
    assert e.value.target is Stage.STOPPED


class TestCandidates:
    def test_best_is_the_strict_maximum(self):
        state = PipelineState(id="p", config=run_config())
        for i, fitness in enumerate([0.5, 0.7, 0.7, 0.6]):
            state.add_candidate(CandidateRecord(i, 1, f"n{i}", fitness, 1))
        assert state.best == 1
        assert state.best_fitness == 0.7

    def test_final_candidates_win_ties(self):
        state = PipelineState(id="p", config=run_config())
        state.add_candidate(CandidateRecord(0, 1, "seed", 0.7, 1))
        state.add_candidate(CandidateRecord(1, 1, "fine-tune", 0.7, 1, parent=0, final=True))
        assert state.best == 1

    def test_ids_are_sequential(self):
        state = PipelineState(id="p", config=run_config())
        with pytest.raises(ValueError):
            state.add_candidate(CandidateRecord(3, 1, "late", 0.1, 1))

    def test_no_candidate(self):
        state = PipelineState(id="p", config=run_config())
        assert state.best_candidate is None
        assert state.best_fitness == 0.0
