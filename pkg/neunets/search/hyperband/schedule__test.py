import numpy as np
import pytest

from neunets.search.hyperband.schedule import ScheduleError, build_schedule, max_bracket


def enumerate_rungs(n, eta, s):
    """Successive halving by hand: divide the survivors s times"""
    counts = [n]
    for _ in range(s):
        counts.append(counts[-1] // eta)
    return counts


def test_reference_schedule():
    schedule = build_schedule(81, 3)
    assert schedule.s_max == 4
    first, last = schedule.brackets[0], schedule.brackets[-1]
    assert (first.s, first.n, first.rungs[0].r) == (4, 81, 1.0)
    assert (last.s, last.n, last.rungs[0].r) == (0, 5, 81.0)
    assert [rung.n for rung in first.rungs] == [81, 27, 9, 3, 1]
    assert [rung.r for rung in first.rungs] == [1.0, 3.0, 9.0, 27.0, 81.0]


def test_degenerate_resource():
    schedule = build_schedule(1, 3)
    assert schedule.s_max == 0
    assert len(schedule.brackets) == 1
    assert len(schedule.brackets[0].rungs) == 1
    assert schedule.brackets[0].rungs[0].epochs == 1


def test_matches_a_brute_force_enumeration():
    rng = np.random.default_rng(0)
    for _ in range(20):
        R, eta = int(rng.integers(1, 200)), int(rng.integers(2, 6))
        schedule = build_schedule(R, eta)
        assert eta**schedule.s_max <= R < eta ** (schedule.s_max + 1)
        for bracket in schedule.brackets:
            assert [rung.n for rung in bracket.rungs] == enumerate_rungs(bracket.n, eta, bracket.s)
            assert bracket.rungs[-1].r == pytest.approx(R)
            for before, after in zip(bracket.rungs, bracket.rungs[1:]):
                assert after.r == pytest.approx(before.r * eta)
            assert bracket.resource <= (schedule.s_max + 1) * R * (bracket.s + 1)


def test_exact_logarithm():
    # float log would round 243 down for some bases
    assert max_bracket(243, 3) == 5
    assert max_bracket(242, 3) == 4


@pytest.mark.parametrize("R,eta", [(0, 3), (27, 1), (2.5, 3), (27, 2.0)])
def test_invalid(R, eta):
    with pytest.raises(ScheduleError):
        build_schedule(R, eta)
