import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nsb.orchestrator import label_phase, phase_schedule


def test_reference_schedule():
    windows = phase_schedule(5, 10, 5)
    assert [(w.phase, w.start, w.end) for w in windows] == [
        ("warmup", 0.0, 5.0), ("attack", 5.0, 15.0), ("cooldown", 15.0, 20.0)]


@pytest.mark.parametrize("bad", [(0, 1, 1), (1, 0, 1), (1, 1, 0), (1, -2, 1)])
def test_nonpositive_durations_rejected(bad):
    with pytest.raises(ValueError):
        phase_schedule(*bad)


def test_half_open_boundaries():
    windows = phase_schedule(5, 10, 5)
    # window starts belong to the later window
    assert label_phase(0.0, windows) == "warmup"
    assert label_phase(5.0, windows) == "attack"
    assert label_phase(15.0, windows) == "cooldown"
    assert label_phase(4.999999, windows) == "warmup"
    assert label_phase(14.999999, windows) == "attack"
    # outside [0, total) is unlabeled
    assert label_phase(20.0, windows) is None
    assert label_phase(-0.001, windows) is None
    assert label_phase(1e9, windows) is None


durations = st.floats(min_value=0.01, max_value=100.0,
                      allow_nan=False, allow_infinity=False)


@settings(max_examples=300, deadline=None)
@given(w=durations, a=durations, c=durations,
       fractions=st.lists(st.floats(min_value=0.0, max_value=1.0,
                                    exclude_max=True, allow_nan=False),
                          min_size=1, max_size=20))
def test_labeling_partitions_the_run(w, a, c, fractions):
    windows = phase_schedule(w, a, c)
    total = w + a + c
    assert windows[-1].end == pytest.approx(total)
    for f in fractions:
        t = f * total
        if t >= windows[-1].end:  # float rounding can land on the end
            continue
        phase = label_phase(t, windows)
        containing = [x.phase for x in windows if x.start <= t < x.end]
        assert len(containing) == 1
        assert phase == containing[0]


@settings(max_examples=200, deadline=None)
@given(w=durations, a=durations, c=durations)
def test_window_starts_resolve_to_their_own_window(w, a, c):
    windows = phase_schedule(w, a, c)
    for win in windows:
        assert label_phase(win.start, windows) == win.phase
    assert label_phase(windows[-1].end, windows) is None
