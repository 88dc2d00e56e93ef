from neunets.training.events import EpochEvent, EventLog, now


def test_appends_json_lines(tmp_path):
    log = EventLog(tmp_path / "logs" / "events.jsonl")
    log.append(EpochEvent("a", 1, 0.5, 0.25, 0.75, 0.1, now()))
    log.append(EpochEvent("a", 2, 0.4, 0.5, 0.8, 0.1, now()))
    lines = log.read()
    assert [line["epoch"] for line in lines] == [1, 2]
    assert lines[1]["holdout_accuracy"] == 0.8
    assert lines[0]["timestamp"].endswith("Z")


def test_without_a_path_nothing_is_written(tmp_path):
    log = EventLog()
    log.append(EpochEvent("a", 1, 0.5, 0.25, 0.75, 0.1, now()))
    assert log.read() == []
