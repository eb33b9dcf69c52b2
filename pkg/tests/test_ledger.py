import pytest

import database
from async_helper import run_async
from database import RunLedger, RunRecord, config_hash
from experiments import record_run
from history import HistoryView
from settings import LedgerConfig


def _record(experiment="verify", exit_code=0, **summary):
    return RunRecord(experiment=experiment, config_hash=config_hash({"experiment": experiment}),
                     seed=0, profile="fast", exit_code=exit_code, summary=summary)


@pytest.fixture
def ledger():
    ledger = RunLedger(LedgerConfig(path=":memory:", enabled=True))
    assert run_async(ledger.connect())
    database.ledger = ledger
    yield ledger
    database.ledger = None
    run_async(ledger.disconnect())


def test_disabled_ledger_does_not_connect():
    ledger = RunLedger(LedgerConfig(path=":memory:", enabled=False))
    assert not run_async(ledger.connect())
    assert ledger.backend_name == "Not connected"
    assert run_async(ledger.record_run(_record())) is None
    assert run_async(ledger.recent_runs()) == []


def test_config_hash_is_key_order_independent():
    assert config_hash({"a": 1, "b": [1, 2]}) == config_hash({"b": [1, 2], "a": 1})
    assert config_hash({"a": 1}) != config_hash({"a": 2})


def test_record_and_read_back(ledger):
    first = run_async(ledger.record_run(_record(theta_max=0.5)))
    second = run_async(ledger.record_run(_record("zset", reducible=True)))
    assert second > first
    runs = run_async(ledger.recent_runs())
    assert [r.experiment for r in runs] == ["zset", "verify"]
    assert runs[1].summary == {"theta_max": 0.5}
    assert [r.run_id for r in run_async(ledger.recent_runs("verify"))] == [first]


def test_experiment_counts(ledger):
    for name in ("verify", "verify", "validate"):
        run_async(ledger.record_run(_record(name)))
    assert run_async(ledger.experiment_counts()) == {"validate": 1, "verify": 2}


def test_record_run_goes_through_module_ledger(ledger):
    run_id = record_run(_record("simulate", final_l2=0.25))
    assert run_id is not None
    database.ledger = None
    assert record_run(_record("simulate")) is None


def test_history_view(ledger):
    assert HistoryView().render() == "No runs recorded yet."
    run_async(ledger.record_run(_record(theta_max=0.5)))
    run_async(ledger.record_run(_record("verify", exit_code=2, theta_max=0.0)))
    lines = HistoryView("verify", 5).render().splitlines()
    assert lines[0].split()[:3] == ["run", "experiment", "profile"]
    assert set(lines[1]) == {"-"}
    assert "inadmissible" in lines[2]
    assert lines[3].endswith("theta_max=0.5")
