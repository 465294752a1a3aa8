import time

import pytest

from skypesiem.errors import ScenarioError
from skypesiem.flowkit import write_capture
from skypesiem.scenario import SHIPPED, ScenarioScript, run_scenario, shipped_scenario, shipped_text
from skypesiem.synth import login_capture, to_micros


@pytest.mark.parametrize("name", SHIPPED)
def test_shipped_scenarios_pass(name):
    passed, transcript = run_scenario(ScenarioScript.load(shipped_scenario(name)))
    assert passed, "\n".join(transcript)
    assert all(line.startswith("ok") for line in transcript)


def test_positive_scenario_is_deterministic():
    script = ScenarioScript.load(shipped_scenario(SHIPPED[0]))
    assert run_scenario(script) == run_scenario(script)


@pytest.mark.network
def test_positive_scenario_over_sockets():
    passed, transcript = run_scenario(ScenarioScript.load(shipped_scenario(SHIPPED[0])), network=True)
    assert passed, "\n".join(transcript)


def test_failure_reports_line_and_stops_counting_as_pass():
    text = shipped_text(SHIPPED[0]).replace("expect activation ip=192.168.1.200",
                                            "expect activation ip=192.168.1.201")
    passed, transcript = run_scenario(ScenarioScript.parse(text))
    assert not passed
    [fail] = [t for t in transcript if t.startswith("FAIL")]
    assert "192.168.1.201" in fail


def test_expectations_are_ordered():
    # the 502 alarm cannot be matched before the 501 alarm it follows
    text = shipped_text(SHIPPED[0])
    swapped = text.replace("expect alarm directive=501 risk=1.8 host=192.168.1.200\n", "")
    swapped += "expect alarm directive=501 risk=1.8\n"
    passed, _ = run_scenario(ScenarioScript.parse(swapped))
    assert not passed


def test_pcap_injection(tmp_path):
    cap = tmp_path / "login.pcap"
    write_capture(login_capture("10.9.8.7", to_micros("2017-01-16T10:00:00")), cap)
    script = ScenarioScript.parse(
        "train synthetic n=200 seed=0\n"
        f"inject pcap path={cap.name}\n"
        "expect syslog event=SnortSkypeAttach ip=10.9.8.7 timestamp=10:00:00\n"
        "expect alarm directive=501 risk=1.2\n"
        "expect activation ip=10.9.8.7\n", base_dir=tmp_path)
    passed, transcript = run_scenario(script)
    assert passed, "\n".join(transcript)


@pytest.mark.parametrize("text", [
    "bogus step\n",
    "expect\n",
    "expect frobnicate\n",
    "inject carrier-pigeon\n",
    "train real n=3\n",
    'inject login host="unterminated\n',
])
def test_malformed_scripts(text):
    with pytest.raises(ScenarioError):
        ScenarioScript.parse(text)


def test_missing_models_is_an_error():
    with pytest.raises(ScenarioError):
        run_scenario(ScenarioScript.parse("inject login host=1.2.3.4 at=2017-01-01T00:00:00\n"))


def test_shipped_scenario_runtime():
    t = time.monotonic()
    run_scenario(ScenarioScript.load(shipped_scenario(SHIPPED[0])))
    assert time.monotonic() - t < 30
