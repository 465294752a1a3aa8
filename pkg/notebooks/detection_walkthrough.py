"""
From a login packet to a session alarm
======================================

A login request raises a low-risk alarm, the SIEM activates the detection
probe for that host, and a window of small, fast flows from the host raises
the session alarm.
"""

# the SIEM core with the shipped directives and asset table
from skypesiem.scenario import shipped_text
from skypesiem.siem import AssetTable, build_core, load_directives
core = build_core(load_directives(shipped_text("directives.xml")), AssetTable.parse(shipped_text("assets.txt")))

# the probe, with models trained on a synthetic corpus, wired to the core
from skypesiem.synth import synthetic_corpus
from skypesiem.classifiers import train_all
from skypesiem.metrics import ThresholdConfig
from skypesiem.probe import ProbeConfig, SkypeProbe
from skypesiem.syslogio import CallbackSink
models = train_all(synthetic_corpus(1292, seed=0))
probe = SkypeProbe(ProbeConfig(threshold=ThresholdConfig(0.905)), models, CallbackSink(core.process_line))
core.attach_probe(lambda cmd: probe.activate(cmd.split()[1]))

# a login capture passes through the trigger
from skypesiem.synth import login_capture, session_capture, to_micros
from skypesiem.trigger import TriggerProbe
trigger = TriggerProbe(CallbackSink(core.process_line))
trigger.process(login_capture("192.168.1.200", to_micros("2017-01-16T16:11:45")))
print(core.alarms[-1].directive_id, core.alarms[-1].risk, core.commands_sent)

# ten Skype-like flows from the activated host, plus background chatter
pkts = session_capture("192.168.1.200", to_micros("2017-01-16T19:20:00"), n_flows=10, seed=1,
                       background_hosts=("192.168.1.50",))
probe.ingest(pkts)
for v in probe.flush():
    print(v.host, v.flows_skype, "/", v.flows_total, "fired" if v.fired else "quiet")
print(probe.emitted[-1])
print(core.alarms[-1].directive_id, core.alarms[-1].risk)
