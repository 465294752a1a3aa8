"""Deterministic end-to-end replay of the detection sequence.

A scenario is a line-oriented text file. Blank lines and ``#`` comments are
ignored; every other line is one step, a verb followed by ``key=value``
arguments (shell quoting applies)::

    threshold auc_th=0.905 r_th=1.0
    train synthetic n=1292 seed=0          # or: models dir=path/to/models
    inject login host=192.168.1.200 at=2017-01-16T16:11:45
    expect syslog source=Snort event=SnortSkypeAttach ip=192.168.1.200 timestamp=16:11:45
    expect alarm directive=501 risk=1.8
    expect activation ip=192.168.1.200
    inject session host=192.168.1.200 at=2017-01-16T19:20:00 flows=10 profile=skype
    flush
    expect verdict host=192.168.1.200 fired=true
    expect alarm directive=502 risk=3
    expect no-alarm
    expect windows-classified 0

Other injections: ``inject pcap path=capture.pcap`` (relative to the
scenario file). Optional setup verbs ``directives path=`` and ``assets path=``
replace the shipped configuration.

Expectations are checked in order. Each one consumes the first observation of
its kind (syslog line, alarm, activation, verdict) after the one matched by
the previous expectation of that kind; ``no-alarm`` asserts nothing is left
unconsumed. Injected packets are fed one at a time to the probe and then the
trigger, so an activation caused by a packet gates every later packet.
"""
from __future__ import annotations

import shlex
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .classifiers import ENSEMBLE_ORDER, load_model, train_all
from .errors import ScenarioError, SkypeSiemError
from .flowkit import decode_capture
from .learnkit import NORMAL, SKYPE
from .metrics import ThresholdConfig
from .probe import ProbeConfig, SkypeProbe, handshake
from .siem import AssetTable, SiemCore, SiemServer, build_core, load_directives, normalize
from .syslogio import UdpSink
from .synth import login_capture, session_capture, synthetic_corpus, to_micros
from .trigger import DEFAULT_RULES, TriggerProbe

EXPECT_KINDS = ("syslog", "alarm", "activation", "verdict", "no-alarm", "windows-classified")
SHIPPED = ("skype_attach_and_session.scn", "no_skype_traffic.scn", "probe_never_activated.scn")


@dataclass(frozen=True)
class Step:
    lineno: int
    verb: str
    args: tuple[str, ...]
    options: dict
    text: str

    def opt(self, key: str, default=None):
        return self.options.get(key, default)

    def need(self, key: str) -> str:
        if key not in self.options:
            raise ScenarioError(f"line {self.lineno}: {self.verb} needs {key}=")
        return self.options[key]


@dataclass
class ScenarioScript:
    steps: list[Step]
    base_dir: Path = field(default_factory=Path.cwd)

    @classmethod
    def parse(cls, text: str, base_dir=None) -> "ScenarioScript":
        steps = []
        for lineno, raw in enumerate(text.splitlines(), start=1):
            try:
                tokens = shlex.split(raw, comments=True)
            except ValueError as exc:
                raise ScenarioError(f"line {lineno}: {exc}") from None
            if not tokens:
                continue
            verb, rest = tokens[0], tokens[1:]
            args, opts = [], {}
            for tok in rest:
                k, eq, v = tok.partition("=")
                if eq:
                    opts[k] = v
                else:
                    args.append(tok)
            step = Step(lineno, verb, tuple(args), opts, raw.split("#", 1)[0].strip())
            _validate(step)
            steps.append(step)
        return cls(steps, Path(base_dir) if base_dir else Path.cwd())

    @classmethod
    def load(cls, path) -> "ScenarioScript":
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ScenarioError(f"cannot read scenario {path}: {exc}") from exc
        return cls.parse(text, path.parent)


def _validate(step: Step) -> None:
    verbs = {"threshold", "train", "models", "directives", "assets", "inject", "flush", "expect"}
    if step.verb not in verbs:
        raise ScenarioError(f"line {step.lineno}: unknown step {step.verb!r}")
    if step.verb == "expect":
        if not step.args or step.args[0] not in EXPECT_KINDS:
            raise ScenarioError(f"line {step.lineno}: expect needs one of {', '.join(EXPECT_KINDS)}")
    if step.verb == "inject" and (not step.args or step.args[0] not in ("login", "session", "pcap")):
        raise ScenarioError(f"line {step.lineno}: inject needs login, session or pcap")
    if step.verb == "train" and step.args[:1] != ("synthetic",):
        raise ScenarioError(f"line {step.lineno}: only 'train synthetic' is supported")


def shipped_scenario(name: str) -> Path:
    return Path(str(resources.files("skypesiem") / "data" / name))


def shipped_text(name: str) -> str:
    return (resources.files("skypesiem") / "data" / name).read_text()


class _Recorder:
    """Sink that records every line before forwarding it."""

    def __init__(self, lines: list, forward):
        self.lines = lines
        self.forward = forward

    def send(self, line: str) -> None:
        self.lines.append(line)
        self.forward(line)

    def close(self) -> None:
        pass


@dataclass
class StepResult:
    step: Step
    ok: bool
    detail: str = ""

    def line(self) -> str:
        tag = "ok  " if self.ok else "FAIL"
        s = f"{tag} line {self.step.lineno}: {self.step.text}"
        return s + (f"\n     {self.detail}" if self.detail else "")


class ScenarioRunner:
    """Wires trigger, SIEM and detection probe, in-process or over localhost sockets."""

    def __init__(self, script: ScenarioScript, network: bool = False, settle_timeout: float = 5.0):
        self.script = script
        self.network = network
        self.settle_timeout = settle_timeout
        self.threshold = ThresholdConfig()
        self.models = None
        self.directives = load_directives(shipped_text("directives.xml"))
        self.assets = AssetTable.parse(shipped_text("assets.txt"))
        self.syslog: list[str] = []
        self.activations: list[str] = []
        self.core: SiemCore | None = None
        self.probe: SkypeProbe | None = None
        self.trigger: TriggerProbe | None = None
        self._server: SiemServer | None = None
        self._session = None
        self._sent = 0
        self._cursor = {k: 0 for k in ("syslog", "alarm", "activation", "verdict")}

    # -- wiring ---------------------------------------------------------
    def _ensure_started(self) -> None:
        if self.probe is not None:
            return
        if self.models is None:
            raise ScenarioError("no models: add a 'train synthetic' or 'models dir=' step before injecting")
        self.core = build_core(self.directives, self.assets, self.threshold.r_th)
        config = ProbeConfig(threshold=self.threshold)
        if self.network:
            self._start_network(config)
        else:
            self.probe = SkypeProbe(config, self.models, _Recorder(self.syslog, self._deliver))
            self.core.attach_probe(self._activate_in_process)
            self.trigger = TriggerProbe(_Recorder(self.syslog, self._deliver), DEFAULT_RULES)

    def _deliver(self, line: str) -> None:
        self.core.process_line(line, "127.0.0.1")

    def _activate_in_process(self, command: str) -> None:
        verb, _, ip = command.partition(" ")
        if verb == "ACTIVATE":
            self.probe.activate(ip)
            self.activations.append(ip.strip())

    def _start_network(self, config: ProbeConfig) -> None:
        self._server = SiemServer(self.core, probe_port=0, syslog_port=0).start()
        host, port = self._server.probe_addr
        config.server, config.port = host, port
        udp = UdpSink(*self._server.syslog_addr)

        def send(line: str) -> None:
            self._sent += 1
            udp.send(line)

        self.probe = SkypeProbe(config, self.models, _Recorder(self.syslog, send))
        self.trigger = TriggerProbe(_Recorder(self.syslog, send), DEFAULT_RULES)
        self._session = handshake(host, port)
        self._session.serve_activations(self.probe.activate)
        self.activations = self._session.activations
        deadline = time.monotonic() + self.settle_timeout
        while self.core.counters["probe_sessions"] < 1 and time.monotonic() < deadline:
            time.sleep(0.01)

    def _settle(self) -> None:
        """Network mode: wait until every sent line is processed and every command answered."""
        if not self.network:
            return
        deadline = time.monotonic() + self.settle_timeout
        while time.monotonic() < deadline:
            done = self.core.counters["lines_received"] >= self._sent
            if done:
                self._server.drain(max(0.0, deadline - time.monotonic()))
                if len(self.activations) >= len(self.core.commands_sent):
                    return
            time.sleep(0.01)
        raise ScenarioError("timed out waiting for the SIEM to settle")

    def close(self) -> None:
        if self._session is not None:
            self._session.close()
        if self._server is not None:
            self._server.stop()
        if self.core is not None:
            self.core.store.close()

    # -- steps ----------------------------------------------------------
    def _packets(self, step: Step):
        kind = step.args[0]
        if kind == "pcap":
            path = Path(step.need("path"))
            if not path.is_absolute():
                path = self.script.base_dir / path
            try:
                return decode_capture(path.read_bytes()).packets
            except OSError as exc:
                raise ScenarioError(f"line {step.lineno}: {exc}") from exc
        host = step.need("host")
        start = to_micros(step.need("at"))
        seed = int(step.opt("seed", 0))
        if kind == "login":
            return login_capture(host, start, seed=seed,
                                 with_udp_probe=step.opt("udp_probe", "false") == "true")
        label = {"skype": SKYPE, "normal": NORMAL}[step.opt("profile", "skype")]
        background = tuple(h for h in step.opt("background", "").split(",") if h)
        return session_capture(host, start, int(step.opt("flows", 10)), label,
                               int(step.opt("packets", 20)), seed, background)

    def _inject(self, step: Step) -> None:
        self._ensure_started()
        for pkt in self._packets(step):
            # the probe sees a packet before any activation it causes can arrive
            self.probe.ingest([pkt])
            self._settle()
            if self.trigger.process([pkt]):
                self._settle()

    def _setup(self, step: Step) -> None:
        if step.verb == "threshold":
            self.threshold = ThresholdConfig(float(step.opt("auc_th", self.threshold.auc_th)),
                                             float(step.opt("r_th", self.threshold.r_th)))
        elif step.verb == "train":
            corpus = synthetic_corpus(int(step.opt("n", 1292)), int(step.opt("seed", 0)))
            self.models = train_all(corpus)
        elif step.verb == "models":
            d = Path(step.need("dir"))
            d = d if d.is_absolute() else self.script.base_dir / d
            self.models = {k: load_model(d / f"{k}.json") for k in ENSEMBLE_ORDER}
        elif step.verb == "directives":
            self.directives = load_directives(self._read(step))
        elif step.verb == "assets":
            self.assets = AssetTable.parse(self._read(step))
        if self.probe is not None and step.verb != "threshold":
            raise ScenarioError(f"line {step.lineno}: {step.verb} must come before the first inject")

    def _read(self, step: Step) -> str:
        p = Path(step.need("path"))
        return (p if p.is_absolute() else self.script.base_dir / p).read_text()

    def _observed(self, kind: str) -> list:
        if self.core is None:
            return []
        return {"syslog": self.syslog, "alarm": self.core.alarms,
                "activation": self.activations, "verdict": self.probe.verdicts}[kind]

    def _expect(self, step: Step) -> StepResult:
        kind = step.args[0]
        if kind == "windows-classified":
            want = step.args[1] if len(step.args) > 1 else step.need("count")
            want_n = 0 if want == "none" else int(want)
            got = self.probe.windows_classified if self.probe else 0
            return StepResult(step, got == want_n, "" if got == want_n else f"expected {want_n}, observed {got}")
        if kind == "no-alarm":
            rest = self._observed("alarm")[self._cursor["alarm"]:]
            return StepResult(step, not rest, "" if not rest else
                              "unexpected: " + "; ".join(_describe("alarm", a) for a in rest))
        seen = self._observed(kind)
        start = self._cursor[kind]
        for i in range(start, len(seen)):
            if _match(kind, seen[i], step.options):
                self._cursor[kind] = i + 1
                return StepResult(step, True)
        observed = "; ".join(_describe(kind, o) for o in seen[start:]) or "nothing"
        want = " ".join(f"{k}={v}" for k, v in step.options.items())
        return StepResult(step, False, f"expected {kind} {want}\n     observed: {observed}")

    def run(self) -> list[StepResult]:
        results = []
        try:
            for step in self.script.steps:
                if step.verb == "expect":
                    self._settle() if self.core is not None else None
                    res = self._expect(step)
                    results.append(res)
                    if not res.ok:
                        break
                    continue
                if step.verb == "inject":
                    self._inject(step)
                elif step.verb == "flush":
                    if self.probe is not None:
                        self.probe.flush()
                        self._settle()
                else:
                    self._setup(step)
                results.append(StepResult(step, True))
        finally:
            self.close()
        return results


def _close(a: float, b: float) -> bool:
    return abs(a - b) <= 1e-9


def _match(kind: str, obs, want: dict) -> bool:
    if kind == "syslog":
        if "contains" in want and want["contains"] not in obs:
            return False
        if not any(k in want for k in ("source", "event", "ip", "timestamp")):
            return True
        if "source" in want and not obs.startswith(f"Syslog {want['source']} "):
            return False
        if "event" in want and f" INFO {want['event']} " not in obs:
            return False
        try:
            ev = normalize(obs)
        except SkypeSiemError:
            return False
        return (want.get("ip", ev.userdata_1) == ev.userdata_1
                and want.get("timestamp", ev.userdata_2) == ev.userdata_2)
    if kind == "alarm":
        return (("directive" not in want or int(want["directive"]) == obs.directive_id)
                and ("risk" not in want or _close(float(want["risk"]), obs.risk))
                and want.get("host", obs.host) == obs.host)
    if kind == "activation":
        return want.get("ip", obs) == obs
    if kind == "verdict":
        fired = {"true": True, "false": False}.get(want.get("fired", ""), obs.fired)
        return (want.get("host", obs.host) == obs.host and fired == obs.fired
                and int(want.get("flows", obs.flows_total)) == obs.flows_total
                and int(want.get("skype", obs.flows_skype)) == obs.flows_skype
                and obs.score >= float(want.get("min_score", 0.0)))
    raise ScenarioError(f"unknown expectation {kind}")


def _describe(kind: str, obs) -> str:
    if kind == "alarm":
        return f"alarm directive={obs.directive_id} risk={obs.risk} host={obs.host}"
    if kind == "verdict":
        return (f"verdict host={obs.host} fired={str(obs.fired).lower()} flows={obs.flows_total} "
                f"skype={obs.flows_skype} score={obs.score:.3f}")
    return f"{kind} {obs}"


def run_scenario(script: ScenarioScript, network: bool = False) -> tuple[bool, list[str]]:
    """Run ``script``; returns (passed, transcript lines)."""
    results = ScenarioRunner(script, network=network).run()
    passed = all(r.ok for r in results) and len(results) == len(script.steps)
    return passed, [r.line() for r in results]
