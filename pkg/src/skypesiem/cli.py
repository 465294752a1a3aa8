"""Command-line entry point: ``skypesiem <subcommand>``.

Exit codes: 0 ok, 1 failed scenario expectation, 2 input error,
3 degenerate data, 64 usage error.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .classifiers import DISPLAY_NAMES, ENSEMBLE_ORDER, load_model, save_model, train_all
from .errors import (DatasetEmpty, MalformedCapture, ModelFormatError, ProbeError, RowParseError,
                     ScenarioError, SchemaMismatch, SingleClass, SkypeSiemError, StoreFailure)
from .flowkit import DEFAULT_IDLE_TIMEOUT, assemble_flows, decode_capture, flow_features, write_features_csv
from .learnkit import ClassLabel, load_dataset, stratified_split
from .metrics import (DEFAULT_R_TH, ThresholdConfig, calibrate_threshold,
                      classification_report, error_scatter_csv, format_report, report_rows, roc_auc,
                      roc_csv)
from .probe import DEFAULT_SERVER_PORT, DEFAULT_WINDOW_SECONDS, ProbeConfig, SkypeProbe, handshake
from .scenario import SHIPPED, ScenarioScript, run_scenario, shipped_scenario, shipped_text
from .siem import AssetTable, SiemServer, build_core, load_directives
from .syslogio import ListSink, open_sink
from .trigger import DEFAULT_RULES, TriggerProbe, load_rules
from .voting import Ensemble

EXIT_OK, EXIT_FAILED, EXIT_INPUT, EXIT_DEGENERATE, EXIT_USAGE = 0, 1, 2, 3, 64
ENSEMBLE_NAME = "Majority vote"
DEFAULT_TRAIN_FRACTION = 2 / 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _read_bytes(path: str) -> bytes:
    if path == "-":
        return sys.stdin.buffer.read()
    return Path(path).read_bytes()


def _load_ds(path: str):
    text = sys.stdin.read() if path == "-" else Path(path).read_text()
    return load_dataset(text)


def _load_models(models_dir: str) -> dict:
    d = Path(models_dir)
    return {k: load_model(d / f"{k}.json") for k in ENSEMBLE_ORDER}


def _load_threshold(models_dir: str, auc_th: float | None) -> ThresholdConfig:
    path = Path(models_dir) / "threshold.json"
    cfg = ThresholdConfig.from_dict(json.loads(path.read_text())) if path.exists() else ThresholdConfig()
    return ThresholdConfig(auc_th, cfg.r_th) if auc_th is not None else cfg


# ---------------------------------------------------------------------------

def cmd_extract(args) -> int:
    if args.out and args.out != "-" and not args.label:
        raise UsageError("--label is required when writing a training file with --out")
    label = ClassLabel.parse(args.label).value if args.label else None
    decoded = decode_capture(_read_bytes(args.pcap))
    flows = assemble_flows(decoded.packets, args.idle_timeout)
    vectors = [fv for _, fv in flow_features(flows)]
    if args.out and args.out != "-":
        with open(args.out, "w", newline="") as fh:
            n = write_features_csv(vectors, fh, label)
    else:
        n = write_features_csv(vectors, sys.stdout, label)
    print(f"packets {len(decoded.packets)} skipped {decoded.skipped} flows {len(flows)} rows {n}",
          file=sys.stderr)
    return EXIT_OK


def _build_timestamp(dataset: str) -> str:
    """SOURCE_DATE_EPOCH if set, else the dataset's mtime: retraining stays byte-identical."""
    if "SOURCE_DATE_EPOCH" in os.environ:
        epoch = int(os.environ["SOURCE_DATE_EPOCH"])
    else:
        epoch = int(os.stat(dataset).st_mtime) if dataset != "-" else 0
    return datetime.fromtimestamp(epoch, timezone.utc).isoformat()


def cmd_train(args) -> int:
    raw = _read_bytes(args.dataset)
    ds = load_dataset(raw.decode("utf-8"))
    ds.require_trainable()
    train, valid = stratified_split(ds, args.train_fraction, args.seed)
    train.require_trainable()
    models = train_all(train, min_leaf=args.min_leaf, max_parents=args.max_parents)
    threshold = calibrate_threshold(valid, models, args.r_th)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    meta = {"dataset_sha256": hashlib.sha256(raw).hexdigest(), "seed": args.seed,
            "train_fraction": args.train_fraction, "n_train": len(train), "n_validation": len(valid),
            "timestamp": _build_timestamp(args.dataset)}
    for kind in ENSEMBLE_ORDER:
        save_model(models[kind], out / f"{kind}.json", meta)
    (out / "threshold.json").write_text(json.dumps(threshold.to_dict(), indent=1, sort_keys=True) + "\n")
    report = _evaluate(valid, models)
    (out / "calibration.txt").write_text(
        f"validation instances {len(valid)}\nauc_th {threshold.auc_th:.6f}\nr_th {threshold.r_th}\n\n"
        + format_report(report[0]))
    print(f"auc_th {threshold.auc_th:.6f}")
    return EXIT_OK


def _evaluate(ds, models):
    ens = Ensemble(models)
    rows, curves = [], {}
    for kind in ENSEMBLE_ORDER:
        proba = models[kind].predict_proba(ds.X)
        pred = models[kind].predict_labels(ds.X)
        curve = roc_auc(ds.y, proba[:, 0])
        rows += report_rows(DISPLAY_NAMES[kind], classification_report(ds.y, pred, proba), curve.auc)
        curves[DISPLAY_NAMES[kind]] = curve
    labels, _, scores = ens.decide_many(ds.X)
    proba = np.column_stack([scores, 1.0 - scores])
    curve = roc_auc(ds.y, scores)
    rows += report_rows(ENSEMBLE_NAME, classification_report(ds.y, labels, proba), curve.auc)
    curves[ENSEMBLE_NAME] = curve
    return rows, curves, labels


def cmd_eval(args) -> int:
    ds = _load_ds(args.dataset)
    ds.require_trainable()
    models = _load_models(args.models)
    rows, curves, labels = _evaluate(ds, models)
    text = format_report(rows)
    sys.stdout.write(text)
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.txt").write_text(text)
        (out / "roc.csv").write_text(roc_csv(curves))
        (out / "errors.csv").write_text(error_scatter_csv(ds.X, ds.y, labels))
    return EXIT_OK


def cmd_trigger(args) -> int:
    rules = load_rules(Path(args.rules).read_text()) if args.rules else DEFAULT_RULES
    sink = open_sink(args.syslog)
    try:
        events = TriggerProbe(sink, rules).process(decode_capture(_read_bytes(args.pcap)).packets)
    finally:
        sink.close()
    print(f"trigger events {len(events)}", file=sys.stderr)
    return EXIT_OK


def _server_addr(text: str) -> tuple[str, int]:
    host, _, port = text.rpartition(":")
    if not host:
        return text, DEFAULT_SERVER_PORT
    return host, int(port)


def cmd_detect(args) -> int:
    models = _load_models(args.models)
    threshold = _load_threshold(args.models, args.auc_th)
    config = ProbeConfig(window_seconds=args.window, threshold=threshold, idle_timeout=args.idle_timeout)
    sink = open_sink(args.syslog) if args.syslog else ListSink()
    probe = SkypeProbe(config, models, sink)
    for host in args.activate:
        probe.activate(host)
    session = None
    if args.server:
        config.server, config.port = _server_addr(args.server)
        session = handshake(config.server, config.port)
        session.serve_activations(probe.activate)
        time.sleep(args.wait)
    try:
        probe.ingest(decode_capture(_read_bytes(args.pcap)).packets)
        probe.flush()
    finally:
        if session is not None:
            session.close()
        sink.close()
    for v in probe.verdicts:
        print(f"{v.window_end.isoformat()} host={v.host} flows={v.flows_total} skype={v.flows_skype} "
              f"score={v.score:.3f} fired={str(v.fired).lower()}")
    if isinstance(sink, ListSink):
        for line in sink.lines:
            print(line)
    print(f"windows classified {probe.windows_classified}", file=sys.stderr)
    return EXIT_OK


def cmd_serve(args) -> int:
    directives = load_directives(Path(args.directives).read_text() if args.directives
                                 else shipped_text("directives.xml"))
    assets = AssetTable.parse(Path(args.assets).read_text() if args.assets else shipped_text("assets.txt"))
    core = build_core(directives, assets, args.r_th, args.store)
    server = SiemServer(core, args.host, args.port, args.syslog_port, args.admin_port, args.tail)
    server.start()
    print(f"probe {server.probe_addr} syslog {server.syslog_addr} admin {server.admin_addr}",
          file=sys.stderr, flush=True)
    try:
        if args.duration is not None:
            time.sleep(args.duration)
        else:
            while not core.stopped:
                time.sleep(0.5)
    except KeyboardInterrupt:
        pass
    finally:
        server.drain()
        server.stop()
        core.store.close()
    sys.stderr.write(core.status_text())
    return EXIT_FAILED if core.stopped else EXIT_OK


def cmd_simulate(args) -> int:
    if args.list:
        for name in SHIPPED:
            print(name)
        return EXIT_OK
    if not args.scenario:
        raise UsageError("--scenario is required")
    path = Path(args.scenario)
    if not path.exists() and args.scenario in SHIPPED:
        path = shipped_scenario(args.scenario)
    script = ScenarioScript.load(path)
    passed, transcript = run_scenario(script, network=args.network)
    for line in transcript:
        print(line)
    print("PASS" if passed else "FAIL")
    return EXIT_OK if passed else EXIT_FAILED


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="skypesiem", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("extract", help="capture -> feature CSV")
    s.add_argument("--pcap", required=True)
    s.add_argument("--label", help="Skype or Normal")
    s.add_argument("--out", help="output CSV (default: stdout)")
    s.add_argument("--idle-timeout", type=float, default=DEFAULT_IDLE_TIMEOUT)
    s.set_defaults(func=cmd_extract)

    s = sub.add_parser("train", help="train the three models and calibrate auc_th")
    s.add_argument("--dataset", required=True)
    s.add_argument("--out-dir", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--train-fraction", type=float, default=DEFAULT_TRAIN_FRACTION)
    s.add_argument("--min-leaf", type=int, default=2)
    s.add_argument("--max-parents", type=int, default=3)
    s.add_argument("--r-th", type=float, default=DEFAULT_R_TH)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("eval", help="per-classifier and ensemble report")
    s.add_argument("--dataset", required=True)
    s.add_argument("--models", required=True, help="directory written by train")
    s.add_argument("--out-dir", help="also write report.txt, roc.csv and errors.csv here")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("trigger", help="scan a capture with the content rules, emit syslog")
    s.add_argument("--pcap", required=True)
    s.add_argument("--rules")
    s.add_argument("--syslog", default="-", help="udp://host:port, file path, or - for stdout")
    s.set_defaults(func=cmd_trigger)

    s = sub.add_parser("detect", aliases=["probe"], help="run the detection probe over a capture")
    s.add_argument("--pcap", required=True)
    s.add_argument("--models", required=True)
    s.add_argument("--activate", action="append", default=[], metavar="IP")
    s.add_argument("--server", help="host[:port] of the SIEM to register with")
    s.add_argument("--wait", type=float, default=0.5, help="seconds to wait for activations")
    s.add_argument("--window", type=float, default=DEFAULT_WINDOW_SECONDS)
    s.add_argument("--auc-th", type=float)
    s.add_argument("--syslog")
    s.add_argument("--idle-timeout", type=float, default=DEFAULT_IDLE_TIMEOUT)
    s.set_defaults(func=cmd_detect)

    s = sub.add_parser("serve", help="run the SIEM server")
    s.add_argument("--host", default="127.0.0.1")
    s.add_argument("--port", type=int, default=DEFAULT_SERVER_PORT)
    s.add_argument("--syslog-port", type=int, default=514)
    s.add_argument("--admin-port", type=int)
    s.add_argument("--tail", action="append", default=[])
    s.add_argument("--directives")
    s.add_argument("--assets")
    s.add_argument("--store")
    s.add_argument("--r-th", type=float, default=DEFAULT_R_TH)
    s.add_argument("--duration", type=float, help="stop after this many seconds")
    s.set_defaults(func=cmd_serve)

    s = sub.add_parser("simulate", help="replay a scenario end to end")
    s.add_argument("--scenario", help=f"file, or a shipped name: {', '.join(SHIPPED)}")
    s.add_argument("--network", action="store_true", help="use localhost sockets")
    s.add_argument("--list", action="store_true")
    s.set_defaults(func=cmd_simulate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"skypesiem: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SingleClass, DatasetEmpty) as exc:
        print(f"skypesiem: degenerate data: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except (MalformedCapture, SchemaMismatch, RowParseError, ModelFormatError, ScenarioError,
            ProbeError, StoreFailure, SkypeSiemError, OSError, ValueError) as exc:
        print(f"skypesiem: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
