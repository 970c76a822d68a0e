"""cprloop command line: simulate, calibrate, train, run, characterize,
haptic-test, report.

Exit codes: 0 ok, 1 usage error, 2 data error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import characterize as chz
from . import haptics, metrics, models, pipeline, sensorsim, wire
from .core import (CprgloveError, ForceClass, PoseClass, RateClass,
                   SessionLog, SubjectProfile, joint_states)
from .preprocess import Baseline
from .core import Side

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_RUNTIME = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        sys.exit(EXIT_USAGE)


def _subject(args) -> SubjectProfile:
    return SubjectProfile(args.subject, args.weight_kg)


def _cell_model(config: dict) -> sensorsim.CellModel:
    cell = config.get("cell", {})
    return sensorsim.CellModel(
        r0_ohm=cell.get("r0_ohm", 50_000.0),
        k_per_n=cell.get("k_per_n", 0.02),
        hysteresis=cell.get("hysteresis", 0.05),
        crosstalk=cell.get("crosstalk", 0.05),
        noise_counts=cell.get("noise_counts", 2.0),
    )


def _load_config(args) -> dict:
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            return json.load(fh)
    return {}


def cmd_simulate(args):
    config = _load_config(args)
    with open(args.script, "r", encoding="utf-8") as fh:
        session = sensorsim.SessionScript.from_json(json.load(fh))
    profile = _subject(args)
    result = sensorsim.simulate_session(
        session, profile, _cell_model(config), seed=args.seed
    )
    result.log.dump(args.out)
    print(f"wrote {len(result.samples)} samples, "
          f"{len(result.crests)} compressions to {args.out}")
    if args.udp:
        host, port = args.udp.rsplit(":", 1)
        stats = wire.stream(iter(result.samples), (host, int(port)), pace=args.pace)
        print(f"streamed {stats.sent} packets to {args.udp}")
    return EXIT_OK


def _calibrate_from_log(args):
    log = SessionLog.load(args.infile)
    samples = list(wire.replay(log))
    return pipeline.calibrate(samples, log, _subject(args))


def _train_models(dataset, subject_id, method="lda", cfg=None):
    cfg = cfg or models.TrainConfig()
    from .preprocess import fit_pca
    pca = fit_pca(dataset.force_X, threshold=0.95)
    from .preprocess import apply_pca
    force_model = models.fit(
        method, "force", apply_pca(pca, dataset.force_X),
        [c.value for c in dataset.force_y], cfg, pca=pca, trained_on=subject_id,
    )
    pose_model = models.fit(
        method, "pose", dataset.pose_X,
        [c.value for c in dataset.pose_y], cfg, trained_on=subject_id,
    )
    return force_model, pose_model


def _save_calibration(outdir: Path, baselines, dataset, force_model, pose_model):
    outdir.mkdir(parents=True, exist_ok=True)
    models.save_bundle(force_model, outdir / "force.cprmodel.json")
    models.save_bundle(pose_model, outdir / "pose.cprmodel.json")
    with open(outdir / "calibration.json", "w", encoding="utf-8") as fh:
        json.dump(
            {
                "baseline_palm": baselines[0].counts.tolist(),
                "baseline_dorsum": baselines[1].counts.tolist(),
                "prominence": dataset.prominence,
            },
            fh,
        )


def cmd_calibrate(args):
    baselines, dataset = _calibrate_from_log(args)
    force_model, pose_model = _train_models(dataset, args.subject, method=args.method)
    _save_calibration(Path(args.out), baselines, dataset, force_model, pose_model)
    print(f"calibrated on {len(dataset.force_y)} force peaks / "
          f"{len(dataset.pose_y)} pose peaks -> {args.out}")
    return EXIT_OK


def cmd_train(args):
    return cmd_calibrate(args)


def _load_pipeline_config(args) -> pipeline.PipelineConfig:
    mdir = Path(args.models)
    with open(mdir / "calibration.json", "r", encoding="utf-8") as fh:
        calib = json.load(fh)
    return pipeline.PipelineConfig(
        subject=_subject(args),
        force_model=models.load_bundle(mdir / "force.cprmodel.json"),
        pose_model=models.load_bundle(mdir / "pose.cprmodel.json"),
        baseline_palm=Baseline(Side.PALM, np.array(calib["baseline_palm"])),
        baseline_dorsum=Baseline(Side.DORSUM, np.array(calib["baseline_dorsum"])),
        prominence=calib["prominence"],
    )


def _udp_source(port: int, idle_timeouts: int = 3):
    rx = wire.Receiver(port=port)
    misses = 0
    try:
        while misses < idle_timeouts:
            sample = rx.recv(timeout_s=2.0)
            if sample is None:
                misses += 1
                continue
            misses = 0
            yield sample
    finally:
        rx.close()


def cmd_run(args):
    cfg = _load_pipeline_config(args)
    if args.replay:
        source = wire.replay(SessionLog.load(args.replay))
    else:
        source = _udp_source(args.listen)
    result = pipeline.run_loop(source, cfg)
    report = metrics.session_report(result.verdicts)
    report["latency"] = result.latency.stages
    print(metrics.report_to_table(report))
    print()
    print(result.latency.table())
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            fh.write(metrics.report_to_json(report))
    if args.log_out:
        result.log.dump(args.log_out)
    return EXIT_OK


def cmd_characterize(args):
    out = chz.characterize_trace(args.infile)
    print(json.dumps(out, indent=2))
    return EXIT_OK


def cmd_haptic_test(args):
    bus = haptics.VirtualBus()
    t_us = 0
    for rate, force, pose in joint_states():
        pattern = haptics.encode_feedback(rate, force, pose)
        events = haptics.schedule_pattern(pattern, t_us)
        bus.apply(events)
        print(f"{rate.value:>9} {force.value:>10} {pose.value:>15} -> "
              f"{pattern.pulse_count} pulse(s), pwm {pattern.pwm:>3}, "
              f"units {'+'.join(u.value for u in pattern.units)}"
              f"{' (alternating)' if pattern.alternating else ''}")
        t_us += 600_000
    print()
    print(haptics.timeline_text(bus))
    return EXIT_OK


def cmd_report(args):
    log = SessionLog.load(args.infile)
    verdicts = []
    prev_t = None
    for rec in log.iter_kind("pred"):
        rate = RateClass(rec["rate"]) if rec["rate"] else None
        dt = (rec["t_us"] - prev_t) / 1e3 if prev_t is not None else None
        prev_t = rec["t_us"]
        verdicts.append(
            metrics.CompressionVerdict(
                peak_t_us=rec["t_us"], rate=rate,
                force=ForceClass(rec["force"]), pose=PoseClass(rec["pose"]),
                dt_ms=dt,
            )
        )
    report = metrics.session_report(verdicts)
    if args.json:
        print(metrics.report_to_json(report))
    else:
        print(metrics.report_to_table(report))
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="cprloop", description=__doc__)
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--seed", type=int, default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run the glove simulator")
    p.add_argument("--script", required=True, help="session script JSON")
    p.add_argument("--out", required=True, help="session log output (.jsonl)")
    p.add_argument("--subject", default="sim")
    p.add_argument("--weight-kg", type=float, default=70.0)
    p.add_argument("--udp", help="also stream frames to host:port")
    p.add_argument("--pace", choices=["fast", "realtime"], default="fast")
    p.set_defaults(func=cmd_simulate)

    for name, fn in (("calibrate", cmd_calibrate), ("train", cmd_train)):
        p = sub.add_parser(name, help="fit subject-specific models")
        p.add_argument("--in", dest="infile", required=True)
        p.add_argument("--subject", required=True)
        p.add_argument("--weight-kg", type=float, required=True)
        p.add_argument("--out", required=True, help="model directory")
        p.add_argument("--method", choices=["lda", "logistic", "ridge"],
                       default="lda")
        p.set_defaults(func=fn)

    p = sub.add_parser("run", help="run the closed loop")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--replay", help="session log to replay")
    src.add_argument("--listen", type=int, help="UDP port to listen on")
    p.add_argument("--models", required=True, help="model directory")
    p.add_argument("--subject", required=True)
    p.add_argument("--weight-kg", type=float, required=True)
    p.add_argument("--report", help="write the JSON report here")
    p.add_argument("--log-out", help="write the run's session log here")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("characterize", help="sensor metrics from a trace CSV")
    p.add_argument("--in", dest="infile", required=True)
    p.set_defaults(func=cmd_characterize)

    p = sub.add_parser("haptic-test", help="replay all 36 verdict states")
    p.set_defaults(func=cmd_haptic_test)

    p = sub.add_parser("report", help="summarize a session log")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except CprgloveError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
