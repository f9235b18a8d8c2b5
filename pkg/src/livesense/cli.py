"""Command-line entry points: run (live), sim (trace synthesis), analyze.

Exit codes: 0 ok, 1 config error, 2 I/O error, 3 stream degraded.
"""

from __future__ import annotations

import argparse
import json
import signal
import sys
import time
from pathlib import Path

import numpy as np

from .config import ConfigError, SensingConfig, load_config
from .pipeline import BatchResult, Pipeline
from .service import PipelineService, SimulatorSource, TraceSource, UdpSource
from .simulator import Scene, generate_trace, load_scene
from .tracefile import TraceDecodeError, TraceWriter, read_trace, write_trace

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_IO = 2
EXIT_DEGRADED = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="livesense",
        description="Real-time Wi-Fi CSI range-Doppler sensing engine",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the live pipeline")
    run.add_argument("--source", choices=("sim", "trace", "udp"), required=True)
    run.add_argument("--scene", help="scene file (sim source)")
    run.add_argument("--trace", help="trace file (trace source)")
    run.add_argument("--listen", help="addr:port to bind (udp source)")
    run.add_argument("--config", help="sensing config file")
    run.add_argument("--mode", choices=("gesture", "presence", "efficiency"))
    run.add_argument("--serve", help="addr:port for the websocket console API")
    run.add_argument("--record", help="record raw frames to this trace file")
    run.add_argument("--static", help="serve this directory at / (console build)")
    run.add_argument(
        "--duration", type=float, default=None, help="stop after this many seconds"
    )

    sim = sub.add_parser("sim", help="synthesize a CSI trace file")
    sim.add_argument("--scene", help="scene file")
    sim.add_argument("--frames", type=int, required=True)
    sim.add_argument("--out", required=True)
    sim.add_argument("--config", help="sensing config file")

    analyze = sub.add_parser("analyze", help="offline batch analysis of a trace")
    analyze.add_argument("--trace", required=True)
    analyze.add_argument("--out-dir", required=True)
    analyze.add_argument("--config", help="sensing config file")
    analyze.add_argument("--mode", choices=("gesture", "presence", "efficiency"))
    return parser


def _load_config(args) -> SensingConfig:
    config = load_config(args.config) if args.config else SensingConfig()
    if getattr(args, "mode", None):
        import dataclasses

        config = dataclasses.replace(config, mode=args.mode)
    return config


def _load_scene(args) -> Scene:
    if args.scene:
        return load_scene(args.scene)
    return Scene()


def write_pgm(path, mag_db: np.ndarray, span_db: float = 60.0) -> None:
    """8-bit binary PGM heatmap of a dB map (top span_db below peak)."""
    peak = float(np.max(mag_db))
    scaled = np.clip((mag_db - (peak - span_db)) / span_db, 0.0, 1.0)
    pixels = (scaled * 255).astype(np.uint8)
    header = f"P5\n{pixels.shape[1]} {pixels.shape[0]}\n255\n".encode()
    with open(path, "wb") as fh:
        fh.write(header + pixels.tobytes())


def _batch_json(result: BatchResult) -> dict:
    return {
        "batch_seq": result.map.batch_seq,
        "timestamp": result.map.batch_timestamp,
        "config_id": result.config_id,
        "detections": [
            {
                "range_m": d.range_m,
                "velocity_mps": d.velocity_mps,
                "snr_db": d.snr_db,
                "refined": d.refined,
            }
            for d in result.detections
        ],
        "tracks": [
            {
                "id": t.id,
                "state": t.state,
                "range_m": t.range_m,
                "velocity_mps": t.velocity_mps,
                "snr_db": t.snr_db,
            }
            for t in result.tracks
        ],
        "vitals": None
        if result.vitals is None
        else {
            "rate_hz": result.vitals.rate_hz,
            "confidence_db": result.vitals.confidence_db,
            "range_bin": result.vitals.range_bin,
        },
        "timings_ms": {
            "sync": result.timings.sync_ms,
            "sic": result.timings.sic_ms,
            "fft": result.timings.fft_ms,
            "detect": result.timings.detect_ms,
            "total": result.timings.total_ms,
        },
        "drop_count": result.drop_count,
        "degraded_count": result.degraded_count,
    }


def cmd_sim(args) -> int:
    config = _load_config(args)
    scene = _load_scene(args)
    if args.frames < 1:
        print("error: --frames must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    frames = generate_trace(scene, config, args.frames)
    write_trace(args.out, frames, config)
    print(f"wrote {len(frames)} frames ({args.frames - len(frames)} dropped) to {args.out}")
    return EXIT_OK


def cmd_analyze(args) -> int:
    import dataclasses

    config = _load_config(args)
    header, frames = read_trace(args.trace)
    if not header.matches(config):
        config = dataclasses.replace(
            config,
            n_subcarriers=header.n_subcarriers,
            carrier_freq_hz=header.carrier_freq_hz,
            bandwidth_hz=header.bandwidth_hz,
            frame_interval_s=header.frame_interval_s,
        )
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    pipeline = Pipeline(config)
    results = pipeline.run_trace(frames)
    for result in results:
        stem = out_dir / f"batch_{result.map.batch_seq:05d}"
        with open(stem.with_suffix(".json"), "w", encoding="utf-8") as fh:
            json.dump(_batch_json(result), fh, indent=2)
        write_pgm(stem.with_suffix(".pgm"), result.map.mag_db)
    summary = {
        "trace": str(args.trace),
        "frames": len(frames),
        "batches": len(results),
        "detections": sum(len(r.detections) for r in results),
        "degraded_count": results[-1].degraded_count if results else 0,
    }
    with open(out_dir / "summary.json", "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2)
    print(
        f"analyzed {len(frames)} frames -> {len(results)} batches, "
        f"{summary['detections']} detections, out-dir {out_dir}"
    )
    return EXIT_DEGRADED if summary["degraded_count"] > 0 else EXIT_OK


def _parse_addr(value: str) -> tuple[str, int]:
    host, _, port = value.rpartition(":")
    if not host or not port.isdigit():
        raise ConfigError(f"expected addr:port, got {value!r}")
    return host, int(port)


def cmd_run(args) -> int:
    config = _load_config(args)

    if args.source == "sim":
        source = SimulatorSource(_load_scene(args), config)
    elif args.source == "trace":
        if not args.trace:
            print("error: --source trace requires --trace", file=sys.stderr)
            return EXIT_CONFIG
        header, frames = read_trace(args.trace)
        if not header.matches(config):
            print(
                "error: trace header does not match config "
                f"(N={header.n_subcarriers}, B={header.bandwidth_hz})",
                file=sys.stderr,
            )
            return EXIT_CONFIG
        source = TraceSource(frames, realtime=bool(args.serve))
    else:
        if not args.listen:
            print("error: --source udp requires --listen", file=sys.stderr)
            return EXIT_CONFIG
        host, port = _parse_addr(args.listen)
        source = UdpSource(host, port, config.n_subcarriers)

    record_writer = None
    record_fh = None
    if args.record:
        record_fh = open(args.record, "wb")
        record_writer = TraceWriter(record_fh, config)

    service = PipelineService(config, source, record_writer=record_writer)
    try:
        if args.serve:
            from .server import create_app

            host, port = _parse_addr(args.serve)
            app = create_app(service)
            if args.static:
                from fastapi.staticfiles import StaticFiles

                app.mount("/", StaticFiles(directory=args.static, html=True))
            import uvicorn

            uvicorn.run(app, host=host, port=port, log_level="warning")
        else:
            service.start()
            _wait_headless(service, args.duration)
            service.stop()
    finally:
        if record_fh is not None:
            record_fh.close()
    degraded = service.pipeline._resampler.degraded_count
    return EXIT_DEGRADED if degraded > 0 else EXIT_OK


def _print_batch_line(result: BatchResult) -> None:
    confirmed = sum(1 for t in result.tracks if t.state == "confirmed")
    print(
        f"batch {result.map.batch_seq:4d}  det={len(result.detections)}  "
        f"tracks={confirmed}  total={result.timings.total_ms:.1f} ms"
    )


def _wait_headless(service: PipelineService, duration: float | None) -> None:
    """Print one summary line per batch until the source ends or Ctrl-C."""
    stop_at = None if duration is None else time.monotonic() + duration
    next_seq = 0
    interrupted = False

    def on_sigint(signum, frame):
        nonlocal interrupted
        interrupted = True

    def print_new() -> bool:
        nonlocal next_seq
        printed = False
        for result in list(service.batches):
            if result.map.batch_seq >= next_seq:
                next_seq = result.map.batch_seq + 1
                _print_batch_line(result)
                printed = True
        return printed

    old_handler = signal.signal(signal.SIGINT, on_sigint)
    idle_polls = 0
    try:
        while not interrupted:
            if stop_at is not None and time.monotonic() >= stop_at:
                break
            printed = print_new()
            if service.exhausted.is_set() and not service._ingest:
                # Wait for the processing thread to quiesce so late-published
                # batches are printed before the tail flush.
                idle_polls = 0 if printed else idle_polls + 1
                if idle_polls >= 4:
                    with service._lock:
                        service.pipeline.flush_source()
                        tail = service.pipeline.process_available()
                    print_new()
                    for result in tail:
                        _print_batch_line(result)
                    break
            time.sleep(0.05)
    finally:
        signal.signal(signal.SIGINT, old_handler)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "sim":
            return cmd_sim(args)
        if args.command == "analyze":
            return cmd_analyze(args)
        return cmd_run(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except TraceDecodeError as exc:
        print(f"trace error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
