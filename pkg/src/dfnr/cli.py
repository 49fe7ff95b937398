"""File-processing and service front end.

Offline mode reads a mono 48 kHz WAV, runs it through the engine with the
latency flushed and the length preserved, and writes the result in the same
sample format.  ``--serve`` switches to the live control/metering service
instead.

Exit codes: 0 success, 1 I/O failure, 2 invalid invocation.
"""

from __future__ import annotations

import argparse
import csv
import sys
import time


from .engine import Engine, EngineConfig, StageOverrides, run_stream
from .spectral_core import latency_samples
from .stage_control import AttenLimit, GateThresholds
from .wavio import WavFormatError, read_wav, write_wav

EXIT_OK = 0
EXIT_IO = 1
EXIT_USAGE = 2

REQUIRED_RATE = 48000


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="dfnr",
        description="Two-stage noise reduction for mono 48 kHz WAV files, "
        "plus a live control/metering service.",
    )
    p.add_argument("--input", help="input WAV (mono, 48 kHz, PCM16 or float32)")
    p.add_argument("--output", help="enhanced output WAV path")
    p.add_argument("--clean", help="aligned clean reference WAV (oracle estimator)")
    p.add_argument(
        "--estimator",
        choices=["passthrough", "blind", "oracle"],
        default="blind",
        help="gain/filter estimator backend (default: blind)",
    )
    p.add_argument("--atten-db", type=float, default=100.0, help="maximum attenuation in dB")
    p.add_argument("--silence-below-db", type=float, default=-10.0, help="silence gate threshold")
    p.add_argument("--df-off-above-db", type=float, default=20.0, help="filter-stage off threshold")
    p.add_argument("--no-erb", action="store_true", help="disable the band-gain stage")
    p.add_argument("--no-df", action="store_true", help="disable the multi-frame filter stage")
    p.add_argument("--rtf", action="store_true", help="print a real-time-factor summary line")
    p.add_argument("--meters", metavar="PATH", help="write per-frame telemetry CSV")
    p.add_argument("--serve", metavar="ADDR", help="run the control service on host:port")
    p.add_argument("--loop-file", metavar="PATH", help="WAV to loop as the service audio source")
    return p


def _engine_config(args) -> EngineConfig:
    return EngineConfig(
        thresholds=GateThresholds(args.silence_below_db, args.df_off_above_db),
        atten=AttenLimit(args.atten_db),
        estimator_kind=args.estimator,
        stage_overrides=StageOverrides(erb_enabled=not args.no_erb, df_enabled=not args.no_df),
    )


def _fail(code: int, message: str) -> int:
    print(f"dfnr: {message}", file=sys.stderr)
    return code


def run(args: argparse.Namespace) -> int:
    if args.serve:
        from . import control_service

        return control_service.serve_from_args(args)

    if not args.input or not args.output:
        return _fail(EXIT_USAGE, "--input and --output are required (or use --serve)")
    if args.estimator == "oracle" and not args.clean:
        return _fail(EXIT_USAGE, "the oracle estimator requires --clean REF.wav")

    try:
        wav = read_wav(args.input)
    except WavFormatError as exc:
        return _fail(EXIT_USAGE, str(exc))
    except (OSError, ValueError) as exc:
        return _fail(EXIT_IO, f"cannot read {args.input}: {exc}")
    if wav.sample_rate_hz != REQUIRED_RATE:
        return _fail(
            EXIT_USAGE,
            f"{args.input}: sample rate {wav.sample_rate_hz} Hz unsupported; "
            f"input must be {REQUIRED_RATE} Hz (no resampling)",
        )

    clean = None
    if args.clean:
        try:
            cwav = read_wav(args.clean)
        except WavFormatError as exc:
            return _fail(EXIT_USAGE, str(exc))
        except (OSError, ValueError) as exc:
            return _fail(EXIT_IO, f"cannot read {args.clean}: {exc}")
        if cwav.sample_rate_hz != REQUIRED_RATE:
            return _fail(EXIT_USAGE, f"{args.clean}: clean reference must be {REQUIRED_RATE} Hz")
        if cwav.samples.shape != wav.samples.shape:
            return _fail(EXIT_USAGE, "clean reference length does not match input")
        clean = cwav.samples

    try:
        cfg = _engine_config(args)
    except ValueError as exc:
        return _fail(EXIT_USAGE, str(exc))

    # meters must cover every frame of the file, so size the queue to fit
    hop = cfg.stft.hop_len
    n_hops = -(-len(wav.samples) // hop) + latency_samples(cfg.stft) // hop
    engine = Engine(cfg, meter_capacity=max(n_hops, 16))
    start = time.perf_counter()
    enhanced = run_stream(engine, wav.samples, clean)
    wall = time.perf_counter() - start

    try:
        write_wav(args.output, enhanced, REQUIRED_RATE, wav.sample_format)
    except OSError as exc:
        return _fail(EXIT_IO, f"cannot write {args.output}: {exc}")

    if args.meters:
        try:
            with open(args.meters, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(
                    ["frame_index", "xi_db", "decision", "mean_gain", "df_delta_db", "in_rms_db", "out_rms_db"]
                )
                for m in engine.take_meters():
                    w.writerow(
                        [
                            m.frame_index,
                            f"{m.xi_db:.3f}",
                            m.decision.value,
                            f"{m.mean_gain:.5f}",
                            f"{m.df_delta_db:.3f}",
                            f"{m.in_rms_db:.2f}",
                            f"{m.out_rms_db:.2f}",
                        ]
                    )
        except OSError as exc:
            return _fail(EXIT_IO, f"cannot write {args.meters}: {exc}")

    if args.rtf:
        audio_s = len(wav.samples) / REQUIRED_RATE
        rtf = wall / audio_s if audio_s > 0 else 0.0
        print(
            f"rtf {rtf:.4f} audio_s {audio_s:.2f} wall_s {wall:.3f} estimator {args.estimator}"
        )
    return EXIT_OK


def main(argv: list[str] | None = None) -> None:
    args = build_parser().parse_args(argv)
    sys.exit(run(args))


if __name__ == "__main__":
    main()
