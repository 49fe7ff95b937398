"""Live control and metering endpoint.

A background runner paces a looped audio source through the engine in real
time.  Clients connect to the ``/control`` WebSocket and exchange JSON
messages (one object per message, snake_case fields, a ``type``
discriminator; server events additionally carry ``proto``):

* ``set_atten {db}``, ``set_thresholds {silence_below_db, df_off_above_db}``,
  ``set_stages {erb, df}``, ``set_estimator {kind}``, ``get_config``,
  ``subscribe {meter_hz}``
* answered by exactly one ``config_ack {config}`` or ``error {code, message}``;
  subscribed clients additionally receive ``meter`` events at their rate.

Invalid or unknown messages produce an ``error`` event and leave both the
connection and the engine untouched.  Telemetry is decimated from the
per-hop meters; a slow client only ever delays its own task.
"""

from __future__ import annotations

import asyncio
import dataclasses
import json
import sys
import threading
import time
from pathlib import Path
from typing import Literal, Union

import numpy as np
from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from pydantic import BaseModel, Field, ValidationError

from .engine import Engine, EngineConfig, MeterFrame, StageOverrides
from .stage_control import AttenLimit, GateThresholds

PROTO_VERSION = 1
DEFAULT_METER_HZ = 10.0


class SetAtten(BaseModel):
    type: Literal["set_atten"]
    db: float


class SetThresholds(BaseModel):
    type: Literal["set_thresholds"]
    silence_below_db: float
    df_off_above_db: float


class SetStages(BaseModel):
    type: Literal["set_stages"]
    erb: bool
    df: bool


class SetEstimator(BaseModel):
    type: Literal["set_estimator"]
    kind: Literal["passthrough", "blind"]


class GetConfig(BaseModel):
    type: Literal["get_config"]


class Subscribe(BaseModel):
    type: Literal["subscribe"]
    meter_hz: float = Field(default=DEFAULT_METER_HZ, gt=0.0, le=50.0)


class ControlMessage(BaseModel):
    root: Union[SetAtten, SetThresholds, SetStages, SetEstimator, GetConfig, Subscribe] = Field(
        discriminator="type"
    )


class LoopSource:
    """Endless hop iterator over a fixed signal (the file-loop source).

    Live capture would implement the same ``next_hop`` contract.
    """

    def __init__(self, samples: np.ndarray, hop_len: int) -> None:
        x = np.asarray(samples, dtype=np.float32)
        if x.size < hop_len:
            x = np.resize(x, hop_len)
        n = (x.size // hop_len) * hop_len
        self._hops = x[:n].reshape(-1, hop_len)
        self._i = 0

    def next_hop(self) -> np.ndarray:
        hop = self._hops[self._i]
        self._i = (self._i + 1) % self._hops.shape[0]
        return hop


class EngineRunner(threading.Thread):
    """Paces the source through the engine at wall-clock rate and keeps the
    newest meter frame for the broadcasters."""

    def __init__(self, engine: Engine, source: LoopSource) -> None:
        super().__init__(daemon=True, name="dfnr-audio")
        self.engine = engine
        self.source = source
        self._stop_event = threading.Event()  # Thread itself owns `_stop`
        self.latest_meter: MeterFrame | None = None
        self.meter_seq = 0

    def run(self) -> None:
        hop_s = self.engine.config.stft.hop_duration_s
        deadline = time.monotonic()
        while not self._stop_event.is_set():
            self.engine.process_hop(self.source.next_hop())
            for m in self.engine.take_meters():
                self.latest_meter = m
                self.meter_seq += 1
            deadline += hop_s
            delay = deadline - time.monotonic()
            if delay > 0:
                time.sleep(delay)
            else:
                # fell behind; drop the backlog instead of bursting
                deadline = time.monotonic()

    def stop(self) -> None:
        self._stop_event.set()


class Controller:
    """Serializes config mutations from any number of control clients."""

    def __init__(self, engine: Engine, runner: EngineRunner | None = None) -> None:
        self.engine = engine
        self.runner = runner
        self._lock = threading.Lock()

    def config_payload(self) -> dict:
        cfg = self.engine.snapshot_config()
        return {
            "atten_db": cfg.atten.max_atten_db,
            "silence_below_db": cfg.thresholds.silence_below_db,
            "df_off_above_db": cfg.thresholds.df_off_above_db,
            "erb_enabled": cfg.stage_overrides.erb_enabled,
            "df_enabled": cfg.stage_overrides.df_enabled,
            "estimator": cfg.estimator_kind,
            "sample_rate_hz": cfg.stft.sample_rate_hz,
            "latency_ms": 1000.0
            * (cfg.stft.window_len + cfg.stft.lookahead_frames * cfg.stft.hop_len)
            / cfg.stft.sample_rate_hz,
        }

    def _ack(self) -> dict:
        return {"proto": PROTO_VERSION, "type": "config_ack", "config": self.config_payload()}

    def _error(self, code: str, message: str) -> dict:
        return {"proto": PROTO_VERSION, "type": "error", "code": code, "message": message}

    def handle(self, raw: str) -> tuple[dict, float | None]:
        """Apply one wire message; returns (reply event, new meter rate or
        None if the subscription is unchanged)."""
        try:
            payload = json.loads(raw)
        except json.JSONDecodeError as exc:
            return self._error("bad_json", str(exc)), None
        if not isinstance(payload, dict) or "type" not in payload:
            return self._error("bad_message", "expected an object with a 'type' field"), None
        try:
            msg = ControlMessage(root=payload).root
        except ValidationError as exc:
            known = {"set_atten", "set_thresholds", "set_stages", "set_estimator", "get_config", "subscribe"}
            if payload.get("type") not in known:
                return self._error("unknown_type", f"unknown message type {payload.get('type')!r}"), None
            return self._error("invalid_value", exc.errors()[0].get("msg", "invalid message")), None

        if isinstance(msg, GetConfig):
            return self._ack(), None
        if isinstance(msg, Subscribe):
            return self._ack(), float(msg.meter_hz)

        with self._lock:
            cfg = self.engine.snapshot_config()
            try:
                if isinstance(msg, SetAtten):
                    cfg = dataclasses.replace(cfg, atten=AttenLimit(msg.db))
                elif isinstance(msg, SetThresholds):
                    cfg = dataclasses.replace(
                        cfg,
                        thresholds=GateThresholds(msg.silence_below_db, msg.df_off_above_db),
                    )
                elif isinstance(msg, SetStages):
                    cfg = dataclasses.replace(
                        cfg, stage_overrides=StageOverrides(erb_enabled=msg.erb, df_enabled=msg.df)
                    )
                elif isinstance(msg, SetEstimator):
                    cfg = dataclasses.replace(cfg, estimator_kind=msg.kind)
                self.engine.update_config(cfg)
            except ValueError as exc:
                return self._error("invalid_value", str(exc)), None
        return self._ack(), None


def _meter_event(m: MeterFrame) -> dict:
    event = {"proto": PROTO_VERSION, "type": "meter"}
    event.update(m.as_dict())
    return event


def build_app(controller: Controller, panel_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="dfnr control service")

    @app.get("/healthz")
    def healthz() -> dict:
        running = controller.runner.is_alive() if controller.runner else False
        return {
            "proto": PROTO_VERSION,
            "status": "running" if running else "idle",
            "hops_processed": controller.engine.hops_processed,
            "estimator": controller.engine.snapshot_config().estimator_kind,
            "config": controller.config_payload(),
        }

    @app.websocket("/control")
    async def control(ws: WebSocket) -> None:
        await ws.accept()
        meter_task: asyncio.Task | None = None

        async def stream_meters(hz: float) -> None:
            interval = 1.0 / hz
            last_seq = -1
            runner = controller.runner
            while True:
                await asyncio.sleep(interval)
                if runner is None or runner.latest_meter is None:
                    continue
                if runner.meter_seq != last_seq:
                    last_seq = runner.meter_seq
                    await ws.send_text(json.dumps(_meter_event(runner.latest_meter)))

        try:
            while True:
                raw = await ws.receive_text()
                reply, meter_hz = controller.handle(raw)
                await ws.send_text(json.dumps(reply))
                if meter_hz is not None:
                    if meter_task is not None:
                        meter_task.cancel()
                    meter_task = asyncio.create_task(stream_meters(meter_hz))
        except WebSocketDisconnect:
            pass
        finally:
            if meter_task is not None:
                meter_task.cancel()

    if panel_dir and Path(panel_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(panel_dir), html=True), name="panel")
    return app


def serve_from_args(args) -> int:
    """Entry point used by the CLI's --serve flag."""
    import uvicorn

    from .engine import EngineConfig
    from .wavio import read_wav

    if not args.loop_file:
        print("dfnr: --serve requires --loop-file PATH", file=sys.stderr)
        return 2
    if args.estimator == "oracle":
        print("dfnr: the oracle estimator is unavailable in live mode", file=sys.stderr)
        return 2
    try:
        wav = read_wav(args.loop_file)
    except (OSError, ValueError) as exc:
        print(f"dfnr: cannot read {args.loop_file}: {exc}", file=sys.stderr)
        return 1
    if wav.sample_rate_hz != 48000:
        print("dfnr: loop file must be 48 kHz", file=sys.stderr)
        return 2
    try:
        host, port = args.serve.rsplit(":", 1)
    except ValueError:
        print("dfnr: --serve expects HOST:PORT", file=sys.stderr)
        return 2

    cfg = EngineConfig(
        thresholds=GateThresholds(args.silence_below_db, args.df_off_above_db),
        atten=AttenLimit(args.atten_db),
        estimator_kind=args.estimator,
        stage_overrides=StageOverrides(erb_enabled=not args.no_erb, df_enabled=not args.no_df),
    )
    engine = Engine(cfg)
    runner = EngineRunner(engine, LoopSource(wav.samples, cfg.stft.hop_len))
    controller = Controller(engine, runner)
    panel = Path(__file__).resolve().parents[2] / "frontend" / "dist"
    app = build_app(controller, panel_dir=panel if panel.is_dir() else None)
    runner.start()
    try:
        uvicorn.run(app, host=host, port=int(port), log_level="warning")
    finally:
        runner.stop()
    return 0
