import json
import time

import numpy as np
import pytest
from fastapi.testclient import TestClient

from dfnr.control_service import Controller, EngineRunner, LoopSource, build_app
from dfnr.engine import Engine, EngineConfig


@pytest.fixture
def service(rng):
    """Engine + real-time runner on looped stationary noise + test client."""
    engine = Engine(EngineConfig(estimator_kind="blind"))
    noise = (0.1 * rng.standard_normal(48000 * 2)).astype(np.float32)
    runner = EngineRunner(engine, LoopSource(noise, 480))
    controller = Controller(engine, runner)
    app = build_app(controller)
    runner.start()
    with TestClient(app) as client:
        yield client, controller, engine
    runner.stop()
    runner.join(timeout=2.0)


def _send(ws, payload):
    """Send one message and return its reply, skipping interleaved meters."""
    ws.send_text(json.dumps(payload))
    msg = ws.receive_json()
    while msg["type"] == "meter":
        msg = ws.receive_json()
    return msg


class TestHttp:
    def test_healthz_reports_running_engine(self, service):
        client, controller, engine = service
        body = client.get("/healthz").json()
        assert body["status"] == "running"
        assert body["proto"] == 1
        assert body["config"]["sample_rate_hz"] == 48000
        assert body["config"]["latency_ms"] == pytest.approx(40.0)


class TestControlMessages:
    def test_get_config_acked_with_full_config(self, service):
        client, _, engine = service
        with client.websocket_connect("/control") as ws:
            reply = _send(ws, {"type": "get_config"})
        assert reply["type"] == "config_ack"
        assert reply["proto"] == 1
        cfg = reply["config"]
        assert cfg["estimator"] == "blind"
        assert cfg["atten_db"] == 100.0
        assert cfg["silence_below_db"] == -10.0
        assert cfg["df_off_above_db"] == 20.0
        assert cfg["erb_enabled"] is True and cfg["df_enabled"] is True

    def test_set_atten_acked_and_applied(self, service):
        client, _, engine = service
        with client.websocket_connect("/control") as ws:
            reply = _send(ws, {"type": "set_atten", "db": 12.0})
        assert reply["type"] == "config_ack"
        assert reply["config"]["atten_db"] == 12.0
        assert engine.snapshot_config().atten.max_atten_db == 12.0

    def test_set_thresholds_and_stages(self, service):
        client, _, engine = service
        with client.websocket_connect("/control") as ws:
            r1 = _send(ws, {"type": "set_thresholds", "silence_below_db": -5.0, "df_off_above_db": 15.0})
            r2 = _send(ws, {"type": "set_stages", "erb": True, "df": False})
        assert r1["config"]["silence_below_db"] == -5.0
        assert r2["config"]["df_enabled"] is False
        cfg = engine.snapshot_config()
        assert cfg.thresholds.df_off_above_db == 15.0
        assert cfg.stage_overrides.df_enabled is False

    def test_invalid_thresholds_rejected_state_unchanged(self, service):
        client, _, engine = service
        before = engine.snapshot_config()
        with client.websocket_connect("/control") as ws:
            reply = _send(ws, {"type": "set_thresholds", "silence_below_db": 50.0, "df_off_above_db": 60.0})
        assert reply["type"] == "error"
        assert reply["code"] == "invalid_value"
        assert engine.snapshot_config() == before

    def test_unknown_type_is_error_not_disconnect(self, service):
        client, _, _ = service
        with client.websocket_connect("/control") as ws:
            reply = _send(ws, {"type": "reboot"})
            assert reply["type"] == "error"
            assert reply["code"] == "unknown_type"
            follow_up = _send(ws, {"type": "get_config"})
            assert follow_up["type"] == "config_ack"

    def test_malformed_json_is_error(self, service):
        client, _, _ = service
        with client.websocket_connect("/control") as ws:
            ws.send_text("{not json")
            reply = ws.receive_json()
        assert reply["type"] == "error"
        assert reply["code"] == "bad_json"

    def test_oracle_estimator_rejected_live(self, service):
        client, _, engine = service
        with client.websocket_connect("/control") as ws:
            reply = _send(ws, {"type": "set_estimator", "kind": "oracle"})
        assert reply["type"] == "error"
        assert engine.snapshot_config().estimator_kind == "blind"

    def test_set_estimator_passthrough(self, service):
        client, _, engine = service
        with client.websocket_connect("/control") as ws:
            reply = _send(ws, {"type": "set_estimator", "kind": "passthrough"})
        assert reply["type"] == "config_ack"
        assert reply["config"]["estimator"] == "passthrough"


class TestMeters:
    def test_subscription_rate_within_2hz(self, service):
        client, _, _ = service
        with client.websocket_connect("/control") as ws:
            assert _send(ws, {"type": "subscribe", "meter_hz": 10})["type"] == "config_ack"
            stamps = []
            while len(stamps) < 20:
                msg = ws.receive_json()
                if msg["type"] == "meter":
                    stamps.append(time.monotonic())
        elapsed = stamps[-1] - stamps[0]
        rate = (len(stamps) - 1) / elapsed
        assert 8.0 <= rate <= 12.0

    def test_meter_fields(self, service):
        client, _, _ = service
        with client.websocket_connect("/control") as ws:
            _send(ws, {"type": "subscribe", "meter_hz": 20})
            msg = ws.receive_json()
            while msg["type"] != "meter":
                msg = ws.receive_json()
        assert set(msg) >= {
            "frame_index", "xi_db", "decision", "mean_gain", "df_delta_db", "in_rms_db", "out_rms_db",
        }
        assert -15.0 <= msg["xi_db"] <= 35.0
        assert msg["decision"] in ("silence", "erb_only", "full")

    def test_atten_limit_reflected_in_meters_and_within_100ms(self, service):
        client, _, engine = service
        with client.websocket_connect("/control") as ws:
            _send(ws, {"type": "subscribe", "meter_hz": 20})
            # stationary noise + blind estimator gates to silence, so the
            # pre-change meters show deep attenuation
            time.sleep(1.0)
            frame_at_send = engine.hops_processed
            reply = _send(ws, {"type": "set_atten", "db": 12.0})
            assert reply["type"] == "config_ack"
            first_ok = None
            deadline = time.monotonic() + 5.0
            metered = []
            while time.monotonic() < deadline:
                msg = ws.receive_json()
                if msg["type"] != "meter":
                    continue
                metered.append(msg)
                drop = msg["in_rms_db"] - msg["out_rms_db"]
                if msg["frame_index"] >= frame_at_send and drop <= 13.0:
                    first_ok = msg
                    break
            assert first_ok is not None, "limiter never reflected in meters"
            assert first_ok["frame_index"] - frame_at_send <= 10
            # steady state: output never more than the limit below the input
            tail = []
            while len(tail) < 20:
                msg = ws.receive_json()
                if msg["type"] == "meter":
                    tail.append(msg["in_rms_db"] - msg["out_rms_db"])
            assert max(tail) <= 13.0
