"""HTTP service tests: sessions, timelines, rendering, isolation."""

import base64
import io

import numpy as np
import pytest
from fastapi.testclient import TestClient

from dirfilt.nn.model import ArchConfig, init_params
from dirfilt.service import create_app
from dirfilt.stft import StftConfig
from dirfilt.wavio import read_wav, write_wav

L = 72
STFT = {"win_len": 64, "hop": 32}


@pytest.fixture()
def client():
    return TestClient(create_app())


def _scene_doc(doas=(40.0, 200.0), duration=0.3, seed=5):
    return {
        "duration_s": duration,
        "seed": seed,
        "sources": [{"doa_deg": d, "kind": "speech-noise"} for d in doas],
    }


def _make_session(client, **kwargs):
    resp = client.post("/sessions", json={"scene": _scene_doc(**kwargs), "stft": STFT})
    assert resp.status_code == 200, resp.text
    return resp.json()


def _cardioid_gains(steer_deg=0.0):
    ang = np.degrees(2 * np.pi * np.arange(L) / L)
    g = np.abs(0.5 + 0.5 * np.cos(np.radians(ang - steer_deg)))
    return np.maximum(g, 0.1).tolist()


def _decode_wav_b64(payload):
    raw = base64.b64decode(payload)
    rate, data = read_wav(io.BytesIO(raw))
    return rate, data


class TestSessions:
    def test_create_reports_geometry(self, client):
        info = _make_session(client)
        assert info["num_sources"] == 2
        assert info["sample_rate"] == 16000
        assert info["n_bins"] == 33
        assert info["n_frames"] == (4800 - 64) // 32 + 1
        assert info["l"] == L
        assert "parametric-oracle" in info["methods"]

    def test_sessions_get_distinct_ids(self, client):
        a = _make_session(client)
        b = _make_session(client)
        assert a["session_id"] != b["session_id"]

    def test_scene_without_sources_rejected(self, client):
        resp = client.post("/sessions", json={"scene": {"duration_s": 0.2, "sources": []}})
        assert resp.status_code == 422

    def test_bad_stft_rejected(self, client):
        resp = client.post("/sessions", json={"scene": _scene_doc(), "stft": {"nope": 1}})
        assert resp.status_code == 422

    def test_wav_upload_source(self, client):
        rng = np.random.default_rng(0)
        buf = io.BytesIO()
        write_wav(buf, rng.uniform(-0.4, 0.4, 4800), 16000, "pcm16")
        doc = {
            "duration_s": 0.3,
            "sources": [
                {"doa_deg": 90.0, "wav_b64": base64.b64encode(buf.getvalue()).decode()}
            ],
        }
        resp = client.post("/sessions", json={"scene": doc, "stft": STFT})
        assert resp.status_code == 200
        assert resp.json()["num_sources"] == 1

    def test_invalid_base64_rejected(self, client):
        doc = {"duration_s": 0.2, "sources": [{"doa_deg": 0.0, "wav_b64": "!!!"}]}
        resp = client.post("/sessions", json={"scene": doc})
        assert resp.status_code == 422


class TestTimeline:
    def test_set_and_echo_count(self, client):
        info = _make_session(client)
        resp = client.post(
            f"/sessions/{info['session_id']}/timeline",
            json={"entries": [{"start_frame": 0, "gains": _cardioid_gains()}]},
        )
        assert resp.status_code == 200
        assert resp.json()["entries"] == 1

    def test_unknown_session_404(self, client):
        resp = client.post(
            "/sessions/doesnotexist/timeline",
            json={"entries": [{"start_frame": 0, "gains": _cardioid_gains()}]},
        )
        assert resp.status_code == 404

    def test_wrong_length_rejected(self, client):
        info = _make_session(client)
        resp = client.post(
            f"/sessions/{info['session_id']}/timeline",
            json={"entries": [{"start_frame": 0, "gains": [1.0] * (L - 1)}]},
        )
        assert resp.status_code == 422
        assert str(L) in resp.json()["detail"]

    def test_out_of_range_gains_rejected(self, client):
        info = _make_session(client)
        gains = [0.5] * L
        gains[3] = 1.5
        resp = client.post(
            f"/sessions/{info['session_id']}/timeline",
            json={"entries": [{"start_frame": 0, "gains": gains}]},
        )
        assert resp.status_code == 422

    def test_overlapping_entries_rejected(self, client):
        info = _make_session(client)
        g = _cardioid_gains()
        resp = client.post(
            f"/sessions/{info['session_id']}/timeline",
            json={
                "entries": [
                    {"start_frame": 0, "gains": g},
                    {"start_frame": 10, "gains": g},
                    {"start_frame": 10, "gains": g},
                ]
            },
        )
        assert resp.status_code == 422

    def test_must_start_at_zero(self, client):
        info = _make_session(client)
        resp = client.post(
            f"/sessions/{info['session_id']}/timeline",
            json={"entries": [{"start_frame": 2, "gains": _cardioid_gains()}]},
        )
        assert resp.status_code == 422


class TestRender:
    def _setup(self, client, gains_list, **scene_kwargs):
        info = _make_session(client, **scene_kwargs)
        sid = info["session_id"]
        entries = [{"start_frame": s, "gains": g} for s, g in gains_list]
        resp = client.post(f"/sessions/{sid}/timeline", json={"entries": entries})
        assert resp.status_code == 200, resp.text
        return info

    def test_render_without_timeline_rejected(self, client):
        info = _make_session(client)
        resp = client.post(f"/sessions/{info['session_id']}/render", json={})
        assert resp.status_code == 422

    def test_unknown_method_rejected(self, client):
        info = self._setup(client, [(0, _cardioid_gains())])
        resp = client.post(
            f"/sessions/{info['session_id']}/render", json={"method": "magic"}
        )
        assert resp.status_code == 422

    def test_neural_method_without_model_rejected(self, client):
        info = self._setup(client, [(0, _cardioid_gains())])
        resp = client.post(
            f"/sessions/{info['session_id']}/render", json={"method": "film-jnf"}
        )
        assert resp.status_code == 422

    def test_unity_timeline_is_transparent(self, client):
        info = self._setup(client, [(0, [1.0] * L)])
        sid = info["session_id"]
        resp = client.post(f"/sessions/{sid}/render", json={})
        assert resp.status_code == 200
        doc = resp.json()
        # unity mask: processed spectrogram equals the unprocessed one
        assert doc["unprocessed_db"] == doc["processed_db"]
        rate, audio = _decode_wav_b64(doc["wav_b64"])
        assert rate == info["sample_rate"]
        assert audio.size == info["num_samples"]
        metrics = client.get(f"/sessions/{sid}/metrics").json()
        assert metrics["sdr_db"] >= 60.0
        assert metrics["unprocessed_sdr_db"] >= 60.0

    def test_applied_gains_echo_timeline(self, client):
        g0, g1 = _cardioid_gains(0.0), _cardioid_gains(180.0)
        info = self._setup(client, [(0, g0), (20, g1)])
        resp = client.post(f"/sessions/{info['session_id']}/render", json={})
        doc = resp.json()
        gains = doc["applied_gains"]
        assert len(gains) == info["n_frames"]
        assert gains[0] == g0 and gains[19] == g0
        assert gains[20] == g1 and gains[-1] == g1

    def test_frame_accurate_switch(self, client):
        g0, g1 = _cardioid_gains(0.0), _cardioid_gains(180.0)
        t0 = 40
        switched = self._setup(client, [(0, g0), (t0, g1)], seed=9)
        plain = self._setup(client, [(0, g0)], seed=9)
        wav_a = client.post(f"/sessions/{switched['session_id']}/render", json={}).json()
        wav_b = client.post(f"/sessions/{plain['session_id']}/render", json={}).json()
        _, audio_a = _decode_wav_b64(wav_a["wav_b64"])
        _, audio_b = _decode_wav_b64(wav_b["wav_b64"])
        cut = t0 * wav_a["hop"]
        np.testing.assert_array_equal(audio_a[:cut], audio_b[:cut])
        assert not np.array_equal(audio_a[cut + STFT["win_len"] :], audio_b[cut + STFT["win_len"] :])

    def test_sessions_are_isolated(self, client):
        a = self._setup(client, [(0, _cardioid_gains(0.0))], seed=11)
        b = self._setup(client, [(0, _cardioid_gains(180.0))], seed=11)
        first = client.post(f"/sessions/{a['session_id']}/render", json={}).json()
        other = client.post(f"/sessions/{b['session_id']}/render", json={}).json()
        again = client.post(f"/sessions/{a['session_id']}/render", json={}).json()
        assert first["wav_b64"] == again["wav_b64"]
        assert first["wav_b64"] != other["wav_b64"]

    def test_metrics_report_per_source_ratios(self, client):
        # single source, constant 0.5 gains: the oracle mask is exactly 0.5
        # everywhere, so the measured per-source power ratio is 20*log10(0.5)
        info = self._setup(client, [(0, [0.5] * L)], doas=(90.0,))
        sid = info["session_id"]
        resp = client.post(f"/sessions/{sid}/render", json={})
        assert resp.status_code == 200
        metrics = client.get(f"/sessions/{sid}/metrics").json()
        assert metrics["doas_deg"] == pytest.approx([90.0])
        assert metrics["source_ratios_db"] == pytest.approx(
            [20.0 * np.log10(0.5)], abs=1e-6
        )

    def test_metrics_before_render_rejected(self, client):
        info = self._setup(client, [(0, _cardioid_gains())])
        resp = client.get(f"/sessions/{info['session_id']}/metrics")
        assert resp.status_code == 422

    def test_metrics_unknown_session(self, client):
        assert client.get("/sessions/zzz/metrics").status_code == 404


class TestNeuralRender:
    @pytest.fixture()
    def neural_client(self):
        stft_cfg = StftConfig(**STFT)
        arch = ArchConfig(
            arch="film-jnf", f=stft_cfg.n_bins, l=L, bilstm_hidden=4,
            unilstm_hidden=4, feature_width=8, input_width=6,
        )
        params = init_params(arch, np.random.default_rng(3))
        return TestClient(create_app(models={"film-jnf": (params, arch, stft_cfg)}))

    def test_neural_render_and_metrics(self, neural_client):
        info = _make_session(neural_client)
        sid = info["session_id"]
        assert "film-jnf" in info["methods"]
        neural_client.post(
            f"/sessions/{sid}/timeline",
            json={"entries": [{"start_frame": 0, "gains": _cardioid_gains()}]},
        )
        resp = neural_client.post(f"/sessions/{sid}/render", json={"method": "film-jnf"})
        assert resp.status_code == 200
        metrics = neural_client.get(f"/sessions/{sid}/metrics").json()
        assert metrics["method"] == "film-jnf"
        assert np.isfinite(metrics["sdr_db"])

    def test_neural_frame_accuracy(self, neural_client):
        g0, g1 = _cardioid_gains(0.0), _cardioid_gains(180.0)
        t0 = 30
        docs = []
        for entries in ([(0, g0), (t0, g1)], [(0, g0)]):
            info = _make_session(neural_client, seed=13)
            sid = info["session_id"]
            neural_client.post(
                f"/sessions/{sid}/timeline",
                json={"entries": [{"start_frame": s, "gains": g} for s, g in entries]},
            )
            docs.append(
                neural_client.post(f"/sessions/{sid}/render", json={"method": "film-jnf"}).json()
            )
        _, audio_a = _decode_wav_b64(docs[0]["wav_b64"])
        _, audio_b = _decode_wav_b64(docs[1]["wav_b64"])
        cut = t0 * docs[0]["hop"]
        np.testing.assert_array_equal(audio_a[:cut], audio_b[:cut])

    def test_bin_count_mismatch_rejected(self, neural_client):
        resp = neural_client.post(
            "/sessions", json={"scene": _scene_doc(), "stft": {"win_len": 128, "hop": 64}}
        )
        sid = resp.json()["session_id"]
        neural_client.post(
            f"/sessions/{sid}/timeline",
            json={"entries": [{"start_frame": 0, "gains": _cardioid_gains()}]},
        )
        out = neural_client.post(f"/sessions/{sid}/render", json={"method": "film-jnf"})
        assert out.status_code == 422


class TestPatternEndpoints:
    def test_recipe_listing(self, client):
        doc = client.get("/patterns/recipes").json()
        assert doc["l"] == L
        assert len(doc["a"]) == 60
        assert all(len(p["gains"]) == L for p in doc["a"])
        assert doc["recipes"] == ["a", "b-", "b", "b+"]

    def test_resolve_cardioid(self, client):
        body = {
            "components": [
                {"kind": "dma-simplified", "mu": 0.5, "theta_s_deg": 90.0, "order_j": 1}
            ]
        }
        doc = client.post("/patterns/resolve", json=body).json()
        gains = doc["gains"]
        assert len(gains) == L
        # steered to 90 degrees: peak at index 18 of 72
        assert gains[18] == pytest.approx(1.0)
        assert gains[54] == pytest.approx(0.1)  # floored null

    def test_resolve_rect_degrees(self, client):
        body = {"components": [{"kind": "rect", "theta_start_deg": 0.0, "theta_end_deg": 90.0}]}
        gains = client.post("/patterns/resolve", json=body).json()["gains"]
        assert gains[0] == 1.0 and gains[18] == 1.0
        assert gains[36] == pytest.approx(0.1)

    def test_resolve_bad_component(self, client):
        body = {"components": [{"kind": "wedge"}]}
        assert client.post("/patterns/resolve", json=body).status_code == 422

    def test_health(self, client):
        doc = client.get("/health").json()
        assert doc["status"] == "ok"
        assert doc["l"] == L
