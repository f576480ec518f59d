"""HTTP service for interactive, frame-accurate pattern filtering.

Sessions wrap one simulated scene each. A client pushes a pattern timeline
(L-gain vectors keyed by start frame), renders with the oracle baseline or a
loaded neural model, and reads back the processed audio, the per-frame gains
that were applied, and spectrogram frames for display. The pattern active at
frame t conditions exactly frame t.

The simulation is anechoic: unlike a live room demo there is no reverb, so
pattern changes act on the direct path only. Wire payloads carry plain gain
vectors; analytic specs are resolved to vectors via POST /patterns/resolve.
"""

from __future__ import annotations

import base64
import io
import math
import threading
import uuid
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .errors import IngestionError, NumericalError, ValidationError
from .metrics import sdr, wideband_ratio
from .nn.loss import loss_l1
from .patterns import (
    DEFAULT_FLOOR_DB,
    DEFAULT_L,
    AnalyticPattern,
    PatternVector,
    gen_recipe_a,
    sample_pattern,
)
from .pipeline import METHOD_NAMES, expand_timeline, process_scene
from .scene import (
    SceneSpec,
    SourceSpec,
    build_default_array,
    render_mics,
    render_target,
)
from .sources import make_source
from .stft import StftConfig, stft
from .wavio import DEFAULT_SAMPLE_RATE, read_wav, resample_to, to_mono, write_wav

_DB_FLOOR = 1e-12


# ---------------------------------------------------------------------------
# request bodies


class SessionBody(BaseModel):
    scene: dict
    stft: Optional[dict] = None


class TimelineEntryBody(BaseModel):
    start_frame: int
    gains: list[float]


class TimelineBody(BaseModel):
    entries: list[TimelineEntryBody]


class RenderBody(BaseModel):
    method: str = "parametric-oracle"
    wav_format: str = "pcm16"


class ResolveBody(BaseModel):
    components: list[dict]
    floor_db: float = DEFAULT_FLOOR_DB
    l: Optional[int] = None


# ---------------------------------------------------------------------------
# session state


@dataclass
class _Session:
    sid: str
    rendered: object
    stft_cfg: StftConfig
    n_frames: int
    entries: list = field(default_factory=list)  # [(start_frame, PatternVector)]
    per_frame: Optional[list] = None
    last: Optional[dict] = None  # method, vectors, result of the latest render
    lock: threading.Lock = field(default_factory=threading.Lock)


def _scene_spec_from_doc(doc: dict) -> SceneSpec:
    """SceneSpec from the service wire form; sources are synthetic or wav_b64."""
    if not isinstance(doc, dict):
        raise ValidationError("scene must be a JSON object")
    duration = float(doc.get("duration_s", 2.0))
    seed = int(doc.get("seed", 0))
    snr = doc.get("noise_snr_db")
    n = int(round(duration * DEFAULT_SAMPLE_RATE))
    sources = []
    for i, s in enumerate(doc.get("sources", [])):
        if "doa_deg" not in s:
            raise ValidationError(f"source {i} is missing doa_deg")
        doa = math.radians(float(s["doa_deg"]))
        dist = float(s.get("distance_m", 1.5))
        if "wav_b64" in s:
            try:
                raw = base64.b64decode(s["wav_b64"], validate=True)
            except Exception:
                raise ValidationError(f"source {i}: wav_b64 is not valid base64") from None
            rate, data = read_wav(io.BytesIO(raw))
            sig = to_mono(data)
            if rate != DEFAULT_SAMPLE_RATE:
                sig = resample_to(sig, rate, DEFAULT_SAMPLE_RATE)
        else:
            kind = s.get("kind", "speech-noise")
            src_seed = s.get("seed")
            rng = np.random.default_rng((seed, i) if src_seed is None else int(src_seed))
            sig = make_source(kind, n, rng, DEFAULT_SAMPLE_RATE)
        sources.append(SourceSpec(doa=doa, distance=dist, signal=sig))
    if not sources:
        raise ValidationError("scene needs at least one source")
    return SceneSpec(sources=tuple(sources), noise_snr_db=snr, duration=duration, rng_seed=seed)


def _wav_b64(signal: np.ndarray, sample_rate: int, fmt: str) -> str:
    buf = io.BytesIO()
    write_wav(buf, signal, sample_rate, fmt)
    return base64.b64encode(buf.getvalue()).decode("ascii")


def _spec_db(spec_data: np.ndarray) -> list:
    db = 20.0 * np.log10(np.abs(spec_data) + _DB_FLOOR)
    return [[round(float(v), 3) for v in row] for row in db]


# ---------------------------------------------------------------------------
# app factory


def create_app(models: Optional[dict] = None, default_stft: Optional[StftConfig] = None) -> FastAPI:
    """Service instance.

    `models` maps arch name to (params, ArchConfig, StftConfig) for the
    neural methods; the oracle baseline is always available. Model parameters
    are never mutated, so they are shared read-only across sessions.
    """
    models = dict(models or {})
    app = FastAPI(title="dirfilt service")
    # the pattern editor is served from its own origin (static files), so the
    # browser needs permissive CORS to reach the API
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    sessions: dict = {}
    registry_lock = threading.Lock()
    geometry = build_default_array()

    widths = {cfg.l for _, cfg, _ in models.values()}
    if len(widths) > 1:
        raise ValidationError(f"loaded models disagree on pattern length: {sorted(widths)}")
    service_l = widths.pop() if widths else DEFAULT_L
    if default_stft is None:
        stft_cfgs = {s for _, _, s in models.values()}
        default_stft = stft_cfgs.pop() if len(stft_cfgs) == 1 else StftConfig()

    def _error(status: int, message: str) -> JSONResponse:
        return JSONResponse(status_code=status, content={"detail": message})

    @app.exception_handler(ValidationError)
    async def _on_validation(request: Request, exc: ValidationError):
        return _error(422, str(exc))

    @app.exception_handler(IngestionError)
    async def _on_ingestion(request: Request, exc: IngestionError):
        return _error(422, str(exc))

    @app.exception_handler(NumericalError)
    async def _on_numerical(request: Request, exc: NumericalError):
        return _error(500, str(exc))

    def _get_session(sid: str) -> _Session:
        with registry_lock:
            session = sessions.get(sid)
        if session is None:
            raise _NotFound(f"unknown session {sid!r}")
        return session

    class _NotFound(Exception):
        pass

    @app.exception_handler(_NotFound)
    async def _on_not_found(request: Request, exc: _NotFound):
        return _error(404, str(exc))

    @app.get("/health")
    def health():
        return {
            "status": "ok",
            "methods": ["parametric-oracle"] + sorted(models),
            "l": service_l,
            "sessions": len(sessions),
        }

    @app.get("/patterns/recipes")
    def recipes():
        presets = []
        for i, pat in enumerate(gen_recipe_a()):
            comp = pat.components[0]
            vec = sample_pattern(pat, service_l)
            presets.append(
                {
                    "index": i,
                    "name": f"mu={comp.mu:.1f} steer={round(math.degrees(comp.theta_s))}",
                    "gains": [float(g) for g in vec.gains],
                }
            )
        return {"l": service_l, "recipes": ["a", "b-", "b", "b+"], "a": presets}

    @app.post("/patterns/resolve")
    def resolve(body: ResolveBody):
        l = body.l or service_l
        pattern = AnalyticPattern.from_json_dict(
            {"components": body.components, "floor_db": body.floor_db}
        )
        vec = sample_pattern(pattern, l)
        return {"l": l, "gains": [float(g) for g in vec.gains]}

    @app.post("/sessions")
    def create_session(body: SessionBody):
        if body.stft:
            try:
                stft_cfg = StftConfig(**body.stft)
            except TypeError as exc:
                raise ValidationError(f"bad stft config: {exc}") from None
        else:
            stft_cfg = default_stft
        spec = _scene_spec_from_doc(body.scene)
        rendered = render_mics(spec, geometry, stft_cfg.sample_rate)
        n_frames = stft_cfg.n_frames(rendered.num_samples)
        sid = uuid.uuid4().hex[:12]
        session = _Session(sid=sid, rendered=rendered, stft_cfg=stft_cfg, n_frames=n_frames)
        with registry_lock:
            sessions[sid] = session
        return {
            "session_id": sid,
            "n_frames": n_frames,
            "n_bins": stft_cfg.n_bins,
            "hop": stft_cfg.hop,
            "win_len": stft_cfg.win_len,
            "sample_rate": rendered.sample_rate,
            "num_samples": rendered.num_samples,
            "num_sources": rendered.num_sources,
            "doas_deg": [math.degrees(d) for d in rendered.doas],
            "l": service_l,
            "methods": ["parametric-oracle"] + sorted(models),
        }

    @app.post("/sessions/{sid}/timeline")
    def set_timeline(sid: str, body: TimelineBody):
        session = _get_session(sid)
        entries = []
        for i, e in enumerate(body.entries):
            if len(e.gains) != service_l:
                raise ValidationError(
                    f"timeline entry {i}: expected {service_l} gains, got {len(e.gains)}"
                )
            entries.append((e.start_frame, PatternVector(gains=np.asarray(e.gains))))
        per_frame = expand_timeline(entries, session.n_frames)
        with session.lock:
            session.entries = entries
            session.per_frame = per_frame
            session.last = None
        return {"session_id": sid, "entries": len(entries), "n_frames": session.n_frames}

    @app.post("/sessions/{sid}/render")
    def render(sid: str, body: RenderBody):
        session = _get_session(sid)
        if body.method not in METHOD_NAMES:
            raise ValidationError(f"unknown method {body.method!r}, expected one of {METHOD_NAMES}")
        params = arch_cfg = None
        if body.method != "parametric-oracle":
            if body.method not in models:
                raise ValidationError(f"no model loaded for method {body.method!r}")
            params, arch_cfg, _ = models[body.method]
            if arch_cfg.f != session.stft_cfg.n_bins:
                raise ValidationError(
                    f"model expects {arch_cfg.f} bins but the session has {session.stft_cfg.n_bins}"
                )
        with session.lock:
            if session.per_frame is None:
                raise ValidationError("no timeline set for this session")
            vectors = [session.entries[0][1]] if len(session.entries) == 1 else session.per_frame
            result = process_scene(
                session.rendered, session.stft_cfg, vectors, body.method, params, arch_cfg
            )
            session.last = {"method": body.method, "vectors": list(vectors), "result": result}
            applied = session.per_frame
        return {
            "session_id": sid,
            "method": body.method,
            "wav_b64": _wav_b64(result.signal, session.rendered.sample_rate, body.wav_format),
            "wav_format": body.wav_format,
            "sample_rate": session.rendered.sample_rate,
            "n_frames": session.n_frames,
            "hop": session.stft_cfg.hop,
            "applied_gains": [[float(g) for g in v.gains] for v in applied],
            "unprocessed_db": _spec_db(result.ref_spec.data),
            "processed_db": _spec_db(result.out_spec.data),
        }

    @app.get("/sessions/{sid}/metrics")
    def metrics(sid: str):
        session = _get_session(sid)
        with session.lock:
            if session.last is None:
                raise ValidationError("render the session before asking for metrics")
            vectors = session.last["vectors"]
            result = session.last["result"]
            target = render_target(session.rendered, vectors, session.stft_cfg)
            # per-source power ratio of the applied mask: the measured gain the
            # filter imposed on each source direction, for pattern overlays
            ratios = []
            for component in session.rendered.ref_components:
                ratio = wideband_ratio(result.mask, stft(component, session.stft_cfg))
                ratios.append(10.0 * math.log10(max(ratio, _DB_FLOOR)))
            return {
                "session_id": sid,
                "method": session.last["method"],
                "sdr_db": sdr(target, result.signal),
                "unprocessed_sdr_db": sdr(target, result.unprocessed),
                "loss": loss_l1(target, result.signal),
                "doas_deg": [math.degrees(d) for d in session.rendered.doas],
                "source_ratios_db": ratios,
            }

    return app
