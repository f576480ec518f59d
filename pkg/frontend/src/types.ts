// Wire types for the dirfilt service HTTP+JSON API. Field names follow the
// JSON payloads exactly; every numeric value is a decimal double.

export interface HealthResponse {
  status: string;
  methods: string[];
  l: number;
  sessions: number;
}

export interface RecipePreset {
  index: number;
  name: string;
  gains: number[];
}

export interface RecipesResponse {
  l: number;
  recipes: string[];
  a: RecipePreset[];
}

export interface ResolveResponse {
  l: number;
  gains: number[];
}

export interface SceneSourceDoc {
  doa_deg: number;
  distance_m?: number;
  kind?: string;
  seed?: number;
  wav_b64?: string;
}

export interface SceneDoc {
  duration_s?: number;
  seed?: number;
  noise_snr_db?: number | null;
  sources: SceneSourceDoc[];
}

export interface SessionInfo {
  session_id: string;
  n_frames: number;
  n_bins: number;
  hop: number;
  win_len: number;
  sample_rate: number;
  num_samples: number;
  num_sources: number;
  doas_deg: number[];
  l: number;
  methods: string[];
}

export interface TimelineEntryWire {
  start_frame: number;
  gains: number[];
}

export interface TimelineAck {
  session_id: string;
  entries: number;
  n_frames: number;
}

export interface RenderResponse {
  session_id: string;
  method: string;
  wav_b64: string;
  wav_format: string;
  sample_rate: number;
  n_frames: number;
  hop: number;
  applied_gains: number[][];
  unprocessed_db: number[][];
  processed_db: number[][];
}

export interface MetricsResponse {
  session_id: string;
  method: string;
  sdr_db: number;
  unprocessed_sdr_db: number;
  loss: number;
  doas_deg: number[];
  source_ratios_db: number[];
}
