// Wire types for the operator API. Field names mirror the server payloads
// exactly; the console never renames or reshapes them on the way in.

export interface StyleParams {
  amplitude_scale: number;
  tempo_scale: number;
  openness: number;
}

export interface IntentOutput {
  description: string;
  intent: string;
  intent_text: string;
  confidence: number;
  valence: number;
  arousal: number;
  quadrant: string;
  primitive_token: string;
}

export interface Decision {
  primitive: string;
  display_text: string;
  fell_back: boolean;
  style: StyleParams;
}

export interface InputResponse {
  outcome: string;
  latency_s: number;
  error: string;
  output: IntentOutput;
  decision: Decision;
}

export interface OverrideResponse {
  primitive: string;
  display_text: string;
  source: string;
  forced: boolean;
}

export interface VocabEntry {
  id: string;
  display_text: string;
  aliases: string[];
  safety_class: string;
  quadrant_affinity: string[];
}

export interface AffectGeometry {
  arousal_split: number;
  neutral_valence_band: number;
  confidence_threshold: number;
  fallback_primitive_id: string;
}

export interface Rates {
  video_rate: number;
  planner_fps: number;
  window_n: number;
  window_period: number;
  control_rate: number;
  inference_timeout: number;
}

export interface Skeleton {
  joints: string[];
  parents: number[];
  description: string;
}

export interface Bootstrap {
  vocabulary: VocabEntry[];
  affect: AffectGeometry;
  rates: Rates;
  skeleton: Skeleton;
}

export interface WindowDoc {
  index: number;
  primitive: string;
  source: string;
  forced: boolean;
  flagged: boolean;
  emitted_at: number;
  frames: number[][]; // (window_n, 135)
  angles: number[][]; // (window_n, 29)
}

export interface EventDoc {
  t: number;
  stage: string;
  kind: string;
  payload: Record<string, unknown>;
  digest: string;
}

export interface HistoryExchange {
  summary: string;
  output: IntentOutput;
}

export interface HistoryResponse {
  exchanges: HistoryExchange[];
  total_seen: number;
  capacity: number;
}

export interface SessionInputBody {
  text?: string | null;
  images_base64?: string[];
  modality?: string;
}
