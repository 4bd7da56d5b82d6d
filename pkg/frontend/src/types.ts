/** Wire types for the shapekit service. Field names match the JSON exactly. */

export type SessionState = "Idle" | "Syncing" | "Tracking" | "Recording";

export interface SourceDesc {
  kind: string;
  params: Record<string, unknown>;
}

export type JobState = "Ready" | "Playing" | "Stopped" | "Finished";

export interface PlaybackSummary {
  id: string;
  pattern_id: string;
  state: JobState;
  frames_sent: number;
  loop: boolean;
  max_lateness_ms?: number;
  loops_completed?: number;
  aborted?: boolean;
  cause?: string | null;
}

export interface SessionInfo {
  state: SessionState;
  calibrated: boolean;
  source: SourceDesc | null;
  live_subscribers: number;
  playback: PlaybackSummary | null;
}

export interface LiveMessage {
  t_ms: number;
  heights_mm: number[];
  source: "tracking" | "playback";
}

export interface PatternEntry {
  id: string;
  name: string;
  created_utc: string;
  frame_count: number;
  profile_id: string;
}

export interface DisplayProfileDoc {
  id: string;
  pin_pitch_mm: number;
  stroke_mm: number;
  spring_n_per_mm: number;
}

export interface PatternDocument {
  format_version: string;
  name: string;
  created_utc: string;
  grid_rows: number;
  grid_cols: number;
  display_profile: DisplayProfileDoc;
  frame_rate_hz: number;
  frames: number[][];
  annotations: Record<string, string>;
}
