import type { PlaybackSummary, SessionInfo } from "./types.js";

/**
 * Everything the page knows. `session` is only ever replaced by a payload
 * the server returned, never edited locally: a control may be enabled only
 * when the request it issues is legal in the server's own state machine.
 */
export interface ViewState {
  connected: boolean;
  session: SessionInfo | null;
  selectedPatternId: string | null;
  pendingName: string;
}

export interface ControlGuards {
  setSource: boolean;
  sync: boolean;
  recordStart: boolean;
  recordStop: boolean;
  playbackStart: boolean;
  playbackStop: boolean;
  deletePattern: boolean;
}

export function playbackActive(playback: PlaybackSummary | null): boolean {
  return playback !== null && (playback.state === "Ready" || playback.state === "Playing");
}

const ALL_DISABLED: ControlGuards = {
  setSource: false,
  sync: false,
  recordStart: false,
  recordStop: false,
  playbackStart: false,
  playbackStop: false,
  deletePattern: false,
};

export function controlGuards(view: ViewState): ControlGuards {
  if (!view.connected || view.session === null) {
    return { ...ALL_DISABLED };
  }
  const s = view.session;
  const busy = playbackActive(s.playback);
  return {
    // the server refuses a source change only while Recording; Syncing is a
    // transient state no request should race against
    setSource: s.state === "Idle" || s.state === "Tracking",
    // calibration starts from Idle with a source attached; re-syncing means
    // re-selecting the source first
    sync: s.state === "Idle" && s.source !== null,
    recordStart: s.state === "Tracking",
    // saving needs a non-empty name: validated here so the request is never sent
    recordStop: s.state === "Recording" && view.pendingName.trim().length > 0,
    playbackStart: view.selectedPatternId !== null && !busy,
    playbackStop: busy,
    deletePattern: view.selectedPatternId !== null,
  };
}
