// Timeline state: an ordered list of (start frame, pattern) segments plus a
// playhead. Segment starts are strictly increasing and the first segment
// always starts at frame 0, so every frame of a render has exactly one
// active pattern.

import { EditorPattern, activeVector } from "./pattern.js";
import { TimelineEntryWire } from "./types.js";

export interface Segment {
  startFrame: number;
  pattern: EditorPattern;
}

export interface TimelineModel {
  segments: Segment[];
  playheadFrame: number;
}

export function validateSegments(segments: Segment[]): void {
  if (segments.length === 0) throw new Error("timeline needs at least one segment");
  if (segments[0].startFrame !== 0) {
    throw new Error(`timeline must start at frame 0, got ${segments[0].startFrame}`);
  }
  for (let i = 1; i < segments.length; i++) {
    const prev = segments[i - 1].startFrame;
    const here = segments[i].startFrame;
    if (here <= prev) {
      throw new Error(`segment starts must be strictly increasing, got ${prev} then ${here}`);
    }
  }
  const widths = new Set(segments.map((s) => s.pattern.l));
  if (widths.size > 1) throw new Error("timeline patterns disagree on length");
}

export function newTimeline(segments: Segment[]): TimelineModel {
  validateSegments(segments);
  return { segments: segments.slice(), playheadFrame: 0 };
}

// Insert keeping starts ordered; an existing segment at the same frame is
// replaced rather than duplicated, since two patterns cannot share a start.
export function insertSegment(model: TimelineModel, segment: Segment): TimelineModel {
  const kept = model.segments.filter((s) => s.startFrame !== segment.startFrame);
  const segments = [...kept, segment].sort((a, b) => a.startFrame - b.startFrame);
  validateSegments(segments);
  return { segments, playheadFrame: model.playheadFrame };
}

export function removeSegment(model: TimelineModel, startFrame: number): TimelineModel {
  if (startFrame === 0) throw new Error("the frame 0 segment cannot be removed");
  const segments = model.segments.filter((s) => s.startFrame !== startFrame);
  if (segments.length === model.segments.length) {
    throw new Error(`no segment starts at frame ${startFrame}`);
  }
  validateSegments(segments);
  return { segments, playheadFrame: model.playheadFrame };
}

export function activeSegmentAt(model: TimelineModel, frame: number): Segment {
  let active = model.segments[0];
  for (const s of model.segments) {
    if (s.startFrame <= frame) active = s;
    else break;
  }
  return active;
}

// Wire entries for POST /sessions/{id}/timeline. Gains are passed through
// number-for-number; JSON serialization preserves every double exactly.
export function toWireEntries(model: TimelineModel): TimelineEntryWire[] {
  validateSegments(model.segments);
  return model.segments.map((s) => ({
    start_frame: s.startFrame,
    gains: activeVector(s.pattern),
  }));
}

// Positions of segment boundaries in the rendered signal. Frame t covers
// samples [t*hop, t*hop + win), so a segment starting at frame t first
// touches the output at sample t*hop.
export function segmentBoundarySamples(model: TimelineModel, hop: number): number[] {
  return model.segments.map((s) => s.startFrame * hop);
}

export function segmentBoundarySeconds(
  model: TimelineModel,
  hop: number,
  sampleRate: number,
): number[] {
  return segmentBoundarySamples(model, hop).map((n) => n / sampleRate);
}
