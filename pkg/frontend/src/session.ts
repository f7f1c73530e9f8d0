import type {
  AnnotatedTransition,
  AnnotationDoc,
  DetectionDoc,
  ReviewState,
  TransitionKind,
} from './types';

export interface ReviewedTransition {
  kind: TransitionKind;
  start: number;
  end: number;
  state: ReviewState;
  addedByUser: boolean;
}

function payloadOrder(a: ReviewedTransition, b: ReviewedTransition): number {
  return a.start - b.start || a.end - b.end || a.kind.localeCompare(b.kind);
}

/** Editable state of one video's review pass.
 *
 *  Every edit keeps 0 <= start <= end < frameCount by clamping, so the
 *  session is always serializable to a payload the server will accept.
 *  Rejected transitions stay in the list (they can be un-rejected) but are
 *  left out of the payload.  The session never invents records: everything
 *  in the payload came from the loaded document or an explicit addTransition,
 *  and user additions carry an added_by_user flag.
 */
export class ReviewSession {
  private entries: ReviewedTransition[];
  private saved = true;

  private constructor(
    readonly video: string,
    readonly fps: number,
    readonly frameCount: number,
    entries: ReviewedTransition[],
  ) {
    this.entries = entries;
  }

  static fromDetections(doc: DetectionDoc): ReviewSession {
    const entries = doc.transitions.map(t => ({
      kind: t.kind,
      start: t.start,
      end: t.end,
      state: 'pending' as ReviewState,
      addedByUser: false,
    }));
    return new ReviewSession(doc.video, doc.fps, doc.frame_count, entries);
  }

  /** Resume from a previously saved file; records without review flags are
   *  treated as accepted since someone already chose to save them. */
  static fromAnnotations(doc: AnnotationDoc): ReviewSession {
    const entries = doc.transitions.map((t: AnnotatedTransition) => ({
      kind: t.kind,
      start: t.start,
      end: t.end,
      state: t.review ?? ('accepted' as ReviewState),
      addedByUser: t.added_by_user === true,
    }));
    return new ReviewSession(doc.video, doc.fps, doc.frame_count, entries);
  }

  get dirty(): boolean {
    return !this.saved;
  }

  get size(): number {
    return this.entries.length;
  }

  get(index: number): ReviewedTransition {
    this.check(index);
    return { ...this.entries[index] };
  }

  all(): ReviewedTransition[] {
    return this.entries.map(e => ({ ...e }));
  }

  private check(index: number): void {
    if (!Number.isInteger(index) || index < 0 || index >= this.entries.length) {
      throw new RangeError(`transition index ${index} out of range (${this.entries.length})`);
    }
  }

  private setState(index: number, state: ReviewState): void {
    this.check(index);
    if (this.entries[index].state === state) return;
    this.entries[index].state = state;
    this.saved = false;
  }

  accept(index: number): void {
    this.setState(index, 'accepted');
  }

  reject(index: number): void {
    this.setState(index, 'rejected');
  }

  acceptAll(): void {
    for (let i = 0; i < this.entries.length; i++) this.accept(i);
  }

  /** Move one boundary by delta frames, clamped so the span stays valid and
   *  inside the video.  Returns the delta actually applied. */
  dragBoundary(index: number, side: 'start' | 'end', delta: number): number {
    this.check(index);
    const e = this.entries[index];
    let applied: number;
    if (side === 'start') {
      const target = Math.min(Math.max(e.start + delta, 0), e.end);
      applied = target - e.start;
      e.start = target;
    } else {
      const target = Math.min(Math.max(e.end + delta, e.start), this.frameCount - 1);
      applied = target - e.end;
      e.end = target;
    }
    if (applied !== 0) {
      e.state = 'edited';
      this.saved = false;
    }
    return applied;
  }

  /** Move a whole transition by delta frames, preserving its span. */
  shiftBy(index: number, delta: number): number {
    this.check(index);
    const e = this.entries[index];
    const lo = -e.start;
    const hi = this.frameCount - 1 - e.end;
    const applied = Math.min(Math.max(delta, lo), hi);
    if (applied !== 0) {
      e.start += applied;
      e.end += applied;
      e.state = 'edited';
      this.saved = false;
    }
    return applied;
  }

  /** Record a transition the detector missed; flagged so the saved file keeps
   *  user additions distinguishable from detector output. */
  addTransition(kind: TransitionKind, start: number, end: number): number {
    const s = Math.min(Math.max(start, 0), this.frameCount - 1);
    const e = Math.min(Math.max(end, s), this.frameCount - 1);
    const entry: ReviewedTransition = { kind, start: s, end: e, state: 'edited', addedByUser: true };
    let at = this.entries.findIndex(other => payloadOrder(entry, other) < 0);
    if (at < 0) at = this.entries.length;
    this.entries.splice(at, 0, entry);
    this.saved = false;
    return at;
  }

  /** PUT body for the annotations endpoint: everything not rejected, sorted
   *  by start as the schema requires, with review provenance on each record. */
  toPayload(): AnnotationDoc {
    const kept = this.entries.filter(e => e.state !== 'rejected').sort(payloadOrder);
    return {
      video: this.video,
      fps: this.fps,
      frame_count: this.frameCount,
      transitions: kept.map(e => {
        const record: AnnotatedTransition = {
          kind: e.kind,
          start: e.start,
          end: e.end,
          review: e.state,
        };
        if (e.addedByUser) record.added_by_user = true;
        return record;
      }),
    };
  }

  /** Call after the server confirms a PUT. */
  markSaved(): void {
    this.saved = true;
  }
}
