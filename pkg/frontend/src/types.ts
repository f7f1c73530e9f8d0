// Wire types for the review REST API.  Shapes mirror the JSON the server
// emits and accepts; extra keys the server tolerates are typed explicitly
// where the UI relies on them.

export type TransitionKind = 'hard' | 'gradual' | 'slide_video' | 'video_slide';

export interface Transition {
  kind: TransitionKind;
  start: number;
  end: number;
}

export type ReviewState = 'pending' | 'accepted' | 'rejected' | 'edited';

export interface VideoInfo {
  id: string;
  frame_count: number | null;
  fps: number | null;
}

export interface VideoDetail extends VideoInfo {
  crop: Record<string, number> | null;
  has_detections: boolean;
  has_annotations: boolean;
  has_ground_truth: boolean;
}

/** Detection document written by the detector CLI; config/stage_one/version
 *  ride along but the UI only reads the fields below. */
export interface DetectionDoc {
  video: string;
  fps: number;
  frame_count: number;
  transitions: Array<Transition & { votes?: Record<string, string> }>;
}

/** One transition in a saved annotations file.  The review flags are extra
 *  keys the server preserves verbatim; they let a session resume and keep
 *  user-added records distinguishable from detector output. */
export interface AnnotatedTransition extends Transition {
  review?: ReviewState;
  added_by_user?: boolean;
}

export interface AnnotationDoc {
  video: string;
  fps: number;
  frame_count: number;
  transitions: AnnotatedTransition[];
}

export interface PutResult {
  ok: boolean;
  transitions: number;
}
