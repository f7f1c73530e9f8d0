import type { AnnotationDoc, DetectionDoc, PutResult, VideoDetail, VideoInfo } from './types';

/** Error from the review API, carrying the server's detail message and,
 *  for validation failures, the offending field path. */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    detail: string,
    readonly field?: string,
  ) {
    super(detail);
    this.name = 'ApiError';
  }
}

async function errorFrom(response: Response): Promise<ApiError> {
  let detail = `${response.status} ${response.statusText}`;
  let field: string | undefined;
  try {
    const body = await response.json();
    if (typeof body?.detail === 'string') detail = body.detail;
    if (typeof body?.field === 'string') field = body.field;
  } catch {
    // non-JSON body; keep the status line
  }
  return new ApiError(response.status, detail, field);
}

export class ReviewApi {
  constructor(private readonly base = '') {}

  private async getJson<T>(path: string): Promise<T> {
    const response = await fetch(this.base + path);
    if (!response.ok) throw await errorFrom(response);
    return response.json() as Promise<T>;
  }

  listVideos(): Promise<VideoInfo[]> {
    return this.getJson('/api/videos');
  }

  videoDetail(id: string): Promise<VideoDetail> {
    return this.getJson(`/api/videos/${encodeURIComponent(id)}`);
  }

  detections(id: string): Promise<DetectionDoc> {
    return this.getJson(`/api/videos/${encodeURIComponent(id)}/detections`);
  }

  annotations(id: string): Promise<AnnotationDoc> {
    return this.getJson(`/api/videos/${encodeURIComponent(id)}/annotations`);
  }

  async putAnnotations(id: string, payload: AnnotationDoc): Promise<PutResult> {
    const response = await fetch(`${this.base}/api/videos/${encodeURIComponent(id)}/annotations`, {
      method: 'PUT',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify(payload),
    });
    if (!response.ok) throw await errorFrom(response);
    return response.json() as Promise<PutResult>;
  }

  frameUrl(id: string, index: number): string {
    return `${this.base}/api/videos/${encodeURIComponent(id)}/frames/${index}`;
  }

  async fetchFrame(id: string, index: number): Promise<Blob> {
    const response = await fetch(this.frameUrl(id, index));
    if (!response.ok) throw await errorFrom(response);
    return response.blob();
  }
}
