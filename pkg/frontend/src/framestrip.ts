import type { ReviewApi } from './api';
import { LruCache } from './lru';

export interface FrameSpan {
  start: number;
  end: number;
}

/** Side-by-side frames around a transition: the span itself plus two frames
 *  of context on each side, clamped to the video.  Images load on demand
 *  through a small LRU of object URLs; a frame that fails to load keeps its
 *  numbered tile as a placeholder. */
export class FrameStrip {
  private cache: LruCache<string, string>;
  private generation = 0;
  private lo = 0;
  private hi = -1;

  constructor(
    private readonly root: HTMLElement,
    private readonly api: ReviewApi,
    cacheCapacity = 48,
  ) {
    root.classList.add('frame-strip');
    this.cache = new LruCache(cacheCapacity, url => URL.revokeObjectURL(url));
  }

  static tileRange(span: FrameSpan, frameCount: number): [number, number] {
    return [Math.max(0, span.start - 2), Math.min(frameCount - 1, span.end + 2)];
  }

  /** Currently rendered frame indices, inclusive; hi < lo when empty. */
  get visibleRange(): [number, number] {
    return [this.lo, this.hi];
  }

  async show(
    video: string,
    span: FrameSpan,
    frameCount: number,
    window?: [number, number],
  ): Promise<void> {
    const generation = ++this.generation;
    const [lo, hi] = window ?? FrameStrip.tileRange(span, frameCount);
    this.lo = lo;
    this.hi = hi;
    this.root.textContent = '';
    const loads: Promise<void>[] = [];
    for (let index = lo; index <= hi; index++) {
      const tile = document.createElement('figure');
      tile.className = 'tile';
      if (index >= span.start && index <= span.end) tile.classList.add('in-span');
      tile.dataset.frame = String(index);
      const caption = document.createElement('figcaption');
      caption.textContent = String(index);
      tile.appendChild(caption);
      this.root.appendChild(tile);
      loads.push(this.loadTile(generation, video, index, tile));
    }
    await Promise.all(loads);
  }

  private async loadTile(
    generation: number,
    video: string,
    index: number,
    tile: HTMLElement,
  ): Promise<void> {
    try {
      const url = await this.frameObjectUrl(video, index);
      if (generation !== this.generation) return; // superseded by a newer show()
      const img = document.createElement('img');
      img.src = url;
      img.alt = `frame ${index}`;
      tile.prepend(img);
    } catch {
      if (generation !== this.generation) return;
      tile.classList.add('placeholder');
    }
  }

  private async frameObjectUrl(video: string, index: number): Promise<string> {
    const key = `${video}:${index}`;
    const hit = this.cache.get(key);
    if (hit !== undefined) return hit;
    const blob = await this.api.fetchFrame(video, index);
    const url = URL.createObjectURL(blob);
    this.cache.set(key, url);
    return url;
  }

  /** Highlight the keyboard cursor's tile, if it is visible. */
  setCursor(frame: number | null): void {
    for (const tile of Array.from(this.root.querySelectorAll<HTMLElement>('.tile'))) {
      tile.classList.toggle('cursor', frame !== null && tile.dataset.frame === String(frame));
    }
  }
}
