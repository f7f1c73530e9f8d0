import type { ReviewSession } from './session';
import type { TransitionKind } from './types';

export const KIND_COLORS: Record<TransitionKind, string> = {
  hard: '#d64550',
  gradual: '#e8a33d',
  slide_video: '#4468c4',
  video_slide: '#3f9e63',
};

export interface TimelineCallbacks {
  onSelect?: (index: number) => void;
  onStepFrame?: (delta: number) => void;
  onDragMarker?: (index: number, frames: number) => void;
}

/** Horizontal strip of transition markers over the whole video.  Markers are
 *  colored by kind, clickable, draggable (committed in whole frames), and the
 *  keyboard walks them: n/p select next/previous, arrow keys step the frame
 *  cursor one frame at a time. */
export class Timeline {
  readonly track: HTMLElement;
  private session: ReviewSession | null = null;
  private selected = -1;
  private markers: HTMLElement[] = [];

  constructor(
    root: HTMLElement,
    private readonly callbacks: TimelineCallbacks = {},
  ) {
    root.classList.add('timeline');
    root.tabIndex = 0;
    this.track = document.createElement('div');
    this.track.className = 'timeline-track';
    root.appendChild(this.track);
    root.addEventListener('keydown', e => this.onKey(e));
  }

  setSession(session: ReviewSession | null): void {
    this.session = session;
    this.selected = -1;
    this.render();
  }

  get markerCount(): number {
    return this.markers.length;
  }

  get selectedIndex(): number {
    return this.selected;
  }

  render(): void {
    this.track.textContent = '';
    this.markers = [];
    if (!this.session || this.session.frameCount <= 0) return;
    const frameCount = this.session.frameCount;
    this.session.all().forEach((t, i) => {
      const marker = document.createElement('div');
      marker.className = 'timeline-marker';
      if (t.state === 'rejected') marker.classList.add('rejected');
      if (i === this.selected) marker.classList.add('selected');
      marker.style.left = `${(100 * t.start) / frameCount}%`;
      // Hard cuts are one frame wide; keep them visible.
      marker.style.width = `${Math.max((100 * (t.end - t.start)) / frameCount, 0.15)}%`;
      marker.style.background = KIND_COLORS[t.kind];
      marker.title = `${t.kind} ${t.start}..${t.end} (${t.state})`;
      marker.dataset.index = String(i);
      marker.addEventListener('click', () => this.select(i));
      marker.addEventListener('mousedown', e => this.beginDrag(e, i));
      this.track.appendChild(marker);
      this.markers.push(marker);
    });
  }

  select(index: number): void {
    if (!this.session || index < 0 || index >= this.session.size) return;
    if (this.markers[this.selected]) this.markers[this.selected].classList.remove('selected');
    this.selected = index;
    this.markers[index]?.classList.add('selected');
    this.callbacks.onSelect?.(index);
  }

  next(): void {
    if (this.markers.length === 0) return;
    this.select(this.selected < 0 ? 0 : Math.min(this.selected + 1, this.markers.length - 1));
  }

  previous(): void {
    if (this.markers.length === 0) return;
    this.select(this.selected < 0 ? 0 : Math.max(this.selected - 1, 0));
  }

  private onKey(event: KeyboardEvent): void {
    switch (event.key) {
      case 'ArrowLeft':
        event.preventDefault();
        this.callbacks.onStepFrame?.(-1);
        break;
      case 'ArrowRight':
        event.preventDefault();
        this.callbacks.onStepFrame?.(1);
        break;
      case 'n':
        this.next();
        break;
      case 'p':
        this.previous();
        break;
    }
  }

  private beginDrag(event: MouseEvent, index: number): void {
    if (!this.session) return;
    const width = this.track.getBoundingClientRect().width;
    if (width <= 0) return;
    event.preventDefault();
    const perFrame = width / this.session.frameCount;
    const startX = event.clientX;
    let frames = 0;
    const onMove = (move: MouseEvent) => {
      frames = Math.round((move.clientX - startX) / perFrame);
    };
    const onUp = () => {
      window.removeEventListener('mousemove', onMove);
      window.removeEventListener('mouseup', onUp);
      if (frames !== 0) this.callbacks.onDragMarker?.(index, frames);
    };
    window.addEventListener('mousemove', onMove);
    window.addEventListener('mouseup', onUp);
  }
}
