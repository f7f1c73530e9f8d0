import { ApiError, ReviewApi } from './api';
import { FrameStrip } from './framestrip';
import { ReviewSession } from './session';
import { KIND_COLORS, Timeline } from './timeline';

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

class App {
  private api = new ReviewApi();
  private session: ReviewSession | null = null;
  private timeline: Timeline;
  private strip: FrameStrip;
  private cursor = 0;

  private videoSelect = el('select', 'video-select');
  private saveButton = el('button', 'save-button', 'save');
  private statusLine = el('div', 'status');
  private panel = el('div', 'panel');

  constructor(root: HTMLElement) {
    const header = el('header');
    header.appendChild(el('h1', undefined, 'slidetrans review'));
    header.appendChild(this.videoSelect);
    header.appendChild(this.saveButton);
    header.appendChild(this.statusLine);
    root.appendChild(header);

    const timelineRoot = el('div');
    root.appendChild(timelineRoot);
    this.timeline = new Timeline(timelineRoot, {
      onSelect: i => this.onSelect(i),
      onStepFrame: d => this.stepFrame(d),
      onDragMarker: (i, frames) => {
        if (!this.session) return;
        this.session.shiftBy(i, frames);
        this.timeline.render();
        this.onSelect(i);
      },
    });

    root.appendChild(this.panel);

    const stripRoot = el('div');
    root.appendChild(stripRoot);
    this.strip = new FrameStrip(stripRoot, this.api);

    this.videoSelect.addEventListener('change', () => {
      void this.loadVideo(this.videoSelect.value);
    });
    this.saveButton.addEventListener('click', () => void this.save());
    this.refreshSaveButton();
  }

  async boot(): Promise<void> {
    try {
      const videos = await this.api.listVideos();
      this.videoSelect.textContent = '';
      for (const video of videos) {
        const option = el('option', undefined, `${video.id} (${video.frame_count ?? '?'} frames)`);
        option.value = video.id;
        this.videoSelect.appendChild(option);
      }
      if (videos.length > 0) await this.loadVideo(videos[0].id);
      else this.status('no videos in this corpus', true);
    } catch (error) {
      this.status(this.describe(error), true);
    }
  }

  private async loadVideo(id: string): Promise<void> {
    try {
      const detail = await this.api.videoDetail(id);
      // Resume a saved review pass when one exists, else start from the
      // detector's output.
      const doc = detail.has_annotations
        ? await this.api.annotations(id)
        : await this.api.detections(id);
      this.session = detail.has_annotations
        ? ReviewSession.fromAnnotations(doc)
        : ReviewSession.fromDetections(doc);
      this.timeline.setSession(this.session);
      this.status(`${id}: ${this.session.size} transitions`);
      if (this.session.size > 0) this.timeline.select(0);
      else this.renderPanel();
      this.refreshSaveButton();
    } catch (error) {
      this.session = null;
      this.timeline.setSession(null);
      this.renderPanel();
      this.status(this.describe(error), true);
    }
  }

  private onSelect(index: number): void {
    if (!this.session) return;
    const t = this.session.get(index);
    this.cursor = t.start;
    this.renderPanel();
    void this.strip
      .show(this.session.video, t, this.session.frameCount)
      .then(() => this.strip.setCursor(this.cursor))
      .catch(error => this.status(this.describe(error), true));
  }

  private stepFrame(delta: number): void {
    if (!this.session) return;
    this.cursor = Math.min(Math.max(this.cursor + delta, 0), this.session.frameCount - 1);
    const [lo, hi] = this.strip.visibleRange;
    if (this.cursor >= lo && this.cursor <= hi) {
      this.strip.setCursor(this.cursor);
      return;
    }
    // Slide the window to keep the cursor in view, preserving its width.
    const width = Math.max(hi - lo, 0);
    const newLo = this.cursor < lo ? this.cursor : this.cursor - width;
    const index = this.timeline.selectedIndex;
    const span = index >= 0 ? this.session.get(index) : { start: this.cursor, end: this.cursor };
    void this.strip
      .show(this.session.video, span, this.session.frameCount, [newLo, newLo + width])
      .then(() => this.strip.setCursor(this.cursor))
      .catch(error => this.status(this.describe(error), true));
  }

  private renderPanel(): void {
    this.panel.textContent = '';
    if (!this.session) return;
    const index = this.timeline.selectedIndex;

    const actions = el('div', 'panel-row');
    const acceptAll = el('button', undefined, 'accept all');
    acceptAll.addEventListener('click', () => {
      this.session?.acceptAll();
      this.afterEdit(index);
    });
    actions.appendChild(acceptAll);
    const add = el('button', undefined, 'add at cursor');
    add.addEventListener('click', () => {
      if (!this.session) return;
      const at = this.session.addTransition(
        'hard',
        this.cursor,
        Math.min(this.cursor + 1, this.session.frameCount - 1),
      );
      this.timeline.render();
      this.timeline.select(at);
      this.refreshSaveButton();
    });
    actions.appendChild(add);
    this.panel.appendChild(actions);

    if (index < 0 || index >= this.session.size) return;
    const t = this.session.get(index);

    const info = el('div', 'panel-row');
    const chip = el('span', 'kind-chip', t.kind);
    chip.style.background = KIND_COLORS[t.kind];
    info.appendChild(chip);
    info.appendChild(el('span', 'span-label', `frames ${t.start}..${t.end}`));
    info.appendChild(el('span', `state state-${t.state}`, t.state));
    this.panel.appendChild(info);

    const review = el('div', 'panel-row');
    const accept = el('button', undefined, 'accept');
    accept.addEventListener('click', () => {
      this.session?.accept(index);
      this.afterEdit(index);
    });
    review.appendChild(accept);
    const reject = el('button', undefined, 'reject');
    reject.addEventListener('click', () => {
      this.session?.reject(index);
      this.afterEdit(index);
    });
    review.appendChild(reject);
    this.panel.appendChild(review);

    const nudges = el('div', 'panel-row');
    for (const [label, side, delta] of [
      ['start −1', 'start', -1],
      ['start +1', 'start', 1],
      ['end −1', 'end', -1],
      ['end +1', 'end', 1],
    ] as const) {
      const button = el('button', undefined, label);
      button.addEventListener('click', () => {
        this.session?.dragBoundary(index, side, delta);
        this.afterEdit(index);
      });
      nudges.appendChild(button);
    }
    this.panel.appendChild(nudges);
  }

  private afterEdit(index: number): void {
    this.timeline.render();
    this.refreshSaveButton();
    if (index >= 0) this.onSelect(index);
    else this.renderPanel();
  }

  private async save(): Promise<void> {
    if (!this.session) return;
    try {
      const result = await this.api.putAnnotations(this.session.video, this.session.toPayload());
      this.session.markSaved();
      this.refreshSaveButton();
      this.status(`saved ${result.transitions} transitions`);
    } catch (error) {
      // Local state survives a failed save; the user can retry.
      this.status(this.describe(error), true);
    }
  }

  private refreshSaveButton(): void {
    const dirty = this.session?.dirty ?? false;
    this.saveButton.disabled = !dirty;
    this.saveButton.textContent = dirty ? 'save*' : 'saved';
  }

  private describe(error: unknown): string {
    if (error instanceof ApiError) {
      return error.field ? `${error.message} (${error.field})` : error.message;
    }
    return error instanceof Error ? error.message : String(error);
  }

  private status(message: string, isError = false): void {
    this.statusLine.textContent = message;
    this.statusLine.classList.toggle('error', isError);
  }
}

const root = document.getElementById('app');
if (root) void new App(root).boot();
