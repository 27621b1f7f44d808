// Client-side session state: an ordered queue of blinded items and the
// scores submitted so far. The server payload carries no method labels,
// and neither does anything stored here.

export interface SessionItemPayload {
  item_id: string;
  image_url: string;
}

export interface SessionSetPayload {
  set_id: string;
  items: SessionItemPayload[];
}

export interface SessionPayload {
  session_id: string;
  sets: SessionSetPayload[];
}

export interface QueueItem {
  itemId: string;
  imageUrl: string;
  setId: string;
}

export class SessionView {
  readonly sessionId: string;
  readonly queue: QueueItem[];
  readonly scores: Record<string, number>;

  constructor(payload: SessionPayload, scores: Record<string, number> = {}) {
    this.sessionId = payload.session_id;
    this.queue = payload.sets.flatMap((set) =>
      set.items.map((item) => ({
        itemId: item.item_id,
        imageUrl: item.image_url,
        setId: set.set_id,
      })),
    );
    if (this.queue.length === 0) {
      throw new Error("session has no items");
    }
    this.scores = {};
    for (const item of this.queue) {
      if (scores[item.itemId] !== undefined) {
        this.scores[item.itemId] = scores[item.itemId];
      }
    }
  }

  get total(): number {
    return this.queue.length;
  }

  /** Index of the first unrated item; equals total when complete. */
  get currentIndex(): number {
    const idx = this.queue.findIndex((it) => this.scores[it.itemId] === undefined);
    return idx === -1 ? this.queue.length : idx;
  }

  get current(): QueueItem | null {
    const idx = this.currentIndex;
    return idx < this.queue.length ? this.queue[idx] : null;
  }

  get completed(): boolean {
    return this.currentIndex >= this.queue.length;
  }

  /** Progress label, 1-based: "item k of N". */
  get progress(): string {
    const k = Math.min(this.currentIndex + 1, this.total);
    return `item ${k} of ${this.total}`;
  }

  recordScore(itemId: string, score: number): void {
    if (!Number.isInteger(score) || score < 1 || score > 5) {
      throw new Error(`score must be an integer in 1..5, got ${score}`);
    }
    if (!this.queue.some((it) => it.itemId === itemId)) {
      throw new Error(`unknown item ${itemId}`);
    }
    this.scores[itemId] = score;
  }
}

export const SCORE_LABELS: ReadonlyArray<{ score: number; label: string }> = [
  { score: 1, label: "bad quality" },
  { score: 2, label: "poor" },
  { score: 3, label: "fair" },
  { score: 4, label: "good" },
  { score: 5, label: "excellent quality" },
];
