// DOM wiring: one image at a time, five labeled score buttons (keys 1-5),
// progress indicator, optional 2x zoom, resume via localStorage.

import { fetchSession, reportUrl, submitRating } from "./api.js";
import { SCORE_LABELS, SessionView, type SessionPayload } from "./session.js";

const STORAGE_KEY = "graysr-rating-session";

interface Stored {
  payload: SessionPayload;
  scores: Record<string, number>;
}

let view: SessionView | null = null;
let zoomed = false;
let busy = false;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function loadStored(): Stored | null {
  try {
    const raw = localStorage.getItem(STORAGE_KEY);
    return raw ? (JSON.parse(raw) as Stored) : null;
  } catch {
    return null;
  }
}

function persist(payload: SessionPayload): void {
  if (!view) return;
  const data: Stored = { payload, scores: view.scores };
  localStorage.setItem(STORAGE_KEY, JSON.stringify(data));
}

let currentPayload: SessionPayload | null = null;

async function start(): Promise<void> {
  el("error-box").hidden = true;
  try {
    const stored = loadStored();
    if (stored) {
      currentPayload = stored.payload;
      view = new SessionView(stored.payload, stored.scores);
    } else {
      currentPayload = await fetchSession();
      view = new SessionView(currentPayload);
      persist(currentPayload);
    }
    render();
  } catch (err) {
    showError(`could not reach the rating service: ${String(err)}`, true);
  }
}

function showError(message: string, retry = false): void {
  const box = el("error-box");
  box.hidden = false;
  el("error-text").textContent = message;
  el<HTMLButtonElement>("retry-button").hidden = !retry;
}

function render(): void {
  if (!view) return;
  const rating = el("rating-screen");
  const done = el("completion-screen");
  if (view.completed) {
    rating.hidden = true;
    done.hidden = false;
    el<HTMLAnchorElement>("report-link").href = reportUrl(view.sessionId);
    return;
  }
  rating.hidden = false;
  done.hidden = true;
  const item = view.current!;
  el("progress").textContent = view.progress;
  const img = el<HTMLImageElement>("item-image");
  img.src = item.imageUrl;
  img.classList.toggle("zoomed", zoomed);
}

async function submit(score: number): Promise<void> {
  if (!view || view.completed || busy) return;
  const item = view.current!;
  busy = true;
  el("error-box").hidden = true;
  try {
    await submitRating(view.sessionId, item.itemId, score);
    view.recordScore(item.itemId, score);
    if (currentPayload) persist(currentPayload);
    render();
  } catch (err) {
    showError(String(err));
  } finally {
    busy = false;
  }
}

function init(): void {
  const buttons = el("score-buttons");
  for (const { score, label } of SCORE_LABELS) {
    const button = document.createElement("button");
    button.className = "score-button";
    button.textContent = `${score} — ${label}`;
    button.addEventListener("click", () => void submit(score));
    buttons.appendChild(button);
  }
  document.addEventListener("keydown", (event) => {
    if (event.key >= "1" && event.key <= "5") {
      void submit(Number(event.key));
    }
    if (event.key === "z") toggleZoom();
  });
  el("zoom-toggle").addEventListener("click", toggleZoom);
  el("retry-button").addEventListener("click", () => void start());
  el("restart-button").addEventListener("click", () => {
    localStorage.removeItem(STORAGE_KEY);
    view = null;
    void start();
  });
  void start();
}

function toggleZoom(): void {
  zoomed = !zoomed;
  const img = el<HTMLImageElement>("item-image");
  img.classList.toggle("zoomed", zoomed);
}

document.addEventListener("DOMContentLoaded", init);
