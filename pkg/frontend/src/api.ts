// Thin typed client for the rating service API.

import type { SessionPayload } from "./session.js";

export async function fetchSession(base = ""): Promise<SessionPayload> {
  const resp = await fetch(`${base}/api/session`);
  if (!resp.ok) {
    throw new Error(`session request failed: HTTP ${resp.status}`);
  }
  return (await resp.json()) as SessionPayload;
}

export async function submitRating(
  sessionId: string,
  itemId: string,
  score: number,
  base = "",
): Promise<void> {
  const resp = await fetch(`${base}/api/rating`, {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify({ session_id: sessionId, item_id: itemId, score }),
  });
  if (resp.status !== 204) {
    let detail = `HTTP ${resp.status}`;
    try {
      const body = (await resp.json()) as { error?: string };
      if (body.error) detail = body.error;
    } catch {
      // keep the status text
    }
    throw new Error(`rating rejected: ${detail}`);
  }
}

export function reportUrl(sessionId: string, base = ""): string {
  return `${base}/api/report?session_id=${encodeURIComponent(sessionId)}`;
}
