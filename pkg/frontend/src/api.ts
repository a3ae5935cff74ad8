/* Wire types and a small fetch client for the session service.
 *
 * The interfaces mirror the server's JSON bodies field for field. The
 * client never derives game outcomes on its own; every verdict and
 * every board change shown in the UI originates from one of these
 * responses.
 */

export interface TileView {
  id: number;
  name: string;
  properties: Record<string, string>;
}

export interface EventView {
  kind: string;
  slot: number;
  tile: number;
}

export type Verdict = "ignore" | "accept" | "reject";

export interface VerdictView {
  slot: number;
  verdict: Verdict;
}

export interface SessionView {
  id: string;
  title: string;
  tileset: string;
  tiles: TileView[];
  slots: (TileView | null)[];
  transcript: string[];
  last_events: EventView[];
  rules: string[];
  difficulty_target: number;
  achieved: number;
  completed: boolean;
  created: string;
  updated: string;
}

export interface ActionResponse {
  events: EventView[];
  verdicts: VerdictView[];
  session: SessionView;
}

export interface AdaptResponse {
  rules: string[];
  achieved: number;
  story: string;
  session: SessionView;
}

export class ApiError extends Error {
  /** HTTP status, or 0 when the service could not be reached at all. */
  readonly status: number;

  constructor(message: string, status: number) {
    super(message);
    this.status = status;
  }
}

export class Api {
  constructor(private readonly base: string = "") {}

  createSession(theme: string, difficultyTarget: number, seed: number): Promise<SessionView> {
    return this.request("/sessions", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ theme, difficulty_target: difficultyTarget, seed }),
    });
  }

  getSession(id: string): Promise<SessionView> {
    return this.request(`/sessions/${id}`);
  }

  place(id: string, slot: number, tileId: number): Promise<ActionResponse> {
    return this.action(id, { action: "place", slot, tile_id: tileId });
  }

  remove(id: string, slot: number): Promise<ActionResponse> {
    return this.action(id, { action: "remove", slot });
  }

  adapt(id: string, newTarget: number): Promise<AdaptResponse> {
    return this.request(`/sessions/${id}/adapt`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ new_target: newTarget }),
    });
  }

  private action(id: string, body: Record<string, unknown>): Promise<ActionResponse> {
    return this.request(`/sessions/${id}/actions`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let resp: Response;
    try {
      resp = await fetch(this.base + path, init);
    } catch (err) {
      throw new ApiError(`cannot reach the story service (${String(err)})`, 0);
    }
    if (!resp.ok) {
      throw new ApiError(await errorDetail(resp), resp.status);
    }
    return (await resp.json()) as T;
  }
}

async function errorDetail(resp: Response): Promise<string> {
  // FastAPI puts its message under "detail"; fall back to the status line.
  try {
    const body: unknown = await resp.json();
    if (body && typeof body === "object" && typeof (body as { detail?: unknown }).detail === "string") {
      return (body as { detail: string }).detail;
    }
  } catch {
    // not JSON, use the status text
  }
  return `${resp.status} ${resp.statusText}`.trim();
}
