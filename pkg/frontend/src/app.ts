/* The play surface: start screen, story panel, tile tray, five seats.
 *
 * All game state lives on the server. The page keeps exactly one
 * SessionView plus a little transient UI state (selection, drafts,
 * banners) that every server response wipes, so reloading the page and
 * re-fetching the session paints the same screen the player left.
 */

import { Api, ApiError } from "./api.js";
import type { EventView, SessionView, TileView } from "./api.js";
import { RequestGate } from "./gate.js";

export const TOTAL_SETS = 142506; // C(30, 5): all ways to pick five of the thirty friends

export function targetFromPct(pct: number): number {
  return Math.round((pct / 100) * TOTAL_SETS);
}

function pctFromTarget(target: number): number {
  return Math.round((target / TOTAL_SETS) * 100);
}

export interface AppOptions {
  /** Called with the new session id once the start screen creates one. */
  onSession?: (id: string) => void;
}

interface Banner {
  text: string;
  retry: (() => void) | null;
}

export class App {
  private view: SessionView | null = null;
  private selected: number | null = null;
  private notice: string | null = null;
  private banner: Banner | null = null;
  private reveal = false;
  private debugOpen = false;
  private themeDraft = "";
  private startPct = 50;
  private adaptPct: number | null = null;
  private loading = false;
  private readonly gate = new RequestGate();

  constructor(
    private readonly root: HTMLElement,
    private readonly api: Api,
    private readonly opts: AppOptions = {},
  ) {
    root.addEventListener("click", (ev) => this.onClick(ev));
    root.addEventListener("input", (ev) => this.onInput(ev));
    root.addEventListener("change", (ev) => this.onChange(ev));
    root.addEventListener("keydown", (ev) => this.onKeydown(ev));
    // "toggle" does not bubble, so listen in the capture phase.
    root.addEventListener(
      "toggle",
      (ev) => {
        const el = ev.target;
        if (el instanceof HTMLElement && el.classList.contains("debug")) {
          this.debugOpen = (el as HTMLDetailsElement).open;
        }
      },
      true,
    );
  }

  showStart(): void {
    this.render();
  }

  load(id: string): void {
    this.loading = true;
    this.render();
    void this.gate.run(async () => {
      try {
        const view = await this.api.getSession(id);
        this.loading = false;
        this.setView(view);
      } catch (err) {
        this.loading = false;
        this.fail(describe(err), () => this.load(id));
      }
    });
  }

  /** Resolves once every queued request has settled. */
  settled(): Promise<void> {
    return this.gate.idle();
  }

  // ----- server round trips ------------------------------------------------

  private startSession(): void {
    const theme = this.themeDraft.trim();
    const target = targetFromPct(this.startPct);
    const seed = Math.floor(Math.random() * 0x100000000);
    // Responses are applied inside the gated turn so settled() never
    // resolves with a response still waiting to paint.
    void this.gate.run(async () => {
      try {
        const view = await this.api.createSession(theme, target, seed);
        this.setView(view);
        this.opts.onSession?.(view.id);
      } catch (err) {
        this.fail(describe(err), () => this.startSession());
      }
    });
    this.render();
  }

  private placeAt(slot: number, tileId: number): void {
    if (!this.view) return;
    const id = this.view.id;
    void this.gate.run(async () => {
      try {
        const resp = await this.api.place(id, slot, tileId);
        this.setView(resp.session);
      } catch (err) {
        this.fail(describe(err), null);
      }
    });
    this.render();
  }

  private removeAt(slot: number): void {
    if (!this.view) return;
    const id = this.view.id;
    void this.gate.run(async () => {
      try {
        const resp = await this.api.remove(id, slot);
        this.setView(resp.session);
      } catch (err) {
        this.fail(describe(err), null);
      }
    });
    this.render();
  }

  private adaptTo(target: number): void {
    if (!this.view) return;
    const id = this.view.id;
    void this.gate.run(async () => {
      try {
        const resp = await this.api.adapt(id, target);
        this.setView(resp.session);
      } catch (err) {
        this.fail(describe(err), () => this.adaptTo(target));
      }
    });
    this.render();
  }

  private setView(view: SessionView): void {
    this.view = view;
    this.selected = null;
    this.notice = null;
    this.banner = null;
    this.adaptPct = null;
    this.render();
  }

  private fail(text: string, retry: (() => void) | null): void {
    this.banner = { text, retry };
    this.render();
  }

  // ----- interaction -------------------------------------------------------

  private onClick(ev: MouseEvent): void {
    const el = ev.target instanceof Element ? ev.target : null;
    if (!el) return;
    if (el.closest(".retry")) {
      const retry = this.banner?.retry;
      this.banner = null;
      this.render();
      retry?.();
      return;
    }
    if (el.closest(".start-button")) {
      this.startSession();
      return;
    }
    if (el.closest(".adapt-button")) {
      const view = this.view;
      if (view) this.adaptTo(targetFromPct(this.adaptPct ?? pctFromTarget(view.difficulty_target)));
      return;
    }
    const tile = el.closest<HTMLElement>(".tray .tile[data-tile-id]");
    if (tile) {
      this.toggleSelect(Number(tile.dataset.tileId));
      return;
    }
    const slot = el.closest<HTMLElement>(".slot[data-slot]");
    if (slot) this.onSlotClick(Number(slot.dataset.slot));
  }

  private toggleSelect(tileId: number): void {
    this.selected = this.selected === tileId ? null : tileId;
    this.notice = null;
    this.banner = null;
    this.render();
  }

  private onSlotClick(slot: number): void {
    if (!this.view) return;
    const seated = this.view.slots[slot];
    if (this.selected !== null) {
      if (seated) {
        // Occupied seats never produce a request.
        this.notice = "that seat is taken; pick an empty one";
        this.render();
        return;
      }
      const tile = this.selected;
      this.selected = null;
      this.placeAt(slot, tile);
      return;
    }
    if (seated) {
      this.removeAt(slot);
      return;
    }
    this.notice = "pick a friend from the tray first";
    this.render();
  }

  private onInput(ev: Event): void {
    const el = ev.target;
    if (!(el instanceof HTMLInputElement)) return;
    if (el.classList.contains("theme")) {
      this.themeDraft = el.value;
      return;
    }
    if (el.classList.contains("difficulty")) {
      const pct = Number(el.value);
      if (this.view) {
        this.adaptPct = pct;
      } else {
        this.startPct = pct;
      }
      // Update the readout in place; a full render would drop the drag.
      const out = el.closest(".difficulty-row")?.querySelector(".target-readout");
      if (out) out.textContent = readout(targetFromPct(pct));
    }
  }

  private onChange(ev: Event): void {
    const el = ev.target;
    if (el instanceof HTMLInputElement && el.classList.contains("reveal")) {
      this.reveal = el.checked;
      this.render();
    }
  }

  private onKeydown(ev: KeyboardEvent): void {
    if (ev.key !== "Enter" && ev.key !== " ") return;
    const el = ev.target instanceof Element ? ev.target.closest<HTMLElement>(".slot[data-slot]") : null;
    if (el) {
      ev.preventDefault();
      this.onSlotClick(Number(el.dataset.slot));
    }
  }

  // ----- rendering ---------------------------------------------------------

  private render(): void {
    this.root.classList.toggle("busy", this.gate.pending > 0);
    let screen: string;
    if (this.view) {
      screen = this.playScreen(this.view);
    } else if (this.loading) {
      screen = `<p class="loading">setting the table...</p>`;
    } else {
      screen = this.startScreen();
    }
    this.root.innerHTML = this.bannerHtml() + screen;
  }

  private bannerHtml(): string {
    if (!this.banner) return "";
    const retry = this.banner.retry ? ` <button type="button" class="retry">try again</button>` : "";
    return `<div class="banner" role="alert">${esc(this.banner.text)}${retry}</div>`;
  }

  private startScreen(): string {
    const target = targetFromPct(this.startPct);
    return `
<section class="start">
  <h1>tiletales</h1>
  <p class="tagline">a table, thirty friends, and a story that learns how you play</p>
  <label class="field">where does the story happen?
    <input class="theme" type="text" value="${esc(this.themeDraft)}" placeholder="the lakeside feast">
  </label>
  <div class="field difficulty-row">
    <label>how forgiving should the table be?
      <input class="difficulty" type="range" min="0" max="100" value="${this.startPct}">
    </label>
    <output class="target-readout">${readout(target)}</output>
  </div>
  <button type="button" class="start-button">begin the story</button>
</section>`;
  }

  private playScreen(view: SessionView): string {
    const seatedIds = new Set<number>();
    for (const tile of view.slots) {
      if (tile) seatedIds.add(tile.id);
    }
    const thrown = new Set(view.last_events.filter((e) => e.kind === "thrown_off").map((e) => e.tile));
    const shaken = new Set(view.last_events.filter((e) => e.kind === "shaken").map((e) => e.slot));
    const party = view.last_events.some((e) => e.kind === "completed");
    const names = new Map(view.tiles.map((t) => [t.id, t.name]));

    const slots = view.slots
      .map((tile, i) => {
        if (tile) {
          const cls = shaken.has(i) ? " shaken" : "";
          return `<div class="slot filled${cls}" data-slot="${i}" role="button" tabindex="0">${tileHtml(tile, false, "")}</div>`;
        }
        return `<div class="slot open" data-slot="${i}" role="button" tabindex="0"><span class="slot-hint">seat ${i + 1}</span></div>`;
      })
      .join("");

    const tray = view.tiles
      .filter((t) => !seatedIds.has(t.id))
      .map((t) => {
        const cls = (this.selected === t.id ? " selected" : "") + (thrown.has(t.id) ? " thrown" : "");
        return tileHtml(t, true, cls);
      })
      .join("");

    const entries = view.transcript
      .map((entry, i) => {
        const fresh = i === view.transcript.length - 1 ? " fresh" : "";
        return `<li class="entry${fresh}">${paragraphs(entry)}</li>`;
      })
      .join("");

    const feed = view.last_events.map((e) => `<p class="feed-line">${esc(eventLine(e, names))}</p>`).join("");

    const pct = this.adaptPct ?? pctFromTarget(view.difficulty_target);
    const rules = this.reveal
      ? `<ul class="rules">${view.rules.map((r) => `<li>${esc(r)}</li>`).join("")}</ul>`
      : "";

    return `
<header class="masthead">
  <h1>${esc(view.title)}</h1>
  <span class="session-tag">table ${esc(view.id.slice(0, 8))}</span>
</header>
${party ? `<div class="celebration" role="status">the table is complete!</div>` : ""}
<section class="story${party ? " after-party" : ""}">
  <h2>the story so far</h2>
  <ol class="entries">${entries}</ol>
</section>
<section class="board" aria-label="the table">${slots}</section>
${this.notice ? `<p class="notice" role="status">${esc(this.notice)}</p>` : ""}
<section class="tray" aria-label="the tray">${tray}</section>
<section class="feed" aria-live="polite">${feed}</section>
<section class="controls">
  <div class="field difficulty-row">
    <label>how forgiving should the table be next?
      <input class="difficulty" type="range" min="0" max="100" value="${pct}">
    </label>
    <output class="target-readout">${readout(targetFromPct(pct))}</output>
  </div>
  <button type="button" class="adapt-button">let the table learn new rules</button>
  <details class="debug"${this.debugOpen ? " open" : ""}>
    <summary>for experimenters</summary>
    <p class="debug-stat">target ${fmt(view.difficulty_target)}, reachable ${fmt(view.achieved)}</p>
    <label class="reveal-row"><input type="checkbox" class="reveal"${this.reveal ? " checked" : ""}> reveal the hidden rules</label>
    ${rules}
  </details>
</section>`;
  }
}

// ----- small helpers -------------------------------------------------------

function tileHtml(tile: TileView, clickable: boolean, extraClass: string): string {
  const color = tile.properties["color"] ?? "";
  const kind = tile.properties["type"] ?? "";
  const group = tile.properties["group"] ?? "";
  const meta = [kind, group].filter(Boolean).join(" / ");
  const body = `<span class="tile-name">${esc(tile.name)}</span><span class="tile-meta">${esc(meta)}</span>`;
  if (clickable) {
    return `<button type="button" class="tile${extraClass}" data-tile-id="${tile.id}" data-color="${esc(color)}">${body}</button>`;
  }
  return `<span class="tile${extraClass}" data-color="${esc(color)}">${body}</span>`;
}

function eventLine(event: EventView, names: Map<number, string>): string {
  const name = names.get(event.tile) ?? `tile ${event.tile}`;
  switch (event.kind) {
    case "placed":
      return `${name} sits down at seat ${event.slot + 1}.`;
    case "thrown_off":
      return `${name} is thrown off seat ${event.slot + 1}!`;
    case "shaken":
      return `the table shakes under ${name}.`;
    case "removed":
      return `${name} leaves seat ${event.slot + 1}.`;
    case "completed":
      return "the table is complete!";
    default:
      return `${name}: ${event.kind}`;
  }
}

function paragraphs(entry: string): string {
  return entry
    .split(/\n{2,}/)
    .map((p) => `<p>${esc(p.trim())}</p>`)
    .join("");
}

function readout(target: number): string {
  return `${fmt(target)} of ${fmt(TOTAL_SETS)} seatings allowed`;
}

function fmt(n: number): string {
  return n.toLocaleString("en-US");
}

const ESCAPES: Record<string, string> = {
  "&": "&amp;",
  "<": "&lt;",
  ">": "&gt;",
  '"': "&quot;",
  "'": "&#39;",
};

function esc(text: string): string {
  return text.replace(/[&<>"']/g, (ch) => ESCAPES[ch] ?? ch);
}

function describe(err: unknown): string {
  if (err instanceof ApiError) return err.message;
  return err instanceof Error ? err.message : String(err);
}
