import { ApiClient, ApiError, BusyError } from "./api.js";
import { cardFields, cardLines, type CardModel } from "./cards.js";
import { PlaybackBuffer } from "./playback.js";
import { plotPoint, regionPixelRects } from "./quadrant.js";
import { buildOffsets, forwardKinematics, project, type Vec3 } from "./skeleton.js";
import { StreamSession, type StreamFrame } from "./sse.js";
import type { Bootstrap, EventDoc, WindowDoc } from "./types.js";

const REGION_FILL: Record<string, string> = {
  Q1: "#3a2430",
  Q2: "#203a2c",
  Q3: "#1f3440",
  Q4: "#332a1f",
  Neutral: "#262a33",
};

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function canvas2d(id: string): [HTMLCanvasElement, CanvasRenderingContext2D] {
  const c = el<HTMLCanvasElement>(id);
  const ctx = c.getContext("2d");
  if (!ctx) throw new Error(`no 2d context on #${id}`);
  return [c, ctx];
}

async function* streamText(url: string): AsyncIterable<string> {
  const res = await fetch(url);
  if (!res.ok || !res.body) throw new Error(`stream failed: ${res.status}`);
  const reader = res.body.getReader();
  const decoder = new TextDecoder();
  try {
    for (;;) {
      const { done, value } = await reader.read();
      if (done) break;
      yield decoder.decode(value, { stream: true });
    }
  } finally {
    reader.releaseLock();
  }
}

class Console {
  private readonly api = new ApiClient("");
  private boot!: Bootstrap;
  private buffer!: PlaybackBuffer;
  private offsets!: Vec3[];
  private card: CardModel | null = null;
  private playhead = 0;
  private lastTick = 0;
  private seamCount = 0;

  async start(): Promise<void> {
    this.boot = await this.api.bootstrap();
    this.buffer = new PlaybackBuffer(this.boot.rates.planner_fps);
    this.offsets = buildOffsets(this.boot.skeleton);
    el("rates").textContent =
      `planner ${this.boot.rates.planner_fps} FPS | control ${this.boot.rates.control_rate} Hz`;
    this.wireInput();
    this.wireOverrides();
    this.wireHistory();
    void this.refreshHistory();
    this.runStream();
    this.lastTick = performance.now();
    requestAnimationFrame((t) => this.tick(t));
  }

  // -- input lane ----------------------------------------------------------

  private wireInput(): void {
    const form = el<HTMLFormElement>("input-form");
    const text = el<HTMLTextAreaElement>("input-text");
    const modality = el<HTMLSelectElement>("input-modality");
    const submit = el<HTMLButtonElement>("input-submit");
    const status = el("input-status");
    form.addEventListener("submit", (ev) => {
      ev.preventDefault();
      if (this.api.busy) return;
      submit.disabled = true;
      status.textContent = "inferring...";
      this.api
        .submitInput({ text: text.value || null, modality: modality.value })
        .then((doc) => {
          this.card = cardFields(doc);
          status.textContent = doc.outcome === "ok" ? "" : `${doc.outcome}: ${doc.error}`;
          this.renderCard();
          this.renderQuadrant();
          void this.refreshHistory();
        })
        .catch((err) => {
          status.textContent =
            err instanceof BusyError
              ? "inference busy, try again in a moment"
              : err instanceof ApiError
                ? `error ${err.status}: ${err.message}`
                : String(err);
        })
        .finally(() => {
          submit.disabled = false;
        });
    });
  }

  private renderCard(): void {
    const dl = el("card");
    dl.textContent = "";
    if (!this.card) return;
    for (const [label, value] of cardLines(this.card)) {
      const row = document.createElement("div");
      if (label === "decision" && this.card.fell_back) row.className = "fellback";
      const dt = document.createElement("dt");
      dt.textContent = label;
      const dd = document.createElement("dd");
      dd.textContent = value;
      row.append(dt, dd);
      dl.append(row);
    }
  }

  // -- quadrant plot ---------------------------------------------------------

  private renderQuadrant(): void {
    const [c, ctx] = canvas2d("quadrant");
    ctx.clearRect(0, 0, c.width, c.height);
    ctx.font = "10px monospace";
    for (const r of regionPixelRects(this.boot.affect, c.width, c.height)) {
      ctx.fillStyle = REGION_FILL[r.label] ?? "#222";
      ctx.fillRect(r.x, r.y, r.w, r.h);
      ctx.fillStyle = "#6a7180";
      ctx.fillText(r.label, r.x + 4, r.y + 12);
    }
    if (this.card) {
      // position from the numbers, label from the server's own call
      const p = plotPoint(this.card.valence, this.card.arousal, c.width, c.height);
      ctx.fillStyle = "#5ab0f7";
      ctx.beginPath();
      ctx.arc(p.x, p.y, 5, 0, Math.PI * 2);
      ctx.fill();
      ctx.fillStyle = "#d7dce5";
      ctx.fillText(this.card.quadrant, p.x + 8, p.y - 6);
    }
  }

  // -- overrides -------------------------------------------------------------

  private wireOverrides(): void {
    const grid = el("override-grid");
    const status = el("override-status");
    for (const entry of this.boot.vocabulary) {
      const btn = document.createElement("button");
      btn.type = "button";
      btn.textContent = entry.display_text;
      if (entry.safety_class === "prohibited") {
        btn.disabled = true;
        btn.className = "prohibited";
        btn.title = "prohibited primitive";
      } else {
        btn.addEventListener("click", () => {
          status.textContent = "...";
          this.api
            .override(entry.id)
            .then((ack) => {
              status.textContent = `${ack.display_text}: source ${ack.source}` +
                (ack.forced ? " [forced]" : "");
            })
            .catch((err) => {
              status.textContent = err instanceof ApiError ? err.message : String(err);
            });
        });
      }
      grid.append(btn);
    }
  }

  // -- history ---------------------------------------------------------------

  private wireHistory(): void {
    el("history-refresh").addEventListener("click", () => void this.refreshHistory());
  }

  private async refreshHistory(): Promise<void> {
    const doc = await this.api.history();
    el("history-meta").textContent =
      `${doc.exchanges.length} shown, ${doc.total_seen} total, capacity ${doc.capacity}`;
    const list = el("history");
    list.textContent = "";
    for (const ex of doc.exchanges) {
      const li = document.createElement("li");
      li.textContent = `${ex.summary} -> ${ex.output.quadrant}`;
      list.append(li);
    }
  }

  // -- stream + playback -------------------------------------------------------

  private runStream(): void {
    const dot = el("stream-dot");
    const label = el("stream-label");
    const session = new StreamSession(
      () => {
        dot.className = "dot on";
        label.textContent = "live";
        return streamText(this.api.streamUrl());
      },
      (frame) => this.onFrame(frame),
      () => {
        dot.className = "dot gap";
        label.textContent = "reconnecting";
        this.buffer.markGap();
      },
      1500,
    );
    void session.run();
  }

  private onFrame(frame: StreamFrame): void {
    if (frame.kind === "window") {
      this.buffer.append(frame.doc as WindowDoc);
    } else if (frame.kind === "event") {
      const doc = frame.doc as EventDoc;
      if (doc.kind === "primitive_switch" || doc.kind === "fallback_triggered") {
        this.renderSeams();
      }
    }
  }

  private renderSeams(): void {
    const recent = this.buffer.seams.slice(-4);
    el("seams").textContent = recent
      .map(
        (s) =>
          `${s.gap ? "gap " : ""}${s.from ?? "start"} -> ${s.to}` +
          (s.forced ? " [forced]" : ""),
      )
      .join("   ");
  }

  // -- render loop --------------------------------------------------------------

  private tick(now: number): void {
    const dt = Math.min(0.1, (now - this.lastTick) / 1000);
    this.lastTick = now;
    const period = this.boot.rates.window_period;
    const live = this.buffer.duration - period;
    if (live > 0) {
      this.playhead += dt;
      if (Math.abs(this.playhead - live) > 2 * period) this.playhead = live;
      this.playhead = Math.min(this.playhead, this.buffer.duration - 1 / this.buffer.fps);
      const sample = this.buffer.sample(this.playhead);
      if (sample) {
        this.renderSkeleton(sample.frame, sample.primitive, sample.forced);
        this.renderBars(sample.angles);
        el("playback-label").textContent =
          `${sample.primitive}${sample.forced ? " " : ""}` +
          `${sample.forced ? "[OPERATOR]" : ""} t=${this.playhead.toFixed(2)}s`;
      }
    }
    if (this.buffer.seams.length !== this.seamCount) {
      this.seamCount = this.buffer.seams.length;
      this.renderSeams();
    }
    this.renderTimeline();
    requestAnimationFrame((t) => this.tick(t));
  }

  private renderSkeleton(frame: number[], primitive: string, forced: boolean): void {
    const [c, ctx] = canvas2d("skeleton");
    ctx.clearRect(0, 0, c.width, c.height);
    const pts = project(forwardKinematics(frame, this.boot.skeleton, this.offsets), c.width, c.height);
    ctx.strokeStyle = forced ? "#f7a75a" : "#5ab0f7";
    ctx.lineWidth = 2.5;
    ctx.lineCap = "round";
    for (let j = 0; j < pts.length; j++) {
      const p = this.boot.skeleton.parents[j];
      if (p < 0) continue;
      ctx.beginPath();
      ctx.moveTo(pts[p].x, pts[p].y);
      ctx.lineTo(pts[j].x, pts[j].y);
      ctx.stroke();
    }
    const head = this.boot.skeleton.joints.indexOf("head");
    if (head >= 0) {
      ctx.beginPath();
      ctx.arc(pts[head].x, pts[head].y - 8, 9, 0, Math.PI * 2);
      ctx.stroke();
    }
    ctx.fillStyle = "#8b93a3";
    ctx.font = "11px monospace";
    ctx.fillText(primitive, 10, c.height - 10);
  }

  private renderBars(angles: number[]): void {
    const [c, ctx] = canvas2d("bars");
    ctx.clearRect(0, 0, c.width, c.height);
    const mid = c.height / 2;
    const w = c.width / angles.length;
    ctx.fillStyle = "#5ab0f7";
    for (let k = 0; k < angles.length; k++) {
      const h = Math.max(-1, Math.min(1, angles[k] / Math.PI)) * (mid - 4);
      ctx.fillRect(k * w + 1, h >= 0 ? mid - h : mid, w - 2, Math.abs(h));
    }
    ctx.strokeStyle = "#2f3542";
    ctx.beginPath();
    ctx.moveTo(0, mid);
    ctx.lineTo(c.width, mid);
    ctx.stroke();
  }

  private renderTimeline(): void {
    const [c, ctx] = canvas2d("timeline");
    ctx.clearRect(0, 0, c.width, c.height);
    const dur = this.buffer.duration;
    if (dur <= 0) return;
    ctx.fillStyle = "#2f3542";
    ctx.fillRect(0, 10, c.width, 6);
    for (const s of this.buffer.seams) {
      const x = (s.atFrame / this.buffer.fps / dur) * c.width;
      ctx.fillStyle = s.gap ? "#f75a6b" : s.forced ? "#f7a75a" : "#5ab0f7";
      ctx.fillRect(x - 1, 4, 2, 18);
    }
    const x = (this.playhead / dur) * c.width;
    ctx.fillStyle = "#d7dce5";
    ctx.fillRect(x - 1, 2, 2, 22);
  }
}

new Console().start().catch((err) => {
  document.body.insertAdjacentText("beforeend", `console failed to start: ${err}`);
});
