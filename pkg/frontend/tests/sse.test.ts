import { describe, expect, it } from "vitest";

import { SseParser, StreamSession, type StreamFrame } from "../src/sse.js";
import type { EventDoc, WindowDoc } from "../src/types.js";
import { raw } from "./helpers.js";

describe("sse parser", () => {
  it("parses one complete frame", () => {
    const frames = new SseParser().push('event: event\ndata: {"kind":"x"}\n\n');
    expect(frames).toEqual([{ kind: "event", doc: { kind: "x" } }]);
  });

  it("buffers partial frames across pushes", () => {
    const parser = new SseParser();
    expect(parser.push("event: window\nda")).toEqual([]);
    expect(parser.push('ta: {"index":4}\n')).toEqual([]);
    expect(parser.push("\n")).toEqual([{ kind: "window", doc: { index: 4 } }]);
  });

  it("ignores keepalive comments and the connect preamble", () => {
    const parser = new SseParser();
    expect(parser.push(": connected\n\n")).toEqual([]);
    expect(parser.push(": keepalive\n\n")).toEqual([]);
    expect(parser.push('event: event\ndata: {"a":1}\n\n')).toHaveLength(1);
  });

  it("drops malformed json without dying", () => {
    const parser = new SseParser();
    expect(parser.push("event: event\ndata: {nope\n\n")).toEqual([]);
    expect(parser.push('event: event\ndata: {"ok":true}\n\n')).toHaveLength(1);
  });

  it("defaults the kind when the event line is missing", () => {
    expect(new SseParser().push("data: 1\n\n")[0].kind).toBe("message");
  });

  it("handles many frames in one chunk", () => {
    const chunk = 'event: a\ndata: 1\n\nevent: b\ndata: 2\n\nevent: c\ndata: 3\n\n';
    expect(new SseParser().push(chunk).map((f) => f.kind)).toEqual(["a", "b", "c"]);
  });
});

describe("sse parser on captured wire text", () => {
  it("reads the real stream: preamble, events, full windows", () => {
    const text = raw("stream_pre_override.txt");
    expect(text.startsWith(": connected\n\n")).toBe(true);
    const frames = new SseParser().push(text);
    const kinds = new Set(frames.map((f) => f.kind));
    expect(kinds).toEqual(new Set(["event", "window"]));
    const windows = frames.filter((f) => f.kind === "window").map((f) => f.doc as WindowDoc);
    expect(windows.length).toBeGreaterThan(0);
    for (const w of windows) {
      expect(w.frames).toHaveLength(8);
      expect(w.frames[0]).toHaveLength(135);
      expect(w.angles).toHaveLength(8);
      expect(w.angles[0]).toHaveLength(29);
    }
    const events = frames.filter((f) => f.kind === "event").map((f) => f.doc as EventDoc);
    for (const e of events.slice(0, 20)) {
      expect(typeof e.t).toBe("number");
      expect(typeof e.kind).toBe("string");
      expect(e.digest).toMatch(/^[0-9a-f]{16}$/);
    }
  });

  it("parses identically when the text arrives byte by byte", () => {
    const text = raw("stream_post_override.txt");
    const whole = new SseParser().push(text);
    const dribble = new SseParser();
    const collected: StreamFrame[] = [];
    for (let i = 0; i < text.length; i += 7) {
      collected.push(...dribble.push(text.slice(i, i + 7)));
    }
    expect(collected).toEqual(whole);
  });
});

describe("stream session", () => {
  async function* chunks(...parts: string[]): AsyncIterable<string> {
    for (const p of parts) yield p;
  }

  it("reconnects after a drop, reporting the gap between connections", async () => {
    let connections = 0;
    const seen: string[] = [];
    const gaps: number[] = [];
    const session = new StreamSession(
      () => {
        connections += 1;
        if (connections === 1) return chunks('event: a\ndata: 1\n\nevent: b\nda');
        return chunks('event: c\ndata: 3\n\n');
      },
      (f) => {
        seen.push(f.kind);
        if (f.kind === "c") session.stop();
      },
      () => gaps.push(seen.length),
      0,
      () => Promise.resolve(),
    );
    await session.run();
    expect(seen).toEqual(["a", "c"]); // the half-frame "b" never surfaced
    expect(gaps).toEqual([1]); // one gap, after the first connection died
    expect(connections).toBe(2);
  });

  it("a transport error counts as a gap too", async () => {
    let connections = 0;
    const gaps: string[] = [];
    const session = new StreamSession(
      () => {
        connections += 1;
        if (connections === 1) {
          return (async function* (): AsyncIterable<string> {
            yield "event: a\ndata: 1\n\n";
            throw new Error("connection reset");
          })();
        }
        return chunks("event: done\ndata: 1\n\n");
      },
      (f) => {
        if (f.kind === "done") session.stop();
      },
      () => gaps.push("gap"),
      0,
      () => Promise.resolve(),
    );
    await session.run();
    expect(gaps).toEqual(["gap"]);
  });

  it("stop() ends the loop without another connection", async () => {
    let connections = 0;
    const session = new StreamSession(
      () => {
        connections += 1;
        return chunks("event: a\ndata: 1\n\n");
      },
      () => session.stop(),
      () => {},
      0,
      () => Promise.resolve(),
    );
    await session.run();
    expect(connections).toBe(1);
  });
});
