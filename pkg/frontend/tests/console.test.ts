import { describe, expect, it } from "vitest";

import { ApiClient, ApiError, BusyError } from "../src/api.js";
import { cardFields } from "../src/cards.js";
import { PlaybackBuffer } from "../src/playback.js";
import { classify, inRegion, regions } from "../src/quadrant.js";
import type { Bootstrap, InputResponse, OverrideResponse } from "../src/types.js";
import { fixture, streamWindows } from "./helpers.js";

// End-to-end console behavior against payloads captured from a live
// server session: an aggressive input, a friendly one, then an operator
// override to "cheer" mid-stream.

const bootstrap = fixture<Bootstrap>("bootstrap.json");
const hostile = fixture<InputResponse>("input_hostile.json");
const greeting = fixture<InputResponse>("input_greeting.json");
const overrideAck = fixture<OverrideResponse>("override.json");

function json(payload: unknown, status = 200): Response {
  return new Response(JSON.stringify(payload), {
    status,
    headers: { "content-type": "application/json" },
  });
}

describe("card fields mirror the inference payload", () => {
  it.each([
    ["hostile", hostile],
    ["greeting", greeting],
  ])("%s response copies through unchanged", (_label, doc) => {
    const card = cardFields(doc);
    expect(card.description).toBe(doc.output.description);
    expect(card.intent).toBe(doc.output.intent);
    expect(card.intent_text).toBe(doc.output.intent_text);
    expect(card.confidence).toBe(doc.output.confidence);
    expect(card.valence).toBe(doc.output.valence);
    expect(card.arousal).toBe(doc.output.arousal);
    expect(card.quadrant).toBe(doc.output.quadrant);
    expect(card.primitive_token).toBe(doc.output.primitive_token);
    expect(card.primitive).toBe(doc.decision.primitive);
    expect(card.display_text).toBe(doc.decision.display_text);
    expect(card.fell_back).toBe(doc.decision.fell_back);
    expect(card.amplitude_scale).toBe(doc.decision.style.amplitude_scale);
    expect(card.tempo_scale).toBe(doc.decision.style.tempo_scale);
    expect(card.openness).toBe(doc.decision.style.openness);
    expect(card.latency_s).toBe(doc.latency_s);
    expect(card.outcome).toBe(doc.outcome);
    expect(card.error).toBe(doc.error);
  });
});

describe("affect placement of the reference inputs", () => {
  const geom = bootstrap.affect;
  const regionByLabel = new Map(regions(geom).map((r) => [r.label, r]));

  function insideBox(v: number, a: number, label: string): boolean {
    const r = regionByLabel.get(label)!;
    return v > r.v0 && v < r.v1 && a > r.a0 && a < r.a1;
  }

  it("the hostile input sits in the hostile quadrant", () => {
    const { valence, arousal, quadrant } = hostile.output;
    expect(classify(valence, arousal, geom)).toBe("Q1");
    expect(quadrant).toBe("Q1");
    expect(inRegion(valence, arousal, "Q1", geom)).toBe(true);
    expect(insideBox(valence, arousal, "Q1")).toBe(true);
  });

  it("the greeting input sits in the friendly-calm quadrant", () => {
    const { valence, arousal, quadrant } = greeting.output;
    expect(classify(valence, arousal, geom)).toBe("Q3");
    expect(quadrant).toBe("Q3");
    expect(inRegion(valence, arousal, "Q3", geom)).toBe(true);
    expect(insideBox(valence, arousal, "Q3")).toBe(true);
  });

  it("each point is in exactly one region", () => {
    for (const doc of [hostile, greeting]) {
      const hits = regions(geom).filter((r) =>
        inRegion(doc.output.valence, doc.output.arousal, r.label, geom),
      );
      expect(hits).toHaveLength(1);
      expect(hits[0].label).toBe(doc.output.quadrant);
    }
  });
});

describe("operator override round trip", () => {
  it("acknowledges with the forced operator decision", () => {
    expect(overrideAck.primitive).toBe("cheer");
    expect(overrideAck.display_text).toBe("excited cheer");
    expect(overrideAck.source).toBe("operator");
    expect(overrideAck.forced).toBe(true);
  });

  it("marks every subsequent window as forced", () => {
    const pre = streamWindows("stream_pre_override.txt");
    const post = streamWindows("stream_post_override.txt");
    expect(pre.length).toBeGreaterThan(0);
    expect(post.length).toBeGreaterThan(0);
    for (const w of pre) {
      expect(w.forced).toBe(false);
      expect(w.source).toBe("inference");
    }
    for (const w of post) {
      expect(w.primitive).toBe(overrideAck.primitive);
      expect(w.forced).toBe(true);
      expect(w.source).toBe("operator");
    }
  });

  it("plays back with a forced switch seam, no blending across it", () => {
    const pre = streamWindows("stream_pre_override.txt");
    const post = streamWindows("stream_post_override.txt");
    const buf = new PlaybackBuffer(bootstrap.rates.planner_fps);
    for (const w of [...pre, ...post]) expect(buf.append(w)).toBe(true);

    expect(buf.seams).toHaveLength(1);
    const seam = buf.seams[0];
    expect(seam.switch).toBe(true);
    expect(seam.gap).toBe(false);
    expect(seam.from).toBe("wave_right_hand");
    expect(seam.to).toBe("cheer");
    expect(seam.forced).toBe(true);
    expect(seam.atFrame).toBe(pre.length * 8);

    const fps = bootstrap.rates.planner_fps;
    const inside = buf.sample((seam.atFrame + 4) / fps)!;
    expect(inside.primitive).toBe("cheer");
    expect(inside.forced).toBe(true);

    const straddle = buf.sample((seam.atFrame - 0.5) / fps)!;
    expect(straddle.blended).toBe(false);
    expect(straddle.seam).not.toBeNull();
    expect(straddle.seam!.forced).toBe(true);

    const before = buf.sample((seam.atFrame - 4) / fps)!;
    expect(before.primitive).toBe("wave_right_hand");
    expect(before.forced).toBe(false);
  });
});

describe("api client", () => {
  it("returns server payloads untouched", async () => {
    const calls: string[] = [];
    const client = new ApiClient("", async (url) => {
      calls.push(url);
      if (url === "/bootstrap") return json(bootstrap);
      if (url === "/session/input") return json(hostile);
      if (url === "/session/override") return json(overrideAck);
      return new Response("not found", { status: 404 });
    });
    expect(await client.bootstrap()).toEqual(bootstrap);
    expect(
      await client.submitInput({ text: "x", images_base64: [], modality: "combined" }),
    ).toEqual(hostile);
    expect(await client.override("cheer")).toEqual(overrideAck);
    expect(calls).toEqual(["/bootstrap", "/session/input", "/session/override"]);
  });

  it("sends the override id the server expects", async () => {
    let sent: unknown = null;
    const client = new ApiClient("", async (_url, init) => {
      sent = JSON.parse(String(init?.body));
      return json(overrideAck);
    });
    await client.override("cheer");
    expect(sent).toEqual({ primitive_id: "cheer" });
  });

  it("refuses a second submission while one is in flight", async () => {
    let release!: (r: Response) => void;
    let fetches = 0;
    const client = new ApiClient("", () => {
      fetches++;
      return new Promise<Response>((resolve) => {
        release = resolve;
      });
    });
    const body = { text: "x", images_base64: [], modality: "combined" as const };
    const first = client.submitInput(body);
    expect(client.busy).toBe(true);
    await expect(client.submitInput(body)).rejects.toMatchObject({
      name: "BusyError",
      source: "local",
    });
    expect(fetches).toBe(1);
    release(json(hostile));
    expect(await first).toEqual(hostile);
    expect(client.busy).toBe(false);
  });

  it("maps a server 409 to a busy error", async () => {
    const client = new ApiClient("", async () => new Response("busy", { status: 409 }));
    const body = { text: "x", images_base64: [], modality: "combined" as const };
    const err = await client
      .submitInput(body)
      .then(() => null)
      .catch((e: unknown) => e);
    expect(err).toBeInstanceOf(BusyError);
    expect((err as BusyError).source).toBe("server");
    expect(client.busy).toBe(false);
  });

  it("surfaces other failures with status and body text", async () => {
    const client = new ApiClient(
      "",
      async () => new Response("boom", { status: 500 }),
    );
    const err = await client.history().catch((e: unknown) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect((err as ApiError).status).toBe(500);
    expect((err as ApiError).message).toBe("boom");
  });

  it("builds stream urls with and without a frame limit", () => {
    const client = new ApiClient("http://host");
    expect(client.streamUrl()).toBe("http://host/stream");
    expect(client.streamUrl(120)).toBe("http://host/stream?limit=120");
  });
});
