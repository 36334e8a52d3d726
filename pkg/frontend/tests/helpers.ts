import { readFileSync } from "node:fs";

import { SseParser } from "../src/sse.js";
import type { WindowDoc } from "../src/types.js";

export function fixture<T>(name: string): T {
  return JSON.parse(raw(name)) as T;
}

export function raw(name: string): string {
  return readFileSync(new URL(`./fixtures/${name}`, import.meta.url), "utf8");
}

export function streamWindows(name: string): WindowDoc[] {
  const parser = new SseParser();
  return parser
    .push(raw(name))
    .filter((f) => f.kind === "window")
    .map((f) => f.doc as WindowDoc);
}
