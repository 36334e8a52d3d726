// Incremental server-sent-events parsing plus a reconnecting session.
// The parser is pure (text chunks in, frames out) so the wire handling is
// testable without sockets; StreamSession owns the reconnect-with-gap
// behavior and takes its transport as an async-iterable factory.

export interface StreamFrame {
  kind: string;
  doc: unknown;
}

export class SseParser {
  private buf = "";

  push(chunk: string): StreamFrame[] {
    this.buf += chunk;
    const frames: StreamFrame[] = [];
    for (;;) {
      const cut = this.buf.indexOf("\n\n");
      if (cut < 0) break;
      const block = this.buf.slice(0, cut);
      this.buf = this.buf.slice(cut + 2);
      const frame = parseBlock(block);
      if (frame) frames.push(frame);
    }
    return frames;
  }
}

function parseBlock(block: string): StreamFrame | null {
  let kind = "message";
  const data: string[] = [];
  for (const line of block.split("\n")) {
    if (line.startsWith(":")) continue; // comment / keepalive
    if (line.startsWith("event:")) kind = line.slice("event:".length).trim();
    else if (line.startsWith("data:")) data.push(line.slice("data:".length).trimStart());
  }
  if (!data.length) return null;
  try {
    return { kind, doc: JSON.parse(data.join("\n")) };
  } catch {
    return null; // malformed frame: drop, never crash the stream
  }
}

export type TextStreamFactory = () => AsyncIterable<string>;

export class StreamSession {
  private stopped = false;

  constructor(
    private readonly connect: TextStreamFactory,
    private readonly onFrame: (frame: StreamFrame) => void,
    private readonly onGap: () => void,
    private readonly retryDelayMs = 1000,
    private readonly sleep: (ms: number) => Promise<void> = (ms) =>
      new Promise((resolve) => setTimeout(resolve, ms)),
  ) {}

  stop(): void {
    this.stopped = true;
  }

  // Runs until stop(). Every disconnect, clean or not, is a gap: frames
  // may have been missed, so downstream playback must mark the boundary.
  async run(): Promise<void> {
    while (!this.stopped) {
      const parser = new SseParser();
      try {
        for await (const chunk of this.connect()) {
          for (const frame of parser.push(chunk)) this.onFrame(frame);
          if (this.stopped) break;
        }
      } catch {
        // transport error: fall through to the gap + retry path
      }
      if (this.stopped) break;
      this.onGap();
      await this.sleep(this.retryDelayMs);
    }
  }
}
