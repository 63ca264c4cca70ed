// Server-sent-events consumer with resume and reconnect.
//
// Built on fetch + ReadableStream rather than EventSource so the same code
// runs in the browser and under Node (integration tests). On disconnect it
// retries with capped backoff and resumes from the last seen sequence
// number, so the projection never sees a gap.

import { StreamItem } from "./types.js";

export interface StreamHandlers {
  onItem: (item: StreamItem) => void;
  onStale?: (stale: boolean) => void;
}

export class EventStream {
  private lastSeq = 0;
  private stopped = false;
  private attempts = 0;

  constructor(private base: string, private handlers: StreamHandlers) {}

  start(): void {
    void this.loop();
  }

  stop(): void {
    this.stopped = true;
  }

  private async loop(): Promise<void> {
    while (!this.stopped) {
      try {
        const resp = await fetch(`${this.base}/events?since=${this.lastSeq}`, {
          headers: { accept: "text/event-stream" },
        });
        if (!resp.ok || !resp.body) throw new Error(`stream HTTP ${resp.status}`);
        this.attempts = 0;
        this.handlers.onStale?.(false);
        await this.consume(resp.body);
      } catch {
        // fall through to reconnect
      }
      if (this.stopped) return;
      this.handlers.onStale?.(true);
      this.attempts += 1;
      const backoff = Math.min(250 * 2 ** this.attempts, 5000);
      await new Promise((resolve) => setTimeout(resolve, backoff));
    }
  }

  private async consume(body: ReadableStream<Uint8Array>): Promise<void> {
    const reader = body.getReader();
    const decoder = new TextDecoder();
    let buffer = "";
    while (!this.stopped) {
      const { done, value } = await reader.read();
      if (done) return;
      buffer += decoder.decode(value, { stream: true });
      let cut;
      while ((cut = buffer.indexOf("\n\n")) !== -1) {
        const frame = buffer.slice(0, cut);
        buffer = buffer.slice(cut + 2);
        this.handleFrame(frame);
      }
    }
    await reader.cancel().catch(() => undefined);
  }

  private handleFrame(frame: string): void {
    for (const line of frame.split("\n")) {
      if (!line.startsWith("data: ")) continue; // ids ride inside the JSON too
      try {
        const item = JSON.parse(line.slice(6)) as StreamItem;
        this.lastSeq = Math.max(this.lastSeq, item.seq);
        this.handlers.onItem(item);
      } catch {
        // tolerate partial garbage; the next frame resyncs
      }
    }
  }
}
