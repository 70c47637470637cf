/**
 * Interval polling with overlap protection: a slow response never stacks
 * a second request, and a fetch resolving after stop() is discarded, so
 * renders are last-write-wins on the freshest started fetch.
 */

export interface Poller {
  start(): void;
  stop(): void;
  /** Immediate out-of-band fetch (e.g. right after a decision). */
  fetchNow(): Promise<void>;
}

export function createPoller<T>(
  fetcher: () => Promise<T>,
  onData: (data: T) => void,
  onError: (error: unknown) => void,
  intervalMs: number,
): Poller {
  let timer: ReturnType<typeof setInterval> | null = null;
  let inFlight = false;
  let stopped = true;
  let generation = 0;

  async function tick(): Promise<void> {
    if (inFlight) return;
    inFlight = true;
    const started = ++generation;
    try {
      const data = await fetcher();
      if (!stopped && started === generation) onData(data);
    } catch (err) {
      if (!stopped && started === generation) onError(err);
    } finally {
      inFlight = false;
    }
  }

  return {
    start() {
      if (timer !== null) return;
      stopped = false;
      void tick();
      timer = setInterval(() => void tick(), intervalMs);
    },
    stop() {
      stopped = true;
      if (timer !== null) {
        clearInterval(timer);
        timer = null;
      }
    },
    fetchNow() {
      return tick();
    },
  };
}
