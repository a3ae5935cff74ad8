/* Client-side request serialization: at most one request on the wire,
 * later ones wait their turn in submission order.
 */

export class RequestGate {
  private tail: Promise<void> = Promise.resolve();
  private depth = 0;

  /** Number of requests submitted but not yet settled. */
  get pending(): number {
    return this.depth;
  }

  run<T>(work: () => Promise<T>): Promise<T> {
    this.depth += 1;
    const turn = this.tail.then(() => work());
    // The tail must never reject, or one failure would wedge the queue.
    this.tail = turn.then(
      () => {
        this.depth -= 1;
      },
      () => {
        this.depth -= 1;
      },
    );
    return turn;
  }

  /** Resolves once everything submitted so far has settled. */
  idle(): Promise<void> {
    return this.tail;
  }
}
