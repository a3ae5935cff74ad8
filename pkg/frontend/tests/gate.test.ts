import { describe, expect, it } from "vitest";

import { RequestGate } from "../src/gate.js";

describe("RequestGate", () => {
  it("runs work strictly one at a time, in submission order", async () => {
    const gate = new RequestGate();
    const log: string[] = [];
    let releaseFirst!: () => void;
    const first = gate.run(
      () =>
        new Promise<string>((resolve) => {
          log.push("first started");
          releaseFirst = () => resolve("one");
        }),
    );
    const second = gate.run(async () => {
      log.push("second started");
      return "two";
    });
    await Promise.resolve();
    expect(log).toEqual(["first started"]);
    expect(gate.pending).toBe(2);

    releaseFirst();
    await expect(first).resolves.toBe("one");
    await expect(second).resolves.toBe("two");
    expect(log).toEqual(["first started", "second started"]);
    expect(gate.pending).toBe(0);
  });

  it("keeps serving after a failure", async () => {
    const gate = new RequestGate();
    const log: string[] = [];
    const bad = gate.run(async () => {
      log.push("bad");
      throw new Error("boom");
    });
    const good = gate.run(async () => {
      log.push("good");
      return 7;
    });
    await expect(bad).rejects.toThrow("boom");
    await expect(good).resolves.toBe(7);
    expect(log).toEqual(["bad", "good"]);
    await gate.idle();
    expect(gate.pending).toBe(0);
  });
});
