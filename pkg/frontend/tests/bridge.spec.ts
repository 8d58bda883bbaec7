import { execFileSync } from "node:child_process";
import { mkdtempSync, readFileSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { EconBridge, conformsTo } from "../src/bridge.js";
import { TrajectoryRow } from "../src/types.js";

const PYTHON = process.env.ECONSIM_PYTHON ?? "python3";
const SCENARIO = "aging-pension";
const SEED = 7;
const OVERRIDES = ["population.size=100", "termination.horizon=30"];

interface RecordedStep {
  t: number;
  actions: Record<string, number[] | number[][]>;
}

let workDir: string;
let nativeRows: TrajectoryRow[] = [];
let recorded: RecordedStep[] = [];

beforeAll(() => {
  // Native reference run: trajectory plus a per-step action record.
  workDir = mkdtempSync(join(tmpdir(), "econsim-bridge-"));
  const args = [
    "-m", "econsim", "run", SCENARIO,
    "--seed", String(SEED),
    "--out", workDir,
    "--format", "jsonl",
    "--record-actions", join(workDir, "actions.jsonl"),
    "--quiet",
  ];
  for (const override of OVERRIDES) args.push("--set", override);
  execFileSync(PYTHON, args, { stdio: ["ignore", "ignore", "inherit"] });

  const lines = readFileSync(join(workDir, `trajectory-seed${SEED}.jsonl`), "utf8")
    .trim()
    .split("\n");
  const header = JSON.parse(lines[0]);
  expect(header.trajectory_schema).toBe(1);
  nativeRows = lines.slice(1).map((l) => JSON.parse(l) as TrajectoryRow);

  recorded = readFileSync(join(workDir, "actions.jsonl"), "utf8")
    .trim()
    .split("\n")
    .map((l) => JSON.parse(l) as RecordedStep);
}, 120_000);

afterAll(() => {
  rmSync(workDir, { recursive: true, force: true });
});

describe("handshake", () => {
  it("publishes the documented vector spec and initial observations", async () => {
    const bridge = new EconBridge({
      scenario: SCENARIO,
      seed: SEED,
      external: ["pension"],
      overrides: OVERRIDES,
    });
    try {
      const reset = await bridge.reset();
      expect(reset.protocol).toBe(1);

      const pension = reset.vector_spec.kinds.pension!;
      expect(pension.observation_fields).toHaveLength(15);
      expect(pension.action_fields).toEqual(["retirement_age", "tau_p", "k"]);
      expect(pension.action_bounds[0]).toEqual([40, 70]);

      const households = reset.vector_spec.kinds.households!;
      expect(households.observation_fields).toHaveLength(9); // OLG adds age
      expect(households.action_fields).toEqual([
        "allocation",
        "labor",
        "investment",
      ]);

      const obs = reset.observations.pension as number[];
      expect(conformsTo(obs, pension.observation_fields)).toBe(true);

      const agents = Object.fromEntries(reset.agents.map((a) => [a.role, a]));
      expect(agents.pension.external).toBe(true);
      expect(agents.households.count).toBe(100);
    } finally {
      await bridge.close();
    }
  }, 60_000);
});

describe("parity with the native engine", () => {
  it("replaying recorded actions reproduces the native trajectory bit-exactly", async () => {
    const bridge = new EconBridge({
      scenario: SCENARIO,
      seed: SEED,
      external: ["pension"],
      overrides: OVERRIDES,
    });
    try {
      await bridge.reset();
      const bridgeRows: TrajectoryRow[] = [];
      let done = false;
      let reason: string | null = null;
      for (const step of recorded) {
        const reply = await bridge.step({
          pension: step.actions.pension as number[],
        });
        bridgeRows.push(reply.row);
        expect(reply.t).toBe(step.t);
        // Rewards surface for the externally driven agent.
        expect(typeof reply.rewards.pension).toBe("number");
        done = reply.done;
        reason = reply.reason;
        if (done) break;
      }

      expect(bridgeRows.length).toBe(nativeRows.length);
      for (let i = 0; i < nativeRows.length; i++) {
        for (const [column, value] of Object.entries(nativeRows[i])) {
          // JSON numbers are shortest-round-trip decimals, so float64 values
          // survive both directions exactly; strict equality is the test.
          expect(bridgeRows[i][column], `row ${i} column ${column}`).toBe(value);
        }
      }
      expect(done).toBe(true);
      expect(reason).toBe("horizon");
    } finally {
      await bridge.close();
    }
  }, 120_000);
});

describe("parity with every decision role external", () => {
  it("reproduces the native trajectory when households are injected too", async () => {
    const bridge = new EconBridge({
      scenario: SCENARIO,
      seed: SEED,
      external: ["pension", "households"],
      overrides: OVERRIDES,
    });
    try {
      const reset = await bridge.reset();
      const householdObs = reset.observations.households as number[][];
      expect(householdObs).toHaveLength(100);
      expect(householdObs[0]).toHaveLength(9);

      for (const step of recorded) {
        const reply = await bridge.step({
          pension: step.actions.pension as number[],
          households: step.actions.households as number[][],
        });
        const native = nativeRows[step.t];
        expect(reply.row.gdp).toBe(native.gdp);
        expect(reply.row.welfare).toBe(native.welfare);
        expect(reply.row.pension_fund).toBe(native.pension_fund);
        expect(Array.isArray(reply.rewards.households)).toBe(true);
        if (reply.done) break;
      }
    } finally {
      await bridge.close();
    }
  }, 120_000);
});

describe("action validation", () => {
  it("clamps out-of-bounds actions instead of failing", async () => {
    const bridge = new EconBridge({
      scenario: SCENARIO,
      seed: 1,
      external: ["pension"],
      overrides: ["population.size=40", "termination.horizon=5"],
    });
    try {
      await bridge.reset();
      const reply = await bridge.step({ pension: [95, 0.5, 0] });
      expect(reply.t).toBe(0);
      expect(reply.done).toBe(false);
    } finally {
      await bridge.close();
    }
  }, 60_000);

  it("rejects a step with a missing external action", async () => {
    const bridge = new EconBridge({
      scenario: SCENARIO,
      seed: 1,
      external: ["pension"],
      overrides: ["population.size=40", "termination.horizon=5"],
    });
    try {
      await bridge.reset();
      await expect(bridge.step({})).rejects.toThrow(/missing/);
    } finally {
      await bridge.close();
    }
  }, 60_000);
});
