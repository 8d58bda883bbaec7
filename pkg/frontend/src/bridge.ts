import { ChildProcessWithoutNullStreams, spawn } from "node:child_process";
import { createInterface, Interface } from "node:readline";

import {
  ActionMap,
  ErrorMessage,
  ResetMessage,
  ServerMessage,
  StepMessage,
} from "./types.js";

export interface BridgeOptions {
  /** Scenario file path or bundled preset name. */
  scenario: string;
  seed?: number;
  /** Roles driven by this client; everything else runs its native policy. */
  external: string[];
  /** Config overrides as "path=value" strings. */
  overrides?: string[];
  /** Python interpreter (default: ECONSIM_PYTHON env var or "python3"). */
  python?: string;
}

/**
 * One externally driven simulation episode over stdio.
 *
 * The bridge holds no economic logic: it spawns the engine's `serve` verb,
 * forwards flat float64 action vectors, and hands observation/reward vectors
 * back exactly as serialized. Shortest-round-trip JSON numbers keep every
 * float bit-exact across the wire in both directions.
 */
export class EconBridge {
  private child: ChildProcessWithoutNullStreams | null = null;
  private lines: Interface | null = null;
  private queue: string[] = [];
  private waiter: ((line: string) => void) | null = null;
  private stderrBuf = "";
  spec: ResetMessage | null = null;

  constructor(private readonly options: BridgeOptions) {}

  /** Spawn the engine and return the handshake (vector spec + observations). */
  async reset(): Promise<ResetMessage> {
    if (this.child) {
      throw new Error("bridge already started; create a new instance per episode");
    }
    const python = this.options.python ?? process.env.ECONSIM_PYTHON ?? "python3";
    const args = [
      "-m",
      "econsim",
      "serve",
      this.options.scenario,
      "--seed",
      String(this.options.seed ?? 0),
      "--external",
      this.options.external.join(","),
    ];
    for (const override of this.options.overrides ?? []) {
      args.push("--set", override);
    }
    this.child = spawn(python, args, { stdio: ["pipe", "pipe", "pipe"] });
    this.child.stderr.on("data", (chunk) => {
      this.stderrBuf += String(chunk);
    });
    this.lines = createInterface({ input: this.child.stdout });
    this.lines.on("line", (line) => {
      if (this.waiter) {
        const resolve = this.waiter;
        this.waiter = null;
        resolve(line);
      } else {
        this.queue.push(line);
      }
    });
    const message = await this.readMessage();
    if (message.type !== "reset") {
      throw new Error(`expected reset handshake, got ${message.type}`);
    }
    this.spec = message;
    return message;
  }

  /** Submit actions for every external role and receive the step result. */
  async step(actions: ActionMap): Promise<StepMessage> {
    if (!this.child) {
      throw new Error("call reset() first");
    }
    this.child.stdin.write(JSON.stringify({ type: "act", actions }) + "\n");
    const message = await this.readMessage();
    if (message.type === "error") {
      throw new Error((message as ErrorMessage).message);
    }
    if (message.type !== "step") {
      throw new Error(`expected step, got ${message.type}`);
    }
    return message;
  }

  /** Terminate the engine process. */
  async close(): Promise<void> {
    if (!this.child) return;
    const child = this.child;
    this.child = null;
    try {
      child.stdin.write(JSON.stringify({ type: "close" }) + "\n");
      child.stdin.end();
    } catch {
      // already gone
    }
    await new Promise<void>((resolve) => {
      const timer = setTimeout(() => {
        child.kill();
        resolve();
      }, 2000);
      child.once("exit", () => {
        clearTimeout(timer);
        resolve();
      });
    });
  }

  private async readMessage(): Promise<ServerMessage> {
    const line = await this.readLine();
    return JSON.parse(line) as ServerMessage;
  }

  private readLine(): Promise<string> {
    const queued = this.queue.shift();
    if (queued !== undefined) {
      return Promise.resolve(queued);
    }
    return new Promise((resolve, reject) => {
      const child = this.child;
      if (!child) {
        reject(new Error("bridge is closed"));
        return;
      }
      const onExit = () => {
        if (this.waiter) {
          this.waiter = null;
          reject(
            new Error(
              `engine exited before replying${this.stderrBuf ? `: ${this.stderrBuf.trim()}` : ""}`,
            ),
          );
        }
      };
      child.once("exit", onExit);
      this.waiter = (line) => {
        child.off("exit", onExit);
        resolve(line);
      };
    });
  }
}

/** Length check helper: does a vector match its declared schema? */
export function conformsTo(vector: number[], fields: string[]): boolean {
  return vector.length === fields.length && vector.every((x) => Number.isFinite(x));
}
