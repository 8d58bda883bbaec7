/** Wire types for the newline-delimited JSON environment protocol. */

export type Role =
  | "fiscal"
  | "central_bank"
  | "pension"
  | "bank"
  | "firms"
  | "households";

/** Per-role flat-vector schema published in the reset handshake. */
export interface KindSpec {
  observation_fields: string[];
  action_fields: string[];
  action_bounds: [number, number][];
}

export interface VectorSpec {
  protocol: number;
  trajectory_schema: number;
  kinds: Partial<Record<Role, KindSpec>>;
}

export interface AgentEntry {
  role: Role;
  count: number;
  external: boolean;
}

/**
 * Observations keyed by role. Single-agent roles carry one vector;
 * households and firms carry one vector per agent.
 */
export type ObservationMap = Partial<Record<Role, number[] | number[][]>>;
export type ActionMap = Partial<Record<Role, number[] | number[][]>>;
export type RewardMap = Partial<Record<Role, number | number[] | null>>;

export interface ResetMessage {
  type: "reset";
  protocol: number;
  scenario: string;
  seed: number;
  vector_spec: VectorSpec;
  agents: AgentEntry[];
  observations: ObservationMap;
}

/** One step-level trajectory record (schema per the handshake stamp). */
export type TrajectoryRow = Record<string, number | null>;

export interface StepMessage {
  type: "step";
  t: number;
  observations: ObservationMap;
  rewards: RewardMap;
  done: boolean;
  reason: string | null;
  info: Record<string, number | string | boolean | null>;
  row: TrajectoryRow;
}

export interface ErrorMessage {
  type: "error";
  message: string;
}

export type ServerMessage = ResetMessage | StepMessage | ErrorMessage;
