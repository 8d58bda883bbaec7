export { EconBridge, conformsTo } from "./bridge.js";
export type { BridgeOptions } from "./bridge.js";
export type {
  ActionMap,
  AgentEntry,
  ErrorMessage,
  KindSpec,
  ObservationMap,
  ResetMessage,
  RewardMap,
  Role,
  ServerMessage,
  StepMessage,
  TrajectoryRow,
  VectorSpec,
} from "./types.js";
