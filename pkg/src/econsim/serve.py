"""Flat-vector environment server for external agent frameworks.

Speaks newline-delimited JSON on stdin/stdout so any runtime can drive the
simulation without linking against Python. One session owns one episode:

  -> {"type": "reset", "protocol": 1, "vector_spec": {...},
      "agents": [...], "observations": {agent: [...]}}
  <- {"type": "act", "actions": {agent: [...]}}
  -> {"type": "step", "t": 0, "observations": {...}, "rewards": {...},
      "done": false, "reason": null, "info": {...}, "row": {...}}

Observation/action vectors are 64-bit floats in the documented field order;
out-of-bounds actions are clamped (the engine counts clamps in info, same as
native validation). Numbers serialize as shortest-round-trip decimals, so a
float64 survives the wire bit-exactly in both directions. Non-finite values
become null.
"""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass

import numpy as np

from . import banks
from .market import GOV_ACTION_FIELDS, JointAction
from .scenario import SCHEMA_VERSION, EpisodeRunner, ScenarioSpec, _json_safe

PROTOCOL_VERSION = 1

# Per-kind observation/action field orders (the wire contract).
OBS_FIELDS = {
    "household_ramsey": ["assets", "education",
                         "top10_assets", "top10_income", "top10_education",
                         "bot50_assets", "bot50_income", "bot50_education"],
    "household_olg": ["assets", "education", "age",
                      "top10_assets", "top10_income", "top10_education",
                      "bot50_assets", "bot50_income", "bot50_education"],
    "government": ["debt", "wage", "price", "inflation", "gdp",
                   *[f"income_decile_{i}" for i in range(1, 11)]],
    "bank": ["benchmark_rate", "reserve_ratio", "deposits", "loans", "bonds"],
    "firm": ["capital", "labor", "tfp", "prev_price", "prev_wage"],
}

ACTION_SPECS = {
    "households": (["allocation", "labor", "investment"],
                   [[0.0, 1.0], [0.0, 1.0], [0.0, 1.0]]),
    "fiscal": (list(GOV_ACTION_FIELDS["fiscal"]),
               [[0.0, 1.0], [-2.0, 0.999], [0.0, 1.0], [-2.0, 0.999], [0.0, 1.0]]),
    "central_bank": (list(GOV_ACTION_FIELDS["central_bank"]),
                     [[-0.05, 10.0], [0.0, 1.0]]),
    "pension": (list(GOV_ACTION_FIELDS["pension"]),
                [[40.0, 70.0], [0.0, 1.0], [-1.0, 1.0]]),
    "bank": (["deposit_rate", "lending_rate"], [[-1.0, 10.0], [-1.0, 10.0]]),
    "firms": (["price", "wage"], [[1e-9, float("inf")], [0.0, float("inf")]]),
}


@dataclass
class BridgeSession:
    """One externally driven episode over the flat-vector contract."""

    spec: ScenarioSpec
    seed: int
    external: frozenset[str]

    def __post_init__(self):
        self.runner = EpisodeRunner(self.spec, self.seed, external=self.external)
        if not self.runner.external:
            raise ValueError("bridge session needs at least one external role")
        self.cfg = self.spec.economy
        self.hh_kind = ("household_olg" if self.cfg.individual == "olg"
                        else "household_ramsey")
        self.done = False

    # -- wire schema --------------------------------------------------------

    def vector_spec(self) -> dict:
        spec: dict = {"protocol": PROTOCOL_VERSION,
                      "trajectory_schema": SCHEMA_VERSION, "kinds": {}}
        for role in self.runner.roles:
            kind = self.hh_kind if role == "households" else (
                "government" if role in GOV_ACTION_FIELDS else role)
            obs_key = {"bank": "bank", "firms": "firm"}.get(kind, kind)
            fields, bounds = ACTION_SPECS[
                role if role in ACTION_SPECS else "households"]
            spec["kinds"][role] = {
                "observation_fields": OBS_FIELDS[obs_key],
                "action_fields": fields,
                "action_bounds": bounds,
            }
        return spec

    def agent_ids(self) -> list[dict]:
        agents = []
        for role in self.runner.roles:
            external = role in self.runner.external
            if role == "households":
                agents.append({"role": role, "count": self.runner.env.pop.size,
                               "external": external})
            elif role == "firms":
                agents.append({"role": role, "count": self.cfg.n_firms,
                               "external": external})
            else:
                agents.append({"role": role, "count": 1, "external": external})
        return agents

    def observations(self) -> dict:
        obs = self.runner.env.build_observations()
        out: dict = {}
        for role in self.runner.external:
            if role == "households":
                mat = np.hstack([
                    obs.household_private,
                    np.tile(obs.household_global, (obs.household_private.shape[0], 1)),
                ])
                out["households"] = mat.tolist()
            elif role == "firms":
                out["firms"] = obs.firms.tolist()
            elif role == "bank":
                out["bank"] = obs.bank.tolist()
            else:
                out[role] = obs.government.vector().tolist()
        return out

    # -- stepping -----------------------------------------------------------

    def reset_message(self) -> dict:
        return {
            "type": "reset",
            "protocol": PROTOCOL_VERSION,
            "scenario": self.spec.name,
            "seed": self.seed,
            "vector_spec": self.vector_spec(),
            "agents": self.agent_ids(),
            "observations": self.observations(),
        }

    def step(self, actions: dict) -> dict:
        if self.done:
            raise ValueError("episode finished; start a new session")
        injected = self._decode_actions(actions)
        result = self.runner.step(injected)
        self.done = result.done
        rewards = {}
        for role in self.runner.external:
            if role == "households":
                rewards["households"] = result.rewards["households"].tolist()
            elif role == "firms":
                rewards["firms"] = np.asarray(result.rewards["firms"]).tolist()
            else:
                rewards[role] = _json_safe(result.rewards.get(role))
        return {
            "type": "step",
            "t": result.row["t"],
            "observations": self.observations() if not self.done else {},
            "rewards": rewards,
            "done": self.done,
            "reason": result.reason,
            "info": {k: _json_safe(v) for k, v in result.info.items()
                     if isinstance(v, (int, float, str, bool))},
            "row": {k: _json_safe(v) for k, v in result.row.items()},
        }

    def _decode_actions(self, actions: dict) -> JointAction:
        unknown = set(actions) - self.runner.external
        if unknown:
            raise ValueError(f"actions for non-external roles: {sorted(unknown)}")
        missing = self.runner.external - set(actions)
        if missing:
            raise ValueError(f"missing actions for external roles: {sorted(missing)}")
        injected = JointAction(households=None)
        for role, vec in actions.items():
            if role == "households":
                arr = np.asarray(vec, dtype=float)
                injected.households = arr
            elif role == "firms":
                injected.firms = np.asarray(vec, dtype=float)
            elif role == "bank":
                arr = self._clamp(role, np.asarray(vec, dtype=float))
                injected.bank = banks.BankAction(float(arr[0]), float(arr[1]))
            else:
                fields = GOV_ACTION_FIELDS[role]
                arr = self._clamp(role, np.asarray(vec, dtype=float))
                if arr.shape != (len(fields),):
                    raise ValueError(f"{role}: expected {len(fields)} action values")
                injected.governments[role] = dict(zip(fields, arr.tolist()))
        return injected

    def _clamp(self, role: str, arr: np.ndarray) -> np.ndarray:
        _, bounds = ACTION_SPECS[role]
        lo = np.array([b[0] for b in bounds])
        hi = np.array([b[1] for b in bounds])
        return np.clip(arr, lo, hi)


def serve_loop(spec: ScenarioSpec, seed: int, external: frozenset[str],
               stdin=None, stdout=None) -> int:
    """Blocking request/response loop; returns a process exit code."""
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    session = BridgeSession(spec, seed, external)
    _emit(stdout, session.reset_message())
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        try:
            msg = json.loads(line)
        except json.JSONDecodeError as exc:
            _emit(stdout, {"type": "error", "message": f"bad JSON: {exc}"})
            continue
        if msg.get("type") == "close":
            return 0
        if msg.get("type") != "act":
            _emit(stdout, {"type": "error",
                           "message": f"unknown message type {msg.get('type')!r}"})
            continue
        try:
            reply = session.step(msg.get("actions", {}))
        except ValueError as exc:
            _emit(stdout, {"type": "error", "message": str(exc)})
            continue
        _emit(stdout, reply)
        if reply["done"]:
            return 0
    return 0


def _emit(stream, payload: dict) -> None:
    stream.write(json.dumps(payload, allow_nan=False) + "\n")
    stream.flush()
