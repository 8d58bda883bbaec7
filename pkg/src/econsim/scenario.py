"""Scenario files, preset catalog, the episode runner, and artifact emission.

A scenario is a YAML document with four top-level sections:

  name: aging-pension
  economy:   <nested overrides of the EconomyConfig schema>
  policies:  <role -> {kind, params}>
  seeds:     [0, 1, ...]
  output:    {format: csv|jsonl, panel: false}

Unknown keys are rejected with the path to the offending key. File references
inside a scenario (population CSV, replay schedules, bracket tables) resolve
relative to the scenario file.
"""

from __future__ import annotations

import dataclasses
import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from .core import EconomyConfig, config_replace, validate_config
from .market import Economy, JointAction, StepResult
from .policies import PolicyBinding, make_policy
from . import banks

SCHEMA_VERSION = 1

TRAJECTORY_COLUMNS = (
    "t", "population", "young_share", "gdp", "consumption", "price_level",
    "inflation", "wage_index", "gini_income", "gini_wealth", "welfare",
    "dependency_ratio", "mean_hours", "mean_utility", "pension_fund",
    "government_debt", "deposit_rate", "lending_rate", "reward_fiscal",
    "reward_central_bank", "reward_pension", "reward_bank",
)
_INT_COLUMNS = {"t", "population"}

SUMMARY_COLUMNS = (
    "seed", "year", "consumption", "avg_labor", "gdp", "real_gdp", "welfare",
    "gini", "depletion_year", "mean_dependency", "mean_utility", "termination",
)


class ScenarioError(ValueError):
    pass


@dataclass
class ScenarioSpec:
    name: str
    economy: EconomyConfig
    bindings: dict[str, PolicyBinding]
    seeds: list[int] = field(default_factory=lambda: [0])
    output_format: str = "csv"
    panel: bool = False
    warnings: list[str] = field(default_factory=list)
    base_dir: Optional[Path] = None


def decision_roles(cfg: EconomyConfig) -> list[str]:
    """Roles that act in this economy, in the documented agent order."""
    roles = [g for g in ("fiscal", "central_bank", "pension") if g in cfg.governments]
    if cfg.bank == "commercial":
        roles.append("bank")
    if cfg.firms in ("monopoly", "oligopoly", "monopolistic"):
        roles.append("firms")
    roles.append("households")
    return roles


_DEFAULT_KINDS = {
    "households": "heuristic",
    "fiscal": "constant",
    "central_bank": "constant",
    "pension": "constant",
    "bank": "spread",
    "firms": "markup",
}


def _build_config(data: dict, path: str = "economy") -> EconomyConfig:
    return _build_dataclass(EconomyConfig, data, path)


def _build_dataclass(cls, data: dict, path: str):
    if not isinstance(data, dict):
        raise ScenarioError(f"{path}: expected a mapping")
    known = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in data.items():
        if key not in known:
            raise ScenarioError(f"{path}.{key}: unknown key")
        f = known[key]
        if dataclasses.is_dataclass(f.type) or (
                isinstance(f.default_factory, type)
                and dataclasses.is_dataclass(f.default_factory)):
            kwargs[key] = _build_dataclass(f.default_factory, value, f"{path}.{key}")
        elif isinstance(value, dict):
            # Nested section declared by default_factory on the parent.
            factory = f.default_factory
            if factory is dataclasses.MISSING:
                raise ScenarioError(f"{path}.{key}: unexpected mapping")
            kwargs[key] = _build_dataclass(type(factory()), value, f"{path}.{key}")
        else:
            if isinstance(value, list):
                value = tuple(value)
            kwargs[key] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"{path}: {exc}") from exc


def parse_scenario(path) -> ScenarioSpec:
    """Load and validate a scenario file; defaults are resolved here."""
    path = Path(path)
    if not path.exists():
        raise ScenarioError(f"scenario file not found: {path}")
    with open(path) as fh:
        try:
            data = yaml.safe_load(fh) or {}
        except yaml.YAMLError as exc:
            raise ScenarioError(f"{path.name}: not well-formed YAML: {exc}") from exc
    if not isinstance(data, dict):
        raise ScenarioError(f"{path.name}: top level must be a mapping")

    allowed = {"name", "description", "economy", "policies", "seeds", "output"}
    for key in data:
        if key not in allowed:
            raise ScenarioError(f"{key}: unknown key")

    warnings: list[str] = []
    econ_data = data.get("economy", {}) or {}
    if isinstance(econ_data, dict) and "bank" not in econ_data:
        warnings.append("economy.bank: missing, defaulted to non_profit")
    cfg = _build_config(econ_data)
    violations = validate_config(cfg)
    if violations:
        raise ScenarioError("; ".join(f"economy: {v}" for v in violations))

    roles = decision_roles(cfg)
    bindings: dict[str, PolicyBinding] = {}
    pol_data = data.get("policies", {}) or {}
    if not isinstance(pol_data, dict):
        raise ScenarioError("policies: expected a mapping")
    for role, spec in pol_data.items():
        if role not in roles:
            raise ScenarioError(
                f"policies.{role}: role takes no decisions in this economy")
        if not isinstance(spec, dict) or "kind" not in spec:
            raise ScenarioError(f"policies.{role}: expected a mapping with a 'kind'")
        extra = set(spec) - {"kind", "params"}
        if extra:
            raise ScenarioError(f"policies.{role}.{sorted(extra)[0]}: unknown key")
        params = dict(spec.get("params") or {})
        if "file" in params:
            params["file"] = str((path.parent / params["file"]).resolve())
        try:
            bindings[role] = PolicyBinding(role, spec["kind"], params)
        except ValueError as exc:
            raise ScenarioError(f"policies.{role}: {exc}") from exc
    for role in roles:
        if role not in bindings:
            bindings[role] = PolicyBinding(role, _DEFAULT_KINDS[role])

    if cfg.population.init_csv is not None:
        csv_path = (path.parent / cfg.population.init_csv).resolve()
        cfg = config_replace(cfg, "population.init_csv", str(csv_path))

    seeds = data.get("seeds", [0])
    if not isinstance(seeds, list) or not all(isinstance(s, int) for s in seeds):
        raise ScenarioError("seeds: expected a list of integers")
    output = data.get("output", {}) or {}
    fmt = output.get("format", "csv")
    if fmt not in ("csv", "jsonl"):
        raise ScenarioError(f"output.format: unknown format {fmt!r}")
    return ScenarioSpec(
        name=data.get("name", path.stem),
        economy=cfg,
        bindings=bindings,
        seeds=seeds,
        output_format=fmt,
        panel=bool(output.get("panel", False)),
        warnings=warnings,
        base_dir=path.parent,
    )


def preset_dir() -> Path:
    return Path(__file__).parent / "presets"


def list_presets() -> list[str]:
    return sorted(p.stem for p in preset_dir().glob("*.yaml"))


def load_preset(name: str) -> ScenarioSpec:
    path = preset_dir() / f"{name}.yaml"
    if not path.exists():
        raise ScenarioError(
            f"unknown preset {name!r}; available: {', '.join(list_presets())}")
    return parse_scenario(path)


def resolve_scenario(ref: str) -> ScenarioSpec:
    """A scenario reference is a file path or a bundled preset name."""
    if Path(ref).exists():
        return parse_scenario(ref)
    return load_preset(ref)


# ---------------------------------------------------------------------------
# Episode runner
# ---------------------------------------------------------------------------

class EpisodeRunner:
    """Wires policies to the environment; external roles take injected actions."""

    def __init__(self, spec: ScenarioSpec, seed: int,
                 external: frozenset[str] = frozenset()):
        self.spec = spec
        self.cfg = spec.economy
        self.roles = decision_roles(self.cfg)
        declared_external = {r for r, b in spec.bindings.items() if b.kind == "external"}
        self.external = (set(external) | declared_external) & set(self.roles)
        self.env = Economy(self.cfg, seed)
        self.policies = {}
        for role in self.roles:
            if role in self.external:
                continue
            self.policies[role] = make_policy(role, spec.bindings[role], self.cfg)
        self.snapshot = self.env.reset()
        self.t = 0

    def _policy_extras(self) -> dict:
        env = self.env
        growth = (env.gdp - env.gdp_prev) / env.gdp_prev if env.gdp_prev > 0 else 0.0
        extras = {
            "growth": growth,
            "incomes": np.maximum(env.pop.last_income, 0.0),
        }
        if env.pension is not None:
            extras["pension_fund"] = env.pension.fund
            extras["retirement_age"] = env.pension.retirement_age
            extras["tau_p"] = env.pension.tau_p
        return extras

    def internal_actions(self) -> JointAction:
        obs = self.env.build_observations()
        extras = self._policy_extras()
        governments = {}
        for role in ("fiscal", "central_bank", "pension"):
            if role in self.policies:
                governments[role] = self.policies[role].act(obs.government, self.t, extras)
        bank = None
        if "bank" in self.policies:
            r_d, r_l = self.policies["bank"].act(obs.bank, self.t)
            bank = banks.BankAction(r_d, r_l)
        firms = None
        if "firms" in self.policies:
            firms = self.policies["firms"].act(obs.firms, self.t)
        households = None
        if "households" in self.policies:
            retired = self.env._retired_mask()
            households = self.policies["households"].act_batch(
                obs.household_private, retired, self.t)
        return JointAction(households=households, governments=governments,
                           bank=bank, firms=firms)

    def step(self, injected: Optional[JointAction] = None) -> StepResult:
        action = self.internal_actions()
        if injected is not None:
            if injected.households is not None:
                action.households = injected.households
            action.governments.update(injected.governments)
            if injected.bank is not None:
                action.bank = injected.bank
            if injected.firms is not None:
                action.firms = injected.firms
        missing = [r for r in self.external
                   if not _covers(action, r)]
        if missing:
            raise ValueError(f"missing external actions for: {missing}")
        result = self.env.step(action)
        self._last_action = action
        self.snapshot = result.snapshot
        self.t += 1
        return result


def _covers(action: JointAction, role: str) -> bool:
    if role == "households":
        return action.households is not None
    if role == "bank":
        return action.bank is not None
    if role == "firms":
        return action.firms is not None
    return role in action.governments


# ---------------------------------------------------------------------------
# Artifact emission
# ---------------------------------------------------------------------------

def _fmt_cell(col: str, value) -> str:
    if value is None:
        return ""
    if col in _INT_COLUMNS:
        return str(int(value))
    value = float(value)
    if not math.isfinite(value):
        return ""
    return format(value, ".17g")


def _json_safe(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.integer):
        return int(value)
    return value


def emit_trajectory(rows: list[dict], path, fmt: str = "csv") -> Path:
    """Write trajectory rows with a schema stamp; numbers round-trip exactly
    (17 significant digits in CSV, shortest-exact JSON otherwise)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "csv":
        lines = [f"# trajectory-schema: {SCHEMA_VERSION}", ",".join(TRAJECTORY_COLUMNS)]
        for row in rows:
            lines.append(",".join(_fmt_cell(c, row.get(c)) for c in TRAJECTORY_COLUMNS))
        path.write_text("\n".join(lines) + "\n")
    elif fmt == "jsonl":
        header = {"trajectory_schema": SCHEMA_VERSION, "columns": list(TRAJECTORY_COLUMNS)}
        lines = [json.dumps(header)]
        for row in rows:
            lines.append(json.dumps(
                {c: _json_safe(row.get(c)) for c in TRAJECTORY_COLUMNS},
                allow_nan=False))
        path.write_text("\n".join(lines) + "\n")
    else:
        raise ValueError(f"unknown trajectory format {fmt!r}")
    return path


def parse_trajectory_csv(path) -> list[dict]:
    lines = Path(path).read_text().splitlines()
    if not lines or not lines[0].startswith("# trajectory-schema:"):
        raise ValueError("missing trajectory schema stamp")
    version = int(lines[0].split(":", 1)[1])
    if version != SCHEMA_VERSION:
        raise ValueError(f"unsupported trajectory schema {version}")
    columns = lines[1].split(",")
    rows = []
    for line in lines[2:]:
        if not line:
            continue
        cells = line.split(",")
        row = {}
        for col, cell in zip(columns, cells):
            if cell == "":
                row[col] = None
            elif col in _INT_COLUMNS:
                row[col] = int(cell)
            else:
                row[col] = float(cell)
        rows.append(row)
    return rows


# ---------------------------------------------------------------------------
# Episode and sweep drivers
# ---------------------------------------------------------------------------

@dataclass
class EpisodeSummary:
    seed: int
    year: int
    consumption: float  # cumulative real consumption
    avg_labor: float
    gdp: float  # cumulative nominal output
    real_gdp: float  # cumulative output deflated by the price level
    welfare: float
    gini: float
    depletion_year: Optional[int]
    mean_dependency: Optional[float]
    mean_utility: float
    termination: str

    def as_dict(self) -> dict:
        return {c: getattr(self, c) for c in SUMMARY_COLUMNS}


def summarize(rows: list[dict], seed: int, termination: str) -> EpisodeSummary:
    deps = [r["dependency_ratio"] for r in rows if r["dependency_ratio"] is not None]
    depletion = next((r["t"] for r in rows
                      if r["pension_fund"] is not None and r["pension_fund"] < 0.0), None)
    return EpisodeSummary(
        seed=seed,
        year=len(rows),
        consumption=float(sum(r["consumption"] for r in rows)),
        avg_labor=float(np.mean([r["mean_hours"] for r in rows])) if rows else 0.0,
        gdp=float(sum(r["gdp"] for r in rows)),
        real_gdp=float(sum(r["gdp"] / r["price_level"] for r in rows)),
        welfare=float(sum(r["welfare"] for r in rows)),
        gini=float(rows[-1]["gini_income"]) if rows else 0.0,
        depletion_year=depletion,
        mean_dependency=float(np.mean(deps)) if deps else None,
        mean_utility=float(np.mean([r["mean_utility"] for r in rows])) if rows else 0.0,
        termination=termination,
    )


def _action_record(action: JointAction) -> dict:
    from .market import GOV_ACTION_FIELDS
    record: dict = {}
    for role, a in action.governments.items():
        if "brackets" in a and a.get("brackets") is not None:
            record[role] = {"brackets": [[lo, r] for lo, r in a["brackets"]],
                            "g_frac": a.get("g_frac")}
        else:
            record[role] = [float(a[f]) for f in GOV_ACTION_FIELDS[role]]
    if action.bank is not None:
        record["bank"] = [action.bank.deposit_rate, action.bank.lending_rate]
    if action.firms is not None:
        record["firms"] = np.asarray(action.firms, dtype=float).tolist()
    if action.households is not None:
        record["households"] = np.asarray(action.households, dtype=float).tolist()
    return record


def run_episode(spec: ScenarioSpec, seed: int, out_dir: Optional[Path] = None,
                fmt: Optional[str] = None, panel: Optional[bool] = None,
                record_actions: Optional[Path] = None,
                max_steps: Optional[int] = None) -> tuple[EpisodeSummary, list[dict]]:
    """Reset + step loop to termination; optionally write artifacts.

    Returns (summary, trajectory rows). Artifacts land in out_dir:
    trajectory-seed<seed>.<fmt>, summary-seed<seed>.json, and optionally the
    per-household panel and a JSONL action record.
    """
    runner = EpisodeRunner(spec, seed)
    rows: list[dict] = []
    action_log: list[dict] = []
    panel_rows: list[dict] = []
    termination = "horizon"
    while True:
        result = runner.step()
        rows.append(result.row)
        if record_actions is not None:
            action_log.append({"t": result.row["t"],
                               "actions": _action_record(runner._last_action)})
        if panel or (panel is None and spec.panel):
            _collect_panel(panel_rows, result, runner)
        if result.done:
            termination = result.reason
            break
        if max_steps is not None and len(rows) >= max_steps:
            termination = "max-steps"
            break
    summary = summarize(rows, seed, termination)

    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        emit_trajectory(rows, out_dir / f"trajectory-seed{seed}.{fmt or spec.output_format}",
                        fmt or spec.output_format)
        with open(out_dir / f"summary-seed{seed}.json", "w") as fh:
            json.dump({k: _json_safe(v) for k, v in summary.as_dict().items()},
                      fh, indent=2, allow_nan=False)
            fh.write("\n")
        if panel_rows:
            _write_panel(panel_rows, out_dir / f"panel-seed{seed}.csv")
    if record_actions is not None:
        record_actions = Path(record_actions)
        record_actions.parent.mkdir(parents=True, exist_ok=True)
        with open(record_actions, "w") as fh:
            for entry in action_log:
                fh.write(json.dumps(entry, allow_nan=False) + "\n")
    return summary, rows


def _collect_panel(panel_rows: list[dict], result: StepResult, runner: EpisodeRunner):
    a = result.agents
    t = result.row["t"]
    ages = a["age"]
    for i in range(a["ids"].size):
        panel_rows.append({
            "t": t, "id": int(a["ids"][i]),
            "age": int(ages[i]) if ages is not None else None,
            "savings": float(a["savings"][i]), "risky": float(a["risky"][i]),
            "consumption": float(a["consumption"][i]), "hours": float(a["hours"][i]),
            "reward": float(a["reward"][i]),
        })


def _write_panel(panel_rows: list[dict], path: Path):
    cols = ("t", "id", "age", "savings", "risky", "consumption", "hours", "reward")
    lines = [",".join(cols)]
    for row in panel_rows:
        lines.append(",".join(
            "" if row[c] is None else
            (str(row[c]) if c in ("t", "id", "age") else format(row[c], ".17g"))
            for c in cols))
    path.write_text("\n".join(lines) + "\n")


def run_sweep(spec: ScenarioSpec, grid: dict[str, list], seeds: list[int],
              out_dir: Optional[Path] = None,
              max_steps: Optional[int] = None) -> list[dict]:
    """Cross-product execution over config-path grid x seeds.

    One output row per (cell, seed) plus an aggregated mean row per cell
    (seed column "mean"). Cell failures are recorded and the sweep continues.
    """
    keys = sorted(grid)
    rows: list[dict] = []
    for values in itertools.product(*(grid[k] for k in keys)):
        cell = dict(zip(keys, values))
        cfg = spec.economy
        for k, v in cell.items():
            cfg = config_replace(cfg, k, v)
        cell_spec = dataclasses.replace(spec, economy=cfg)
        cell_rows = []
        for seed in seeds:
            try:
                summary, _ = run_episode(cell_spec, seed, max_steps=max_steps)
                row = {**cell, **summary.as_dict()}
            except Exception as exc:  # cell failures must not kill the sweep
                row = {**cell, "seed": seed, "error": str(exc)}
            rows.append(row)
            cell_rows.append(row)
        ok = [r for r in cell_rows if "error" not in r]
        if ok:
            mean_row = dict(cell)
            mean_row["seed"] = "mean"
            for col in SUMMARY_COLUMNS[1:]:
                vals = [r[col] for r in ok if isinstance(r.get(col), (int, float))]
                mean_row[col] = float(np.mean(vals)) if vals else None
            rows.append(mean_row)
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        cols = keys + ["seed"] + [c for c in SUMMARY_COLUMNS if c != "seed"] + ["error"]
        lines = [",".join(cols)]
        for row in rows:
            cells = []
            for c in cols:
                v = row.get(c)
                if v is None:
                    cells.append("")
                elif isinstance(v, float):
                    cells.append(format(v, ".17g"))
                else:
                    cells.append(str(v))
            lines.append(",".join(cells))
        (out_dir / "sweep.csv").write_text("\n".join(lines) + "\n")
    return rows


def load_grid(path) -> dict[str, list]:
    with open(path) as fh:
        data = yaml.safe_load(fh)
    if not isinstance(data, dict) or not all(isinstance(v, list) for v in data.values()):
        raise ScenarioError("grid file must map config paths to value lists")
    return data
