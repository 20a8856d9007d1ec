"""Trial execution and suite aggregation.

Trial ids have the form ``<setting>/<task>/<index>`` where the clean
baseline setting is named ``clean``.  The environment layout and the
policy's sampling stream depend only on ``(seed, task, index)``, so every
setting replays the same episodes and differs only in what the policy sees.
"""

from __future__ import annotations

import copy
import hashlib
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from mfbench.bench.metrics import r_score, success_rate
from mfbench.disturbance import (
    CATEGORY,
    SUPPORTED_RATIOS,
    DisturbancePlan,
    PlanPlayer,
    TemporalSchedule,
    derive_trial_seed,
    plan_trial,
)
from mfbench.errors import ConfigError, ScoreError
from mfbench.policy.model import Policy
from mfbench.simenv import HORIZON, TASKS, reset, step

REPORT_FORMAT = "mfbench-report/1"
CLEAN = "clean"


@dataclass
class TrialResult:
    trial_id: str
    task: str
    family: str | None
    ratio: str | None
    success: bool
    steps: int
    latencies: list[float] = field(default_factory=list)
    encoder_calls: int = 0
    error: str | None = None


@dataclass(frozen=True)
class Setting:
    family: str
    ratio: str

    def __post_init__(self):
        if self.family not in CATEGORY:
            raise ConfigError(f"unknown disturbance family {self.family!r}")
        sched = TemporalSchedule.parse(self.ratio)
        if (sched.disturbed, sched.clean) not in SUPPORTED_RATIOS[self.family]:
            allowed = ", ".join(f"{a}:{b}" for a, b in SUPPORTED_RATIOS[self.family])
            raise ConfigError(f"{self.family} is evaluated at {allowed}, not {self.ratio}")

    @property
    def name(self) -> str:
        return f"{self.family}@{self.ratio}"

    @property
    def schedule(self) -> TemporalSchedule:
        return TemporalSchedule.parse(self.ratio)

    @classmethod
    def parse(cls, text: str) -> Setting:
        family, sep, ratio = str(text).partition("@")
        if not sep:
            raise ConfigError(f"setting {text!r} should look like 'full_occlusion@1:1'")
        return cls(family, ratio)


def all_settings() -> list[Setting]:
    return [Setting(f, f"{a}:{b}") for f, ratios in SUPPORTED_RATIOS.items() for a, b in ratios]


@dataclass
class SuiteConfig:
    tasks: tuple[str, ...] = ("pick_place",)
    settings: tuple[Setting, ...] = ()
    trials: int = 100
    seed: int = 0
    phase: int = 0
    horizon: int = HORIZON
    workers: int = 1

    def __post_init__(self):
        self.tasks = tuple(self.tasks)
        self.settings = tuple(s if isinstance(s, Setting) else Setting.parse(s)
                              for s in self.settings)
        for t in self.tasks:
            if t not in TASKS:
                raise ConfigError(f"unknown task {t!r}")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if not 1 <= self.horizon <= HORIZON:
            raise ConfigError(f"horizon must be in [1, {HORIZON}]")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    def to_dict(self) -> dict:
        return {"tasks": list(self.tasks), "settings": [s.name for s in self.settings],
                "trials": self.trials, "seed": self.seed, "phase": self.phase,
                "horizon": self.horizon}

    @classmethod
    def from_dict(cls, d: dict) -> SuiteConfig:
        known = {"tasks", "settings", "trials", "seed", "phase", "horizon", "workers"}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown suite keys {sorted(extra)}")
        return cls(**d)


def trial_id(setting: str, task: str, index: int) -> str:
    return f"{setting}/{task}/{index:04d}"


def env_seed(seed: int, task: str, index: int) -> int:
    return derive_trial_seed(f"env/{seed}/{task}/{index}") & 0x7FFFFFFF


def policy_seed(seed: int, task: str, index: int) -> int:
    return derive_trial_seed(f"policy/{seed}/{task}/{index}")


def run_trial(policy: Policy, task: str, seed: int, plan: DisturbancePlan | None,
              rng_seed: int, horizon: int = HORIZON, clock=time.perf_counter,
              trial: str = "") -> TrialResult:
    """Roll out one episode. The world advances on its true state; the policy
    only ever receives the frame as transformed by ``plan``."""
    if plan is not None and plan.horizon < horizon:
        raise ConfigError(f"plan covers {plan.horizon} frames, trial needs {horizon}")
    state, frame = reset(task, seed)
    player = PlanPlayer(plan)
    cache = policy.new_chunk()
    rng = np.random.default_rng(rng_seed)
    calls0 = policy.encoder_calls
    lat, error = [], None
    for k in range(horizon):
        seen = player.observe(k, frame)
        t0 = clock()
        action, cache = policy.predict_step(seen, state.instruction, cache, rng)
        lat.append(clock() - t0)
        if not np.all(np.isfinite(action)):
            error = f"non-finite action {action.tolist()} at step {k}"
            break
        state, frame, done, _ = step(state, action)
        if done:
            break
    return TrialResult(trial, task, plan.family if plan else None,
                       plan.schedule.label if plan else None,
                       bool(state.success) and error is None, state.step_count, lat,
                       policy.encoder_calls - calls0, error)


def plans_for(config: SuiteConfig, setting: Setting, task: str) -> list[DisturbancePlan]:
    return [plan_trial(trial_id(setting.name, task, i), setting.family, setting.schedule,
                       config.horizon, config.phase) for i in range(config.trials)]


def _run_setting(policy: Policy, config: SuiteConfig, name: str, task: str,
                 plans: list[DisturbancePlan | None]) -> list[TrialResult]:
    def one(i: int) -> TrialResult:
        # shallow copy: shared weights, private encoder counter per trial
        return run_trial(copy.copy(policy), task, env_seed(config.seed, task, i), plans[i],
                         policy_seed(config.seed, task, i), config.horizon,
                         trial=trial_id(name, task, i))

    if config.workers == 1:
        return [one(i) for i in range(config.trials)]
    with ThreadPoolExecutor(config.workers) as pool:
        results = list(pool.map(one, range(config.trials)))
    return sorted(results, key=lambda r: r.trial_id)


@dataclass
class SettingRow:
    setting: str
    task: str
    family: str | None
    category: str | None
    ratio: str | None
    trials: int
    successes: int
    sr: float
    r_score: float | None


@dataclass
class RobustnessReport:
    suite: dict
    policy: str
    fingerprint: str
    rows: list[SettingRow]
    categories: dict = field(default_factory=dict)

    def baseline(self, task: str) -> SettingRow:
        for r in self.rows:
            if r.setting == CLEAN and r.task == task:
                return r
        raise KeyError(task)

    def row(self, setting: str, task: str) -> SettingRow:
        for r in self.rows:
            if r.setting == setting and r.task == task:
                return r
        raise KeyError((setting, task))

    def to_dict(self) -> dict:
        return {"format": REPORT_FORMAT, "suite": self.suite, "policy": self.policy,
                "fingerprint": self.fingerprint, "rows": [asdict(r) for r in self.rows],
                "categories": self.categories}

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> RobustnessReport:
        if d.get("format") != REPORT_FORMAT:
            raise ConfigError("not a robustness report")
        return cls(d["suite"], d["policy"], d["fingerprint"],
                   [SettingRow(**r) for r in d["rows"]], d["categories"])


def _row(name, task, setting, results, base_sr) -> SettingRow:
    sr = success_rate(results)
    try:
        rs = r_score(sr, base_sr) if base_sr is not None else None
    except ScoreError:
        rs = None  # unscorable: zero clean baseline
    return SettingRow(name, task, setting.family if setting else None,
                      CATEGORY[setting.family] if setting else None,
                      setting.ratio if setting else None, len(results),
                      sum(r.success for r in results), sr, rs)


def aggregate_categories(rows: list[SettingRow]) -> dict:
    """Unweighted mean of member-setting SRs, per task, per spatial category
    and per temporal mode (constant / cyclic / sparse)."""
    out = {}
    for task in sorted({r.task for r in rows}):
        groups: dict[str, list[SettingRow]] = {}
        for r in rows:
            if r.task != task or r.family is None:
                continue
            groups.setdefault(r.category, []).append(r)
            groups.setdefault(TemporalSchedule.parse(r.ratio).mode, []).append(r)
        base = next((r.sr for r in rows if r.task == task and r.family is None), None)
        cats = {}
        for name in sorted(groups):
            sr = float(np.mean([r.sr for r in groups[name]]))
            try:
                rs = r_score(sr, base) if base is not None else None
            except ScoreError:
                rs = None
            cats[name] = {"settings": len(groups[name]), "sr": round(sr, 6), "r_score": rs}
        out[task] = cats
    return out


def config_fingerprint(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def run_benchmark(policy: Policy, config: SuiteConfig, name: str = "policy",
                  keep_trials: list | None = None) -> RobustnessReport:
    """Clean baseline per task, then every configured setting.

    ``keep_trials``, if given, receives every TrialResult (reports stay
    free of wall-clock data so they are reproducible byte for byte).
    """
    rows = []
    for task in config.tasks:
        base = _run_setting(policy, config, CLEAN, task, [None] * config.trials)
        rows.append(_row(CLEAN, task, None, base, None))
        base_sr = rows[-1].sr
        if keep_trials is not None:
            keep_trials.extend(base)
        for s in config.settings:
            res = _run_setting(policy, config, s.name, task, plans_for(config, s, task))
            rows.append(_row(s.name, task, s, res, base_sr))
            if keep_trials is not None:
                keep_trials.extend(res)
    suite = config.to_dict()
    fp = config_fingerprint({"suite": suite, "model": policy.config.to_dict(),
                             "params": policy.fingerprint()})
    return RobustnessReport(suite, name, fp, rows, aggregate_categories(rows))
