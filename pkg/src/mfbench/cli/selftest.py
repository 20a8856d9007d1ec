"""Built-in correctness fixtures behind ``mfbench selftest``.

Goldens live in ``mfbench/data/goldens.json``; each top-level key names a
fixture so a corrupted value is reported under that name.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

GOLDENS_FILE = "goldens.json"


@dataclass
class FixtureResult:
    name: str
    passed: bool
    detail: str


def load_goldens(path: str | Path | None = None) -> dict:
    if path is None:
        text = resources.files("mfbench.data").joinpath(GOLDENS_FILE).read_text()
    else:
        text = Path(path).read_text()
    return json.loads(text)


# ------------------------------------------------------------ shared checks

def gradcheck_config():
    from mfbench.policy import ModelConfig

    return ModelConfig(feature_dim=8, decoder_dim=8, frames=3, chunk_len=2, decoder_layers=1,
                       heads=2, encoder_heads=2, encoder_layers=1, diffusion_steps=10)


def _gradcheck_batch(config, seed: int = 0):
    from mfbench.policy import WindowDataset
    from mfbench.simenv import rollout_expert

    rec = rollout_expert("button_order", 3)
    ds = WindowDataset([rec], config.frames, config.chunk_len)
    imgs, instr, clean = ds.batch(np.array([0, 5, 9]))
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(clean.shape)
    ts = np.array([1, config.diffusion_steps // 2, config.diffusion_steps])
    return imgs, instr, clean, noise, ts


def check_gradients(samples: int = 64, epsilon: float = 1e-3, seed: int = 0):
    """Finite differences over the complete diffusion loss.

    With regularisation on, the stop-gradient means the tape gradient is the
    derivative with past features held at their current values, so the
    numeric side freezes them too.  With regularisation off, the full path
    through every frame is checked.  Returns (regularised, unregularised).
    """
    from mfbench.nn import finite_diff_check, no_grad
    from mfbench.policy import DiffusionBatch, Policy, diffusion_loss, encode_window

    cfg = gradcheck_config()
    pol = Policy(cfg, seed=1)
    imgs, instr, clean, noise, ts = _gradcheck_batch(cfg, seed)
    with no_grad():
        frozen, _ = encode_window(imgs, instr, pol.params, cfg)
    frozen = frozen.detach()

    def loss_reg(p):
        _, cur = encode_window(imgs, instr, p, cfg)
        return diffusion_loss(DiffusionBatch(clean, noise, ts, cur, frozen), cfg, p)

    cfg_free = dataclasses.replace(cfg, regularization=False)

    def loss_free(p):
        past, cur = encode_window(imgs, instr, p, cfg_free)
        return diffusion_loss(DiffusionBatch(clean, noise, ts, cur, past), cfg_free, p)

    return (finite_diff_check(loss_reg, pol.params, epsilon, samples, seed=seed),
            finite_diff_check(loss_free, pol.params, epsilon, samples, seed=seed))


def encoder_grads(policy, imgs, instr, clean, noise, ts, substitute: bool):
    """Encoder gradients of the diffusion loss.

    ``substitute`` feeds the past features in as fresh constants computed
    outside any tape (the oracle); otherwise the model's own path is used.
    """
    from mfbench.nn import Tape, Tensor, no_grad
    from mfbench.policy import DiffusionBatch, diffusion_loss, encode_window

    cfg, params = policy.config, policy.params
    params.zero_grad()
    with Tape() as tape:
        past, cur = encode_window(imgs, instr, params, cfg)
        if substitute:
            with no_grad():
                const, _ = encode_window(imgs, instr, params, cfg)
            past = Tensor(const.data.copy())
        loss = diffusion_loss(DiffusionBatch(clean, noise, ts, cur, past), cfg, params)
    tape.backward(loss)
    grads = {k: v.copy() for k, v in params.grads().items() if k.startswith("enc.")}
    params.zero_grad()
    return grads


def check_stop_gradient(seed: int = 0) -> tuple[bool, bool]:
    """(regularised grads == constant-substitution oracle exactly,
    unregularised grads differ from the regularised ones)."""
    from mfbench.policy import Policy

    cfg = gradcheck_config()
    pol = Policy(cfg, seed=2)
    batch = _gradcheck_batch(cfg, seed)
    reg = encoder_grads(pol, *batch, substitute=False)
    oracle = encoder_grads(pol, *batch, substitute=True)
    equal = reg.keys() == oracle.keys() and all(np.array_equal(reg[k], oracle[k]) for k in reg)
    free = Policy(dataclasses.replace(cfg, regularization=False), pol.params.copy())
    unreg = encoder_grads(free, *batch, substitute=False)
    differs = any(not np.array_equal(reg[k], unreg[k]) for k in reg)
    return equal, differs


def check_cache_equivalence(policy, task: str, env_seed: int, rng_seed: int):
    """Roll out with the feature cache and compare every action to the
    recompute-from-raw-frames path. Returns (identical, encoder calls, steps)."""
    from mfbench.simenv import reset, step

    state, frame = reset(task, env_seed)
    cache = policy.new_chunk()
    rng_c, rng_u = np.random.default_rng(rng_seed), np.random.default_rng(rng_seed)
    oracle = type(policy)(policy.config, policy.params, normalizer=policy.normalizer)
    history, identical, steps = [], True, 0
    calls0 = policy.encoder_calls
    done = False
    while not done:
        history.append(frame)
        a, cache = policy.predict_step(frame, state.instruction, cache, rng_c)
        b = oracle.predict_uncached(history, state.instruction, rng_u)
        identical &= bool(np.array_equal(a, b))
        state, frame, done, _ = step(state, a)
        steps += 1
    return identical, policy.encoder_calls - calls0, steps


# ------------------------------------------------------------ golden fixtures

def golden_values() -> dict:
    """Recompute every golden value from the current implementation."""
    from mfbench.bench.metrics import r_score, success_rate
    from mfbench.disturbance import SplitMix64, TemporalSchedule, fnv1a64, plan_trial, schedule_mask

    sm = SplitMix64(0)
    masks = {r: "".join("D" if m else "c" for m in schedule_mask(TemporalSchedule.parse(r), 12))
             for r in ("1:0", "1:1", "1:3", "1:5")}
    plans = {}
    for fam, ratio in (("blurring", "1:1"), ("jittering", "1:0"), ("overexposing", "1:3"),
                       ("impulse_noise", "1:1")):
        p = plan_trial("trial-1", fam, TemporalSchedule.parse(ratio), 6)
        plans[f"{fam}@{ratio}"] = p.to_dict()["frames"]
    return {
        "fnv1a64": {s: f"0x{fnv1a64(s.encode()):016x}" for s in ("", "a", "trial-1")},
        "splitmix64": [f"0x{sm.next_u64():016x}" for _ in range(4)],
        "schedule_masks": masks,
        "plans": plans,
        "r_score": [[a, b, r_score(a, b)] for a, b in ((58.1, 60.4), (29.4, 55.2))],
        "success_rate": [[k, n, success_rate([True] * k + [False] * (n - k))]
                         for k, n in ((29, 48), (48, 48))],
    }


def check_goldens(goldens: dict) -> list[FixtureResult]:
    actual = golden_values()
    out = []
    for name in sorted(set(actual) | set(goldens)):
        if name not in goldens:
            out.append(FixtureResult(name, False, "missing from goldens file"))
        elif name not in actual:
            out.append(FixtureResult(name, False, "unknown fixture in goldens file"))
        elif actual[name] != goldens[name]:
            out.append(FixtureResult(name, False, "value differs from golden"))
        else:
            out.append(FixtureResult(name, True, "matches golden"))
    return out


def run_selftest(goldens_path: str | Path | None = None) -> list[FixtureResult]:
    from mfbench.policy import ModelConfig, Policy

    results = check_goldens(load_goldens(goldens_path))

    reg, free = check_gradients()
    results.append(FixtureResult("gradcheck", reg.passed and free.passed,
                                 f"max rel error {max(reg.max_rel_error, free.max_rel_error):.2e}"))

    equal, differs = check_stop_gradient()
    results.append(FixtureResult("stop_gradient", equal and differs,
                                 f"oracle equal={equal}, unregularised differs={differs}"))

    pol = Policy(ModelConfig(frames=3, diffusion_steps=5), seed=3)
    ok, detail = True, []
    for i, task in enumerate(("pick_place", "button_order")):
        same, calls, steps = check_cache_equivalence(pol, task, 100 + i, i)
        ok &= same and calls == steps
        detail.append(f"{task}: identical={same} calls={calls}/{steps}")
    results.append(FixtureResult("cache_equivalence", ok, "; ".join(detail)))
    return results
