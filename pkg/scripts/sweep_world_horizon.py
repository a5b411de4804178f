"""Sweep the dynamics-model training horizon and score 20-step divergence.

Trains one model per horizon in {1, 4, 8, 16} on the contact corpus, then
scores each by open-loop rollout error over 20 held-out steps. The winner
sets the `horizon` default in WorldConfig.
"""

import argparse
import json
import time

import numpy as np

from vqmotion.nn import RAdam, Tensor, no_grad
from vqmotion.world import (
    ReplayBuffer,
    WorldModel,
    contact_corpus,
    desk_world,
    rollout_model,
    train_world_step,
)


def divergence_20(model, feats, acts, span: int = 20) -> float:
    """Mean normalized MSE of 20-step open-loop rollouts over held-out windows."""
    errs = []
    for s in range(0, feats.shape[1] - 1 - span, span):
        with no_grad():
            preds = rollout_model(model, feats[:, s], acts[:, s : s + span])
        pred = np.stack([p.data for p in preds], axis=1)
        err = (pred - feats[:, s + 1 : s + 1 + span]) * model.inv_std
        errs.append(np.mean(err**2))
    return float(np.mean(errs))


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--horizons", type=int, nargs="+", default=[1, 4, 8, 16])
    ap.add_argument("--steps", type=int, default=4000)
    ap.add_argument("--batch", type=int, default=512)
    ap.add_argument("--episodes", type=int, default=64)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--out", type=str, default=None, help="optional JSON results path")
    args = ap.parse_args()

    cfg = desk_world()
    engine, feats, acts = contact_corpus(episodes=args.episodes, seed=args.seed)
    split = int(0.8 * feats.shape[0])
    print(f"corpus: {feats.shape[0]} episodes of {acts.shape[1]} steps, {split} train")

    rb = ReplayBuffer(cfg.replay_capacity, cfg.feature_dim, cfg.action_dim)
    for i in range(split):
        rb.push(feats[i], acts[i])

    results = {}
    for horizon in args.horizons:
        wm = WorldModel(cfg, np.random.default_rng(args.seed + 1))
        for i in range(cfg.warmup_updates):
            wm.norm.update(feats[i % split].reshape(-1, cfg.feature_dim))
        opt = RAdam(wm.parameters(), lr=2e-3)
        srng = np.random.default_rng(args.seed + 2)
        t0 = time.time()
        for step in range(1, args.steps + 1):
            opt.lr = 2e-3 * (1.0 - 0.9 * step / args.steps)
            train_world_step(wm, rb.sample(args.batch, horizon, srng), opt)
        div = divergence_20(wm, feats[split:], acts[split:])
        results[horizon] = div
        print(f"horizon {horizon:3d}: 20-step divergence {div:.4e}  "
              f"({time.time() - t0:.0f}s, {opt.skipped_steps} skipped)")

    best = min(results, key=results.get)
    print(f"best horizon: {best}")
    if args.out:
        with open(args.out, "w") as fh:
            json.dump({"divergence_by_horizon": results, "best": best}, fh, indent=2)


if __name__ == "__main__":
    main()
