"""
Reusing a single-axis skill for arbitrary rotations
===================================================

An agent only ever trained to turn an object about the vertical axis knows
nothing about tilting it, so it fails on general reorientation goals.  Served
the same goals as a chain of single-axis subgoals, each shown in its own
frame, the same weights solve almost every episode without further training.
Takes under a minute on one core.
"""

from pathlib import Path

from hershape.config import RunConfig
from hershape.training import Trainer, evaluate, evaluate_policy, read_metrics, run_training

OUT = Path("demo_runs/rotate")

ckpt, metrics = run_training(RunConfig(env="rotate-z", total_steps=100_000, eval_interval=20_000), seed=0, out_dir=OUT / "z")
print("rotate-z learning curve:", " ".join(f"{r.success_rate:.2f}" for r in read_metrics(metrics)))

rate, _ = evaluate(ckpt, "rotate-full", 100, seed=1)
print(f"z-trained agent on full rotations:        {rate:.2f}")

# transfer_checkpoint copies actor, critic and their targets into a new agent
fresh = Trainer(RunConfig(env="rotate-decomposed", transfer_checkpoint=str(ckpt)))
rate, _ = evaluate_policy(fresh.agent.policy, fresh.eval_env, 100, seed=1)
print(f"same weights on decomposed full rotations: {rate:.2f}")
