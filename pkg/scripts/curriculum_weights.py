"""Tabulate curriculum weights for easy and hard synthetic conversations
under one of the preset schedules."""

import argparse

import numpy as np

from ernetcl import PRESETS, SynthSpec, synthesize
from ernetcl.data import merge
from ernetcl.curriculum import CurriculumSchedule, weights


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--preset", choices=sorted(PRESETS), default="MELD")
    ap.add_argument("--every", type=int, default=10, help="print every N-th epoch")
    ap.add_argument("--seed", type=int, default=8)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    easy = synthesize(SynthSpec(num_conversations=40, shift_prob=0.0, id_prefix="easy"), rng)
    hard = synthesize(SynthSpec(num_conversations=40, shift_prob=1.0, id_prefix="hard"), rng)
    ds = merge([easy, hard])
    diffs = np.array([c.difficulty for c in ds.conversations])
    is_hard = np.array([c.id.startswith("hard") for c in ds.conversations])
    sched = CurriculumSchedule.from_config(PRESETS[args.preset])
    print(f"{args.preset}: sigma={sched.sigma} delta={sched.delta} T={sched.max_epochs}")
    print(f"mean D: easy {diffs[~is_hard].mean():.4f}  hard {diffs[is_hard].mean():.4f}")
    print("epoch  w_easy    w_hard    gap       ratio")
    epochs = sorted({1, *range(args.every, sched.max_epochs + 1, args.every), sched.max_epochs})
    for t in epochs:
        w = weights(t, diffs, sched)
        a, b = w[~is_hard].mean(), w[is_hard].mean()
        print(f"{t:5d}  {a:.6f}  {b:.6f}  {a - b:.6f}  {b / a:.6f}")


if __name__ == "__main__":
    main()
