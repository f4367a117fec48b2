"""The order in which subsets are visited.

Prints the first three epochs of each sampler for 30 indices (the
random ones seeded), then the Herman-Meyer order for a few sizes and the
per-index frequencies of a nonuniform sampler.
"""
import numpy as np

from stochopt import Sampler

N = 30
samplers = {
    "sequential": Sampler.sequential(N),
    "staggered(6)": Sampler.staggered(N, 6),
    "herman_meyer": Sampler.herman_meyer(N),
    "with replacement": Sampler.random_with_replacement(N, seed=2),
    "without replacement": Sampler.random_without_replacement(N, seed=2),
}
for name, s in samplers.items():
    seq = s.sequence(3 * N)
    print(f"{name}:")
    for e in range(3):
        print("   ", " ".join(f"{i:2d}" for i in seq[e * N:(e + 1) * N]))
    hist = np.bincount(seq, minlength=N)
    print(f"    counts over 3 epochs: min {hist.min()}, max {hist.max()}")

for n in (8, 12, 60):
    print(f"herman_meyer({n}):", Sampler.herman_meyer(n).sequence(n))

prob = np.r_[np.full(20, 0.9 / 20), np.full(10, 0.1 / 10)]
counts = Sampler.random_with_replacement(N, prob=prob, seed=0).histogram(30_000)
print("nonuniform, 30000 calls: first 20 mean", counts[:20].mean(), "(expect 1350), last 10 mean",
      counts[20:].mean(), "(expect 300)")
