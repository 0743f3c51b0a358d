"""
Sketching a dynamic graph stream
================================

Plant a matching, bury it under noise and churn, then recover a large
matching from a sketch whose size does not depend on the stream length.
"""

from sketchmatch import BipartiteGraph, GuessOptSketch, gen_planted, max_matching, validate

n = 256
stream, planted = gen_planted(n, opt=200, noise_edges=300, churn=500, seed=1)
print(f"{len(stream)} updates over {n} x {n} vertices")

# churned edges are inserted and later deleted, so only planted and noise survive
final = validate(stream)
print(f"{len(final)} live edges at the end")

# the exact answer, for reference
opt = max_matching(BipartiteGraph(n, n, tuple(final))).size
print(f"maximum matching: {opt}")

# guess mode runs one sketch per power-of-two estimate of the matching size
sketch = GuessOptSketch(n, epsilon=1 / 3, seed=7)
sketch.consume(stream)
for estimate, m in sketch.extract_all():
    label = "global" if estimate == 0 else f"opt_hat={estimate}"
    print(f"  {label:>13}: {m.size}")

best = sketch.extract()
print(f"extracted {best.size}, ratio {opt / best.size:.2f}, n^eps = {n ** (1 / 3):.2f}")

# every extracted edge really is in the final graph
assert all(e in final for e in best.edges)

counts = sketch.sampler_counts()
print(f"samplers: {counts}")
print(f"sparse bytes {len(sketch.to_bytes())}, dense bytes {sketch.dense_nbytes}")
