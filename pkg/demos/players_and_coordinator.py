"""
One round of the simultaneous protocol
======================================

Each player sketches its own slice of the stream with the shared seed and
sends the sketch.  The coordinator adds the sketches, which gives exactly the
sketch of the whole stream.
"""

from sketchmatch import gen_planted, run_simultaneous

stream, _ = gen_planted(128, opt=100, noise_edges=200, churn=150, seed=3)

# one player holding everything is the plain streaming algorithm
alone = run_simultaneous(stream, 1, epsilon=0.25, opt_hat=100, seed=11)

# eight players, each with a random slice; a slice alone may even delete
# edges it never saw inserted
shared = run_simultaneous(stream, 8, epsilon=0.25, opt_hat=100, seed=11, partition_seed=5)

print("bytes per player:", shared.message_bytes)
print("merged sketch identical:", shared.sketch.to_bytes() == alone.sketch.to_bytes())
print("same matching:", shared.matching == alone.matching, f"(size {alone.matching.size})")

# a player using a different seed cannot be merged
try:
    run_simultaneous(stream, 1, 0.25, 100, seed=12).sketch.merge(alone.sketch)
except ValueError as err:
    print("mismatched seeds:", err)
