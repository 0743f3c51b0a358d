"""
How the sketch shrinks as epsilon grows
=======================================

A larger exponent allows a worse approximation and buys a much smaller
sketch.  Cell counts are compared with n^(2 - 3 eps) log2(n)^4.
"""

from sketchmatch import GuessOptSketch
from sketchmatch.experiments import space_scale

n = 1024
print(f"{'eps':>5} {'pairs':>7} {'cells':>10} {'dense MB':>9} {'cells/scale':>12}")
for eps in (0.25, 1 / 3, 0.4, 0.45, 0.5):
    # structure only: no stream is needed to count cells
    g = GuessOptSketch(n, eps, seed=0)
    print(
        f"{eps:5.3f} {g.num_active_pairs:7d} {g.num_cells:10d} "
        f"{g.dense_nbytes / 1e6:9.1f} {g.num_cells / space_scale(n, eps):12.2f}"
    )

# the sparse encoding only stores cells that were touched, so it depends on
# the stream as well
