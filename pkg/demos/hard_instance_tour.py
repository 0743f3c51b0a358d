"""
Hard instances from induced matchings
=====================================

Build a small graph whose edges split into induced matchings, hand each
player a relabelled half of it, and see how little a matching that avoids
the private vertices can achieve.
"""

from sketchmatch import (
    check_trivial_ratio,
    find_rs_decomposition,
    gen_hard,
    run_simultaneous,
    verify_rs,
)

# the 8-cycle splits into 4 induced matchings of 2 opposite edges
cycle = [(i, (i + 1) % 8) for i in range(8)]
rs = find_rs_decomposition(8, cycle, r=2, t=4)
print("matchings:", rs.matchings)
print("induced:", bool(verify_rs(rs)))

for k in (2, 4, 8):
    inst = gen_hard(rs, k, seed=1)
    rep = check_trivial_ratio(inst)
    print(
        f"k={k}: labels {inst.n}, union edges {len(inst.union_edges())}, "
        f"max matching {rep.max_matching}, best trivial {rep.max_trivial}, "
        f"ratio {rep.ratio:.2f} <= {rep.bound:.2f}"
    )

# the same instance fed through the protocol, with every size estimate
res = run_simultaneous(inst, None, epsilon=0.5, opt_hat=None, seed=2)
print(f"protocol found {res.matching.size} of {rep.max_matching}")
