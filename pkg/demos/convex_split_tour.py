"""Exact convex-split error against the subset-exponent bound as copies grow.

Run with ``python demos/convex_split_tour.py``.
"""

from qbroadcast.convex_split import convex_split_bound, random_split_instance


def main():
    print("one party, marginal reference: error and bound shrink together")
    for m in (1, 2, 4, 8):
        v = convex_split_bound(random_split_instance(1, (m,), seed=1, tau_mode="marginal"))
        print(f"  M={m}: delta={v.delta:.4f}  bound={v.bound:.4f}")

    print("two parties, random references")
    for counts in [(1, 1), (2, 2), (3, 3), (4, 5)]:
        v = convex_split_bound(random_split_instance(2, counts, seed=2))
        exps = ", ".join(f"{'+'.join(s)}:{e:.3f}" for s, e in v.per_subset_exponents.items())
        print(f"  M={counts}: delta={v.delta:.4f}  bound={v.bound:.4f}  exponents {exps}")

    v = convex_split_bound(random_split_instance(2, (3, 3), seed=3, tau_mode="product"))
    print(f"product input is split exactly: delta={v.delta:.1e}")


if __name__ == "__main__":
    main()
