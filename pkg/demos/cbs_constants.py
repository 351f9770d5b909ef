"""How the two-level angle shrinks on coarser levels.

For each ``e = kappa h^2`` the squared CBS constant starts below its uniform
bound and decays level by level, which is why a degree-2 stabilization is
enough everywhere.
"""

from amli import theory


def main():
    levels = (0, 1, 2, 5, 10, 20)
    for dim, name in ((2, "curl"), (3, "div")):
        print(f"{name}: c^2 by level (bound {theory.THETA[dim]})")
        print(f"{'e':>8} " + " ".join(f"{l:>10}" for l in levels))
        for m in (-12, -6, -2, 0, 2):
            e = 10.0**m
            st = theory.sequences(e, max(levels))
            vals = [theory.cbs(dim, st, l).c2 for l in levels]
            print(f"{e:>8.0e} " + " ".join(f"{v:>10.3e}" for v in vals))
        print()


if __name__ == "__main__":
    main()
