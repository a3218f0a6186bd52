"""Pointwise viscosity tests with quadratic touching functions.

A function solves a degenerate equation in the viscosity sense when no
smooth function touching it from above or below sees the wrong sign of the
operator.  The probe searches a budget of quadratic models that touch the
field at a point and reports the worst operator value among admissible
ones.  The cone |x| illustrates the one-sided nature of the definition at
its vertex; a quadratic with the wrong curvature shows a detected failure.
"""
import numpy as np

from ccpde import Grid, euclidean, probe_viscosity


def main():
    grid = Grid(euclidean(2), (65, 65), box=((-1, 1), (-1, 1)))
    X = grid.points
    cone = np.sqrt(X[..., 0] ** 2 + X[..., 1] ** 2)

    print("eikonal probe of the cone |x|:")
    for point in ((0.0, 0.0), (0.5, 0.0)):
        for side in ("sub", "super"):
            v = probe_viscosity(grid, cone, point, "eikonal", side, budget=256)
            state = ("inconclusive" if v.inconclusive
                     else "pass" if v.passed else "FAIL")
            print(f"  at {point} {side:5s}: {state:12s} "
                  f"(admissible {v.admissible_count:3d}, "
                  f"worst violation {v.worst_violation:+.3f})")
    print("  no smooth function touches the cone from above at the vertex,")
    print("  so the sub side is inconclusive there; from below the constant")
    print("  zero touches with |grad| = 0, so the super side rightly fails:")
    print("  the cone solves the equation only one-sidedly at its tip.")

    bad = X[..., 0] ** 2 + X[..., 0] + 0.5 * X[..., 1]
    v = probe_viscosity(grid, bad, (0.0, 0.0), "inf_laplace", "super",
                        budget=128)
    print(f"quadratic with positive curvature, supersolution probe: "
          f"pass={v.passed}, {len(v.violations)} violating models found")


if __name__ == "__main__":
    main()
