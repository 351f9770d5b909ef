"""Multiplicative AMLI on the 2D curl problem: error and iteration counts per mesh.

Run with ``python3 demos/curl_2d_convergence.py [max_inv_h]``.
"""

import sys

from amli import fem
from amli.hierarchy import build_level_stack
from amli.krylov import fcg, pcg
from amli.mesh import MeshHierarchy, coefficient_field
from amli.preconditioner import AmliConfig, AmliPreconditioner

CYCLES = {
    "V": AmliConfig("linear_t", "multiplicative", 1),
    "W(T)": AmliConfig("linear_t", "multiplicative", 2),
    "W(X)": AmliConfig("linear_x", "multiplicative", 2),
    "W(N)": AmliConfig("nonlinear", "multiplicative", 2),
}


def main(max_inv_h=128):
    print(f"{'1/h':>5} {'||curl chi||':>13} " + " ".join(f"{k:>5}" for k in CYCLES))
    inv_h = 8
    while inv_h <= max_inv_h:
        hier = MeshHierarchy.from_inverse_h(2, inv_h)
        L = hier.levels
        coeff = coefficient_field(hier)
        stack = build_level_stack(hier, coeff)
        A, f = stack[L].A, fem.assemble_rhs(hier, L, "manufactured", coeff)
        counts, err = [], None
        for cfg in CYCLES.values():
            M = AmliPreconditioner(stack, cfg)
            u, rep = pcg(A, f, M) if M.linear else fcg(A, f, M)
            counts.append(rep.n_it)
            err = err if err is not None else fem.x_error_norm(hier, L, u)
        print(f"{inv_h:>5} {err:>13.8f} " + " ".join(f"{c:>5}" for c in counts))
        inv_h *= 2


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 128)
