"""Robustness of the 3D div solver to checkerboard jumps in alpha.

Compares the V-cycle with the nonlinear W-cycle; the W-cycle count stays flat
as the mesh and the jump grow.
"""

from amli.experiments import preset, rows_by, run_experiment


def main():
    cfg = preset("jump3d", inv_h=[4, 8, 16, 32])
    rows = rows_by(run_experiment(cfg), "inv_h", "kappa", "variant")
    print(f"{'1/h':>4} " + " ".join(f"{k:>9.0e}" for k in cfg.kappa))
    for n in cfg.inv_h:
        cells = [f"{rows[(n, k, 'linear_t')]['n_it']:>4}/{rows[(n, k, 'nonlinear')]['n_it']:<4}" for k in cfg.kappa]
        print(f"{n:>4} " + " ".join(f"{c:>9}" for c in cells))
    print("entries: V / W(N) iterations")


if __name__ == "__main__":
    main()
