"""Shell-structured photon momentum grids.

Builds the discretized momentum ball, shows how the shells align with the
geometric cutoff sequence, checks the quadrature against the analytic shell
volumes, and prints a few polarization frames.
"""

import numpy as np

from fqed.modes import CutoffSequence, build_grid, polarization_frame

cut = CutoffSequence(lambda_uv=1.0, epsilon=0.3, n_scales=3)
print("cutoff sequence sigma_j:", np.array2string(cut.sigmas, precision=4))

for angular in ("octahedral6", "icosahedral12"):
    for n_radial in (1, 2, 4):
        grid = build_grid(cut, n_radial, angular)
        print(f"\n{angular}, {n_radial} radial cell(s): "
              f"{grid.n_modes} modes")
        for j in range(cut.n_scales):
            sel = (grid.shell == j) & (grid.lam == 1)
            measured = grid.weight[sel].sum()
            exact = 4 * np.pi / 3 * (cut.sigma(j) ** 3
                                     - cut.sigma(j + 1) ** 3)
            print(f"  shell {j}: weight sum {measured:.6f} vs volume "
                  f"{exact:.6f}  (defect {abs(measured - exact):.2e}, "
                  f"bound {grid.shell_volume_error_bound(j):.2e})")

print("\npolarization frames (eps1, eps2 per direction):")
for khat in ([0.0, 0.0, 1.0], [1.0, 0.0, 0.0],
             [1 / np.sqrt(2), 1 / np.sqrt(2), 0.0]):
    e1, e2 = polarization_frame(np.array(khat))
    print(f"  khat={np.array2string(np.array(khat), precision=3)} -> "
          f"eps1={np.array2string(e1, precision=3)}, "
          f"eps2={np.array2string(e2, precision=3)}")

grid = build_grid(cut, 1, "octahedral6")
print("\nfirst lines of the grid table:")
print("\n".join(grid.dump_csv().splitlines()[:4]))
