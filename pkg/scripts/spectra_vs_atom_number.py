"""Squeezing and entangled-photon spectra from small to large optical depth, with both asymptotes."""

import argparse
import math
from pathlib import Path

import numpy as np

from chiral_squeeze.formats import write_table_csv
from chiral_squeeze.physics import (
    Drive,
    EmitterEnsemble,
    FrequencyGrid,
    asymptotic_spectrum,
    compose_entangled_spectrum,
    squeezing_spectrum,
    xi_squared,
)

CASES = [(51, 0.15), (194, 0.29), (262, 0.29)]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="figures")
    ap.add_argument("--beta", type=float, default=0.007)
    args = ap.parse_args(argv)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    grid = FrequencyGrid.symmetric()
    keep = np.abs(grid.omega) <= 5
    markers = [[], [], [], []]
    for n, s in CASES:
        ens = EmitterEnsemble(args.beta, 1.0, 0.0, n)
        phi = compose_entangled_spectrum(ens, grid)
        squeezed = squeezing_spectrum(phi, Drive(s, 0.0), ens).values
        anti = squeezing_spectrum(phi, Drive(s, math.pi / 2), ens).values
        small = asymptotic_spectrum(ens, Drive(s), grid, "small_od").values
        large = asymptotic_spectrum(ens, Drive(s), grid, "large_od").values
        cols = [grid.omega, squeezed, anti, np.abs(phi.values), small, large]
        write_table_csv(
            out / f"spectra_N{n}.csv",
            ["omega_over_gamma", "S_theta0", "S_theta_half_pi", "abs_phi", "small_od", "large_od"],
            [c[keep] for c in cols],
        )
        xi2 = xi_squared(ens)
        for col, v in zip(markers, (n, s, math.sqrt(xi2), -s / (16 * math.e * xi2))):
            col.append(v)
    write_table_csv(out / "sideband_markers.csv", ["n_atoms", "s", "xi", "large_od_depth"], markers)


if __name__ == "__main__":
    main()
