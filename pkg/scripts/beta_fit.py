"""Power-dependent transmission with the saturable Lambert-Beer fit, and a Monte-Carlo of the fitted beta."""

import argparse
import math
from pathlib import Path

import numpy as np

from chiral_squeeze.estimator import fit_beta_n
from chiral_squeeze.formats import write_table_csv
from chiral_squeeze.lambert import lambert_beer_transmission
from chiral_squeeze.physics import saturation_power


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="figures")
    ap.add_argument("--trials", type=int, default=500)
    ap.add_argument("--noise", type=float, default=0.01)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args(argv)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    beta, n = 0.007, 169
    s = np.logspace(math.log10(0.03), math.log10(15), 20)
    power = s * saturation_power(beta)
    clean = lambert_beer_transmission(s, beta, n)
    rng = np.random.default_rng(args.seed)
    sample = clean * (1 + args.noise * rng.standard_normal(s.size))
    fit = fit_beta_n(power, sample)
    dense = np.logspace(math.log10(power[0]), math.log10(power[-1]), 200)
    write_table_csv(out / "transmission.csv", ["power_w", "transmission"], [power, sample])
    write_table_csv(out / "transmission_fit.csv", ["power_w", "fit"], [dense, fit.extra["model"](dense)])
    betas, ns = [], []
    for _ in range(args.trials):
        f = fit_beta_n(power, clean * (1 + args.noise * rng.standard_normal(s.size)))
        betas.append(f["beta"])
        ns.append(f["n_atoms"])
    write_table_csv(out / "beta_monte_carlo.csv", ["beta", "n_atoms"], [betas, ns])
    inside = np.mean(np.abs(np.array(betas) / beta - 1) <= 0.02)
    print(f"beta = {fit['beta']:.5f} +- {fit.stderr('beta'):.5f}, N = {fit['n_atoms']:.1f}; {100 * inside:.1f}% of trials within 2%")


if __name__ == "__main__":
    main()
