"""Synthetic homodyne run on resonance: band-averaged noise versus LO phase and its cosine fit."""

import argparse
import math
from pathlib import Path

import numpy as np

from chiral_squeeze.formats import write_table_csv
from chiral_squeeze.physics import Drive, EmitterEnsemble
from chiral_squeeze.pipeline import AnalysisSettings, analyze, repetitions_from_synth
from chiral_squeeze.synth import SynthConfig, iter_repetitions, uniform_theta_schedule

GAMMA = 2 * math.pi * 5.2e6


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="figures")
    ap.add_argument("--repetitions", type=int, default=10_000)
    ap.add_argument("--seed", type=int, default=11)
    args = ap.parse_args(argv)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ens = EmitterEnsemble(0.007, GAMMA, 0.0, 169)
    cfg = SynthConfig(ens, Drive(0.51), eta=0.22, n_repetitions=args.repetitions)
    thetas = uniform_theta_schedule(args.repetitions, args.seed)
    res = analyze(repetitions_from_synth(iter_repetitions(cfg, thetas, args.seed)), AnalysisSettings(ens, cfg.drive, cfg.eta, cfg.sample_rate))
    table = res.noise_table()
    write_table_csv(out / "noise_vs_theta.csv", ["theta", "noise", "weight"], list(zip(*table)))
    a, phi, c = res.cosine["A"], res.cosine["varphi"], res.cosine["c"]
    th = np.linspace(0, 2 * math.pi, 361)
    write_table_csv(out / "noise_fit.csv", ["theta", "fit"], [th, -a * np.cos(2 * th + phi) + c])
    print(f"squeezing {res.squeezing_percent:.3f}%  varphi/pi {phi / math.pi:+.4f} +- {res.cosine.stderr('varphi') / math.pi:.4f}")


if __name__ == "__main__":
    main()
