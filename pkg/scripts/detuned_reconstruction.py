"""Phase spectra and complex time-domain wavefunctions reconstructed from detuned synthetic runs."""

import argparse
import math
from pathlib import Path

import numpy as np

from chiral_squeeze.formats import write_table_csv
from chiral_squeeze.physics import (
    ComplexSpectrum,
    Drive,
    EmitterEnsemble,
    FrequencyGrid,
    compose_entangled_spectrum,
    to_time_domain,
)
from chiral_squeeze.pipeline import AnalysisSettings, analyze, repetitions_from_synth
from chiral_squeeze.synth import SynthConfig, iter_repetitions, uniform_theta_schedule

GAMMA = 2 * math.pi * 5.2e6
DETUNINGS = (1.9, 0.8, 0.0, -1.0, -1.9)


def theory_on_bins(freq_hz, delta, n_atoms, beta=0.007):
    grid = FrequencyGrid.symmetric()
    phi = compose_entangled_spectrum(EmitterEnsemble(beta, 1.0, delta, n_atoms), grid)
    omega = 2 * math.pi * freq_hz / GAMMA
    bins = np.interp(omega, grid.omega, phi.values.real) + 1j * np.interp(omega, grid.omega, phi.values.imag)
    full = to_time_domain(ComplexSpectrum(FrequencyGrid.from_spacing(omega[1], omega.size - 1), np.concatenate([bins[:0:-1], bins])))
    return bins, full


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="figures")
    ap.add_argument("--repetitions", type=int, default=4000)
    ap.add_argument("--seed", type=int, default=6)
    args = ap.parse_args(argv)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for k, delta in enumerate(DETUNINGS):
        ens = EmitterEnsemble(0.007, GAMMA, delta * GAMMA, 140)
        cfg = SynthConfig(ens, Drive(0.37), eta=0.22, n_repetitions=args.repetitions)
        seed = args.seed + k
        thetas = uniform_theta_schedule(args.repetitions, seed)
        res = analyze(repetitions_from_synth(iter_repetitions(cfg, thetas, seed)), AnalysisSettings(ens, cfg.drive, cfg.eta, cfg.sample_rate))
        bins, full = theory_on_bins(res.freq_hz, delta, 140)
        tag = f"{delta:+.1f}".replace("+", "p").replace("-", "m").replace(".", "_")
        p = res.phase
        write_table_csv(
            out / f"phase_delta_{tag}.csv",
            ["freq_hz", "phase", "re_stderr", "im_stderr", "theory_phase"],
            [p.freq_hz, p.phase, p.re_stderr, p.im_stderr, np.angle(bins)],
        )
        wf = res.wavefunction
        truth = full.values[np.abs(full.tau) <= wf.time_domain.tau.max() + 1e-12]
        write_table_csv(
            out / f"wavefunction_delta_{tag}.csv",
            ["tau", "re", "im", "re_stderr", "im_stderr", "theory_re", "theory_im"],
            [wf.time_domain.tau, wf.time_domain.values.real, wf.time_domain.values.imag, wf.re_stderr, wf.im_stderr, truth.real, truth.imag],
        )


if __name__ == "__main__":
    main()
