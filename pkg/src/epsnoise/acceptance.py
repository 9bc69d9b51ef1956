"""Executable acceptance suite.

Each criterion is a function returning (passed, detail); ``run_all`` prints
one PASS/FAIL line per criterion.  The same checks back the pytest module
``tests/test_acceptance.py`` and the ``epsnoise selftest`` command.
"""

import filecmp
import math
import tempfile
import time
from pathlib import Path

import numpy as np

from .analytic import (
    alamouti_gaussian_ber,
    alamouti_reference_spec,
    ber_gaussian_closed,
    ber_gaussian_integral,
    ber_gaussian_upper,
    ber_mixture,
    ber_ml_genie_general,
    ber_mlbnr_general,
    ber_mlbnr_optimal,
    ber_mls_general,
    chi_moment_match,
    gaussian_closed_prefactor,
    mixture_states,
    pairwise_error_bound_fixed_channel,
)
from .detectors import WConfig
from .model import NoiseSpec, sample_channel, solve_noise_powers
from .montecarlo import ExperimentConfig, NoiseSetting, estimate_ber, run_sweep

__all__ = ["CRITERIA", "run_criterion", "run_all"]


def _sigma_grid():
    return np.linspace(0.1, 2.0, 20)


def criterion_1(workers=None):
    """Closed-form prefactor at n = 8 equals 35/64."""
    err = abs(gaussian_closed_prefactor(8.0) - 35.0 / 64.0)
    return err <= 1e-12, f"|prefactor - 35/64| = {err:.2e} (tol 1e-12)"


def criterion_2(workers=None):
    """Tail-bound constant ~70.89 at n = 8; bound dominates the closed form."""
    const = 2.0 ** 7 * math.exp(math.lgamma(3.5) - math.lgamma(4.0))
    const_ok = abs(const - 70.89) <= 0.01
    dominated = True
    worst = math.inf
    for n in (3.5, 6.0, 8.0):
        for sigma in _sigma_grid():
            margin = ber_gaussian_upper(sigma, n) - ber_gaussian_closed(sigma, n)
            worst = min(worst, margin)
            dominated = dominated and margin >= 0.0
    return (const_ok and dominated), (
        f"constant = {const:.4f} (target 70.89 +- 0.01); "
        f"min(bound - closed) = {worst:.2e} over the sigma x n grid"
    )


def criterion_3(workers=None):
    """Closed form agrees with the quadrature route to 1e-6 relative."""
    worst = 0.0
    for n in (3.5, 6.0, 8.0):
        for sigma in _sigma_grid():
            a = ber_gaussian_closed(sigma, n)
            b = ber_gaussian_integral(sigma, n)
            worst = max(worst, abs(a - b) / abs(b))
    return worst <= 1e-6, f"max relative closed-vs-quadrature gap = {worst:.2e} (tol 1e-6)"


def criterion_4(workers=None):
    """Background-noise-only simulation matches the closed-form curve."""
    grid = [0.0, 4.0, 8.0, 12.0]
    base = ExperimentConfig(
        system="alamouti2x2",
        detector="mls",
        noise=NoiseSetting(0.0, epsilon=0.0, gamma=1.0),
        stop_errors=300,
        max_bits=40_000_000,  # keeps the deepest point inside the runtime budget
        seed=41,
        chunk_size=131072,
    )
    results = run_sweep(base, grid, workers)
    lines = []
    ok = True
    for snr, est in results:
        spec = solve_noise_powers(snr, 0.0, 1.0)
        target = alamouti_gaussian_ber(spec.sigma1_sq)
        sigmas = abs(est.ber - target) / est.std_error if est.std_error else math.inf
        ok = ok and sigmas <= 3.0
        lines.append(f"{snr:g}dB: sim={est.ber:.3e} closed={target:.3e} ({sigmas:.1f} sigma)")
    return ok, "; ".join(lines)


def criterion_5(workers=None):
    """Fixed-channel mixture expression matches brute-force event simulation."""
    spec = NoiseSpec(0.1, 1.0, 10.0)
    e_abs = 2.0
    trials = 1_000_000
    rng = np.random.default_rng(505)
    lines = []
    ok = True
    for _ in range(3):
        ch = sample_channel(rng)
        predicted = pairwise_error_bound_fixed_channel(ch, e_abs, spec)
        g = np.abs(ch.gains)
        d2 = e_abs ** 2 * float((g ** 2).sum())
        states = rng.random((trials, 4)) < spec.epsilon
        sd = np.where(states, math.sqrt(spec.sigma2_sq), math.sqrt(spec.sigma1_sq))
        xi = rng.standard_normal((trials, 4)) * sd
        freq = float(((xi * g).sum(axis=1) > d2 / 2.0).mean())
        se = math.sqrt(max(freq * (1.0 - freq), 1e-12) / trials)
        sigmas = abs(freq - predicted) / se
        ok = ok and sigmas <= 3.0
        lines.append(f"pred={predicted:.4e} freq={freq:.4e} ({sigmas:.1f} sigma)")
    return ok, "; ".join(lines)


def criterion_6(workers=None):
    """Mixture closed form vs least-squares Monte Carlo at the pinned points.

    Tolerance is max(3 standard errors, 25% relative).  Known to fail: the
    closed form replaces the four per-sample variances by their average
    before channel averaging, which deviates from the exact decoder error by
     30-50% at the higher-SNR points (see the repository analysis notes).
    """
    ok = True
    lines = []
    for eps, gamma in ((0.1, 10.0), (0.01, 100.0)):
        for snr in (5.0, 10.0, 15.0):
            cfg = ExperimentConfig(
                system="alamouti2x2",
                detector="mls",
                noise=NoiseSetting(snr, epsilon=eps, gamma=gamma),
                stop_errors=300,
                max_bits=40_000_000,
                seed=61,
                chunk_size=131072,
                stream_group=int(snr),
            )
            est = estimate_ber(cfg, workers)
            spec = cfg.noise_spec()
            analytic = ber_mixture(spec)
            tol = max(3.0 * est.std_error, 0.25 * est.ber)
            point_ok = abs(analytic - est.ber) <= tol
            ok = ok and point_ok
            lines.append(
                f"eps={eps} g={gamma:g} {snr:g}dB: sim={est.ber:.3e} "
                f"closed={analytic:.3e} ({(analytic - est.ber) / est.ber:+.0%})"
            )
    return ok, "; ".join(lines)


def criterion_7(workers=None):
    """Genie background-only bound vs genie decoder Monte Carlo.

    Partially fails: the bound composes per-pattern pairwise error terms, and
    the actual four-candidate decision on a sample subset exceeds them by
    15-30% at the deeper points (see the repository analysis notes).
    """
    ok = True
    lines = []
    for group, snr in enumerate((5.0, 10.0, 15.0)):
        cfg = ExperimentConfig(
            system="alamouti2x2",
            detector="mlbnr_genie",
            genie=True,
            noise=NoiseSetting(snr, epsilon=0.1, gamma=100.0),
            stop_errors=300,
            max_bits=40_000_000,
            seed=71,
            chunk_size=131072,
            stream_group=group,
        )
        est = estimate_ber(cfg, workers)
        bound = ber_mlbnr_optimal(alamouti_reference_spec(cfg.noise_spec()))
        sigmas = abs(est.ber - bound) / est.std_error if est.std_error else math.inf
        ok = ok and sigmas <= 3.0
        lines.append(f"{snr:g}dB: sim={est.ber:.3e} bound={bound:.3e} ({sigmas:.1f} sigma)")
    return ok, "; ".join(lines)


def criterion_8(workers=None):
    """Fixed-gain triple-repetition formulas vs simulation (genie maximum
    likelihood, genie background-only, least squares, and the pure-Gaussian
    least-squares reduction)."""
    e = (2.0, 2.0, 2.0)
    ok = True
    lines = []
    cases = []
    for snr in (0.0, 4.0):
        mixture = NoiseSetting(snr, epsilon=0.1, gamma=100.0)
        gauss = NoiseSetting(snr, epsilon=0.0, gamma=1.0)
        cases += [
            ("ml_genie", mixture, ber_ml_genie_general(e, mixture.resolve())),
            ("mlbnr_genie", mixture, ber_mlbnr_general(e, mixture.resolve())),
            ("mls", mixture, ber_mls_general(e, mixture.resolve())),
            ("mls", gauss, ber_mls_general(e, gauss.resolve())),
        ]
    for group, (detector, noise, analytic) in enumerate(cases):
        cfg = ExperimentConfig(
            system="repcode3",
            detector=detector,
            genie=detector.endswith("genie"),
            noise=noise,
            stop_errors=300,
            max_bits=20_000_000,
            seed=81,
            chunk_size=131072,
            stream_group=group,
        )
        est = estimate_ber(cfg, workers)
        sigmas = abs(est.ber - analytic) / est.std_error if est.std_error else math.inf
        ok = ok and sigmas <= 3.0
        lines.append(
            f"{detector}@{noise.snr_db:g}dB(eps={noise.epsilon:g}): "
            f"sim={est.ber:.3e} formula={analytic:.3e} ({sigmas:.1f} sigma)"
        )
    return ok, "; ".join(lines)


def criterion_9(workers=None):
    """Robust detector ordering at a heavy-impulse operating point, for both
    impulse tails, plus tail-insensitivity of the robust rules."""
    bers = {}
    ses = {}
    for tail in ("gaussian", "laplace"):
        for group, detector in enumerate(("mls", "median", "w")):
            cfg = ExperimentConfig(
                system="alamouti2x2",
                detector=detector,
                wconfig=WConfig(),
                noise=NoiseSetting(12.0, epsilon=0.1, gamma=100.0, tail=tail),
                stop_errors=300,
                max_bits=8_000_000,
                seed=91,
                chunk_size=131072,
                stream_group=group,
            )
            est = estimate_ber(cfg, workers)
            bers[(tail, detector)] = est.ber
            ses[(tail, detector)] = est.std_error

    def separated(tail, better, worse):
        gap = bers[(tail, worse)] - bers[(tail, better)]
        comb = math.hypot(ses[(tail, better)], ses[(tail, worse)])
        return gap > 3.0 * comb

    ok = True
    lines = []
    for tail in ("gaussian", "laplace"):
        w_beats_mls = separated(tail, "w", "mls")
        m_beats_mls = separated(tail, "median", "mls")
        w_le_m = bers[(tail, "w")] <= bers[(tail, "median")] + 3.0 * math.hypot(
            ses[(tail, "w")], ses[(tail, "median")])
        ok = ok and w_beats_mls and m_beats_mls and w_le_m
        lines.append(
            f"{tail}: mls={bers[(tail, 'mls')]:.3e} m={bers[(tail, 'median')]:.3e} "
            f"w={bers[(tail, 'w')]:.3e} (w<mls:{w_beats_mls} m<mls:{m_beats_mls} w<=m:{w_le_m})"
        )
    for detector in ("w", "median"):
        ratio = bers[("laplace", detector)] / bers[("gaussian", detector)]
        within = 0.5 <= ratio <= 2.0
        ok = ok and within
        lines.append(f"{detector} laplace/gaussian = {ratio:.2f} (within factor 2: {within})")
    return ok, "; ".join(lines)


def criterion_10(workers=None):
    """Error-target stopping honored; byte-identical CSVs for 1/2/8 workers."""
    from .cli import cmd_sweep

    config_text = (
        "[system]\nname = alamouti2x2\n\n"
        "[detector]\nkind = mls\n\n"
        "[noise]\nepsilon = 0.1\ngamma = 10\ntail = gaussian\n\n"
        "[run]\nsnr_db = 0 5\nstop_errors = 300\nmax_bits = 2000000\n"
        "seed = 77\nchunk_size = 16384\n\n"
        "[output]\ndirectory = .\nprefix = det\n"
    )
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        cfg_path = tmp / "det.cfg"
        cfg_path.write_text(config_text)
        csvs = []
        for workers_n in (1, 2, 8):
            outdir = tmp / f"w{workers_n}"
            rc = cmd_sweep(cfg_path, outdir=outdir, workers=workers_n)
            if rc != 0:
                return False, f"sweep exited {rc} at {workers_n} workers"
            csvs.append(outdir / "det_mls_gaussian.csv")
        identical = (filecmp.cmp(csvs[0], csvs[1], shallow=False)
                     and filecmp.cmp(csvs[0], csvs[2], shallow=False))
        rows = csvs[0].read_text().strip().splitlines()
        header = rows[0].split(",")
        first = dict(zip(header, rows[1].split(",")))
        stop_ok = first["stopped_by"] == "errors" and int(first["bit_errors"]) >= 300
    return identical and stop_ok, (
        f"byte-identical across 1/2/8 workers: {identical}; "
        f"first point stopped_by={first['stopped_by']} with {first['bit_errors']} errors"
    )


def criterion_11(workers=None):
    """Exact identities: binomial regrouping of the 16-pattern sum, pattern
    probabilities summing to one, and moment-matching round trips."""
    spec = NoiseSpec(0.1, 0.2, 2.0)
    grouped = ber_mixture(spec)
    direct = sum(
        w.probability * alamouti_gaussian_ber(sum(w.effective_variances) / 4.0)
        for w in mixture_states(spec, 4)
    )
    regroup_err = abs(grouped - direct)

    prob_err = 0.0
    for eps in (0.0, 0.17, 0.5, 1.0):
        s = NoiseSpec(eps, 1.0, 4.0)
        for n in (3, 4):
            prob_err = max(prob_err, abs(sum(w.probability for w in mixture_states(s, n)) - 1.0))

    moment_err = 0.0
    for mean, var in ((8.0, 16.0), (3.0, 4.0), (0.7, 0.9)):
        a, n = chi_moment_match(mean, var)
        moment_err = max(moment_err, abs(n / a - mean), abs(2.0 * n / a ** 2 - var))
    a8, n8 = chi_moment_match(8.0, 16.0)
    identity_ok = (a8, n8) == (1.0, 8.0)

    ok = regroup_err <= 1e-12 and prob_err <= 1e-12 and moment_err <= 1e-12 and identity_ok
    return ok, (
        f"regrouping err {regroup_err:.1e}; probability-sum err {prob_err:.1e}; "
        f"moment round-trip err {moment_err:.1e}; identity case (a,n)=({a8:g},{n8:g})"
    )


CRITERIA = (
    (1, "closed-form prefactor", criterion_1, 1.0),
    (2, "tail-bound constant and dominance", criterion_2, 1.0),
    (3, "closed form vs quadrature", criterion_3, 10.0),
    (4, "background-only simulation vs closed form", criterion_4, 120.0),
    (5, "fixed-channel mixture expression vs event simulation", criterion_5, 60.0),
    (6, "mixture closed form vs simulation", criterion_6, 300.0),
    (7, "genie background-only bound vs simulation", criterion_7, 300.0),
    (8, "triple-repetition formulas vs simulation", criterion_8, 300.0),
    (9, "robust detector ordering and tail insensitivity", criterion_9, 600.0),
    (10, "stopping protocol and worker determinism", criterion_10, 60.0),
    (11, "exact identities", criterion_11, 1.0),
)


def run_criterion(number: int, workers=None):
    """Run one criterion; returns (name, passed, detail).  The runtime budget
    is part of the criterion."""
    for num, name, fn, budget in CRITERIA:
        if num == number:
            start = time.perf_counter()
            passed, detail = fn(workers)
            elapsed = time.perf_counter() - start
            if elapsed > budget:
                passed = False
                detail += f"; RUNTIME {elapsed:.1f}s exceeded budget {budget:.0f}s"
            else:
                detail += f"; {elapsed:.1f}s"
            return name, passed, detail
    raise ValueError(f"no criterion number {number}")


def run_all(only=None, workers=None):
    """Run the acceptance criteria (all, or the ``only`` subset), printing one
    PASS/FAIL line each; returns [(number, passed, detail), ...]."""
    results = []
    for num, name, _, _ in CRITERIA:
        if only and num not in only:
            continue
        crit_name, passed, detail = run_criterion(num, workers)
        print(f"{'PASS' if passed else 'FAIL'} criterion {num} ({crit_name}): {detail}")
        results.append((num, passed, detail))
    return results
