"""Acceptance criteria, one test per criterion.

Each test prints a single ``PASS``/``FAIL`` line; the lines are repeated in
the pytest terminal summary. Run directly with ``python3 tests/test_acceptance.py``
to print only the lines.
"""

import json
import math
import subprocess
import sys
import time

import numpy as np

from conftest import ACCEPTANCE_LINES
from oracles import one_time_pad_joint, two_state_grid_oracle
from qdlock import bosonic, channels, locking, ppm
from qdlock.accinfo import acc_info_optimize, adversary_suite, holevo_chi
from qdlock.qcore import Ensemble, KrausChannel, random_pure_state


def report(num, ok, detail, elapsed, limit):
    ok = bool(ok) and elapsed < limit
    line = f"{'PASS' if ok else 'FAIL'} criterion {num}: {detail} [{elapsed:.1f}s / limit {limit:.0f}s]"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


def strictly_below(upper, lower):
    """Mean of ``lower`` below mean of ``upper`` by more than 3 combined standard errors."""
    a, b = np.asarray(upper), np.asarray(lower)
    se = math.sqrt(a.var(ddof=1) / len(a) + b.var(ddof=1) / len(b))
    return a.mean() - b.mean() > 3 * se, a.mean() - b.mean(), se


def random_pure_ensemble(d, n, rng):
    vecs = np.array([random_pure_state(d, rng) for _ in range(n)]).T
    return Ensemble.from_pure(vecs, rng.dirichlet(np.ones(n)))


def test_criterion_01_noiseless_decode():
    t0 = time.time()
    worst_p, worst_i = 0.0, 0.0
    for d in (4, 16, 64):
        for nk in (1, 4):
            proto = locking.protocol_from_scheme(locking.LockingScheme.haar(d, nk, seed=d + nk))
            ident = KrausChannel.identity(d)
            worst_p = max(worst_p, abs(locking.decode_success_probability(proto, ident) - 1.0))
            worst_i = max(worst_i, abs(locking.bob_information(proto, ident) - math.log2(d)))
    ok = worst_p <= 1e-10 and worst_i <= 1e-9
    report(1, ok, f"max |P_succ - 1| = {worst_p:.1e}, max |I - log2 d| = {worst_i:.1e}", time.time() - t0, 10)


def test_criterion_02_accinfo_oracle():
    t0 = time.time()
    worst, above_chi = 0.0, 0.0
    for c in np.linspace(0.0, 1.0, 20):
        t = math.acos(c) / 2
        vecs = np.array([[math.cos(t), math.cos(t)], [math.sin(t), -math.sin(t)]])
        ens = Ensemble.from_pure(vecs, [0.5, 0.5])
        res = acc_info_optimize(ens, restarts=4, iters=300, rng_seed=0)
        worst = max(worst, abs(res.lower_bits - two_state_grid_oracle(c)))
        above_chi = max(above_chi, res.lower_bits - holevo_chi(ens))
    ok = worst <= 1e-4 and above_chi <= 0.0
    report(2, ok, f"max |opt - grid| = {worst:.1e}, max(opt - chi) = {above_chi:.1e}", time.time() - t0, 60)


def test_criterion_03_locking_trend():
    t0 = time.time()
    keys = (1, 2, 4, 8, 16)
    best = {nk: [] for nk in keys}
    for nk in keys:
        for seed in range(10):
            ens = locking.locked_ensemble(locking.LockingScheme.haar(32, nk, seed=seed))
            res = adversary_suite(ens, rng_seed=seed, restarts=1, iters=60, num_elements=64)
            best[nk].append(res.best_bits)
    steps = [strictly_below(best[a], best[b]) for a, b in zip(keys, keys[1:])]
    r1 = locking.ratios_r1_r2(np.mean(best[16]), 5.0, 4.0).r1
    ok = all(s[0] for s in steps) and r1 < 0.5 and 4 < 5
    means = ", ".join(f"K={nk}: {np.mean(best[nk]):.3f}" for nk in keys)
    margins = ", ".join(f"{s[1] / max(s[2], 1e-300):.0f}" for s in steps)
    report(3, ok, f"means {means}; step/se {margins}; r1(K=16) = {r1:.3f}, key 4 < locked 5",
           time.time() - t0, 600)


def eb_zoo():
    zoo = {f"depolarizing({p:.3g})": channels.depolarizing(2, p) for p in (2 / 3, 0.8, 1.0)}
    for s in range(5):
        zoo[f"measure_prepare#{s}"] = channels.random_measure_prepare(2, 2, 4, rng_seed=100 + s)
    return zoo


def test_criterion_04_entanglement_breaking():
    t0 = time.time()
    rng = np.random.default_rng(4)
    worst_slack, worst_upper = -np.inf, -np.inf
    for name, ch in eb_zoo().items():
        for _ in range(50):
            ens = random_pure_ensemble(2, int(rng.integers(2, 7)), rng)
            worst_slack = max(worst_slack, channels.eb_zero_capacity_certificate(ch, ens).slack)
        iv = channels.weak_lock_upper_single_letter(ch, starts=2, random_ensembles=4, rng_seed=1)
        worst_upper = max(worst_upper, iv.upper_bits)
    ok = worst_slack <= 1e-6 and worst_upper <= 1e-4
    report(4, ok, f"max certificate slack = {worst_slack:.1e}, max weak upper = {worst_upper:.1e}",
           time.time() - t0, 300)


def test_criterion_05_bosonic_bounds():
    t0 = time.time()
    rng = np.random.default_rng(5)
    ns = 10 ** rng.uniform(-6, 4, 10_000)
    max_strong = float(np.max(bosonic.strong_lock_bound_cs(ns)))
    g1 = abs(bosonic.g_func(1.0) - 2.0)
    eta, nn = np.meshgrid(np.linspace(0, 1, 101), np.geomspace(1e-4, 1e3, 200))
    gap = float(np.max(bosonic.weak_lock_bound_pure_loss(eta, nn) - bosonic.pure_loss_private_capacity(eta, nn)))
    ok = max_strong <= bosonic.LOG2E + 1e-12 and g1 <= 1e-12 and gap <= 1.4427
    report(5, ok, f"max strong bound = {max_strong:.6f}, |g(1) - 2| = {g1:.1e}, max weak - private = {gap:.6f}",
           time.time() - t0, 10)


def test_criterion_06_wehrl():
    t0 = time.time()
    errs = [abs(bosonic.wehrl_entropy(bosonic.FockOperator.vacuum()) - bosonic.LOG2E)]
    for N in (0.5, 1.0, 2.0):
        w = bosonic.wehrl_entropy(bosonic.FockOperator.thermal(N))
        errs.append(abs(w - (math.log2(N + 1) + bosonic.LOG2E)))
    report(6, max(errs) <= 1e-4, "errors " + ", ".join(f"{e:.1e}" for e in errs), time.time() - t0, 30)


def test_criterion_07_thermal_maximizer():
    t0 = time.time()
    min_slack, max_diff = np.inf, 0.0
    for N in (0.2, 0.5, 1.0):
        for seed in range(100):
            res = bosonic.hw_thermal_maximizer_check(bosonic.random_constrained_state(N, rng_seed=seed), N_S=N)
            min_slack = min(min_slack, res.slack)
            max_diff = max(max_diff, res.forms_difference)
    ok = min_slack >= -1e-3 and max_diff <= 2e-3
    report(7, ok, f"min slack = {min_slack:.2e}, max form difference = {max_diff:.1e}", time.time() - t0, 300)


def test_criterion_08_ppm_throughput():
    t0 = time.time()
    zs = []
    grid = [(eta, n) for eta in (0.3, 0.5, 0.9) for n in (8, 16)]
    for i, (eta, n) in enumerate(grid):
        rep = ppm.lossy_feedback_simulate(ppm.PpmConfig(n_modes=n, eta=eta, trials=100_000, rng_seed=80 + i))
        zs.append((rep.throughput_bits_per_block - eta * math.log2(n)) / rep.throughput_stderr)
    ok = max(abs(z) for z in zs) <= 3
    report(8, ok, "z-scores " + ", ".join(f"{z:+.2f}" for z in zs), time.time() - t0, 60)


def test_criterion_09_coherent_ppm():
    t0 = time.time()
    n, alpha = 8, 0.3
    N = alpha**2
    keys = (1, 2, 4, 8)
    norm_err, vac_err = 0.0, 0.0
    inum = {nk: [] for nk in keys}
    for nk in keys:
        for seed in range(5):
            s = ppm.coherent_ppm_scheme(n, alpha, nk, seed=seed)
            norm_err = max(norm_err, abs(sum(s.sector_norms()) - 1.0),
                           float(np.max(np.abs(np.linalg.norm(s.encoded_vectors(), axis=1) - 1.0))))
            povm = ppm.photon_number_adversary(s, rng_seed=seed)
            vac = s.locked_ensemble().joint_distribution(povm).sum(axis=0)[0]
            vac_err = max(vac_err, abs(vac - math.exp(-N)))
            inum[nk].append(ppm.i_num_estimate(s, rng_seed=seed).i_num_bits)
    nonincreasing = []
    for a, b in zip(keys, keys[1:]):
        x, y = np.asarray(inum[a]), np.asarray(inum[b])
        se = math.sqrt(x.var(ddof=1) / len(x) + y.var(ddof=1) / len(y))
        nonincreasing.append(y.mean() <= x.mean() + 3 * se)
    ok = norm_err <= 1e-9 and vac_err <= 2 * N**2 and all(nonincreasing)
    means = ", ".join(f"K={k}: {np.mean(v):.4f}" for k, v in inum.items())
    report(9, ok, f"norm error {norm_err:.1e}, vacuum error {vac_err:.1e} (<= {2 * N**2:.3f}); I_num {means}",
           time.time() - t0, 600)


def test_criterion_10_additivity():
    t0 = time.time()
    pairs = [
        (channels.amplitude_damping_wiretap(0.2), channels.amplitude_damping_wiretap(0.35)),
        (channels.erasure_wiretap(2, 0.2), channels.erasure_wiretap(2, 0.4)),
        (channels.hadamard_dephasing_wiretap(0.3), channels.amplitude_damping_wiretap(0.1)),
        (channels.WiretapChannel.with_constant_eve(channels.depolarizing(2, 0.3)),
         channels.amplitude_damping_wiretap(0.25)),
        (channels.amplitude_damping_wiretap(0.3), channels.amplitude_damping_wiretap(0.3)),
    ]
    rng = np.random.default_rng(10)
    slacks = []
    for i, (a, b) in enumerate(pairs):
        e1, e2 = random_pure_ensemble(2, 3, rng), random_pure_ensemble(2, 3, rng)
        res = channels.degraded_product_additivity_check(a, b, e1, e2, joint_search_budget=200, rng_seed=i)
        slacks.append(res.slack)
    report(10, max(slacks) <= 1e-4, "slacks " + ", ".join(f"{s:.1e}" for s in slacks), time.time() - t0, 600)


def test_criterion_11_classical_inequality():
    t0 = time.time()
    rng = np.random.default_rng(11)
    held, min_slack = 0, np.inf
    for _ in range(1000):
        shape = tuple(rng.integers(2, 6, size=3))
        p = rng.dirichlet(np.full(int(np.prod(shape)), rng.uniform(0.1, 2.0))).reshape(shape)
        ok_i, slack = locking.classical_inequality_check(p)
        held += ok_i
        min_slack = min(min_slack, slack)
    otp = max(abs(locking.classical_inequality_check(one_time_pad_joint(d))[1]) for d in (2, 3, 4, 8))
    ok = held == 1000 and otp <= 1e-9
    report(11, ok, f"{held}/1000 hold (min slack {min_slack:.2e}); one-time-pad |slack| = {otp:.1e}",
           time.time() - t0, 600)


def test_criterion_12_cli_determinism():
    t0 = time.time()
    from qdlock.cli import COMMANDS

    same = []
    for name in sorted(COMMANDS):
        outs = []
        for _ in range(2):
            proc = subprocess.run(
                [sys.executable, "-m", "qdlock.cli", name, "--seed", "12"],
                capture_output=True, text=True, check=False,
            )
            outs.append((proc.returncode, proc.stdout))
        json.loads(outs[0][1])
        same.append(outs[0] == outs[1] and outs[0][0] == 0)
    report(12, all(same), f"{sum(same)}/{len(same)} subcommands byte-identical", time.time() - t0, 600)


if __name__ == "__main__":
    failures = 0
    for name, fn in sorted(globals().items()):
        if name.startswith("test_criterion"):
            try:
                fn()
            except AssertionError:
                failures += 1
    sys.exit(1 if failures else 0)
