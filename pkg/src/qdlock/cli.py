"""Command-line entry point: JSON config in, sorted-key JSON report (and CSV sweeps) out.

Exit codes: 0 success, 2 config error, 3 invariant failure, 4 capability error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from pathlib import Path
from typing import Callable, Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from . import __version__, accinfo, bosonic, channels, locking, ppm
from .qcore import RNG_ALGORITHM, CapabilityError, Ensemble, KrausChannel, make_rng

EXIT_OK, EXIT_CONFIG, EXIT_INVARIANT, EXIT_CAPABILITY = 0, 2, 3, 4
THREADS_ENV = "QDLOCK_THREADS"


class ConfigError(Exception):
    pass


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class LockSimConfig(_Strict):
    msg_dim: int = Field(16, ge=2, le=64)
    num_keys: int = Field(4, ge=1)
    mode: Literal["strong", "weak"] = "strong"
    channel: dict | None = None
    restarts: int = Field(2, ge=0)
    iters: int = Field(200, ge=1)
    seed: int = Field(0, ge=0)
    scheme_out: str | None = None


class BosonicConfig(_Strict):
    ns_min: float = Field(0.001, gt=0)
    ns_max: float = Field(10.0, gt=0)
    points: int = Field(50, ge=2)
    log_spacing: bool = True
    eta: float = Field(1.0, ge=0, le=1)
    wehrl_checks: list[float] = [0.5, 1.0, 2.0]
    seed: int = Field(0, ge=0)


class PpmSimConfig(_Strict):
    variant: Literal["single_photon", "coherent"] = "single_photon"
    n_modes: int = Field(16, ge=2)
    eta: float = Field(0.5, ge=0, le=1)
    num_keys: int = Field(4, ge=1)
    alpha: float = Field(0.3, ge=0)
    trials: int = Field(100_000, ge=1)
    epsilon: float = Field(0.5, gt=0, lt=1)
    evaluate_adversary: bool = False
    seed: int = Field(0, ge=0)


class EbCheckConfig(_Strict):
    channel: dict = {"name": "depolarizing", "dim": 2, "p": 0.7}
    ensembles: int = Field(5, ge=0)
    ensemble_size: int = Field(4, ge=1)
    search_starts: int = Field(2, ge=0)
    seed: int = Field(0, ge=0)


class WiretapSpec(_Strict):
    kind: Literal["amplitude_damping", "erasure", "hadamard_dephasing", "constant_eve"]
    param: float = Field(ge=0, le=1)


class WiretapConfig(_Strict):
    first: WiretapSpec = WiretapSpec(kind="amplitude_damping", param=0.2)
    second: WiretapSpec = WiretapSpec(kind="amplitude_damping", param=0.3)
    ensemble_size: int = Field(3, ge=1, le=8)
    budget: int = Field(200, ge=1)
    seed: int = Field(0, ge=0)


class AccinfoConfig(_Strict):
    ensemble: Literal["two_pure_qubit", "locked"] = "two_pure_qubit"
    overlap: float = Field(0.5, ge=0, le=1)
    msg_dim: int = Field(8, ge=2, le=64)
    num_keys: int = Field(2, ge=1)
    restarts: int = Field(4, ge=0)
    iters: int = Field(300, ge=1)
    seed: int = Field(0, ge=0)


def _num(value, tol, method: str) -> dict:
    v = None if value is None else float(value)
    if v is not None and not math.isfinite(v):
        v = repr(v)
    return {"value": v, "tolerance": tol, "method": method}


# --------------------------------------------------------------------------
# commands; each returns (results, checks, extra files)


def cmd_lock_sim(cfg: LockSimConfig, threads: int):
    scheme = locking.LockingScheme.haar(cfg.msg_dim, cfg.num_keys, cfg.seed)
    ch = channels.build_channel(cfg.channel) if cfg.channel else None
    rep = locking.evaluate_protocol(
        scheme, ch, cfg.mode, cfg.seed, cfg.restarts, cfg.iters, threads
    )
    opt = "adversary suite plus rank-one ascent"
    results = {
        "success_prob": _num(rep.success_prob, 1e-10, "exact decode probability"),
        "bob_info_bits": _num(rep.bob_info_bits, 1e-9, "key-aided decode then measure"),
        "eve_best_bits": _num(rep.adversary.best_bits, None, f"lower bound: {opt}"),
        "eve_holevo_bits": _num(rep.adversary.holevo_bits, 1e-9, "holevo upper bound"),
        "max_var_dist": _num(rep.max_var_dist, 1e-12, f"criterion at optimised POVM; {opt}"),
        "fa_acc_bound_bits": _num(rep.fa_acc_bound_bits, 1e-12, "closed form"),
        "r1": _num(rep.r1, None, "ratio of bounds"),
        "r2": _num(rep.r2, None, "ratio of bounds"),
        "key_bits": _num(rep.key_bits, 0.0, "exact"),
        "locked_bits": _num(rep.locked_bits, 0.0, "exact"),
        "adversary_members_bits": {
            k: _num(v, None, "lower bound") for k, v in sorted(rep.adversary.members.items())
        },
    }
    checks = {
        "success_prob_in_range": 0.0 <= rep.success_prob <= 1.0,
        "lower_le_holevo": rep.adversary.best_bits <= rep.adversary.holevo_bits + 1e-6,
        "eve_le_bob": rep.adversary.best_bits <= rep.bob_info_bits + 1e-9 or cfg.mode == "weak",
    }
    files = {}
    if cfg.scheme_out:
        files[cfg.scheme_out] = locking.scheme_to_json(scheme)
    return results, checks, files


def _sweep_values(cfg: BosonicConfig) -> np.ndarray:
    if cfg.log_spacing:
        return np.geomspace(cfg.ns_min, cfg.ns_max, cfg.points)
    return np.linspace(cfg.ns_min, cfg.ns_max, cfg.points)


def cmd_bosonic_bounds(cfg: BosonicConfig, threads: int):
    rows = bosonic.bosonic_sweep_rows(_sweep_values(cfg), cfg.eta)
    g = [r["exact"] for r in rows]
    bound = [r["bound"] for r in rows]
    wehrl = {}
    for N in cfg.wehrl_checks:
        w = bosonic.wehrl_entropy(bosonic.FockOperator.thermal(N))
        wehrl[repr(float(N))] = _num(w, 1e-4, "polar Gauss-Legendre quadrature of the Q function")
    results = {
        "max_strong_bound_bits": _num(max(bound), 1e-12, "closed form over sweep"),
        "log2e": _num(bosonic.LOG2E, 0.0, "constant"),
        "max_weak_minus_private_bits": _num(
            max(r["weak_bound"] - r["private_capacity"] for r in rows), 1e-12, "closed form"
        ),
        "wehrl_thermal_bits": wehrl,
        "rows": len(rows),
    }
    checks = {
        "g_monotone": bool(np.all(np.diff(g) > 0)),
        "strong_bound_le_log2e": max(bound) <= bosonic.LOG2E + 1e-12,
        "weak_minus_private_le_log2e": all(
            r["weak_bound"] - r["private_capacity"] <= bosonic.LOG2E + 1e-12 for r in rows
        ),
        "wehrl_thermal_closed_form": all(
            abs(v["value"] - (math.log2(float(k) + 1) + bosonic.LOG2E)) <= 1e-4
            for k, v in wehrl.items()
        ),
    }
    return results, checks, {"bosonic_sweep.csv": bosonic.rows_to_csv(rows)}


def cmd_ppm_sim(cfg: PpmSimConfig, threads: int):
    if cfg.variant == "single_photon":
        pc = ppm.PpmConfig(
            n_modes=cfg.n_modes,
            eta=cfg.eta,
            num_keys=cfg.num_keys,
            trials=cfg.trials,
            rng_seed=cfg.seed,
            epsilon=cfg.epsilon,
            evaluate_adversary=cfg.evaluate_adversary,
        )
        rep = ppm.lossy_feedback_simulate(pc, threads)
        mc = f"Monte-Carlo, {rep.trials} trials, {RNG_ALGORITHM}"
        results = {
            "throughput_bits_per_block": _num(
                rep.throughput_bits_per_block, 3 * rep.throughput_stderr, mc
            ),
            "throughput_stderr": _num(rep.throughput_stderr, None, mc),
            "expected_throughput": _num(rep.expected_throughput, 0.0, "eta log2 n"),
            "resend_rate": _num(rep.resend_rate, None, mc),
            "r2_estimate": _num(rep.r2_estimate, 1e-12, "closed form"),
            "assumption": rep.assumption,
        }
        if rep.eve_bits_per_block is not None:
            results["eve_bits_per_block"] = _num(
                rep.eve_bits_per_block, None, "(1 - eta) x adversary-suite lower bound"
            )
        z = abs(rep.throughput_bits_per_block - rep.expected_throughput)
        checks = {
            "throughput_within_3_stderr": z <= 3 * rep.throughput_stderr + 1e-12,
            "throughput_le_log2n": rep.throughput_bits_per_block <= math.log2(cfg.n_modes) + 1e-12,
            "no_decode_errors": rep.decode_errors == 0,
        }
        return results, checks, {}
    scheme = ppm.coherent_ppm_scheme(cfg.n_modes, cfg.alpha, cfg.num_keys, cfg.seed)
    est = ppm.i_num_estimate(scheme, rng_seed=cfg.seed)
    vac, single, rem = scheme.sector_norms()
    ens = scheme.locked_ensemble()
    p_vac = float(ens.joint_distribution(ppm.photon_number_adversary(scheme, rng_seed=cfg.seed)).sum(axis=0)[0])
    kr = ppm.key_efficiency_region(max(scheme.n_tot, 1e-300), cfg.epsilon, cfg.n_modes)
    results = {
        "i_num_bits": _num(est.i_num_bits, est.remainder_bound_bits, "N_tot x optimised bracket"),
        "bracket_bits": _num(est.bracket_bits, None, "rank-one ascent lower bound"),
        "literal_bracket_bits": _num(est.literal_bracket_bits, 1e-9, "entropy form at same POVM"),
        "remainder_bound_bits": _num(est.remainder_bound_bits, 0.0, "N_tot^2 log2 n"),
        "sector_norms": [_num(x, 1e-12, "Poisson weights") for x in (vac, single, rem)],
        "vacuum_outcome_prob": _num(p_vac, 2 * scheme.n_tot**2, "photon-number adversary"),
        "key_efficiency_inside": kr.inside,
        "key_efficiency_lower_limit": _num(kr.lower_limit, 0.0, "4 log2(1/eps)/log2 n"),
    }
    checks = {
        "sector_norms_sum_to_one": abs(vac + single + rem - 1) <= 1e-9,
        "vacuum_prob": abs(p_vac - math.exp(-scheme.n_tot)) <= 2 * scheme.n_tot**2,
    }
    return results, checks, {}


def cmd_eb_check(cfg: EbCheckConfig, threads: int):
    ch = channels.build_channel(cfg.channel)
    verdict = channels.is_entanglement_breaking(ch)
    results = {"verdict": verdict.as_dict()}
    checks = {}
    if verdict.verdict == channels.EB:
        rng = make_rng(cfg.seed)
        slacks = []
        try:
            for _ in range(cfg.ensembles):
                vecs = np.array(
                    [rng.standard_normal(ch.in_dim) + 1j * rng.standard_normal(ch.in_dim)
                     for _ in range(cfg.ensemble_size)]
                ).T
                vecs /= np.linalg.norm(vecs, axis=0)
                ens = Ensemble.from_pure(vecs, rng.dirichlet(np.ones(cfg.ensemble_size)))
                slacks.append(channels.eb_zero_capacity_certificate(ch, ens).slack)
            results["max_certificate_slack"] = _num(
                max(slacks) if slacks else None, 1e-6, "environment measure-and-prepare simulation"
            )
            checks["certificate_slack_le_1e-6"] = all(s <= 1e-6 for s in slacks)
        except CapabilityError as exc:
            results["certificate"] = f"unavailable: {exc}"
        if cfg.search_starts > 0:
            iv = channels.weak_lock_upper_single_letter(ch, starts=cfg.search_starts, rng_seed=cfg.seed)
            results["weak_lock_interval"] = {
                "lower": _num(iv.lower_bits, None, "max I(X;B) - chi(X;E)"),
                "upper": _num(iv.upper_bits, 1e-4, "max I(X;B) - acc lower bound on E"),
                "label": iv.label,
            }
            checks["weak_upper_le_1e-4"] = iv.upper_bits <= 1e-4
    return results, checks, {}


def _wiretap(spec: WiretapSpec) -> channels.WiretapChannel:
    if spec.kind == "amplitude_damping":
        return channels.amplitude_damping_wiretap(spec.param)
    if spec.kind == "erasure":
        return channels.erasure_wiretap(2, spec.param)
    if spec.kind == "hadamard_dephasing":
        return channels.hadamard_dephasing_wiretap(spec.param)
    return channels.WiretapChannel.with_constant_eve(channels.depolarizing(2, spec.param), "constant_eve")


def _random_pure_ensemble(dim: int, size: int, rng) -> Ensemble:
    vecs = rng.standard_normal((dim, size)) + 1j * rng.standard_normal((dim, size))
    return Ensemble.from_pure(vecs / np.linalg.norm(vecs, axis=0))


def cmd_wiretap(cfg: WiretapConfig, threads: int):
    w1, w2 = _wiretap(cfg.first), _wiretap(cfg.second)
    rng = make_rng(cfg.seed)
    e1 = _random_pure_ensemble(w1.in_dim, cfg.ensemble_size, rng)
    e2 = _random_pure_ensemble(w2.in_dim, cfg.ensemble_size, rng)
    res = channels.degraded_product_additivity_check(w1, w2, e1, e2, cfg.budget, cfg.seed)
    results = {
        "slack": _num(res.slack, 1e-4, "correlated-prior search minus single-channel maxima"),
        "joint_best_bits": _num(res.joint_best_bits, None, "random priors plus SLSQP"),
        "single_max_bits": [_num(x, 1e-9, "SLSQP on a concave objective") for x in res.single_bits],
        "private_info_uniform_bits": [
            _num(channels.private_information(w, e), 1e-12, "exact")
            for w, e in ((w1, e1), (w2, e2))
        ],
    }
    checks = {
        "additivity_slack_le_1e-4": res.slack <= 1e-4,
        "private_le_chi_b": all(
            channels.private_information(w, e) <= accinfo.holevo_chi(e.map(w.channel_b())) + 1e-9
            for w, e in ((w1, e1), (w2, e2))
        ),
    }
    return results, checks, {}


def two_pure_qubit_ensemble(overlap: float) -> Ensemble:
    """Equiprobable real qubit states with <psi_0|psi_1> = overlap."""
    theta = math.acos(overlap) / 2
    vecs = np.array([[math.cos(theta), math.cos(theta)], [math.sin(theta), -math.sin(theta)]])
    return Ensemble.from_pure(vecs)


def projective_grid_oracle(ens: Ensemble, points: int = 10_000) -> float:
    """Best mutual information over real projective qubit measurements on an angle grid."""
    best = 0.0
    for phi in np.linspace(0.0, np.pi, points, endpoint=False):
        u = np.array([math.cos(phi), math.sin(phi)])
        v = np.array([-math.sin(phi), math.cos(phi)])
        p0 = np.real(np.einsum("i,xij,j->x", u, ens.states, u))
        p1 = np.real(np.einsum("i,xij,j->x", v, ens.states, v))
        joint = ens.probs[:, None] * np.stack([p0, p1], axis=1)
        best = max(best, accinfo.classical_mutual_information(np.clip(joint, 0, None)))
    return best


def cmd_accinfo(cfg: AccinfoConfig, threads: int):
    if cfg.ensemble == "two_pure_qubit":
        ens = two_pure_qubit_ensemble(cfg.overlap)
    else:
        ens = locking.locked_ensemble(locking.LockingScheme.haar(cfg.msg_dim, cfg.num_keys, cfg.seed))
    suite = accinfo.adversary_suite(ens, cfg.seed, cfg.restarts, cfg.iters, threads=threads)
    results = {
        "lower_bits": _num(suite.best_bits, None, f"best of suite ({suite.best_name})"),
        "upper_bits": _num(suite.holevo_bits, 1e-9, "holevo"),
        "members_bits": {k: _num(v, None, "lower bound") for k, v in sorted(suite.members.items())},
    }
    checks = {"lower_le_upper": suite.best_bits <= suite.holevo_bits + 1e-6}
    if cfg.ensemble == "two_pure_qubit":
        oracle = projective_grid_oracle(ens)
        results["grid_oracle_bits"] = _num(oracle, 1e-4, "10^4-angle projective grid")
        checks["matches_grid_oracle"] = abs(suite.best_bits - oracle) <= 1e-4
    return results, checks, {}


# --------------------------------------------------------------------------
# invariant suites for --check


def _check_lock_sim() -> dict:
    s = locking.LockingScheme.haar(8, 4, 0)
    rep = locking.evaluate_protocol(s, restarts=0, iters=50)
    rng = make_rng(0)
    cl = all(locking.classical_inequality_check(rng.random((3, 4, 2)))[0] for _ in range(50))
    marg = locking.cq_state_with_key(s).quantum_marginal()
    return {
        "noiseless_decode": abs(rep.success_prob - 1) <= 1e-10,
        "maximally_mixed_marginal": bool(np.max(np.abs(marg - np.eye(8) / 8)) <= 1e-10),
        "classical_inequality": cl,
        "scheme_round_trip": bool(
            np.array_equal(locking.scheme_from_json(locking.scheme_to_json(s)).stacked, s.stacked)
        ),
    }


def _check_bosonic() -> dict:
    ns = np.geomspace(1e-4, 1e3, 2000)
    return {
        "strong_bound_le_log2e": bool(np.all(bosonic.strong_lock_bound_cs(ns) <= bosonic.LOG2E + 1e-12)),
        "g_of_1_is_2": abs(bosonic.g_func(1.0) - 2.0) <= 1e-12,
        "vacuum_wehrl": abs(bosonic.wehrl_entropy(bosonic.FockOperator.vacuum()) - bosonic.LOG2E) <= 1e-4,
    }


def _check_ppm() -> dict:
    rep = ppm.lossy_feedback_simulate(ppm.PpmConfig(n_modes=8, eta=1.0, num_keys=2, trials=1000))
    s = ppm.coherent_ppm_scheme(4, 0.2, 2, 0)
    return {
        "eta_one_throughput_exact": rep.throughput_bits_per_block == 3.0,
        "sector_norms": abs(sum(s.sector_norms()) - 1) <= 1e-9,
    }


def _check_eb() -> dict:
    ch = channels.depolarizing(2, 0.8)
    alt = KrausChannel.from_choi(ch.choi(), 2, 2)
    ens = _random_pure_ensemble(2, 4, make_rng(0))
    return {
        "verdict_stable_under_kraus_change": channels.is_entanglement_breaking(ch).verdict
        == channels.is_entanglement_breaking(alt).verdict,
        "identity_not_eb": channels.is_entanglement_breaking(KrausChannel.identity(2)).verdict
        == channels.NOT_EB,
        "certificate": channels.eb_zero_capacity_certificate(ch, ens).slack <= 1e-6,
    }


def _check_wiretap() -> dict:
    w = channels.amplitude_damping_wiretap(0.2)
    e = _random_pure_ensemble(2, 3, make_rng(0))
    return {
        "private_le_chi_b": channels.private_information(w, e)
        <= accinfo.holevo_chi(e.map(w.channel_b())) + 1e-9,
        "constant_eve_equals_chi": abs(
            channels.private_information(channels.WiretapChannel.with_constant_eve(channels.depolarizing(2, 0.3)), e)
            - accinfo.holevo_chi(e.map(channels.depolarizing(2, 0.3)))
        ) <= 1e-9,
    }


def _check_accinfo() -> dict:
    ens = two_pure_qubit_ensemble(0.5)
    res = accinfo.acc_info_optimize(ens, restarts=2, iters=300)
    return {
        "lower_le_upper": res.lower_bits <= res.upper_bits + 1e-6,
        "grid_oracle": abs(res.lower_bits - projective_grid_oracle(ens, 2000)) <= 1e-4,
    }


COMMANDS: dict[str, tuple[type[BaseModel], Callable, Callable]] = {
    "lock-sim": (LockSimConfig, cmd_lock_sim, _check_lock_sim),
    "bosonic-bounds": (BosonicConfig, cmd_bosonic_bounds, _check_bosonic),
    "ppm-sim": (PpmSimConfig, cmd_ppm_sim, _check_ppm),
    "eb-check": (EbCheckConfig, cmd_eb_check, _check_eb),
    "wiretap": (WiretapConfig, cmd_wiretap, _check_wiretap),
    "accinfo": (AccinfoConfig, cmd_accinfo, _check_accinfo),
}


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, default=_json_default) + "\n"


def _load_config(model: type[BaseModel], path: str | None, seed: int | None) -> BaseModel:
    data = {}
    if path:
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
    if seed is not None:
        data["seed"] = seed
    try:
        return model.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from exc


def _threads(flag: int | None) -> int:
    if flag is not None:
        return max(1, flag)
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} must be an integer") from None
    return 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qdlock", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--seed", type=int, help="overrides the config seed")
        p.add_argument("--threads", type=int, help=f"worker threads (default ${THREADS_ENV} or 1)")
        p.add_argument("--out", help="output directory (default: report to stdout)")
        p.add_argument("--check", action="store_true", help="run the invariant suite only")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    model, command, checker = COMMANDS[args.command]
    started = time.time()
    try:
        threads = _threads(args.threads)
        if args.seed is not None and not 0 <= args.seed < 2**64:
            raise ConfigError("--seed must be an unsigned 64-bit integer")
        if args.check:
            checks = {k: bool(v) for k, v in checker().items()}
            sys.stdout.write(_dumps({"command": args.command, "checks": checks}))
            return EXIT_OK if all(checks.values()) else EXIT_INVARIANT
        cfg = _load_config(model, args.config, args.seed)
        results, checks, files = command(cfg, threads)
        checks = {k: bool(v) for k, v in checks.items()}
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CapabilityError as exc:
        print(f"capability error: {exc}", file=sys.stderr)
        return EXIT_CAPABILITY
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    report = {
        "command": args.command,
        "config": cfg.model_dump(mode="json"),
        "results": results,
        "checks": checks,
        "seed": {"value": cfg.seed, "rng": RNG_ALGORITHM},
        "version": __version__,
        "label": "single-letter / fixed-n",
    }
    text = _dumps(report)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(text)
        for name, body in files.items():
            (out / name).write_text(body)
        timing = {"started": started, "wall_clock_s": time.time() - started, "threads": threads}
        (out / "report.timing.json").write_text(json.dumps(timing, sort_keys=True) + "\n")
    else:
        sys.stdout.write(text)
    return EXIT_OK if all(checks.values()) else EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
