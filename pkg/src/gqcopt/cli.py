"""Command-line experiment runner.

Exit codes: 0 success, 2 configuration or parse error, 3 oracle
non-convergence, 4 threshold failure under ``--assert``.
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import diagnostics as dg
from .errors import DomainError, InstanceError, OracleNonConvergence, ScheduleError
from .instances import instance_digest, load_instance
from .markov_game import (ZeroSumMarkovGame, game_internal_operator, game_schedule, game_size,
                          gqcc_sampler, nash_gap, p_tensor, random_game, shapley_fixed_point)
from .mdp import (FiniteHorizonMDP, TabularMDP, finite_horizon_gqc_weights, finite_horizon_internal_function,
                  finite_horizon_optimal, gqc_weights, npg_internal_function, random_finite_horizon_mdp,
                  random_mdp, value_iteration, visitation_distribution)
from .omd_min import min_schedule_adaptive, run_min
from .omd_minimax import default_checkpoints, run_minimax
from .oracles import check_gqc, check_gqcc
from .properties import run_all

MODES = ("min-mdp", "min-finite-horizon", "minimax-game", "certify-gqc", "certify-gqcc", "property-suite")
EXIT_OK, EXIT_CONFIG, EXIT_ORACLE, EXIT_ASSERT = 0, 2, 3, 4

DEFAULT_ITERS = {"min-mdp": 10_000, "min-finite-horizon": 10_000, "minimax-game": 20_000,
                 "certify-gqc": 100, "certify-gqcc": 100}
DEFAULT_TOL = {"min-mdp": 1e-3, "min-finite-horizon": 1e-3, "minimax-game": 5e-2,
               "certify-gqc": 1e-9, "certify-gqcc": 1e-6, "property-suite": 0.0}
SHAPLEY_TOL = 1e-6


@dataclass
class ExperimentConfig:
    mode: str
    instance: Optional[str] = None
    generate: Optional[str] = None
    iters: Optional[int] = None
    tol: Optional[float] = None
    eta: Optional[float] = None
    seed: int = 0
    out: Optional[str] = None
    check: bool = False
    cases: int = 1000

    def __post_init__(self):
        if self.mode not in MODES:
            raise ScheduleError(f"unknown mode {self.mode!r}")
        if self.mode != "property-suite" and (self.instance is None) == (self.generate is None):
            raise ScheduleError(f"mode {self.mode} needs exactly one of --instance or --generate")
        if self.iters is None:
            self.iters = DEFAULT_ITERS.get(self.mode, 0)
        if self.tol is None:
            self.tol = DEFAULT_TOL[self.mode]


def _parse_generate(spec: str, fields: tuple):
    parts = [p.strip() for p in spec.split(",")]
    if len(parts) != len(fields):
        raise ScheduleError(f"--generate expects '{','.join(fields)}', got {spec!r}")
    out = {}
    for name, raw in zip(fields, parts):
        try:
            out[name] = float(raw) if name == "theta" else int(raw)
        except ValueError:
            raise ScheduleError(f"--generate field {name}: cannot parse {raw!r}") from None
    return out


def _instance(cfg: ExperimentConfig, kind):
    if cfg.instance is not None:
        inst = load_instance(cfg.instance)
        if not isinstance(inst, kind):
            raise InstanceError(f"mode {cfg.mode} needs a {kind.__name__}, file holds {type(inst).__name__}")
        return inst
    if kind is TabularMDP:
        g = _parse_generate(cfg.generate, ("nS", "nA", "theta", "seed"))
        return random_mdp(g["nS"], g["nA"], g["theta"], g["seed"])
    if kind is ZeroSumMarkovGame:
        g = _parse_generate(cfg.generate, ("nS", "nA", "nB", "theta", "seed"))
        return random_game(g["nS"], g["nA"], g["nB"], g["theta"], g["seed"])
    g = _parse_generate(cfg.generate, ("nS", "nA", "H", "seed"))
    return random_finite_horizon_mdp([g["nS"]] * g["H"], [g["nA"]] * g["H"], g["seed"])


def _summary(fields: dict) -> str:
    def fmt(v):
        if isinstance(v, bool):
            return str(v).lower()
        if isinstance(v, float):
            return repr(v)
        return str(v)
    return " ".join(f"{k}={fmt(v)}" for k, v in fields.items())


def _run_min(cfg, inst):
    if isinstance(inst, TabularMDP):
        F = npg_internal_function(inst)
        opt = value_iteration(inst)
        f_star, pi_star = opt.f_star, opt.pi
        weight_sum = float(gqc_weights(inst, pi_star).sum())
        N = inst.n_actions
    else:
        F = finite_horizon_internal_function(inst)
        f_star, pi_star = finite_horizon_optimal(inst)
        weight_sum = float(finite_horizon_gqc_weights(inst, pi_star).sum())
        N = int(inst.block_sizes.max())
    k = F.constants
    sched = min_schedule_adaptive(max(cfg.iters, 4), k.Theta1, k.Theta2, k.K0, k.theta)
    res = run_min(F, sched, T=cfg.iters, eta=cfg.eta, rng_seed=cfg.seed)
    values = res.trace.column("value")
    res.trace.gap = list(values - f_star)
    theory = res.trace.metadata["theory_mode"]
    sub = values - f_star
    achieved = float(sub.mean()) if theory else float(sub.min())
    bound = dg.bound_min(sched, N, weight_sum, T=cfg.iters)
    fields = {
        "mode": cfg.mode, "T": cfg.iters, "eta": res.trace.metadata["eta"], "theory_mode": theory,
        "seed": cfg.seed, "instance": instance_digest(inst), "f_star": f_star,
        "final_value": float(values[-1]), "best_subopt": float(sub.min()), "avg_subopt": float(sub.mean()),
        "chosen_index": res.chosen_index, "chosen_subopt": float(sub[res.chosen_index - 1]),
        "achieved": achieved, "bound": bound, "ratio": achieved / bound,
    }
    ok = achieved <= cfg.tol and (not theory or achieved <= bound)
    return res.trace, fields, ok


def _run_minimax(cfg, game):
    sol = shapley_fixed_point(game, SHAPLEY_TOL)
    sched = game_schedule(game, cfg.iters, cfg.eta)
    marks = sorted(set(default_checkpoints(cfg.iters)) | {max(1, cfg.iters // 2)})
    res = run_minimax(game_internal_operator(game), p_tensor(game), sched,
                      gap_eval=lambda x, y: nash_gap(game, x, y), q_star=sol.Q,
                      checkpoints=marks, seed=cfg.seed)
    gaps = dict(zip(res.checkpoints, res.gaps))
    qerr = dict(zip(res.checkpoints, res.q_errors))
    M = game_size(game)
    T = cfg.iters
    report = dg.minimax_bound_report(sched, M, 2.0, 1.0)
    half = gaps[max(1, T // 2)]
    envelope = dg.q_envelope(sched, M, 1.0, T)
    final = gaps[T]
    fields = {
        "mode": cfg.mode, "T": T, "eta": sched.eta, "theory_mode": not sched.outside_theory,
        "seed": cfg.seed, "instance": instance_digest(game), "achieved": final,
        "gap_half": half, "ratio_half": final / half if half > 0 else 0.0,
        "q_error": qerr[T], "q_envelope": envelope,
        "bound": report["bound"], "bound_main_Y": report["bound_main_Y"], "ratio": final / report["bound"],
        "shapley_sweeps": sol.sweeps,
    }
    ok = final <= cfg.tol and (sched.outside_theory or (final <= report["bound"] and qerr[T] <= envelope))
    return res.trace, fields, ok


def _certify_gqc(cfg, mdp):
    opt = value_iteration(mdp)
    F = npg_internal_function(mdp)
    w = gqc_weights(mdp, opt.pi)
    d = visitation_distribution(mdp, opt.pi)
    rep = check_gqc(F.objective, F, opt.pi, w, cfg.iters, tol=cfg.tol, seed=cfg.seed)
    lit = check_gqc(F.objective, F, opt.pi, d, cfg.iters, tol=cfg.tol, seed=cfg.seed)
    fields = {
        "mode": cfg.mode, "seed": cfg.seed, "instance": instance_digest(mdp), "samples": rep.n_samples,
        "holds": rep.holds, "worst_slack": rep.worst_slack, "max_abs_slack": rep.max_abs_slack,
        "weight_sum": float(w.sum()), "visitation_sum": float(d.sum()),
        "visitation_weights_max_abs_slack": lit.max_abs_slack,
    }
    return fields, rep.holds and rep.max_abs_slack <= cfg.tol


def _certify_gqcc(cfg, game):
    sol = shapley_fixed_point(game, SHAPLEY_TOL)
    scale = 1.0 / (1.0 - game.theta)
    rep = check_gqcc(gqcc_sampler(game, sol.Q, psi_scale=scale), samples=cfg.iters, tol=cfg.tol, seed=cfg.seed)
    lit = check_gqcc(gqcc_sampler(game, sol.Q), samples=cfg.iters, tol=cfg.tol, seed=cfg.seed)
    fields = {
        "mode": cfg.mode, "seed": cfg.seed, "instance": instance_digest(game), "samples": rep.n_samples,
        "holds": rep.holds, "worst_violation": rep.worst_violation, "psi_scale": scale,
        "visitation_psi_holds": lit.holds, "visitation_psi_worst_violation": lit.worst_violation,
        "max_psi_sum": lit.max_psi_sum,
    }
    return fields, rep.holds


def run_experiment(cfg: ExperimentConfig, stdout=None) -> int:
    """Run one configured experiment, write its outputs and return the exit code."""
    stdout = sys.stdout if stdout is None else stdout
    trace = None
    try:
        if cfg.mode == "property-suite":
            results = run_all(cfg.seed, cfg.cases)
            for r in results:
                print(r.line(), file=stdout)
            n_ok = sum(r.passed for r in results)
            fields = {"mode": cfg.mode, "seed": cfg.seed, "cases": cfg.cases,
                      "passed": n_ok, "total": len(results)}
            ok = n_ok == len(results)
        elif cfg.mode in ("min-mdp", "min-finite-horizon"):
            kind = TabularMDP if cfg.mode == "min-mdp" else FiniteHorizonMDP
            trace, fields, ok = _run_min(cfg, _instance(cfg, kind))
        elif cfg.mode == "minimax-game":
            trace, fields, ok = _run_minimax(cfg, _instance(cfg, ZeroSumMarkovGame))
        elif cfg.mode == "certify-gqc":
            fields, ok = _certify_gqc(cfg, _instance(cfg, TabularMDP))
        else:
            fields, ok = _certify_gqcc(cfg, _instance(cfg, ZeroSumMarkovGame))
    except OracleNonConvergence as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ORACLE
    except (InstanceError, ScheduleError, DomainError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    fields["pass"] = bool(ok)
    line = _summary(fields)
    print(line, file=stdout)
    if cfg.out is not None:
        if trace is not None:
            trace.to_csv(cfg.out)
        with open(cfg.out + ".summary", "w") as fh:
            fh.write(line + "\n")
    if cfg.check and not ok:
        return EXIT_ASSERT
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gqcopt", description=__doc__.splitlines()[0])
    p.add_argument("--mode", required=True, choices=MODES)
    p.add_argument("--instance", help="instance file (see gqcopt.instances for the format)")
    p.add_argument("--generate", help="random instance: 'nS,nA,theta,seed' (MDP), "
                   "'nS,nA,nB,theta,seed' (game) or 'nS,nA,H,seed' (finite horizon)")
    p.add_argument("--iters", type=int, help="iterations, or sample count for the certify modes")
    p.add_argument("--tol", type=float, help="threshold checked under --assert")
    p.add_argument("--eta", type=float, help="step-size override; marks the run outside theory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="CSV trace path; the summary goes to OUT.summary")
    p.add_argument("--assert", dest="check", action="store_true",
                   help="exit 4 when the run misses its threshold")
    p.add_argument("--cases", type=int, default=1000, help="cases per check in property-suite mode")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = ExperimentConfig(mode=args.mode, instance=args.instance, generate=args.generate,
                               iters=args.iters, tol=args.tol, eta=args.eta, seed=args.seed,
                               out=args.out, check=args.check, cases=args.cases)
    except ScheduleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return run_experiment(cfg)


if __name__ == "__main__":
    sys.exit(main())
