"""tune -> evaluate -> certify -> validate -> report, with file handoffs.

Output layout under ``cfg.out_dir``::

    candidates.json            tune
    runs/run_XXX/history.csv   tune
    F.csv, G.csv, matrices.json, report_states.npy   evaluate
    cert.json                  certify
    validation.json            validate
    report.csv, envelope.csv, summary.json           report
    trajectory.csv             simulate

Every JSON file carries the stage lineage hash and the master seed; each
stage checks the hash of its input against the current config.
"""

from __future__ import annotations

from pathlib import Path
from typing import Optional

import numpy as np

from . import io
from . import rng as rngmod
from .cbo import CboConfig, generate_candidates
from .config import ConfigError, RunConfig, build_problem
from .scenario import certify, empirical_violation
from .sim import SimulationDiverged, populate_matrices, rollout, sample_scenarios


class LineageError(RuntimeError):
    pass


class MissingArtifact(FileNotFoundError):
    pass


def _need(path: Path) -> Path:
    if not path.is_file():
        raise MissingArtifact(f"missing artifact: {path}")
    return path


def _check(doc: dict, expected: str, what: str) -> None:
    if doc.get("config_hash") != expected:
        raise LineageError(f"{what} was produced by a different configuration "
                           f"(hash {doc.get('config_hash')!r}, expected {expected!r})")


def _out(cfg: RunConfig) -> Path:
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    return cfg.out_dir


def _cbo_config(cfg: RunConfig) -> CboConfig:
    c = cfg.cbo
    return CboConfig(n_seed=c.n_seed, n_max=c.n_max, M=c.M, pool_size=c.pool_size,
                     master_seed=cfg.master_seed, gp_restarts=c.gp_restarts)


def load_candidates(cfg: RunConfig) -> list:
    doc = io.read_json(_need(cfg.out_dir / "candidates.json"))
    _check(doc, cfg.tune_hash(), "candidates.json")
    return [cfg.space.validate(t) for t in doc["candidates"]]


# --- tune ---------------------------------------------------------------------

def cmd_tune(cfg: RunConfig, threads: int = 1, echo=print) -> dict:
    problem = build_problem(cfg)
    cs = generate_candidates(problem, _cbo_config(cfg), cfg.cbo.n_theta, threads=threads)
    out = _out(cfg)
    names = cfg.space.names
    header = ["iteration", *names, "J_hat", "C_hat", "incumbent_J_hat", "incumbent_C_hat"]
    for r, hist in enumerate(cs.histories):
        run_dir = out / "runs" / f"run_{r:03d}"
        run_dir.mkdir(parents=True, exist_ok=True)
        rows = [[h.iteration, *h.obs.theta, h.obs.J_hat, h.obs.C_hat, h.incumbent.J_hat, h.incumbent.C_hat]
                for h in hist]
        io.write_rows_csv(run_dir / "history.csv", header, rows)
    finals = [hist[-1].incumbent for hist in cs.histories]
    doc = {
        "config_hash": cfg.tune_hash(),
        "master_seed": cfg.master_seed,
        "config": cfg.to_json(),
        "param_names": names,
        "candidates": [list(t) for t in cs.thetas],
        "multiplicity": cs.multiplicity,
        "runs": [{"run": r, "best_theta": list(o.theta), "J_hat": o.J_hat, "C_hat": o.C_hat}
                 for r, o in enumerate(finals)],
    }
    io.write_json(out / "candidates.json", doc)
    echo(f"{'run':>4}  {'J_hat':>14}  {'C_hat':>8}  theta")
    for r, o in enumerate(finals):
        echo(f"{r:>4}  {o.J_hat:>14.6g}  {o.C_hat:>8.4g}  {list(o.theta)}")
    echo(f"{len(cs.thetas)} distinct candidates from {cfg.cbo.n_theta} runs -> {out / 'candidates.json'}")
    return doc


# --- evaluate -------------------------------------------------------------------

def write_matrices(out: Path, F, G, candidates, cfg: RunConfig, states=None, report_state: int = 0) -> dict:
    """Persist F.csv / G.csv and the sidecar describing them."""
    out.mkdir(parents=True, exist_ok=True)
    io.write_matrix_csv(out / "F.csv", F)
    io.write_matrix_csv(out / "G.csv", G)
    F = np.asarray(F)
    side = {
        "config_hash": cfg.evaluate_hash(),
        "master_seed": cfg.master_seed,
        "scenario_tag": rngmod.SCENARIO,
        "scenario_streams": [[cfg.master_seed, rngmod.tag_id(rngmod.SCENARIO), i] for i in range(F.shape[0])],
        "n_scenarios": int(F.shape[0]),
        "n_candidates": int(F.shape[1]),
        "candidates": [list(t) for t in candidates],
        "sha256": {"F.csv": io.sha256_file(out / "F.csv"), "G.csv": io.sha256_file(out / "G.csv")},
    }
    if states is not None:
        np.save(out / "report_states.npy", np.ascontiguousarray(states[..., report_state]))
        side["report_state"] = int(report_state)
        side["sha256"]["report_states.npy"] = io.sha256_file(out / "report_states.npy")
    io.write_json(out / "matrices.json", side)
    return side


def cmd_evaluate(cfg: RunConfig, threads: int = 1, echo=print) -> dict:
    candidates = load_candidates(cfg)
    problem = build_problem(cfg)
    scenarios = sample_scenarios(problem.plant, cfg.certify.N, cfg.master_seed, tag=rngmod.SCENARIO)
    mats = populate_matrices(problem.plant, problem.controller, problem.perf, candidates, scenarios,
                             threads=threads, keep_states=True)
    side = write_matrices(_out(cfg), mats.F, mats.G, candidates, cfg, mats.states, problem.report_state)
    echo(f"evaluated {side['n_candidates']} candidates x {side['n_scenarios']} scenarios "
         f"({mats.F.size} cells) -> {cfg.out_dir}")
    return side


def load_matrices(cfg: RunConfig) -> tuple[np.ndarray, np.ndarray, dict]:
    out = cfg.out_dir
    side = io.read_json(_need(out / "matrices.json"))
    for name in ("F.csv", "G.csv"):
        if io.sha256_file(_need(out / name)) != side["sha256"][name]:
            raise LineageError(f"{name} does not match the hash recorded in matrices.json")
    _check(side, cfg.evaluate_hash(), "matrices.json")
    F = io.read_matrix_csv(out / "F.csv")
    G = io.read_matrix_csv(out / "G.csv")
    if F.shape != G.shape or F.shape != (side["n_scenarios"], side["n_candidates"]):
        raise LineageError("matrix shapes disagree with matrices.json")
    return F, G, side


# --- certify --------------------------------------------------------------------

def cmd_certify(cfg: RunConfig, echo=print) -> dict:
    F, G, side = load_matrices(cfg)
    c = cfg.certify
    res = certify(F, G, c.rho, c.beta, candidates=side["candidates"],
                  compare_xi=c.compare_xi, single_pass=c.single_pass)
    doc = {
        "config_hash": cfg.certify_hash(),
        "master_seed": cfg.master_seed,
        "candidate_index": res.candidate_index,
        "theta": list(res.theta),
        "xi": res.xi,
        "objective": res.objective,
        "support_indices": res.support_indices,
        "s_star": res.s_star,
        "epsilon": res.epsilon,
        "beta": res.beta,
        "N": res.N,
        "rho": res.rho,
        "compare_xi": c.compare_xi,
        "single_pass": c.single_pass,
        "matrices_sha256": {"F.csv": side["sha256"]["F.csv"], "G.csv": side["sha256"]["G.csv"]},
        "claim": res.claim(),
    }
    io.write_json(_out(cfg) / "cert.json", doc)
    echo(f"certified theta = {list(res.theta)} (candidate {res.candidate_index})")
    echo(res.claim())
    return doc


def load_cert(cfg: RunConfig) -> dict:
    doc = io.read_json(_need(cfg.out_dir / "cert.json"))
    _check(doc, cfg.certify_hash(), "cert.json")
    return doc


# --- validate -------------------------------------------------------------------

def cmd_validate(cfg: RunConfig, n_val: Optional[int] = None, echo=print) -> dict:
    n_val = cfg.certify.n_val if n_val is None else n_val
    if n_val < 1:
        raise ConfigError("N_val must be >= 1")
    cert = load_cert(cfg)
    problem = build_problem(cfg)
    theta = cfg.space.validate(cert["theta"])
    freq = empirical_violation(problem, theta, cert["xi"], n_val, cfg.master_seed)
    passed = freq <= cert["epsilon"]
    doc = {
        "config_hash": cfg.certify_hash(),
        "master_seed": cfg.master_seed,
        "theta": list(theta),
        "xi": cert["xi"],
        "n_val": n_val,
        "frequency": freq,
        "epsilon": cert["epsilon"],
        "pass": passed,
    }
    io.write_json(_out(cfg) / "validation.json", doc)
    echo(f"empirical violation frequency = {freq:.6g} over {n_val} fresh scenarios; "
         f"epsilon = {cert['epsilon']:.6g}; {'PASS' if passed else 'FAIL'}")
    return doc


# --- simulate -------------------------------------------------------------------

def cmd_simulate(cfg: RunConfig, theta=None, scenario: str = "nominal", echo=print) -> Path:
    """Roll out one theta (default: certified, else seed theta) and export the trajectory CSV."""
    problem = build_problem(cfg)
    if theta is None:
        cert_path = cfg.out_dir / "cert.json"
        if cert_path.is_file():
            theta = load_cert(cfg)["theta"]
        elif cfg.seed_theta is not None:
            theta = cfg.seed_theta
        else:
            raise MissingArtifact("no theta given, no cert.json and no seed_theta in the config")
    theta = cfg.space.validate(theta)
    if scenario == "nominal":
        sc = problem.plant.nominal_scenario()
    else:
        sc = problem.plant.sample_scenario(rngmod.substream(cfg.master_seed, rngmod.SCENARIO, int(scenario)))
    traj = rollout(problem.plant, problem.controller, theta, sc)
    dt = getattr(getattr(problem.plant, "params", None), "dt", 1.0)
    path = _out(cfg) / "trajectory.csv"
    header = ["time", *problem.plant.state_names, *problem.plant.input_names]
    rows = []
    n_u = traj.inputs.shape[1] if traj.T else len(problem.plant.input_names)
    for k in range(traj.T + 1):
        u = [float(v) for v in traj.inputs[k]] if k < traj.T else [""] * n_u
        rows.append([float(k * dt), *map(float, traj.states[k]), *u])
    io.write_rows_csv(path, header, rows)
    echo(f"trajectory for theta = {list(theta)} ({scenario} scenario) -> {path}")
    return path


# --- report ---------------------------------------------------------------------

def incumbent_stats(histories: list[np.ndarray]) -> np.ndarray:
    """Rows (iteration, min, mean, max) of the incumbent J_hat across runs."""
    L = min(len(h) for h in histories)
    A = np.vstack([h[:L] for h in histories])
    return np.column_stack([np.arange(L), A.min(0), A.mean(0), A.max(0)])


def envelope(states: np.ndarray) -> np.ndarray:
    """(T+1, 3) min/mean/max across scenarios of a (N, T+1) state array."""
    return np.column_stack([states.min(0), states.mean(0), states.max(0)])


def cmd_report(cfg: RunConfig, echo=print) -> dict:
    out = cfg.out_dir
    run_files = sorted((out / "runs").glob("run_*/history.csv")) if (out / "runs").is_dir() else []
    if not run_files:
        raise MissingArtifact(f"no run histories under {out / 'runs'}")
    cand = io.read_json(_need(out / "candidates.json"))
    _check(cand, cfg.tune_hash(), "candidates.json")
    hists = []
    for f in run_files:
        header, rows = io.read_rows_csv(f)
        col = header.index("incumbent_J_hat")
        hists.append(np.array([float(r[col]) for r in rows]))
    stats = incumbent_stats(hists)
    io.write_rows_csv(out / "report.csv", ["iteration", "min", "mean", "max"],
                      [[int(r[0]), float(r[1]), float(r[2]), float(r[3])] for r in stats])
    nonincreasing = bool(np.all(np.diff(stats[:, 2]) <= 0))
    summary = {
        "config_hash": cfg.tune_hash(),
        "master_seed": cfg.master_seed,
        "n_runs": len(hists),
        "n_iterations": int(stats.shape[0]),
        "final_mean_incumbent": float(stats[-1, 2]),
        "mean_incumbent_nonincreasing": nonincreasing,
    }
    echo(f"{len(hists)} runs, {stats.shape[0]} iterations; mean incumbent "
         f"{stats[0, 2]:.6g} -> {stats[-1, 2]:.6g} ({'non-increasing' if nonincreasing else 'NOT monotone'})")

    cert_path, states_path = out / "cert.json", out / "report_states.npy"
    if cert_path.is_file() and states_path.is_file():
        cert = load_cert(cfg)
        F, G, side = load_matrices(cfg)
        states = np.load(states_path)
        if io.sha256_file(states_path) != side["sha256"].get("report_states.npy"):
            raise LineageError("report_states.npy does not match matrices.json")
        j_cert = cert["candidate_index"]
        worst = G.max(axis=0)
        j_worst = min(range(G.shape[1]), key=lambda j: (-worst[j], j))
        dt = cfg.plant_params.get("dt", 1.0)
        e_cert, e_worst = envelope(states[j_cert]), envelope(states[j_worst])
        rows = [[float(k * dt), *map(float, e_cert[k]), *map(float, e_worst[k])] for k in range(e_cert.shape[0])]
        io.write_rows_csv(out / "envelope.csv",
                          ["time", "cert_min", "cert_mean", "cert_max", "worst_min", "worst_mean", "worst_max"],
                          rows)
        summary.update({"certified_candidate": j_cert, "worst_candidate": j_worst,
                        "worst_candidate_max_G": float(worst[j_worst]), "epsilon": cert["epsilon"]})
        echo(f"envelopes for certified candidate {j_cert} and worst-violating candidate {j_worst} "
             f"-> {out / 'envelope.csv'}")
    io.write_json(out / "summary.json", summary)
    return summary


__all__ = ["LineageError", "MissingArtifact", "SimulationDiverged", "cmd_tune", "cmd_evaluate",
           "cmd_certify", "cmd_validate", "cmd_simulate", "cmd_report", "write_matrices",
           "load_matrices", "load_candidates", "load_cert", "incumbent_stats", "envelope"]
