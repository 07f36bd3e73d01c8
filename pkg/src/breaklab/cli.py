"""Command-line interface: scenario execution, checks, and report emission.

Subcommands:
  run         execute every check applicable to the scenario payload
  solve-sdot  solve the semidiscrete problem, dump the diagram, emit a
              potential scenario for a round-trip `run`
  polar       run the small-time rearrangement experiment, write the table
  validate    schema + semantic validation only

Exit codes: 0 success (check failures are findings, not errors), 1 findings
present under --strict, 2 bad input (nothing is written), 3 solver failure
(nothing is written).  BREAKLAB_SEED supplies the default seed, and
BREAKLAB_THREADS caps the parallel flow-time sweeps; outputs are identical
for any thread count.  Wall time is printed to stderr only, so reports are
byte-identical across reruns.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import field, flow, geometry, potential, report, scenario, spectral, transport
from .report import CheckResult, Table, PASS, FAIL, NOT_APPLICABLE

EXIT_OK = 0
EXIT_FINDINGS = 1
EXIT_INPUT = 2
EXIT_SOLVER = 3

SUBHARMONIC_SLACK = 1e-6
GPSI_SLACK = 1e-6
JUMP_ZERO_TOL = 1e-9
MAX_EXPANDING_TIMES = 8
EVIDENCE_CAP = 20   # max per-item rows embedded in one evidence object


def _resolve_seed(cli_seed, scn: scenario.Scenario) -> int:
    if cli_seed is not None:
        return cli_seed
    if scn.seed is not None:
        return scn.seed
    raw = os.environ.get("BREAKLAB_SEED", "")
    if not raw:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise scenario.ScenarioError(
            f"BREAKLAB_SEED must be an integer, got {raw!r}")


def _resolve_threads() -> int:
    raw = os.environ.get("BREAKLAB_THREADS", "")
    if not raw:
        return 1
    try:
        threads = int(raw)
    except ValueError:
        raise scenario.ScenarioError(
            f"BREAKLAB_THREADS must be an integer, got {raw!r}")
    return max(1, threads)


def _map_ordered(fn, items, threads):
    """Parallel map with a deterministic, input-ordered merge."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _not_applicable(*names):
    return [CheckResult(n, NOT_APPLICABLE, {}) for n in names]


# ---------------------------------------------------------------------------
# checks for potential payloads (also run on the Brenier potential of an
# sdot payload)


def _potential_checks(pot, t_grid, seed, threads, tolerances):
    checks = []
    violations = potential.validate(pot)
    checks.append(CheckResult("validate", PASS if not violations else FAIL, {
        "violations": len(violations),
        "first": None if not violations else {
            "face": violations[0].face_id,
            "kind": violations[0].kind,
            "residual": violations[0].residual,
        },
    }))

    convexity_tol = tolerances.get("convexity", potential.CONVEXITY_TOL)
    try:
        verdict = potential.is_locally_convex(pot, tol=convexity_tol)
        checks.append(CheckResult(
            "convexity", PASS if verdict.convex else FAIL, {
                "min_jump": verdict.min_jump,
                "witness_faces": list(verdict.witness_faces[:EVIDENCE_CAP]),
                "tolerance": convexity_tol,
            }))
    except potential.NotContinuousError as err:
        verdict = None
        checks.append(CheckResult("convexity", NOT_APPLICABLE,
                                  {"reason": str(err)}))

    mpc = flow.mpc_verdict(pot, t_grid)
    checks.append(CheckResult("mpc", PASS if mpc.preserving else FAIL, {
        "tolerance": mpc.tolerance,
        "witness_t": mpc.witness_t,
        "witness_overlap": mpc.witness_overlap,
        "times_checked": len(t_grid),
    }))

    stride = max(1, len(t_grid) // MAX_EXPANDING_TIMES)
    probe_ts = list(np.sort(t_grid))[::stride][:MAX_EXPANDING_TIMES]
    verdicts = _map_ordered(
        lambda t: flow.expanding_verdict(pot, float(t), seed=seed),
        probe_ts, threads)
    bad = [(t, v) for t, v in zip(probe_ts, verdicts) if not v.expanding]
    checks.append(CheckResult("expanding", PASS if not bad else FAIL, {
        "times": [float(t) for t in probe_ts],
        "multiplicity_fractions": [v.violated_fraction for v in verdicts],
        "witness_t": None if not bad else float(bad[0][0]),
    }))

    domain = pot.partition.domain[0]
    bumps = potential.bump_battery(domain)
    try:
        results = _map_ordered(
            lambda b: potential.pairing_check(pot, b, seed=seed),
            bumps, threads)
        pairings = [r.face_route for r in results]
        routes_agree = all(r.agree for r in results)
        min_pairing = float(min(pairings))
        checks.append(CheckResult(
            "subharmonicity",
            PASS if routes_agree and min_pairing >= -SUBHARMONIC_SLACK else FAIL,
            {
                "bumps": len(bumps),
                "min_pairing": min_pairing,
                "routes_agree": routes_agree,
                "slack": SUBHARMONIC_SLACK,
            }))
    except potential.NotContinuousError as err:
        checks.append(CheckResult("subharmonicity", NOT_APPLICABLE,
                                  {"reason": str(err)}))

    gpsi_times = np.unique(np.concatenate([[0.0], t_grid]))
    curve = flow.gpsi_curve(pot, bumps[0], gpsi_times, seed=seed)
    excess = float(np.max(curve.values - curve.values[0]))
    steps = flow.initial_increase_steps(curve)
    checks.append(CheckResult(
        "gpsi_monotonicity", PASS if excess <= GPSI_SLACK else FAIL, {
            "max_excess": excess,
            "initial_increase_steps": steps,
            "bump_center": list(bumps[0].center),
            "bump_radius": bumps[0].radius,
            "slack": GPSI_SLACK,
        }))

    try:
        jumps = potential.interface_jumps(pot)
        rows = []
        agree_all = True
        for j in jumps:
            m = j.jump * np.outer(j.normal, j.normal)
            sweep = spectral.unit_det_sweep(m)
            expect_rigid = abs(j.jump) <= JUMP_ZERO_TOL
            agrees = sweep.rigid_zero == expect_rigid
            agree_all = agree_all and agrees
            rows.append({
                "face": j.face_id,
                "jump": j.jump,
                "sweep": "rigid_zero" if sweep.rigid_zero else "violated",
                "agrees": agrees,
            })
        checks.append(CheckResult(
            "det_sweep", PASS if agree_all else FAIL, {
                "faces": len(jumps),
                "rows": rows[:EVIDENCE_CAP],
            }))
    except potential.NotContinuousError as err:
        checks.append(CheckResult("det_sweep", NOT_APPLICABLE,
                                  {"reason": str(err)}))

    overlaps = _map_ordered(
        lambda t: flow.pairwise_overlap_volume(flow.cell_images(pot, float(t))),
        np.sort(t_grid), threads)
    tables = {
        "overlap": Table(("t", "overlap_volume"),
                         tuple((float(t), float(o))
                               for t, o in zip(np.sort(t_grid), overlaps))),
        "gpsi": Table(("t", "gpsi", "quad_error"),
                      tuple((float(t), float(v), float(e))
                            for t, v, e in zip(curve.times, curve.values,
                                               curve.quad_errors))),
    }
    return checks, tables


def _sdot_solround(scn, seed, tolerances):
    """Solve the semidiscrete problem; (diagram, brenier potential, trace)."""
    trace = []
    tol = tolerances.get("sdot", transport.SDOT_DEFAULT_TOL)
    diagram = transport.solve_sdot(scn.payload, tol=tol, trace=trace)
    return diagram, transport.brenier_potential(diagram), trace, tol


def _field_checks(scn, seed, tolerances):
    payload = scn.payload
    b = payload.b
    cg_tol = tolerances.get("cg", field.DEFAULT_TOL)
    split = field.helmholtz_project(b, tol=cg_tol)
    norm_b = field.l2_norm(b)
    norm_g = field.l2_norm(split.gradient_part)
    norm_s = field.l2_norm(split.solenoidal_part)
    scale = max(norm_b ** 2, 1e-30)

    checks = []
    ortho_ok = split.ortho_residual <= 10.0 * cg_tol * scale
    checks.append(CheckResult(
        "helmholtz_orthogonality", PASS if ortho_ok else FAIL, {
            "inner_product": split.ortho_residual,
            "bound": 10.0 * cg_tol * scale,
        }))

    pyth = abs(norm_b ** 2 - norm_g ** 2 - norm_s ** 2)
    pyth_ok = pyth <= 20.0 * cg_tol * scale
    checks.append(CheckResult(
        "helmholtz_pythagoras", PASS if pyth_ok else FAIL, {
            "defect": pyth,
            "bound": 20.0 * cg_tol * scale,
            "norms": {"b": norm_b, "gradient": norm_g, "solenoidal": norm_s},
        }))

    idem = field.projector_idempotence_check(b, tol=cg_tol)
    checks.append(CheckResult("helmholtz_idempotence",
                              PASS if idem else FAIL, {"tolerance": cg_tol}))

    div_bound = 1e3 * cg_tol * max(payload.grid.shape) * max(norm_b, 1.0)
    div_ok = split.div_residual <= div_bound
    checks.append(CheckResult(
        "solenoidal_divergence", PASS if div_ok else FAIL, {
            "divergence_l2": split.div_residual,
            "bound": div_bound,
        }))

    tables = {}
    if scn.t_grid is None:
        checks.append(CheckResult("polar_monotone", NOT_APPLICABLE,
                                  {"reason": "scenario has no t_grid"}))
    else:
        result = transport.polar_experiment(
            scn.domain, b, scn.t_grid, sample_count=payload.samples,
            seed=seed, tol=cg_tol)
        err = np.asarray(result.err_grad)
        floor = np.asarray(result.noise_floor)
        cleaned = err - floor
        at_floor = bool(np.all(err <= floor + 1e-12))
        within = bool(np.all(cleaned[1:] <= cleaned[:-1] + floor[1:] + 1e-12))
        strict = bool(np.all(np.diff(cleaned) < 0))
        factor = (float(cleaned[0] / cleaned[-1])
                  if cleaned[-1] > 0 and cleaned[0] > 0 else None)
        checks.append(CheckResult(
            "polar_monotone", PASS if at_floor or within else FAIL, {
                "err_grad": list(err),
                "noise_floor": list(floor),
                "at_noise_floor": at_floor,
                "decreasing_within_floor": within,
                "strictly_decreasing_after_subtraction": strict,
                "reduction_factor": factor,
                "sample_count": result.sample_count,
                "bin_resolution": max(result.bin_grid.shape),
            }))
        rows = []
        for k, t in enumerate(result.t_grid):
            phi = result.err_phi[k] if result.err_phi is not None else None
            rows.append((float(t), float(err[k]), phi,
                         float(result.w2[k]), float(floor[k])))
        tables["polar"] = Table(
            ("t", "err_grad", "err_phi", "w2", "noise_floor"), tuple(rows))
    return checks, tables, split


# ---------------------------------------------------------------------------
# subcommands


def _default_t_grid(scn, seed):
    if scn.t_grid is not None:
        return np.asarray(scn.t_grid, dtype=float)
    return flow.default_time_grid(seed)


def _command_run(args) -> int:
    scn = scenario.load_scenario(args.scenario)
    seed = _resolve_seed(args.seed, scn)
    threads = _resolve_threads()
    potential_names = ("validate", "convexity", "mpc", "expanding",
                       "subharmonicity", "gpsi_monotonicity", "det_sweep")
    field_names = ("helmholtz_orthogonality", "helmholtz_pythagoras",
                   "helmholtz_idempotence", "solenoidal_divergence",
                   "polar_monotone")
    if scn.kind == "potential":
        t_grid = _default_t_grid(scn, seed)
        checks, tables = _potential_checks(
            scn.payload, t_grid, seed, threads, scn.tolerances)
        checks += _not_applicable("sdot_residual", *field_names)
    elif scn.kind == "sdot":
        diagram, pot, trace, tol = _sdot_solround(scn, seed, scn.tolerances)
        residual = float(np.max(np.abs(scn.payload.masses - diagram.volumes)))
        t_grid = _default_t_grid(scn, seed)
        checks, tables = _potential_checks(
            pot, t_grid, seed, threads, scn.tolerances)
        checks.append(CheckResult("sdot_residual", PASS, {
            "residual": residual,
            "tolerance": tol * scn.domain.volume,
            "iterations": len(trace),
            "sites": len(scn.payload.sites),
        }))
        checks += _not_applicable(*field_names)
    else:
        fchecks, tables, _ = _field_checks(scn, seed, scn.tolerances)
        checks = _not_applicable(*potential_names, "sdot_residual") + fchecks

    ordered = {c.name: c for c in checks}
    checks = [ordered[name] for name in report.CHECK_NAMES]
    doc = report.build_report("run", scn.doc, checks, tables, seed, threads)
    outputs = {"report.json": report.serialize_report(doc)}
    for name, table in tables.items():
        outputs[f"{name}.csv"] = table.as_csv()
    _write_outputs(args.out, outputs)
    failed = report.failed_checks(checks)
    if failed:
        print(f"findings: {', '.join(failed)}", file=sys.stderr)
        if args.strict:
            return EXIT_FINDINGS
    return EXIT_OK


def _command_solve_sdot(args) -> int:
    scn = scenario.load_scenario(args.scenario)
    if scn.kind != "sdot":
        raise scenario.ScenarioError(
            f"solve-sdot needs an sdot scenario, got kind {scn.kind!r}")
    seed = _resolve_seed(args.seed, scn)
    diagram, pot, trace, tol = _sdot_solround(scn, seed, scn.tolerances)
    target = scn.payload
    d = scn.dimension
    coord_names = tuple(f"x{k + 1}" for k in range(d))
    rows = []
    for i in range(len(target.sites)):
        rows.append((i, *map(float, target.sites[i]),
                     float(diagram.weights[i]), float(target.masses[i]),
                     float(diagram.volumes[i]),
                     float(target.masses[i] - diagram.volumes[i])))
    table = Table(("site_index", *coord_names, "weight", "mass", "volume",
                   "residual"), tuple(rows))
    derived = {
        "kind": "potential",
        "name": f"{scn.name}-potential",
        "dimension": d,
        "domain": scn.doc["domain"],
        "potential": {
            "cells": [[[float(x) for x in v] for v in cell.vertices]
                      for cell in diagram.cells if cell is not None],
            "gradients": [[float(x) for x in site]
                          for site, cell in zip(diagram.sites, diagram.cells)
                          if cell is not None],
            "offsets": [float(w)
                        for w, cell in zip(diagram.weights, diagram.cells)
                        if cell is not None],
        },
    }
    if scn.seed is not None:
        derived["seed"] = scn.seed
    outputs = {
        "sdot_solution.csv": table.as_csv(),
        "derived_potential.json": json.dumps(
            derived, sort_keys=True, indent=2) + "\n",
    }
    _write_outputs(args.out, outputs)
    residual = float(np.max(np.abs(target.masses - diagram.volumes)))
    print(f"converged: max residual {residual:.3e} over "
          f"{len(target.sites)} sites")
    return EXIT_OK


def _command_polar(args) -> int:
    scn = scenario.load_scenario(args.scenario)
    if scn.kind != "field":
        raise scenario.ScenarioError(
            f"polar needs a field scenario, got kind {scn.kind!r}")
    if scn.t_grid is None:
        raise scenario.ScenarioError("polar needs a t_grid in the scenario")
    seed = _resolve_seed(args.seed, scn)
    _, tables, _ = _field_checks(scn, seed, scn.tolerances)
    _write_outputs(args.out, {"polar.csv": tables["polar"].as_csv()})
    return EXIT_OK


def _command_validate(args) -> int:
    scn = scenario.load_scenario(args.scenario)
    print(f"scenario OK: {scn.name} (kind {scn.kind}, "
          f"dimension {scn.dimension})")
    return EXIT_OK


def _write_outputs(out_dir: str, outputs: dict):
    """All output files at once, only after every computation succeeded."""
    os.makedirs(out_dir, exist_ok=True)
    for name, text in outputs.items():
        with open(os.path.join(out_dir, name), "w", encoding="utf-8",
                  newline="") as fh:
            fh.write(text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="breaklab",
        description="checks and experiments for piecewise-affine "
                    "potential flows")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute all applicable checks")
    run.add_argument("scenario")
    run.add_argument("--out", required=True, help="output directory")
    run.add_argument("--strict", action="store_true",
                     help="exit 1 when any check fails")
    run.add_argument("--seed", type=int, default=None)

    sdot = sub.add_parser("solve-sdot", help="solve a semidiscrete target")
    sdot.add_argument("scenario")
    sdot.add_argument("--out", required=True)
    sdot.add_argument("--seed", type=int, default=None)

    polar = sub.add_parser("polar", help="small-time rearrangement table")
    polar.add_argument("scenario")
    polar.add_argument("--out", required=True)
    polar.add_argument("--seed", type=int, default=None)

    val = sub.add_parser("validate", help="validate a scenario file")
    val.add_argument("scenario")
    return parser


_DISPATCH = {
    "run": _command_run,
    "solve-sdot": _command_solve_sdot,
    "polar": _command_polar,
    "validate": _command_validate,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    start = time.monotonic()
    try:
        code = _DISPATCH[args.command](args)
    except scenario.ScenarioError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INPUT
    except transport.SolverDivergedError as err:
        print(f"solver failure: {err}", file=sys.stderr)
        return EXIT_SOLVER
    except (field.SolverError, spectral.SpectralError,
            transport.TransportError) as err:
        print(f"solver failure: {err}", file=sys.stderr)
        return EXIT_SOLVER
    finally:
        elapsed = time.monotonic() - start
        print(f"[breaklab] wall time {elapsed:.3f}s", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
