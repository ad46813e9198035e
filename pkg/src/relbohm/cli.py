"""Command-line entry point.

    relbohm {norm,currents,trajectories,equivariance,verify-all} --scenario FILE [options]

``--scenario`` takes a scenario file path or the name of a bundled corpus
scenario.  Files written to ``--out`` (default: current directory):

norm.txt
    key-value records: kg_norm, N, N of the KG-normalized state, and the
    hypersurface time-independence residual.
currents.tsv
    columns: particle, t, x, y, z, j0, j1, j2, j3, div_analytic, div_fd
    (contravariant j_a on a grid^3 spatial grid at the mid time of the box).
trajectories_local.tsv, trajectories_nonlocal.tsv
    columns: configuration, particle, param, t, x, y, z, causal
    (spatial coordinates wrapped into the box; ``causal`` is the character
    of the segment starting at that sample, ``-`` on the last one).
trajectories.txt
    reparameterization distance per configuration and particle.
equivariance.txt
    the DistributionReport.
checks.txt
    one ``[[check]]`` record per invariant (name, residual, tolerance,
    passed).

Every file starts with a ``#`` header line naming the command, scenario and
seed.  Floats carry 17 significant digits.  Exit status: 0 when every
check passes, 1 when one fails, 2 on usage or scenario errors.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass, replace

import numpy as np

from . import currents as cur
from .dynamics import causal_character, integrate_local, integrate_nonlocal, reparameterization_distance
from .ensemble import InconclusiveError, SamplerConfig, equivariance_test
from .scenario import CORPUS, Scenario, ScenarioError, corpus_scenario, load_scenario
from .verify import TOLERANCES, Check, local_parameters, run_checks, spatial_grid, trajectory_checks
from .wavefunction import kg_norm, normalize_kg, normalize_spacetime, spacetime_normalization_N

COMMANDS = ("norm", "currents", "trajectories", "equivariance", "verify-all")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


@dataclass
class Options:
    seed: int | None = None
    ds: float | None = None
    s_max: float | None = None
    samples: int | None = None
    tolerance_profile: str = "default"


def _g(v) -> str:
    return f"{float(v):.17g}"


def _header(command: str, scenario: Scenario, seed: int) -> str:
    return f"# relbohm {command} scenario={scenario.name or '-'} seed={seed}\n"


def _check_records(checks: list[Check]) -> str:
    lines = []
    for c in checks:
        lines += ["[[check]]", f'name = "{c.name}"', f"residual = {_g(c.residual)}",
                  f"tolerance = {_g(c.tolerance)}", f"passed = {'true' if c.passed else 'false'}", ""]
    return "\n".join(lines)


def _apply_options(scenario: Scenario, options: Options) -> tuple[Scenario, int]:
    run = scenario.run
    changes = {}
    if options.ds is not None:
        changes["ds"] = options.ds
    if options.s_max is not None:
        changes["s_max"] = options.s_max
    if options.samples is not None:
        changes["samples"] = options.samples
    seed = run.seed if options.seed is None else options.seed
    changes["seed"] = seed
    return replace(scenario, run=replace(run, **changes)), seed


def _cmd_norm(sc: Scenario, seed: int, tol) -> tuple[list[Check], dict[str, str]]:
    wf = sc.wavefunction()
    rng = np.random.default_rng(seed)
    raw = kg_norm(wf)
    N_raw = spacetime_normalization_N(wf)
    psi = normalize_kg(wf)
    N_kg = spacetime_normalization_N(psi)
    times = wf.box.t_start + rng.random((10, wf.n)) * wf.box.T
    drift = max(abs(kg_norm(wf, t) - raw) for t in times) / raw
    checks = [
        Check("kg_norm_time_independence", drift, tol["kg_norm_time_independence"]),
        Check("spacetime_normalization", abs(spacetime_normalization_N(normalize_spacetime(wf)) - 1.0),
              tol["spacetime_normalization"]),
    ]
    body = (
        f"kg_norm = {_g(raw)}\n"
        f"N = {_g(N_raw)}\n"
        f"N_kg_normalized = {_g(N_kg)}\n"
        f"box_mean_density = {_g(wf.mean_density)}\n\n"
    )
    return checks, {"norm.txt": body + _check_records(checks)}


def _cmd_currents(sc: Scenario, seed: int, tol) -> tuple[list[Check], dict[str, str]]:
    wf = normalize_kg(sc.wavefunction())
    box = wf.box
    pts = spatial_grid(box, sc.run.grid, box.t_start + 0.5 * box.T)
    rows = ["particle\tt\tx\ty\tz\tj0\tj1\tj2\tj3\tdiv_analytic\tdiv_fd"]
    worst_exact = worst_fd = 0.0
    for a, f in enumerate(cur.single_particle_currents(wf)):
        j = f.evaluate(pts)
        d_exact = np.atleast_1d(cur.divergence_single(f, pts))
        d_fd = np.atleast_1d(cur.divergence_fd(f, pts, 1e-4))
        worst_exact = max(worst_exact, float(np.max(np.abs(d_exact))))
        worst_fd = max(worst_fd, float(np.max(np.abs(d_fd))))
        for p, jj, de, df in zip(pts, j, d_exact, d_fd):
            rows.append("\t".join([str(a)] + [_g(v) for v in (*p, *jj, de, df)]))
    checks = [
        Check("divergence_analytic", worst_exact, tol["divergence_analytic"]),
        Check("divergence_fd", worst_fd, tol["divergence_fd"]),
    ]
    return checks, {"currents.tsv": "\n".join(rows) + "\n", "currents_checks.txt": _check_records(checks)}


def _trajectory_rows(c: int, trajs) -> list[str]:
    rows = []
    for tr in trajs:
        causal = causal_character(tr) + ["-"] if len(tr) > 1 else ["-"]
        for s, p, ch in zip(tr.params, tr.wrapped_points, causal):
            rows.append("\t".join([str(c), str(tr.particle), _g(s), *(_g(v) for v in p), ch]))
    return rows


def _cmd_trajectories(sc: Scenario, seed: int, tol) -> tuple[list[Check], dict[str, str]]:
    wf = sc.wavefunction()
    run = sc.run
    if not run.initial:
        raise ScenarioError("trajectories need at least one run.initial configuration", field="run.initial")
    vf = cur.VelocityField(wf)
    head = "configuration\tparticle\tparam\tt\tx\ty\tz\tcausal"
    local_rows, nonlocal_rows, summary = [head], [head], []
    checks = []
    for c, cfg0 in enumerate(run.initial):
        nl = integrate_nonlocal(wf, cfg0, run.s_max, run.ds, vf)
        s_loc, ds_loc = local_parameters(wf, cfg0, run.s_max, run.ds)
        if run.local_ds is not None:
            ds_loc = run.local_ds
        loc = [integrate_local(f, cfg0[a], s_loc, ds_loc) for a, f in enumerate(vf.fields)]
        nonlocal_rows += _trajectory_rows(c, nl)
        local_rows += _trajectory_rows(c, loc)
        for a in range(wf.n):
            if len(nl[a]) < 2 or len(loc[a]) < 2:
                d = 0.0
            else:
                d = reparameterization_distance(loc[a], nl[a])
            summary.append(f"distance[{c}][{a}] = {_g(d)}  # local {loc[a].status}, nonlocal {nl[a].status}")
            checks.append(Check(f"reparameterization_distance[{c}][{a}]", d,
                                tol["reparameterization_distance"]))
    files = {
        "trajectories_local.tsv": "\n".join(local_rows) + "\n",
        "trajectories_nonlocal.tsv": "\n".join(nonlocal_rows) + "\n",
        "trajectories.txt": "\n".join(summary) + "\n\n" + _check_records(checks),
    }
    return checks, files


def _cmd_equivariance(sc: Scenario, seed: int, tol) -> tuple[list[Check], dict[str, str]]:
    run = sc.run
    if run.equivariance_s is None:
        raise ScenarioError("equivariance needs run.equivariance_s", field="run.equivariance_s")
    Psi = normalize_spacetime(sc.wavefunction())
    sampler = SamplerConfig(run.samples, run.burn_in, run.thinning, run.proposal_scale, seed)
    report = equivariance_test(Psi, sampler, run.equivariance_s)
    checks = [Check(f"ks[{e.label}]", e.statistic, e.threshold) for e in report.ks]
    checks += [Check(f"moment[{e.label}]", abs(e.sampled - e.reference), e.tolerance) for e in report.moments]
    return checks, {"equivariance.txt": report.to_text()}


def _cmd_verify_all(sc: Scenario, seed: int, tol) -> tuple[list[Check], dict[str, str]]:
    profile = next(k for k, v in TOLERANCES.items() if v is tol)
    checks = run_checks(sc.wavefunction(), sc.run if (sc.run.initial or sc.run.equivariance_s) else None,
                        seed=seed, profile=profile, grid=sc.run.grid)
    return checks, {"checks.txt": _check_records(checks)}


_DISPATCH = {
    "norm": _cmd_norm,
    "currents": _cmd_currents,
    "trajectories": _cmd_trajectories,
    "equivariance": _cmd_equivariance,
    "verify-all": _cmd_verify_all,
}


def run_command(command: str, scenario: Scenario, options: Options | None = None):
    """Run one command; returns ``(exit_status, checks, {filename: text})``."""
    if command not in _DISPATCH:
        raise ValueError(f"unknown command {command!r}")
    options = options or Options()
    scenario, seed = _apply_options(scenario, options)
    tol = TOLERANCES[options.tolerance_profile]
    checks, files = _DISPATCH[command](scenario, seed, tol)
    header = _header(command, scenario, seed)
    files = {name: header + text for name, text in files.items()}
    status = EXIT_OK if all(c.passed for c in checks) else EXIT_FAIL
    return status, checks, files


def _load(spec: str) -> Scenario:
    if os.path.exists(spec):
        return load_scenario(spec)
    if spec in CORPUS:
        return corpus_scenario(spec)
    raise ScenarioError(f"no such scenario file or corpus name: {spec!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="relbohm", description=__doc__.split("\n\n")[0])
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--scenario", required=True, help=f"scenario file or corpus name {CORPUS}")
    parser.add_argument("--out", default=".", help="output directory")
    parser.add_argument("--seed", type=int, help="unsigned 64-bit seed (overrides run.seed)")
    parser.add_argument("--ds", type=float, help="nonlocal step (overrides run.ds)")
    parser.add_argument("--s-max", dest="s_max", type=float, help="nonlocal parameter span")
    parser.add_argument("--samples", type=int, help="ensemble size for equivariance")
    parser.add_argument("--tolerance-profile", choices=tuple(TOLERANCES), default="default")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.seed is not None and not 0 <= args.seed < 2**64:
        parser.error("--seed must be an unsigned 64-bit integer")
    for name in ("ds", "samples"):
        value = getattr(args, name)
        if value is not None and not value > 0:
            parser.error(f"--{name} must be positive")
    if args.s_max is not None and args.s_max < 0:
        parser.error("--s-max must be non-negative")

    options = Options(args.seed, args.ds, args.s_max, args.samples, args.tolerance_profile)
    try:
        scenario = _load(args.scenario)
        status, checks, files = run_command(args.command, scenario, options)
    except (ScenarioError, ValueError) as exc:
        print(f'error = "{exc}"', file=sys.stderr)
        return EXIT_USAGE
    except InconclusiveError as exc:
        print(f'inconclusive = "{exc}"', file=sys.stderr)
        return EXIT_FAIL

    os.makedirs(args.out, exist_ok=True)
    for name, text in files.items():
        with open(os.path.join(args.out, name), "w", encoding="utf-8") as fh:
            fh.write(text)
    for c in checks:
        flag = "PASS" if c.passed else "FAIL"
        line = f"{flag} {c.name} residual={_g(c.residual)} tolerance={_g(c.tolerance)}"
        print(line, file=sys.stdout if c.passed else sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())
