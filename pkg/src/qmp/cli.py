"""Command-line frontend.

Subcommands generate the worked scenarios, run compatibility checks,
reconstruct Hamiltonians or master equations, and dump measure series:

    qmp scenario example1 --J 2 --t-max 3.14159 --steps 200 --out DIR
    qmp check JOINT.json [--tol F]
    qmp check MARGINAL_A.json MARGINAL_B.json
    qmp reconstruct unitary JOINT.json --out DIR
    qmp reconstruct master JOINT.json --ansatz unital-diagonal --out DIR
    qmp measures JOINT.json --out SERIES.csv

Trajectory files are JSON with fields dim, t0, dt, n, params and
samples, where samples[i] lists the dim^2 entries of the matrix at time
t0 + i*dt row-major, each complex entry as an [re, im] pair. Exit
codes: 0 success, 2 validation failure, 3 no CP-valid candidate,
4 parse error. The env var QMP_TOL overrides the default tolerance
1e-10 used by the checks.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import tempfile

import numpy as np

from . import bloch, dissipative_recon as dr, kinematics, measures, unitary_recon as ur
from .qcore import Trajectory, partial_trace, validate_state

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NO_CP = 3
EXIT_PARSE = 4


class CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def default_tol() -> float:
    raw = os.environ.get("QMP_TOL")
    if raw is None:
        return 1e-10
    try:
        return float(raw)
    except ValueError:
        raise CliError(f"QMP_TOL is not a number: {raw!r}", EXIT_PARSE)


# ---------------------------------------------------------------------------
# File I/O
# ---------------------------------------------------------------------------


def _atomic_write(path: str, text: str):
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".qmp-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def trajectory_to_dict(traj: Trajectory, params=None) -> dict:
    samples = []
    for m in traj.samples:
        flat = m.reshape(-1)
        samples.append([[float(z.real), float(z.imag)] for z in flat])
    return {
        "dim": traj.dim,
        "t0": traj.t0,
        "dt": traj.dt,
        "n": traj.n,
        "params": params or {},
        "samples": samples,
    }


def trajectory_from_dict(doc: dict, strict: bool = True, tol: float = 1e-8) -> Trajectory:
    try:
        dim = int(doc["dim"])
        t0 = float(doc["t0"])
        dt = float(doc["dt"])
        n = int(doc["n"])
        raw = doc["samples"]
    except (KeyError, TypeError, ValueError) as exc:
        raise CliError(f"malformed trajectory file: {exc}", EXIT_PARSE)
    if len(raw) != n:
        raise CliError(f"n = {n} but {len(raw)} samples present", EXIT_PARSE)
    samples = np.empty((n, dim, dim), dtype=complex)
    for i, entry in enumerate(raw):
        if len(entry) != dim * dim:
            raise CliError(f"sample {i} has {len(entry)} entries, expected {dim * dim}", EXIT_PARSE)
        flat = np.array([complex(re, im) for re, im in entry])
        samples[i] = flat.reshape(dim, dim)
    traj = Trajectory(t0, dt, samples)
    if strict:
        for i, m in enumerate(samples):
            rep = validate_state(m, tol)
            if not rep.ok:
                raise CliError(f"sample {i} is not a valid state: {rep}", EXIT_INVALID)
    return traj


def write_trajectory(path: str, traj: Trajectory, params=None):
    _atomic_write(path, json.dumps(trajectory_to_dict(traj, params), indent=1))


def load_trajectory(path: str, strict: bool = True) -> Trajectory:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc}", EXIT_PARSE)
    except json.JSONDecodeError as exc:
        raise CliError(f"{path} is not valid JSON: {exc}", EXIT_PARSE)
    return trajectory_from_dict(doc, strict=strict)


def write_report(path_or_none, doc: dict):
    text = json.dumps(doc, indent=1)
    if path_or_none:
        _atomic_write(path_or_none, text)
    print(text)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_scenario(args) -> int:
    name = args.name
    if name == "example1":
        sc = kinematics.scenario_example1(args.J)
        params = {"J": args.J}
    elif name == "example2":
        sc = kinematics.scenario_example2(args.omega)
        params = {"omega": args.omega}
    elif name == "example3":
        sc = kinematics.scenario_example3(args.J, args.gamma)
        params = {"J": args.J, "gamma": args.gamma}
    else:  # pragma: no cover - argparse choices guard this
        raise CliError(f"unknown scenario {name}", EXIT_PARSE)
    dt = args.t_max / args.steps
    n = args.steps + 1
    pair = sc.marginals(0.0, dt, n)
    os.makedirs(args.out, exist_ok=True)
    write_trajectory(os.path.join(args.out, "marginal_a.json"), pair.rho_a, params)
    write_trajectory(os.path.join(args.out, "marginal_b.json"), pair.rho_b, params)
    if sc.joint_at is not None:
        joint = sc.joint(0.0, dt, n)
        # self-check: the written marginals are the joint's partial traces
        for i in range(n):
            da = np.max(np.abs(partial_trace(joint.samples[i], "B") - pair.rho_a.samples[i]))
            db = np.max(np.abs(partial_trace(joint.samples[i], "A") - pair.rho_b.samples[i]))
            if max(da, db) > 1e-12:
                raise CliError(f"marginal self-check failed at sample {i}", EXIT_INVALID)
        write_trajectory(os.path.join(args.out, "joint.json"), joint, params)
        print(f"wrote joint.json, marginal_a.json, marginal_b.json to {args.out}")
    else:
        print(
            f"wrote marginal_a.json, marginal_b.json to {args.out} "
            "(this scenario admits no joint trajectory)"
        )
    return EXIT_OK


def cmd_check(args) -> int:
    tol = args.tol if args.tol is not None else default_tol()
    if len(args.files) == 1:
        traj = load_trajectory(args.files[0])
        if traj.dim != 4:
            raise CliError("single-file check expects a dim-4 joint trajectory", EXIT_INVALID)
        rep = kinematics.unitarity_test(traj, tol)
        doc = {
            "check": "unitarity",
            "verdict": "PASS" if rep.passed else "FAIL",
            "drift": {str(k): v for k, v in rep.drift.items()},
            "tol": tol,
        }
        write_report(args.out, doc)
        return EXIT_OK
    pair = kinematics.MarginalPair(
        load_trajectory(args.files[0]), load_trajectory(args.files[1])
    )
    iso = kinematics.isospectral_test(pair)
    win = kinematics.unitary_window(pair)
    doc = {
        "check": "marginal-pair",
        "isospectral": iso.isospectral,
        "max_spectral_distance": iso.max_distance,
        "window": {
            "c_lo": win.c_lo,
            "c_hi": win.c_hi,
            "exists": win.exists,
        },
        "tol": tol,
    }
    write_report(args.out, doc)
    return EXIT_OK


def cmd_reconstruct_unitary(args) -> int:
    tol = default_tol()
    traj = load_trajectory(args.file)
    rep = kinematics.unitarity_test(traj, max(tol, 1e-8))
    if not rep.passed:
        raise CliError(
            f"trajectory is not unitary (trace-power drift {rep.drift})", EXIT_INVALID
        )
    seq = ur.reconstruct_evolution(traj)
    ham = ur.hamiltonian_from_evolution(seq)
    os.makedirs(args.out, exist_ok=True)
    write_trajectory(os.path.join(args.out, "hamiltonian.json"), ham.trajectory)
    rows = [["t"] + [f"h{a}{b}" for a in range(4) for b in range(4)]]
    for t, h in zip(ham.trajectory.times, ham.trajectory.samples):
        coeffs = bloch.pauli_decompose(h).h.reshape(16)
        rows.append([f"{t:.17g}"] + [f"{c:.17g}" for c in coeffs])
    _atomic_write(
        os.path.join(args.out, "pauli_coefficients.csv"),
        "\n".join(",".join(r) for r in rows) + "\n",
    )
    doc = {
        "antihermitian_defect": ham.antihermitian_defect,
        "drift": {str(k): v for k, v in rep.drift.items()},
        "files": ["hamiltonian.json", "pauli_coefficients.csv"],
    }
    write_report(os.path.join(args.out, "report.json"), doc)
    return EXIT_OK


def _mean_hamiltonian(ham_traj: Trajectory) -> np.ndarray:
    return ham_traj.samples.mean(axis=0)


def cmd_reconstruct_master(args) -> int:
    tol = default_tol()
    traj = load_trajectory(args.file)
    if args.ansatz != "unital-diagonal":
        raise CliError(f"ansatz {args.ansatz!r} is not implemented", EXIT_INVALID)
    frame = ur.eigenframe_decompose(traj)
    ham = ur.hamiltonian_from_evolution(frame.useq)
    h_mean = _mean_hamiltonian(ham.trajectory)
    os.makedirs(args.out, exist_ok=True)
    write_trajectory(os.path.join(args.out, "hamiltonian.json"), ham.trajectory)

    unit = kinematics.unitarity_test(traj, max(tol, 1e-8))
    doc = {
        "unitary": unit.passed,
        "trace_power_drift": {str(k): v for k, v in unit.drift.items()},
        "antihermitian_defect": ham.antihermitian_defect,
        "candidates": [],
    }
    stride = 2 if (traj.n - 1) % 2 == 0 else 1
    if unit.passed:
        rt = dr.roundtrip_verify(traj, dr.constant_generator(h_mean), stride=stride)
        doc["candidates"].append(
            {
                "label": "unitary",
                "d_diag": [0.0] * 15,
                "k_spectrum": [0.0] * 15,
                "cp_valid": True,
                "roundtrip_deviation": rt.max_deviation,
            }
        )
        write_report(os.path.join(args.out, "report.json"), doc)
        return EXIT_OK

    fit = dr.fit_diagonal_unital(frame.gamma)
    doc["fit"] = {
        "active": [i + 1 for i in fit.active],
        "free": [i + 1 for i in fit.free],
        "residual": fit.residual,
        "d_diag": list(fit.d_diag),
    }
    any_cp = False
    for label, d_full, k in dr.candidate_diagonals(fit):
        cp = dr.cp_check(k)
        entry = {
            "label": label,
            "d_diag": list(d_full),
            "k_diag": list(np.diag(k.k).real),
            "k_spectrum": list(k.spectrum()),
            "cp_valid": cp.valid,
            "min_k_eigenvalue": cp.min_eigenvalue,
        }
        if cp.valid:
            any_cp = True
            rhs_diss = dr.rotate_dissipator(k, frame.useq)

            def rhs(t, rho, _d=rhs_diss):
                return dr.gksl_apply(h_mean, None, rho) + _d(t, rho)

            rt = dr.roundtrip_verify(traj, rhs, stride=stride)
            entry["roundtrip_deviation"] = rt.max_deviation
            entry["roundtrip_marginals"] = [rt.max_marginal_a, rt.max_marginal_b]
        doc["candidates"].append(entry)
    write_report(os.path.join(args.out, "report.json"), doc)
    return EXIT_OK if any_cp else EXIT_NO_CP


def cmd_measures(args) -> int:
    traj = load_trajectory(args.file)
    if traj.dim != 4:
        raise CliError("measures expects a dim-4 joint trajectory", EXIT_INVALID)
    rows = [("t", "purity_AB", "purity_A", "purity_B", "negativity")]
    for t, rho in zip(traj.times, traj.samples):
        rows.append(
            (
                f"{t:.17g}",
                f"{measures.purity(rho):.17g}",
                f"{measures.purity(partial_trace(rho, 'B')):.17g}",
                f"{measures.purity(partial_trace(rho, 'A')):.17g}",
                f"{measures.negativity(rho):.17g}",
            )
        )
    d = os.path.dirname(os.path.abspath(args.out))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".qmp-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            csv.writer(fh).writerows(rows)
        os.replace(tmp, args.out)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    print(f"wrote {len(rows) - 1} rows to {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qmp", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True)

    sc = sub.add_parser("scenario", help="generate a worked scenario")
    sc.add_argument("name", choices=["example1", "example2", "example3"])
    sc.add_argument("--J", type=float, default=2.0)
    sc.add_argument("--omega", type=float, default=1.0)
    sc.add_argument("--gamma", type=float, default=0.2)
    sc.add_argument("--t-max", type=float, required=True)
    sc.add_argument("--steps", type=int, required=True)
    sc.add_argument("--out", required=True)
    sc.set_defaults(func=cmd_scenario)

    ck = sub.add_parser("check", help="unitarity / marginal-pair checks")
    ck.add_argument("files", nargs="+", help="joint file, or marginal A and B files")
    ck.add_argument("--tol", type=float, default=None)
    ck.add_argument("--out", default=None)
    ck.set_defaults(func=cmd_check)

    rc = sub.add_parser("reconstruct", help="reconstruct a generator")
    rsub = rc.add_subparsers(dest="mode", required=True)
    ru = rsub.add_parser("unitary")
    ru.add_argument("file")
    ru.add_argument("--out", required=True)
    ru.set_defaults(func=cmd_reconstruct_unitary)
    rm = rsub.add_parser("master")
    rm.add_argument("file")
    rm.add_argument("--ansatz", choices=["unital-diagonal", "unital-symmetric"],
                    default="unital-diagonal")
    rm.add_argument("--out", required=True)
    rm.set_defaults(func=cmd_reconstruct_master)

    ms = sub.add_parser("measures", help="purity/negativity series as CSV")
    ms.add_argument("file")
    ms.add_argument("--out", required=True)
    ms.set_defaults(func=cmd_measures)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "command", None) == "check" and len(args.files) > 2:
        print("check takes one joint file or two marginal files", file=sys.stderr)
        return EXIT_PARSE
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
