"""Command-line front end.

Every subcommand writes either a JSON document or a CSV table to stdout or
to ``--out`` (written atomically).  Both carry the schema tag
``fermi-cavity/1``: a top-level ``"schema"`` key in JSON, a leading
``# schema=fermi-cavity/1`` comment line in CSV.

Exit codes: 0 success, 1 domain error, 2 numeric error, 64 usage error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile

import jsonschema
import numpy as np

from . import __version__
from .correlations import OccupationPattern, relaxed_one_particle
from .entanglement import (
    SubsystemMask,
    build_corr_matrix,
    doktorsky_check_2d,
    ee_density,
    entanglement_entropy,
    generating_function_2d,
    szego_check_1d,
)
from .errors import DomainError, NumericError
from .kinetics import CollisionKernel, KineticState, double_step, equilibrium_target, evolve
from .partitions import McmcConfig, PartitionEnsemble, vershik_check
from .recurrence import RecurrenceInput, recurrence_bounds
from .thermo import CavityModel, SpectrumModel, ThermalState, ehrenfest_time, solve_thermal

SCHEMA = "fermi-cavity/1"

EXIT_OK, EXIT_DOMAIN, EXIT_NUMERIC, EXIT_USAGE = 0, 1, 2, 64

# lattice state used by the volume-law and Szego defaults: T = 1, mu = -2,
# lattice constant equal to the thermal wavelength hbar / sqrt(2 m T)
DEFAULT_T, DEFAULT_MU, DEFAULT_A = 1.0, -2.0, 1.0 / math.sqrt(2.0)

REPRO_IDS = ("fig4b", "fig4d", "volume-law", "continuum-limit", "kinetics-relax")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


# ---------------------------------------------------------------------------
# config


_NUM = {"type": "number"}
_INT = {"type": "integer"}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "schema": {"const": SCHEMA},
        "cavity": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"volume": _NUM, "hbar": _NUM, "mass": _NUM, "lattice_a": _NUM,
                           "shape_factor": _NUM, "lyapunov_prefactor": _NUM},
        },
        "thermal": {
            "oneOf": [
                {"type": "object", "additionalProperties": False,
                 "required": ["T", "mu"], "properties": {"T": _NUM, "mu": _NUM}},
                {"type": "object", "additionalProperties": False,
                 "required": ["E", "N"], "properties": {"E": _NUM, "N": _NUM}},
            ]
        },
        "subsystem": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"shape": {"enum": ["chain", "square", "disk", "polygon"]},
                           "side": _INT, "radius": _NUM, "length": _INT,
                           "vertices": {"type": "array", "items": {
                               "type": "array", "items": _NUM, "minItems": 2, "maxItems": 2}}},
        },
        "mcmc": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"seed": _INT, "burn_in": _INT, "thinning": _INT,
                           "max_shift": _INT, "samples": _INT},
        },
        "kinetics": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"levels": _INT, "steps": _INT, "dt": _NUM, "window": _INT,
                           "record_every": _INT},
        },
        "output": {"enum": ["csv", "json"]},
        "seed": _INT,
    },
}

# config path -> argparse dest
_CONFIG_MAP = {
    ("cavity", "volume"): "volume",
    ("cavity", "hbar"): "hbar",
    ("cavity", "mass"): "mass",
    ("cavity", "lattice_a"): "a",
    ("cavity", "shape_factor"): "shape_factor",
    ("cavity", "lyapunov_prefactor"): "lyapunov_prefactor",
    ("thermal", "T"): "T",
    ("thermal", "mu"): "mu",
    ("thermal", "E"): "E",
    ("thermal", "N"): "N",
    ("subsystem", "shape"): "shape",
    ("subsystem", "side"): "side",
    ("subsystem", "radius"): "radius",
    ("subsystem", "length"): "length",
    ("subsystem", "vertices"): "vertices",
    ("mcmc", "seed"): "seed",
    ("mcmc", "burn_in"): "burn_in",
    ("mcmc", "thinning"): "thinning",
    ("mcmc", "max_shift"): "max_shift",
    ("mcmc", "samples"): "samples",
    ("kinetics", "levels"): "levels",
    ("kinetics", "steps"): "steps",
    ("kinetics", "dt"): "dt",
    ("kinetics", "window"): "window",
    ("kinetics", "record_every"): "record_every",
}


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    try:
        jsonschema.validate(data, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise UsageError(f"config {path} does not match the schema: {exc.message}") from None
    return data


def _apply_config(args, data):
    if "thermal" in data:
        # the config picks one thermal description; clear the other
        for key in ("T", "mu", "E", "N"):
            if hasattr(args, key):
                setattr(args, key, None)
    for (block, key), dest in _CONFIG_MAP.items():
        if block in data and key in data[block] and hasattr(args, dest):
            setattr(args, dest, data[block][key])
    if "seed" in data and hasattr(args, "seed"):
        setattr(args, "seed", data["seed"])
    if "output" in data and hasattr(args, "format"):
        args.format = data["output"]


# ---------------------------------------------------------------------------
# emission


def _clean(x):
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, dict):
        return {k: _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    return x


def render_json(command, payload):
    doc = {"schema": SCHEMA, "command": command}
    doc.update(_clean(payload))
    return json.dumps(doc, indent=2, sort_keys=False) + "\n"


def render_csv(columns, rows, meta=None):
    buf = io.StringIO()
    buf.write(f"# schema={SCHEMA}\n")
    for key, val in (meta or {}).items():
        buf.write(f"# {key}={_clean(val)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v
                         for v in row])
    return buf.getvalue()


def render_records(command, records, columns, fmt, meta=None):
    if fmt == "csv":
        return render_csv(columns, [[r[c] for c in columns] for r in records], meta)
    payload = dict(meta or {})
    payload["records"] = records
    return render_json(command, payload)


def write_output(text, out):
    if out in (None, "-"):
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    directory = os.path.dirname(os.path.abspath(out))
    fd, tmp = tempfile.mkstemp(prefix=".fermi-cavity-", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, out)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_csv_table(path):
    """Numeric CSV with a header row; ``#`` lines are comments."""
    try:
        with open(path, encoding="utf-8") as fh:
            lines = [ln for ln in fh if ln.strip() and not ln.lstrip().startswith("#")]
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from None
    reader = csv.reader(lines)
    header = [h.strip() for h in next(reader)]
    try:
        rows = [[float(v) for v in row] for row in reader if row]
    except ValueError as exc:
        raise DomainError(f"{path}: non-numeric entry ({exc})") from None
    return header, np.asarray(rows, dtype=float).reshape(-1, len(header))


# ---------------------------------------------------------------------------
# shared argument groups


def _cavity_args(p, *, lattice=False):
    p.add_argument("--volume", type=float, default=1.0e6)
    p.add_argument("--hbar", type=float, default=1.0)
    p.add_argument("--mass", type=float, default=1.0)
    p.add_argument("--shape-factor", dest="shape_factor", type=float, default=1.0)
    p.add_argument("--lyapunov-prefactor", dest="lyapunov_prefactor", type=float, default=1.0)
    if lattice:
        p.add_argument("--a", type=float, default=DEFAULT_A, help="lattice constant")


def _thermal_args(p, T=None, mu=None):
    p.add_argument("--T", type=float, default=T, help="temperature")
    p.add_argument("--mu", type=float, default=mu, help="chemical potential")
    p.add_argument("--E", type=float, default=None, help="total energy (with --N)")
    p.add_argument("--N", type=float, default=None, help="particle number (with --E)")


def _common(p):
    p.add_argument("--out", default=None, help="output path (default stdout)")
    p.add_argument("--config", default=None, help="JSON config overriding flags")


def _cavity(args, lattice_a=None):
    return CavityModel(
        volume=args.volume, hbar=args.hbar, mass=args.mass, shape_factor=args.shape_factor,
        lattice_a=getattr(args, "a", 0.0) if lattice_a is None else lattice_a,
        lyapunov_prefactor=args.lyapunov_prefactor,
    )


def _thermal(args, cavity):
    by_energy = args.E is not None or args.N is not None
    if by_energy:
        if args.E is None or args.N is None:
            raise UsageError("--E and --N must be given together")
        return solve_thermal(SpectrumModel.continuous(cavity), args.E, args.N)
    if args.T is None or args.mu is None:
        raise UsageError("give either --T and --mu, or --E and --N")
    return ThermalState(T=args.T, mu=args.mu)


def _int_list(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _float_list(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


# ---------------------------------------------------------------------------
# commands


def cmd_thermo_solve(args):
    if args.levels == "harmonic":
        spec = SpectrumModel.harmonic(args.spacing)
    elif args.levels == "continuous":
        spec = SpectrumModel.continuous(_cavity(args, 0.0))
    else:
        header, table = read_csv_table(args.levels_file)
        col = header.index("eps") if "eps" in header else 0
        spec = SpectrumModel.discrete(table[:, col])
    ts = solve_thermal(spec, args.E, args.N)
    payload = {"levels": args.levels, "E": args.E, "N": args.N, "T": ts.T, "mu": ts.mu,
               "beta": ts.beta, "alpha": ts.alpha}
    return render_json("thermo solve", payload)


def cmd_thermo_ehrenfest(args):
    cavity = _cavity(args, 0.0)
    t = ehrenfest_time(cavity, args.eps)
    return render_json("thermo ehrenfest", {"eps": args.eps, "linear_size": cavity.linear_size,
                                            "t_E": t})


def cmd_partition_sample(args):
    ens = PartitionEnsemble(energy=args.E, n_particles=args.N, group_size=args.Gm,
                            samples=args.samples, seed=args.seed, burn_in=args.burn_in,
                            thinning=args.thinning, max_shift=args.max_shift,
                            n_chains=args.chains).fit()
    T, mu, rms = ens.fit_fermi_dirac()
    rows = [(m + 1, float(c), float(r), float(s)) for m, (c, r, s) in
            enumerate(zip(ens.group_centers_, ens.mean_ratios_, ens.std_ratios_))]
    meta = {"E": args.E, "N": args.N, "Gm": args.Gm, "samples": args.samples, "seed": args.seed,
            "fit_T": T, "fit_mu": mu, "fit_rms": rms,
            "split_chain_agreement": ens.split_chain_agreement_}
    records = [dict(zip(("m", "eps_m", "mean_ratio", "std_ratio"), r)) for r in rows]
    return render_records("partition sample", records,
                          ["m", "eps_m", "mean_ratio", "std_ratio"], args.format, meta)


def cmd_partition_vershik(args):
    cfg = McmcConfig(seed=args.seed, burn_in=args.burn_in, thinning=args.thinning,
                     max_shift=args.max_shift)
    stat, u, phi, curve = vershik_check(args.E, args.samples, cfg, return_curve=True)
    records = [{"u": float(a), "phi_scaled": float(b), "vershik_curve": float(c)}
               for a, b, c in zip(u, phi, curve)]
    meta = {"E": args.E, "samples": args.samples, "seed": args.seed,
            "T": math.sqrt(12.0 * args.E) / math.pi, "sup_deviation": stat}
    return render_records("partition vershik", records, ["u", "phi_scaled", "vershik_curve"],
                          args.format, meta)


def cmd_corr_eval(args):
    cavity = _cavity(args, 0.0)
    ts = _thermal(args, cavity)
    header, table = read_csv_table(args.pairs)
    need = ["x1", "y1", "x2", "y2"]
    if not all(c in header for c in need):
        raise DomainError(f"{args.pairs}: columns {need} required")
    idx = [header.index(c) for c in need]
    pattern = OccupationPattern.thermal(ts)
    margin = None if args.no_margin else args.margin
    records = []
    for row in table[:, idx]:
        r1, r2 = row[:2], row[2:]
        val = relaxed_one_particle(r1, r2, pattern, cavity, margin_wavelengths=margin)
        records.append({"separation": float(np.linalg.norm(r1 - r2)), "value": val})
    return render_records("corr eval", records, ["separation", "value"], args.format,
                          {"T": ts.T, "mu": ts.mu})


def _mask(args):
    if args.shape == "square":
        return SubsystemMask.square(args.side)
    if args.shape == "chain":
        return SubsystemMask.chain(args.length)
    if args.shape == "disk":
        return SubsystemMask.disk(args.radius)
    if not args.vertices:
        raise UsageError("polygon needs vertices (config subsystem.vertices)")
    return SubsystemMask.polygon(args.vertices)


def cmd_ee_lattice(args):
    cavity = _cavity(args)
    ts = _thermal(args, cavity)
    mask = _mask(args)
    cm = build_corr_matrix(mask, ts, cavity)
    S = entanglement_entropy(cm)
    rec = {"N_A": cm.n_sites, "S": S, "S_per_site": S / cm.n_sites}
    if args.shape == "square" and not args.skip_formula:
        chk = doktorsky_check_2d(ts, cavity, args.side, gf=generating_function_2d(ts, cavity))
        rec.update(formula_value=chk["formula_value"], gap=chk["gap"])
    else:
        rec.update(formula_value=None, gap=None)
    rec["volume_ratio"] = cm.volume_ratio
    return render_json("ee lattice", {"T": ts.T, "mu": ts.mu, "a": cavity.lattice_a,
                                      "shape": args.shape, "records": [rec]})


def _density_records(ts, base, ratios):
    lam = base.thermal_wavelength(ts.T)
    records = []
    for r in ratios:
        cav = base.with_lattice(r * lam)
        s_a, s0 = ee_density(ts, cav)
        dens = s_a / cav.lattice_a**2
        records.append({"a_over_lambda_T": r, "a": cav.lattice_a, "S_a": s_a,
                        "S_a_over_a2": dens, "S0": s0, "gap": abs(dens - s0) / s0})
    return records


def cmd_ee_density(args):
    cavity = _cavity(args, 0.0)
    ts = _thermal(args, cavity)
    records = _density_records(ts, cavity, args.a_sweep)
    return render_records("ee density", records,
                          ["a_over_lambda_T", "a", "S_a", "S_a_over_a2", "S0", "gap"],
                          args.format, {"T": ts.T, "mu": ts.mu})


def cmd_szego(args):
    cavity = _cavity(args)
    ts = _thermal(args, cavity)
    rows = szego_check_1d(ts, cavity, args.lam, args.sizes)
    records = [{"N_A": r["N_A"], "log_det_per_site": r["log_det_per_site"],
                "formula_value": r["formula_value"], "gap": r["gap"]} for r in rows]
    return render_json("szego", {"lambda": args.lam, "T": ts.T, "mu": ts.mu,
                                 "a": cavity.lattice_a, "records": records})


def _kinetics_records(traj, target):
    dist = traj.distance_to(target)
    return [{"t": float(t), "sup_distance": float(d), "N": float(n), "E": float(e)}
            for t, d, n, e in zip(traj.times, dist, traj.particle_number, traj.energy)]


def cmd_kinetics_run(args):
    if args.init:
        header, table = read_csv_table(args.init)
        occ_col = header.index("occupation") if "occupation" in header else table.shape[1] - 1
        occ = table[:, occ_col]
        if "eps" in header:
            eps = table[:, header.index("eps")]
        else:
            eps = np.arange(1, occ.size + 1, dtype=float)
        state = KineticState(eps, occ)
    else:
        state = double_step(args.levels)
    kernel = CollisionKernel.constant(args.window)
    ts, target = equilibrium_target(state)
    traj = evolve(state, kernel, args.dt, args.steps, record_every=args.record_every)
    meta = {"levels": state.energies.size, "window": args.window, "dt": args.dt,
            "steps": args.steps, "T_star": ts.T, "mu_star": ts.mu,
            "time_unit": "inverse of the constant transfer rate W"}
    return render_records("kinetics run", _kinetics_records(traj, target),
                          ["t", "sup_distance", "N", "E"], args.format, meta)


def cmd_recurrence(args):
    inp = RecurrenceInput(d_F=args.dF, c_min=args.cmin, c_max=args.cmax,
                          delta_eps=args.deps, eps_rec=args.eps, hbar=args.hbar)
    bounds = recurrence_bounds(inp)
    payload = bounds.as_dict()
    payload["inputs"] = {"d_F": inp.d_F, "c_min": inp.c_min, "c_max": inp.c_max,
                         "delta_eps": inp.delta_eps, "eps": inp.eps_rec, "hbar": inp.hbar}
    return render_json("recurrence", payload)


# ---------------------------------------------------------------------------
# repro


def repro_fig4(E, N, G, samples, seed):
    ens = PartitionEnsemble(energy=E, n_particles=N, group_size=G, samples=samples,
                            seed=seed).fit()
    T, mu, rms = ens.fit_fermi_dirac()
    fit = 1.0 / (np.exp(np.clip((ens.group_centers_ - mu) / T, -700, 700)) + 1.0)
    rows = [(m + 1, c, r, f) for m, (c, r, f) in
            enumerate(zip(ens.group_centers_, ens.mean_ratios_, fit))]
    meta = {"E": E, "N": N, "Gm": G, "samples": samples, "seed": seed,
            "fit_T": T, "fit_mu": mu, "fit_rms": rms}
    return ["m", "eps_m", "ratio_mean", "fd_fit"], rows, meta


def repro_volume_law(sides=(12, 20, 30)):
    ts = ThermalState(T=DEFAULT_T, mu=DEFAULT_MU)
    cavity = CavityModel(volume=1.0e6, lattice_a=DEFAULT_A)
    gf = generating_function_2d(ts, cavity)
    rows = []
    for side in sides:
        r = doktorsky_check_2d(ts, cavity, side, gf=gf)
        rows.append((side, r["N_A"], r["S"], r["S_per_site"], r["formula_value"], r["gap"]))
    meta = {"T": ts.T, "mu": ts.mu, "a": cavity.lattice_a}
    return ["side", "N_A", "S", "S_per_site", "formula_value", "gap"], rows, meta


CONTINUUM_SWEEP = (0.9, 0.7, 0.5, 0.35, 0.25, 0.1)


def repro_continuum_limit(ratios=CONTINUUM_SWEEP, mu=1.0):
    ts = ThermalState(T=1.0, mu=mu)
    recs = _density_records(ts, CavityModel(volume=1.0e6), ratios)
    cols = ["a_over_lambda_T", "a", "S_a_over_a2", "S0", "gap"]
    return cols, [tuple(r[c] for c in cols) for r in recs], {"T": ts.T, "mu": ts.mu}


def repro_kinetics_relax(levels=64, dt=0.01, steps=2000, record_every=20, window=4):
    state = double_step(levels)
    ts, target = equilibrium_target(state)
    traj = evolve(state, CollisionKernel.constant(window), dt, steps, record_every=record_every)
    recs = _kinetics_records(traj, target)
    cols = ["t", "sup_distance", "N", "E"]
    meta = {"levels": levels, "window": window, "dt": dt, "T_star": ts.T, "mu_star": ts.mu}
    return cols, [tuple(r[c] for c in cols) for r in recs], meta


def cmd_repro(args):
    fid = args.figure
    if fid == "fig4":
        if args.panel not in ("b", "d"):
            raise UsageError("repro fig4 needs --panel b or --panel d")
        fid = "fig4" + args.panel
    if fid not in REPRO_IDS:
        raise UsageError(f"unknown figure id {fid!r}; choose from {', '.join(REPRO_IDS)}")
    if fid == "fig4b":
        cols, rows, meta = repro_fig4(21900, 200, 20, args.samples, args.seed)
    elif fid == "fig4d":
        cols, rows, meta = repro_fig4(87800, 400, 40, args.samples, args.seed)
    elif fid == "volume-law":
        cols, rows, meta = repro_volume_law()
    elif fid == "continuum-limit":
        cols, rows, meta = repro_continuum_limit()
    else:
        cols, rows, meta = repro_kinetics_relax()
    meta = {"figure": fid, **meta}
    return render_csv(cols, rows, meta)


# ---------------------------------------------------------------------------
# parser


def build_parser():
    p = _Parser(prog="fermi-cavity", description="Ideal Fermi gas in a chaotic cavity.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    thermo = sub.add_parser("thermo", help="thermal parameters")
    tsub = thermo.add_subparsers(dest="action", parser_class=_Parser)
    tsub.required = True
    solve = tsub.add_parser("solve", help="(T, mu) from (E, N)")
    solve.add_argument("--levels", choices=["harmonic", "continuous", "file"],
                       default="harmonic")
    solve.add_argument("--levels-file", dest="levels_file")
    solve.add_argument("--spacing", type=float, default=1.0)
    solve.add_argument("--E", type=float, required=True)
    solve.add_argument("--N", type=float, required=True)
    _cavity_args(solve)
    _common(solve)
    solve.set_defaults(func=cmd_thermo_solve)
    ehr = tsub.add_parser("ehrenfest", help="Ehrenfest time at a given energy")
    ehr.add_argument("--eps", type=float, required=True)
    _cavity_args(ehr)
    _common(ehr)
    ehr.set_defaults(func=cmd_thermo_ehrenfest)

    part = sub.add_parser("partition", help="random partitions")
    psub = part.add_subparsers(dest="action", parser_class=_Parser)
    psub.required = True
    for name, func in (("sample", cmd_partition_sample), ("vershik", cmd_partition_vershik)):
        q = psub.add_parser(name)
        q.add_argument("--E", type=int, required=True)
        if name == "sample":
            q.add_argument("--N", type=int, required=True)
            q.add_argument("--Gm", type=int, default=20)
            q.add_argument("--chains", type=int, default=1)
        q.add_argument("--samples", type=int, default=10_000 if name == "sample" else 200)
        q.add_argument("--seed", type=int, default=0)
        q.add_argument("--burn-in", dest="burn_in", type=int, default=1_000_000)
        q.add_argument("--thinning", type=int, default=1_000)
        q.add_argument("--max-shift", dest="max_shift", type=int, default=50)
        q.add_argument("--format", choices=["csv", "json"], default="csv")
        _common(q)
        q.set_defaults(func=func)

    corr = sub.add_parser("corr", help="relaxed correlation functions")
    csub = corr.add_subparsers(dest="action", parser_class=_Parser)
    csub.required = True
    ev = csub.add_parser("eval")
    ev.add_argument("--pairs", required=True, help="CSV with columns x1,y1,x2,y2")
    ev.add_argument("--margin", type=float, default=5.0)
    ev.add_argument("--no-margin", dest="no_margin", action="store_true")
    ev.add_argument("--format", choices=["csv", "json"], default="csv")
    _thermal_args(ev)
    _cavity_args(ev)
    _common(ev)
    ev.set_defaults(func=cmd_corr_eval)

    ee = sub.add_parser("ee", help="entanglement entropy")
    esub = ee.add_subparsers(dest="action", parser_class=_Parser)
    esub.required = True
    lat = esub.add_parser("lattice")
    lat.add_argument("--shape", choices=["square", "chain", "disk", "polygon"],
                     default="square")
    lat.add_argument("--side", type=int, default=20)
    lat.add_argument("--length", type=int, default=64)
    lat.add_argument("--radius", type=float, default=10.0)
    lat.add_argument("--skip-formula", dest="skip_formula", action="store_true")
    lat.set_defaults(vertices=None)
    _thermal_args(lat, DEFAULT_T, DEFAULT_MU)
    _cavity_args(lat, lattice=True)
    _common(lat)
    lat.set_defaults(func=cmd_ee_lattice)
    dens = esub.add_parser("density")
    dens.add_argument("--a-sweep", dest="a_sweep", type=_float_list,
                      default=list(CONTINUUM_SWEEP),
                      help="lattice constants in units of the thermal wavelength")
    dens.add_argument("--format", choices=["csv", "json"], default="json")
    _thermal_args(dens, DEFAULT_T, DEFAULT_MU)
    _cavity_args(dens)
    _common(dens)
    dens.set_defaults(func=cmd_ee_density)

    sz = sub.add_parser("szego", help="Szego asymptotics of the chain")
    sz.add_argument("--lambda", dest="lam", type=float, default=3.0)
    sz.add_argument("--sizes", type=_int_list, default=[64, 128, 256])
    _thermal_args(sz, DEFAULT_T, DEFAULT_MU)
    _cavity_args(sz, lattice=True)
    _common(sz)
    sz.set_defaults(func=cmd_szego)

    kin = sub.add_parser("kinetics", help="collision equation")
    ksub = kin.add_subparsers(dest="action", parser_class=_Parser)
    ksub.required = True
    run = ksub.add_parser("run")
    run.add_argument("--levels", type=int, default=64)
    run.add_argument("--init", default=None, help="CSV with an occupation column")
    run.add_argument("--steps", type=int, default=2000)
    run.add_argument("--dt", type=float, default=0.01)
    run.add_argument("--window", type=int, default=4)
    run.add_argument("--record-every", dest="record_every", type=int, default=20)
    run.add_argument("--format", choices=["csv", "json"], default="csv")
    _common(run)
    run.set_defaults(func=cmd_kinetics_run)

    rec = sub.add_parser("recurrence", help="recurrence-time bounds")
    rec.add_argument("--dF", type=int, required=True)
    rec.add_argument("--cmin", type=float, required=True)
    rec.add_argument("--cmax", type=float, required=True)
    rec.add_argument("--deps", type=float, required=True)
    rec.add_argument("--eps", type=float, required=True)
    rec.add_argument("--hbar", type=float, default=1.0)
    _common(rec)
    rec.set_defaults(func=cmd_recurrence)

    rep = sub.add_parser("repro", help="datasets behind the reproduced figures")
    rep.add_argument("figure", help=f"one of {', '.join(REPRO_IDS)} (or fig4 with --panel)")
    rep.add_argument("--panel", choices=["b", "d"])
    rep.add_argument("--seed", type=int, default=0)
    rep.add_argument("--samples", type=int, default=10_000)
    _common(rep)
    rep.set_defaults(func=cmd_repro)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.config:
            _apply_config(args, load_config(args.config))
        text = args.func(args)
        write_output(text, args.out)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    except DomainError as exc:
        print(f"domain error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
