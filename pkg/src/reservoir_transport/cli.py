"""Command-line front end: config parsing, subcommands, CSV/JSON output and sweeps.

Configuration files are TOML.  A finite-reservoir run looks like::

    mode = "finite"            # or "stationary"
    statistics = "fermi"       # or "bose"
    tpdm = false

    [lattice]
    M = 6
    J = 1.0
    eps_S = 2.0
    gamma_L = 0.5
    gamma_R = 0.5

    [reservoirs]
    beta = 1.0
    trap = [0.2, 0.2, 0.05]    # or a [reservoirs.dos] table with energies/values
    mu_L = 1.2                 # or n_L / n_R, the resonant occupations
    mu_R = 0.7

    [time]
    t_max = 6e4
    grid = "log"               # or "linear"

All energies are in units of J and times in units of 1/J.
"""

import argparse
import concurrent.futures
import csv
import io
import itertools
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__
from .analysis import (
    alpha_approx,
    alpha_exact,
    equilibration_fits,
    heff_spectrum,
    metastability_onset,
    ness,
    relaxation_fits,
    short_time_series,
)
from .dynamics import (
    FINITE,
    IntegratorOptions,
    StationaryReservoirs,
    SystemState,
    integrate,
    linear_time_grid,
    log_time_grid,
    long_range_pairs,
)
from .errors import ConfigError, DomainError, FitWindowError, TransportError
from .lattice import LatticeConfig
from .reservoirs import (
    HarmonicTrap3D,
    ReservoirModel,
    Statistics,
    TabulatedDOS,
    chemical_potential_for_occupation,
    equilibrium_solve,
    occupation,
    particle_number,
)

SCHEMA_VERSION = 1
NON_DECAYING = "non-decaying"
SUBCOMMANDS = ("simulate", "stationary", "ness", "spectrum", "equilibrium", "shorttime", "sweep")

_SCHEMA = {
    "mode": None,
    "statistics": None,
    "tpdm": None,
    "lattice": {"M", "J", "eps_S", "gamma_L", "gamma_R"},
    "reservoirs": {"beta", "trap", "dos", "mu_L", "mu_R", "n_L", "n_R"},
    "time": {"t_max", "t_min", "grid", "points_per_decade", "max_rows", "rows"},
    "integrator": {"rtol", "atol", "tpdm_max_sites", "conservation_tol", "pauli_tol"},
    "sweep": {"M", "gamma_bar", "simulate"},
}
_REQUIRED = [
    "mode",
    "statistics",
    "lattice.M",
    "lattice.J",
    "lattice.eps_S",
    "lattice.gamma_L",
    "lattice.gamma_R",
    "reservoirs.mu_L | reservoirs.n_L",
    "reservoirs.mu_R | reservoirs.n_R",
]


@dataclass(frozen=True)
class TimeSpec:
    t_max: float = 1e3
    grid: str = "log"
    t_min: float = 1e-3
    points_per_decade: int = 200
    max_rows: int = 5000
    rows: int = 1001

    def grid_points(self):
        if self.grid == "log":
            return log_time_grid(self.t_max, self.t_min, self.points_per_decade, self.max_rows)
        return linear_time_grid(self.t_max, self.rows)


@dataclass(frozen=True, eq=False)
class RunConfig:
    """Validated run description.  ``document`` is the effective TOML-shaped dict."""

    lattice: LatticeConfig
    model: ReservoirModel | None
    statistics: Statistics
    mode: str
    mu_L0: float
    mu_R0: float
    n_L0: float
    n_R0: float
    tpdm: bool
    time: TimeSpec
    options: IntegratorOptions
    sweep: dict
    document: dict
    derived: dict = field(default_factory=dict)

    @property
    def reservoir_mode(self):
        return FINITE if self.mode == "finite" else StationaryReservoirs(self.n_L0, self.n_R0)


def _number(doc, path, kind=float):
    section, _, key = path.rpartition(".")
    value = (doc.get(section, {}) if section else doc).get(key)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"expected a number, got {value!r}", path)
    if kind is int:
        if int(value) != value:
            raise ConfigError(f"expected an integer, got {value!r}", path)
        return int(value)
    return float(value)


def _check_keys(doc):
    for key, value in doc.items():
        if key not in _SCHEMA:
            raise ConfigError("unknown key", key)
        allowed = _SCHEMA[key]
        if allowed is None:
            continue
        if not isinstance(value, dict):
            raise ConfigError("expected a table", key)
        for sub in value:
            if sub not in allowed:
                raise ConfigError("unknown key", f"{key}.{sub}")


def _missing(doc):
    out = []
    for item in _REQUIRED:
        if not any(_has(doc, alt.strip()) for alt in item.split("|")):
            out.append(item)
    return out


def _has(doc, path):
    section, _, key = path.rpartition(".")
    holder = doc.get(section) if section else doc
    return isinstance(holder, dict) and key in holder


def _build_dos(res):
    if "trap" in res and "dos" in res:
        raise ConfigError("give either trap or dos, not both", "reservoirs")
    if "trap" in res:
        trap = res["trap"]
        if not isinstance(trap, list) or len(trap) != 3:
            raise ConfigError("expected [omega_x, omega_y, omega_z]", "reservoirs.trap")
        return HarmonicTrap3D(*trap)
    if "dos" in res:
        dos = res["dos"]
        if not isinstance(dos, dict) or set(dos) != {"energies", "values"}:
            raise ConfigError("expected a table with keys energies and values", "reservoirs.dos")
        return TabulatedDOS(dos["energies"], dos["values"])
    return None


def parse_config(text, overrides=None):
    """Validate a TOML document and derive the initial reservoir quantities.

    ``overrides`` maps dotted key paths to values and is applied before
    validation, so the echoed document always reflects what was run.
    """
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"not valid TOML: {exc}") from exc
    for path, value in (overrides or {}).items():
        section, _, key = path.rpartition(".")
        (doc.setdefault(section, {}) if section else doc)[key] = value
    _check_keys(doc)
    missing = _missing(doc)
    if missing:
        raise ConfigError("missing required keys: " + ", ".join(missing))

    mode = doc["mode"]
    if mode not in ("finite", "stationary"):
        raise ConfigError(f"expected 'finite' or 'stationary', got {mode!r}", "mode")
    statistics = Statistics.parse(doc["statistics"])
    tpdm = doc.get("tpdm", False)
    if not isinstance(tpdm, bool):
        raise ConfigError("expected true or false", "tpdm")
    lattice = LatticeConfig(
        _number(doc, "lattice.M", int),
        *(_number(doc, f"lattice.{k}") for k in ("J", "eps_S", "gamma_L", "gamma_R")),
    )

    res = doc["reservoirs"]
    has_mu = "mu_L" in res or "mu_R" in res
    has_n = "n_L" in res or "n_R" in res
    if has_mu and has_n:
        raise ConfigError("give either mu_L/mu_R or n_L/n_R, not both", "reservoirs")
    pair = ("mu_L", "mu_R") if has_mu else ("n_L", "n_R")
    for k in pair:
        if k not in res:
            raise ConfigError("missing required key", f"reservoirs.{k}")
    dos = _build_dos(res)
    beta = _number(doc, "reservoirs.beta") if "beta" in res else None
    model = None
    if beta is not None:
        model = ReservoirModel(statistics, beta, dos)
    if mode == "finite" and (model is None or dos is None):
        raise ConfigError("finite reservoirs need beta and a trap or dos", "reservoirs")

    derived = {}
    mu_L = mu_R = math.nan
    if has_mu:
        mu_L, mu_R = _number(doc, "reservoirs.mu_L"), _number(doc, "reservoirs.mu_R")
        if model is None:
            raise ConfigError("chemical potentials need beta", "reservoirs.beta")
        if dos is not None:
            derived["E0"] = model.E0
        for key, mu in (("mu_L", mu_L), ("mu_R", mu_R)):
            try:
                if dos is not None:
                    model._check_mu(mu)
                occupation(lattice.eps_S, mu, model)
            except DomainError as exc:
                raise ConfigError(str(exc), f"reservoirs.{key}") from None
        n_L, n_R = occupation(lattice.eps_S, mu_L, model), occupation(lattice.eps_S, mu_R, model)
    else:
        n_L, n_R = _number(doc, "reservoirs.n_L"), _number(doc, "reservoirs.n_R")
        for key, n in (("n_L", n_L), ("n_R", n_R)):
            if n < 0 or (statistics is Statistics.FERMI and n > 1):
                raise ConfigError(f"occupation {n} is outside the allowed range", f"reservoirs.{key}")
        if model is not None:
            try:
                mu_L = chemical_potential_for_occupation(n_L, lattice.eps_S, model)
                mu_R = chemical_potential_for_occupation(n_R, lattice.eps_S, model)
            except DomainError as exc:
                raise ConfigError(str(exc), "reservoirs") from None
    derived["n_L0"] = n_L
    derived["n_R0"] = n_R
    if mode == "finite":
        derived["E0"] = model.E0
        for key, mu in (("mu_L", mu_L), ("mu_R", mu_R)):
            try:
                model._check_mu(mu)
            except DomainError as exc:
                raise ConfigError(str(exc), f"reservoirs.{key}") from None
        derived["mu_L0"] = mu_L
        derived["mu_R0"] = mu_R
        derived["N_L0"] = particle_number(mu_L, model)
        derived["N_R0"] = particle_number(mu_R, model)
        derived["N0"] = derived["N_L0"] + derived["N_R0"]

    t = doc.get("time", {})
    time = TimeSpec(
        t_max=_number(doc, "time.t_max") if "t_max" in t else TimeSpec.t_max,
        grid=t.get("grid", "log"),
        t_min=_number(doc, "time.t_min") if "t_min" in t else TimeSpec.t_min,
        points_per_decade=_number(doc, "time.points_per_decade", int) if "points_per_decade" in t else 200,
        max_rows=_number(doc, "time.max_rows", int) if "max_rows" in t else 5000,
        rows=_number(doc, "time.rows", int) if "rows" in t else 1001,
    )
    if time.grid not in ("log", "linear"):
        raise ConfigError(f"expected 'log' or 'linear', got {time.grid!r}", "time.grid")
    if not time.t_max > 0:
        raise ConfigError("must be > 0", "time.t_max")

    integ = doc.get("integrator", {})
    opts = IntegratorOptions(
        **{k: _number(doc, f"integrator.{k}", int if k == "tpdm_max_sites" else float) for k in integ}
    )
    if not (opts.rtol > 0 and opts.atol > 0):
        raise ConfigError("tolerances must be > 0", "integrator")

    sweep = dict(doc.get("sweep", {}))
    for key in ("M", "gamma_bar"):
        if key in sweep and not (isinstance(sweep[key], list) and sweep[key]):
            raise ConfigError("expected a non-empty list", f"sweep.{key}")

    return RunConfig(
        lattice=lattice,
        model=model,
        statistics=statistics,
        mode=mode,
        mu_L0=mu_L,
        mu_R0=mu_R,
        n_L0=n_L,
        n_R0=n_R,
        tpdm=tpdm,
        time=time,
        options=opts,
        sweep=sweep,
        document=doc,
        derived=derived,
    )


def dump_toml(doc):
    """Serialize a config document (scalars, lists, one level of tables) as TOML."""

    def fmt(v):
        if isinstance(v, bool):
            return "true" if v else "false"
        if isinstance(v, str):
            return json.dumps(v)
        if isinstance(v, float):
            return repr(v) if math.isfinite(v) else ("nan" if math.isnan(v) else ("inf" if v > 0 else "-inf"))
        if isinstance(v, list):
            return "[" + ", ".join(fmt(x) for x in v) + "]"
        return str(v)

    lines = [f"{k} = {fmt(v)}" for k, v in doc.items() if not isinstance(v, dict)]
    for name, table in doc.items():
        if not isinstance(table, dict):
            continue
        lines.append(f"\n[{name}]")
        for k, v in table.items():
            if isinstance(v, dict):
                lines.append(f"{k} = {{ " + ", ".join(f"{a} = {fmt(b)}" for a, b in v.items()) + " }")
            else:
                lines.append(f"{k} = {fmt(v)}")
    return "\n".join(lines) + "\n"


def _cell(value):
    if isinstance(value, str):
        return value
    if value is None:
        return ""
    v = float(value)
    if math.isinf(v):
        return NON_DECAYING if v > 0 else "-inf"
    return "%.17g" % v


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (np.floating, float)):
        v = float(value)
        if math.isinf(v):
            return NON_DECAYING if v > 0 else "-inf"
        return None if math.isnan(v) else v
    if isinstance(value, np.integer):
        return int(value)
    return value


def _header(kind, config, extra=None):
    lines = [
        f"schema: reservoir-transport/{kind}/{SCHEMA_VERSION}",
        f"version: {__version__}",
        "derived: " + json.dumps(_jsonable(config.derived), sort_keys=True),
    ]
    for key, value in (extra or {}).items():
        lines.append(f"{key}: " + json.dumps(_jsonable(value), sort_keys=True))
    lines.append("config:")
    lines.extend("  " + line for line in dump_toml(config.document).splitlines() if line)
    return lines


def _write_table(out, kind, config, columns, rows, meta=None):
    """Write a CSV table with a '#' header block and, for file output, a JSON sidecar."""
    buf = io.StringIO()
    for line in _header(kind, config, meta):
        buf.write("# " + line + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(v) for v in row])
    text = buf.getvalue()
    if out is None:
        sys.stdout.write(text)
        return
    path = Path(out)
    path.write_text(text)
    sidecar = {
        "schema": f"reservoir-transport/{kind}/{SCHEMA_VERSION}",
        "version": __version__,
        "columns": list(columns),
        "rows": len(rows),
        "config": config.document,
        "config_toml": dump_toml(config.document),
        "derived": config.derived,
    }
    sidecar.update(meta or {})
    path.with_name(path.name + ".meta.json").write_text(
        json.dumps(_jsonable(sidecar), indent=2, sort_keys=True) + "\n"
    )


def trajectory_columns(M, tpdm):
    cols = ["t", "mu_L", "mu_R", "n_L", "n_R", "N_L", "N_R", "N_S"]
    cols += [f"n_{l + 1}" for l in range(M)]
    cols += [f"j_{l + 1}_{l + 2}" for l in range(M - 1)]
    cols += ["I"]
    cols += [f"abs_sigma_{j + 1}_{k + 1}" for j, k in long_range_pairs(M)]
    if tpdm:
        cols += [f"var_n_{l + 1}" for l in range(M)]
        cols += [f"var_j_{l + 1}_{l + 2}" for l in range(M - 1)]
    cols += ["conservation_residual"]
    return cols


def trajectory_rows(traj):
    obs = traj.observables
    n_rows = len(traj.t)
    nan = np.full(n_rows, math.nan)
    blocks = [
        traj.t[:, None],
        traj.mu_L[:, None],
        traj.mu_R[:, None],
        obs.n_res_L[:, None],
        obs.n_res_R[:, None],
        (traj.N_L if traj.N_L is not None else nan)[:, None],
        (traj.N_R if traj.N_R is not None else nan)[:, None],
        obs.N_S[:, None],
        obs.n,
        obs.j,
        obs.I[:, None],
        obs.coherences,
    ]
    if obs.var_n is not None:
        blocks += [obs.var_n, obs.var_j]
    res = traj.conservation_residual if traj.conservation_residual is not None else nan
    blocks.append(res[:, None])
    return np.hstack(blocks).tolist()


def _initial_state(config, mode):
    M = config.lattice.M
    mu_L, mu_R = (config.mu_L0, config.mu_R0) if mode is FINITE else (math.nan, math.nan)
    return SystemState.empty_lattice(M, mu_L, mu_R, tpdm=config.tpdm)


def _simulate(config, out, mode, fit):
    traj = integrate(
        _initial_state(config, mode),
        config.lattice,
        config.model,
        mode,
        config.time.grid_points(),
        config.options,
        statistics=config.statistics,
    )
    meta = {
        "integrator": {"method": "Dormand-Prince 5(4)", "steps": traj.n_steps, "rhs_evaluations": traj.nfev},
        "onset_definition": "first time after their peak at which all |sigma_jk|, |j-k|>1, "
        "fall below 1e-3 of that peak",
    }
    try:
        meta["t_star"] = metastability_onset(traj.t, traj.sigma)
    except FitWindowError:
        meta["t_star"] = None
    if traj.conservation_residual is not None:
        meta["max_conservation_residual"] = float(np.max(np.abs(traj.conservation_residual)))
    if fit:
        meta["fits"] = _fit_summary(traj)
    _write_table(out, "trajectory", config, trajectory_columns(config.lattice.M, config.tpdm), trajectory_rows(traj), meta)
    return traj


def _fit_summary(traj):
    if traj.finite:
        analysis = equilibration_fits(traj, coherences=False)
        return {
            "alpha_exact": analysis.alpha.alpha,
            "mu_inf": analysis.mu_inf,
            "n_inf": analysis.n_inf,
            "tau_rel": analysis.tau_rel,
            "window_start": analysis.t_a,
            "rates": {k: f.rate for k, f in analysis.fits.items()},
            "rate_ci": {k: list(f.rate_ci) for k, f in analysis.fits.items()},
            "failures": analysis.failures,
        }
    spectrum = heff_spectrum(traj.lattice)
    fits = relaxation_fits(traj)
    return {
        "Gamma_min": spectrum.Gamma_min,
        "rates": {f"sigma_{j + 1}_{k + 1}": f.rate for (j, k), f in fits.items()},
    }


def _stationary_config(config):
    """Same run with the reservoirs frozen at the initial resonant occupations."""
    return RunConfig(**{**config.__dict__, "mode": "stationary"})


def _ness_table(config, out):
    state = ness(config.n_L0 - config.n_R0, 0.5 * (config.n_L0 + config.n_R0), config.lattice)
    rows = [[l + 1, state.n_inf[l]] for l in range(config.lattice.M)]
    meta = {"j_inf": state.j_inf, "delta_n": config.n_L0 - config.n_R0, "fixed_point_residual": state.residual}
    _write_table(out, "ness", config, ["site", "n_inf"], rows, meta)
    return state


def _spectrum_table(config, out):
    spec = heff_spectrum(config.lattice)
    rows = [[k + 1, e.real, g] for k, (e, g) in enumerate(zip(spec.eigenvalues, spec.Gamma))]
    meta = {"Gamma_min": spec.Gamma_min, "tau_rel": spec.tau_rel, "decaying": spec.decaying}
    _write_table(out, "spectrum", config, ["k", "energy", "Gamma"], rows, meta)
    return spec


def _equilibrium_table(config, out):
    if config.mode != "finite":
        raise ConfigError("the equilibrium subcommand needs finite reservoirs", "mode")
    N0 = config.derived["N0"]
    eq = equilibrium_solve(N0, config.lattice, config.model, mu_bracket=(config.mu_L0, config.mu_R0))
    exact = alpha_exact(config.lattice, config.model, eq.mu_inf)
    approx = alpha_approx(
        config.lattice, config.n_L0 - config.n_R0, config.derived["N_L0"] - config.derived["N_R0"]
    )
    rows = [
        ["N0", N0],
        ["mu_inf", eq.mu_inf],
        ["n_inf", eq.n_inf],
        ["N_inf", eq.N_inf],
        ["residual", eq.residual],
        ["alpha_exact", exact.alpha],
        ["alpha_approx", approx.alpha],
        ["tau_eq", exact.tau_eq],
    ]
    _write_table(out, "equilibrium", config, ["quantity", "value"], rows)
    return eq


def _shorttime_table(config, out):
    series = short_time_series(config.lattice, config.n_L0, config.n_R0)
    M = config.lattice.M
    cols = ["j", "k", "p"] + [f"c{p}_{part}" for p in range(1, series.order + 1) for part in ("re", "im")]
    rows = []
    for j in range(M):
        for k in range(M):
            c = series.coefficients[j, k, 1:]
            rows.append([j + 1, k + 1, series.exponents[j, k]] + [x for v in c for x in (v.real, v.imag)])
    _write_table(out, "shorttime", config, cols, rows)
    return series


def sweep_point(config, M, gamma_bar):
    """Analysis (and optionally a simulation) for one grid point; runs in a worker."""
    lattice = LatticeConfig(M, config.lattice.J, config.lattice.eps_S, gamma_bar, gamma_bar)
    spec = heff_spectrum(lattice)
    row = {"M": M, "gamma_bar": gamma_bar, "Gamma_min": spec.Gamma_min, "tau_rel": spec.tau_rel}
    row["j_inf"] = ness(config.n_L0 - config.n_R0, 0.5 * (config.n_L0 + config.n_R0), lattice).j_inf
    row["mu_inf"] = row["alpha_exact"] = math.nan
    if config.mode == "finite":
        eq = equilibrium_solve(config.derived["N0"], lattice, config.model, (config.mu_L0, config.mu_R0))
        row["mu_inf"] = eq.mu_inf
        row["alpha_exact"] = alpha_exact(lattice, config.model, eq.mu_inf).alpha
    row["fit_rate"] = math.nan
    if config.sweep.get("simulate", False):
        point = RunConfig(**{**config.__dict__, "lattice": lattice, "tpdm": False})
        mode = point.reservoir_mode
        traj = integrate(
            _initial_state(point, mode), lattice, config.model, mode, config.time.grid_points(), config.options,
            statistics=config.statistics,
        )
        if mode is FINITE:
            row["fit_rate"] = equilibration_fits(traj, coherences=False).fits["delta_n"].rate
        else:
            row["fit_rate"] = relaxation_fits(traj)[(0, 0)].rate
    return row


SWEEP_COLUMNS = ["M", "gamma_bar", "Gamma_min", "tau_rel", "j_inf", "mu_inf", "alpha_exact", "fit_rate"]


def run_sweep(config, workers=1):
    """Evaluate the Cartesian (M, gamma_bar) grid; rows come back in grid order."""
    Ms = config.sweep.get("M", [config.lattice.M])
    gammas = config.sweep.get("gamma_bar", [config.lattice.gamma_bar])
    grid = [(int(m), float(g)) for m, g in itertools.product(Ms, gammas)]
    if workers <= 1:
        return [sweep_point(config, m, g) for m, g in grid]
    with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(sweep_point, config, m, g) for m, g in grid]
        return [f.result() for f in futures]


def _sweep_table(config, out, workers):
    rows = run_sweep(config, workers)
    _write_table(out, "sweep", config, SWEEP_COLUMNS, [[r[c] for c in SWEEP_COLUMNS] for r in rows])
    return rows


def run_subcommand(name, config, out=None, workers=1, fit=False):
    """Run one subcommand on a parsed config; returns the computed object."""
    if name == "simulate":
        return _simulate(config, out, config.reservoir_mode, fit)
    if name == "stationary":
        stationary = _stationary_config(config)
        return _simulate(stationary, out, stationary.reservoir_mode, fit)
    if name == "ness":
        return _ness_table(config, out)
    if name == "spectrum":
        return _spectrum_table(config, out)
    if name == "equilibrium":
        return _equilibrium_table(config, out)
    if name == "shorttime":
        return _shorttime_table(config, out)
    if name == "sweep":
        return _sweep_table(config, out, workers)
    raise ConfigError(f"unknown subcommand {name!r}")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="reservoir-transport",
        description="Transport of non-interacting bosons or fermions through a lattice between two reservoirs.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="TOML configuration file")
        p.add_argument("--out", help="output CSV path (stdout if omitted; sidecar written only for files)")
        if name in ("simulate", "stationary", "sweep"):
            p.add_argument("--tpdm", action="store_true", default=None, help="also evolve the two-particle density matrix")
            p.add_argument("--rtol", type=float)
            p.add_argument("--atol", type=float)
            p.add_argument("--t-max", type=float, dest="t_max")
            p.add_argument("--grid", choices=("log", "linear"))
        if name in ("simulate", "stationary"):
            p.add_argument("--fit", action="store_true", help="add fitted decay rates to the metadata")
        if name == "sweep":
            p.add_argument("--workers", type=int, default=1)
    return parser


def _overrides(args):
    table = {"tpdm": "tpdm", "rtol": "integrator.rtol", "atol": "integrator.atol", "t_max": "time.t_max", "grid": "time.grid"}
    return {path: getattr(args, name) for name, path in table.items() if getattr(args, name, None) is not None}


def _report(category, message, code, key=None):
    payload = {"error": category, "message": message, "exit_code": code}
    if key is not None:
        payload["key"] = key
    sys.stderr.write(json.dumps(payload) + "\n")
    return code


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        text = Path(args.config).read_text()
    except OSError as exc:
        return _report("io", str(exc), 4)
    try:
        config = parse_config(text, _overrides(args))
        run_subcommand(args.command, config, args.out, getattr(args, "workers", 1), getattr(args, "fit", False))
    except TransportError as exc:
        return _report(exc.category, str(exc), exc.exit_code, getattr(exc, "key", None))
    except OSError as exc:
        return _report("io", str(exc), 4)
    return 0


if __name__ == "__main__":
    sys.exit(main())
