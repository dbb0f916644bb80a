"""Batch front-end: ``phonon-berry {trace,loop-phase,noise-ensemble,validate}``.

Run configurations are INI-style text with one section per concern::

    [run]      seed, workers
    [medium]   kind, rho0, mu0, varies, gradient, amplitude, width, kappa
    [trace]    sigma, r0, p0 | helix_radius, p_mag, revolutions; integrator settings
    [path]     source = circle | csv, with theta/samples/windings or csv/closed
    [noise]    p0_mag, theta0, period, D, dt, n, estimator, bins, dump_raw

Vectors are written as comma-separated triples (``p0 = 1, 0, 0``).  Unknown
sections or keys are rejected.  Every run writes ``effective_config.ini``
(all defaults filled in; it reparses to the same configuration) and a
timestamped ``run.log``; all other artifacts are free of timestamps.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import difflib
import logging
import math
import sys
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import berry, noise, raytrace, validation
from .errors import ParseError, PhononBerryError, ValidationError
from .medium import ADIABATIC_THRESHOLD, MediumModel, adiabaticity

__all__ = ["RunConfig", "parse_config", "run", "main", "SCHEMA", "COMMANDS"]

log = logging.getLogger("phonon_berry")

COMMANDS = ("trace", "loop-phase", "noise-ensemble", "validate")

_VEC = "vec3"
_OPT = object()  # marks an optional key with no default

# section -> key -> (type, default); type is a python type, "vec3" or a tuple of choices
SCHEMA = {
    "run": {
        "seed": (int, 20240611),
        "workers": (int, 1),
    },
    "medium": {
        "kind": (("homogeneous", "linear_gradient", "gaussian_lens", "axial_duct"), "homogeneous"),
        "rho0": (float, 1.0),
        "mu0": (float, 1.0),
        "varies": (("speed", "modulus", "density"), "speed"),
        "gradient": (_VEC, (0.0, 0.0, 0.0)),
        "amplitude": (float, 0.0),
        "width": (float, 1.0),
        "kappa": (float, 0.0),
    },
    "trace": {
        "sigma": (int, 1),
        "r0": (_VEC, (0.0, 0.0, 0.0)),
        "p0": (_VEC, (1.0, 0.0, 0.0)),
        "helix_radius": (float, _OPT),
        "p_mag": (float, 1.0),
        "revolutions": (float, 1.0),
        "hbar_scale": (float, 1.0),
        "t_max": (float, 10.0),
        "rel_tol": (float, 1e-9),
        "abs_tol": (float, 1e-12),
        "max_step": (float, math.inf),
        "max_turn": (float, 2e-3),
        "output_stride": (int, 1),
        "box_half_width": (float, math.inf),
        "adiabatic_threshold": (float, ADIABATIC_THRESHOLD),
    },
    "path": {
        "source": (("circle", "csv"), "circle"),
        "csv": (str, _OPT),
        "closed": (("auto", "true", "false"), "auto"),
        "theta": (float, math.pi / 3),
        "samples": (int, 4096),
        "windings": (int, 1),
        "p_mag": (float, 1.0),
        "sigma": (int, 1),
        "max_step": (float, berry.MAX_STEP),
        "e0": (_VEC, _OPT),
        "gauge_axis": (_VEC, _OPT),
    },
    "noise": {
        "p0_mag": (float, 1.0),
        "theta0": (float, math.pi / 3),
        "period": (float, 100.0),
        "D": (float, 1e-4),
        "dt": (float, 0.01),
        "n": (int, 10_000),
        "estimator": (("linearized", "exact"), "linearized"),
        "bins": (int, 50),
        "dump_raw": (bool, False),
    },
}

SECTIONS = {
    "trace": ("run", "medium", "trace"),
    "loop-phase": ("run", "path"),
    "noise-ensemble": ("run", "noise"),
    "validate": ("run",),
}


@dataclass
class RunConfig:
    command: str
    sections: dict
    source: str = "<config>"
    defaults_applied: list = field(default_factory=list)

    def __getitem__(self, section):
        return self.sections[section]

    @property
    def seed(self) -> int:
        return self.sections["run"]["seed"]

    def to_ini(self) -> str:
        """Effective configuration; reparses to an equivalent :class:`RunConfig`."""
        lines = [f"# command: {self.command}"]
        for name in SECTIONS[self.command]:
            lines.append(f"[{name}]")
            for key, value in self.sections[name].items():
                lines.append(f"{key} = {_format_value(value)}")
            lines.append("")
        return "\n".join(lines)


def _format_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return ", ".join(repr(float(x)) for x in v)
    return str(v)


def _convert(section, key, raw, kind):
    where = f"[{section}] {key}"
    raw = raw.strip()
    try:
        if kind is int:
            return int(raw, 0)
        if kind is float:
            return float(raw)
        if kind is bool:
            low = raw.lower()
            if low in ("true", "yes", "on", "1"):
                return True
            if low in ("false", "no", "off", "0"):
                return False
            raise ValueError(raw)
        if kind == _VEC:
            vals = tuple(float(x) for x in raw.split(","))
            if len(vals) != 3:
                raise ValueError(raw)
            return vals
        if isinstance(kind, tuple):
            if raw not in kind:
                raise ValidationError(f"{where}: {raw!r} is not one of {', '.join(kind)}")
            return raw
        return raw
    except ValidationError:
        raise
    except ValueError:
        label = "3-vector" if kind == _VEC else getattr(kind, "__name__", str(kind))
        raise ValidationError(f"{where}: cannot parse {raw!r} as {label}") from None


def _line_of(text, section, key=None):
    current = None
    for i, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if s.startswith("[") and s.endswith("]"):
            current = s[1:-1].strip()
            if key is None and current == section:
                return i
        elif current == section and key is not None and s.split("=", 1)[0].strip() == key:
            return i
    return None


def parse_config(text: str, command: str, source: str = "<config>") -> RunConfig:
    """Parse and fully validate a run configuration for ``command``.

    Raises
    ------
    ParseError
        Malformed text (with the offending line).
    ValidationError
        Unknown sections or keys (with the nearest valid name), bad values,
        or violated cross-field constraints.
    """
    if command not in COMMANDS:
        raise ValidationError(f"unknown command {command!r}")
    cp = configparser.ConfigParser(interpolation=None, default_section="\x00", inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ParseError(f"{source}: {exc}".replace("\n", " ")) from None

    allowed = SECTIONS[command]
    for name in cp.sections():
        if name not in allowed:
            near = difflib.get_close_matches(name, list(SCHEMA), n=1)
            hint = f" (did you mean [{near[0]}]?)" if near and near[0] in allowed else ""
            line = _line_of(text, name)
            raise ValidationError(
                f"{source}:{line}: section [{name}] is not valid for '{command}'{hint}; allowed: "
                + ", ".join(f"[{s}]" for s in allowed)
            )

    sections, defaults = {}, []
    for name in allowed:
        schema = SCHEMA[name]
        given = cp[name] if cp.has_section(name) else {}
        for key in given:
            if key not in schema:
                near = difflib.get_close_matches(key, list(schema), n=1)
                hint = f"; did you mean '{near[0]}'?" if near else ""
                line = _line_of(text, name, key)
                raise ValidationError(f"{source}:{line}: unknown key '{key}' in [{name}]{hint}")
        values = {}
        for key, (kind, default) in schema.items():
            if key in given:
                values[key] = _convert(name, key, given[key], kind)
            elif default is not _OPT:
                values[key] = default
                defaults.append(f"[{name}] {key} = {_format_value(default)}")
        sections[name] = values

    cfg = RunConfig(command, sections, source, defaults)
    _check(cfg)
    return cfg


def _check(cfg: RunConfig):
    run_ = cfg["run"]
    if not 0 <= run_["seed"] < 2**64:
        raise ValidationError("[run] seed must be an unsigned 64-bit integer")
    if run_["workers"] < 1:
        raise ValidationError("[run] workers must be >= 1")
    if cfg.command == "trace":
        tr = cfg["trace"]
        if tr["sigma"] not in (1, -1):
            raise ValidationError("[trace] sigma must be +1 or -1")
        for key in ("rel_tol", "abs_tol", "t_max", "max_step", "max_turn", "p_mag", "revolutions"):
            if not tr[key] > 0:
                raise ValidationError(f"[trace] {key} must be positive")
        if tr["hbar_scale"] < 0:
            raise ValidationError("[trace] hbar_scale must be >= 0")
        if tr["output_stride"] < 1:
            raise ValidationError("[trace] output_stride must be >= 1")
        if "helix_radius" in tr and cfg["medium"]["kind"] != "axial_duct":
            raise ValidationError("[trace] helix_radius requires [medium] kind = axial_duct")
        try:
            build_medium(cfg["medium"])
        except PhononBerryError as exc:
            raise ValidationError(f"[medium] {exc}") from None
    elif cfg.command == "loop-phase":
        pa = cfg["path"]
        if pa["source"] == "csv" and "csv" not in pa:
            raise ValidationError("[path] source = csv needs a 'csv' file key")
        if pa["source"] == "csv" and not Path(pa["csv"]).is_file():
            raise ValidationError(f"[path] csv file {pa['csv']!r} does not exist")
        if pa["sigma"] not in (1, -1):
            raise ValidationError("[path] sigma must be +1 or -1")
        if pa["samples"] < 3:
            raise ValidationError("[path] samples must be >= 3")
    elif cfg.command == "noise-ensemble":
        no = cfg["noise"]
        for key in ("p0_mag", "period", "dt"):
            if not no[key] > 0:
                raise ValidationError(f"[noise] {key} must be positive")
        if no["D"] < 0:
            raise ValidationError("[noise] D must be >= 0")
        if not 0 < no["theta0"] < math.pi:
            raise ValidationError("[noise] theta0 must lie in (0, pi)")
        if no["dt"] > no["period"] / 1000:
            raise ValidationError(
                f"[noise] dt={no['dt']!r} exceeds the resolution floor period/1000 = {no['period'] / 1000!r}"
            )
        if no["n"] < 2:
            raise ValidationError("[noise] n must be >= 2")


def build_medium(sec) -> MediumModel:
    return MediumModel(sec["kind"], rho0=sec["rho0"], mu0=sec["mu0"], gradient=sec["gradient"],
                       amplitude=sec["amplitude"], width=sec["width"], kappa=sec["kappa"],
                       varies=sec["varies"])


# -- commands --------------------------------------------------------------------


def _write(path: Path, text: str):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _run_trace(cfg: RunConfig, out: Path):
    tr = cfg["trace"]
    medium = build_medium(cfg["medium"])
    t_max = tr["t_max"]
    if "helix_radius" in tr:
        state, period, alpha = raytrace.duct_helix(medium, tr["helix_radius"], tr["p_mag"], tr["sigma"],
                                                   tr["hbar_scale"])
        t_max = tr["revolutions"] * period
        log.info("duct helix: cone angle %.17g rad, revolution period %.17g", alpha, period)
    else:
        state = raytrace.PhononState(tr["r0"], tr["p0"], tr["sigma"])
    config = raytrace.TraceConfig(
        t_max=t_max, hbar_scale=tr["hbar_scale"], rel_tol=tr["rel_tol"], abs_tol=tr["abs_tol"],
        max_step=tr["max_step"], max_turn=tr["max_turn"], output_stride=tr["output_stride"],
        box_half_width=tr["box_half_width"],
    )
    eps = adiabaticity(medium, state.r, float(np.linalg.norm(state.p)), tr["hbar_scale"] or 1.0)
    if eps > tr["adiabatic_threshold"]:
        log.warning("adiabaticity %.3g at the initial point exceeds %.3g", eps, tr["adiabatic_threshold"])
    traj = raytrace.integrate(state, medium, config)
    eps_max = max(adiabaticity(medium, r, float(np.linalg.norm(p)), tr["hbar_scale"] or 1.0)
                  for r, p in zip(traj.r, traj.p))
    if eps_max > tr["adiabatic_threshold"]:
        log.warning("adiabaticity reaches %.3g along the ray (threshold %.3g)", eps_max, tr["adiabatic_threshold"])
    traj.to_csv(out / "trajectory.csv")
    hall = raytrace.hall_shift(traj)
    summary = [
        f"terminated: {traj.terminated.value}",
        f"t_final: {traj.t[-1]:.17g}",
        f"accepted_steps: {traj.n_steps}",
        f"rejected_steps: {traj.n_rejected}",
        f"gamma: {traj.gamma[-1]:.17g}",
        "hall: " + ", ".join(f"{x:.17g}" for x in hall),
        f"max_hall_orthogonality_residual: {traj.max_hall_residual:.17g}",
        f"max_H_drift: {traj.max_energy_drift():.17g}",
        f"max_adiabaticity: {eps_max:.17g}",
    ]
    _write(out / "summary.txt", "\n".join(summary) + "\n")
    return 0


def _run_loop_phase(cfg: RunConfig, out: Path):
    pa = cfg["path"]
    if pa["source"] == "circle":
        path = berry.circle_path(pa["theta"], pa["samples"], pa["windings"], pa["p_mag"])
    else:
        closed = None if pa["closed"] == "auto" else pa["closed"] == "true"
        path = berry.MomentumPath.from_csv(pa["csv"], closed=closed)
    if "gauge_axis" in pa:
        path = berry.rotate_gauge(path, pa["gauge_axis"])
    sigma, max_step = pa["sigma"], pa["max_step"]
    results = []
    if path.closed:
        results.append(berry.rytov_line_integral(path, sigma, max_step=max_step))
    else:
        log.warning("path is open: line-integral and transport estimators skipped")
    results.append(berry.rytov_solid_angle(path, sigma, max_step=max_step))
    if path.closed:
        results.append(berry.rytov_transport(path, sigma, pa.get("e0"), max_step=max_step))
    with open(out / "phases.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["method", "gamma", "gamma_mod_2pi", "winding", "closure_correction"])
        for r in results:
            w.writerow([r.method.value, f"{r.gamma:.17g}", f"{berry.wrap_angle(r.gamma):.17g}",
                        "" if r.winding is None else r.winding, f"{r.closure_correction:.17g}"])
    for r in results:
        log.info("%s: gamma = %.17g", r.method.value, r.gamma)
    return 0


def _run_noise(cfg: RunConfig, out: Path):
    no = cfg["noise"]
    path = noise.PrescribedPath(no["p0_mag"], no["theta0"], no["period"])
    model = noise.NoiseModel(no["D"], cfg.seed, no["dt"])
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", noise.NoiseAmplitudeWarning)
        summary = noise.run_ensemble(path, model, no["n"], no["estimator"], cfg["run"]["workers"], no["bins"])
    for w in caught:
        log.warning("%s", w.message)
    _write(out / "ensemble.txt", summary.to_text())
    if no["dump_raw"]:
        _write(out / "delta_gamma.csv", "delta_gamma\n" + "".join(f"{v:.17g}\n" for v in summary.values))
    return 0


def _run_validate(cfg: RunConfig, out: Path):
    failed = []

    def progress(r):
        slow = r.runtime > r.runtime_limit
        log.info("%s (runtime %.2f s, limit %s s%s)", r.line(), r.runtime, r.runtime_limit,
                 ", TOO SLOW" if slow else "")
        if not r.passed or slow:
            failed.append(r.number)

    results, texts = validation.run_all(cfg.seed, cfg["run"]["workers"], progress)
    validation.write_artifacts(out, texts)
    log.info("%d/%d criteria passed", len(results) - len(failed), len(results))
    return 1 if failed else 0


_DISPATCH = {
    "trace": _run_trace,
    "loop-phase": _run_loop_phase,
    "noise-ensemble": _run_noise,
    "validate": _run_validate,
}


def run(config: RunConfig, out_dir) -> int:
    """Execute ``config``, writing artifacts into ``out_dir``; returns the exit status."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write(out / "effective_config.ini", config.to_ini())
    return _DISPATCH[config.command](config, out)


def _setup_logging(out: Path, quiet: bool):
    log.setLevel(logging.INFO)
    for h in list(log.handlers):
        log.removeHandler(h)
        h.close()
    out.mkdir(parents=True, exist_ok=True)
    fh = logging.FileHandler(out / "run.log", mode="w", encoding="utf-8")
    fh.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(message)s"))
    log.addHandler(fh)
    if not quiet:
        sh = logging.StreamHandler(sys.stderr)
        sh.setFormatter(logging.Formatter("%(levelname)s %(message)s"))
        log.addHandler(sh)
    log.propagate = False
    return fh


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="phonon-berry", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", type=Path, help="run configuration file")
    parser.add_argument("--out", type=Path, default=Path("out"), help="output directory (default: ./out)")
    parser.add_argument("--seed", type=int, help="override [run] seed")
    parser.add_argument("--quiet", action="store_true", help="log to the run.log file only")
    args = parser.parse_args(argv)

    handler = None
    try:
        if args.config is None:
            if args.command != "validate":
                raise ValidationError(f"'{args.command}' needs --config")
            text, source = "", "<defaults>"
        else:
            try:
                text = args.config.read_text(encoding="utf-8")
            except OSError as exc:
                raise ValidationError(f"cannot read config: {exc}") from None
            source = str(args.config)
        config = parse_config(text, args.command, source)
        if args.seed is not None:
            if not 0 <= args.seed < 2**64:
                raise ValidationError("--seed must be an unsigned 64-bit integer")
            config.sections["run"]["seed"] = args.seed
        handler = _setup_logging(args.out, args.quiet)
        log.info("command %s, config %s, seed %d", args.command, source, config.seed)
        for d in config.defaults_applied:
            log.info("default applied: %s", d)
        status = run(config, args.out)
    except (ValidationError, ParseError) as exc:
        print(f"error: {exc.code}: {exc}", file=sys.stderr)
        return 2
    except PhononBerryError as exc:
        print(f"error: {exc.code}: {exc}", file=sys.stderr)
        log.error("%s", exc)
        return 1
    except (OSError, ValueError) as exc:
        print(f"error: RUNTIME: {exc}", file=sys.stderr)
        log.error("%s", exc)
        return 1
    finally:
        if handler is not None:
            log.removeHandler(handler)
            handler.close()
    return status


if __name__ == "__main__":
    sys.exit(main())
