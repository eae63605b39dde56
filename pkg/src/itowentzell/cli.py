"""Batch front-end: ``itowentzell verify|converge|convert|list-scenarios``.

Config files are ``key = value`` lines; ``#`` starts a comment and blank lines
are ignored.  Keys:

    command     verify | converge | convert | list-scenarios
    scenario    catalog name
    params.<k>  scenario parameter
    T           horizon (default 1)
    N           steps (verify, convert)
    levels      comma-separated doubling step counts (converge)
    M           paths (default 100)
    seed        master seed (default 0); path p uses seed + p
    mode        centered | non-centered (default non-centered)
    z.<i>       initial state component i (default: catalog value)
    format      csv | json (default csv)

Exit status: 0 when every row passes, 1 on a tolerance failure, 2 on a bad
config, 3 when the simulation itself fails.

CSV columns for ``verify``:

    seed,N,lhs,rhs,residual,drift_Q,drift_transport,drift_diffusion,
    drift_cross,diffusion_D,diffusion_transport,jump_field,jump_G,ok
"""

import argparse
import csv
import dataclasses
import io
import json
import math
import sys
from dataclasses import dataclass, field

import numpy as np

from .catalog import CATALOG, catalog, check_params
from .errors import ItoWentzellError, ScenarioError
from .noise import TimeGrid
from .scenario import CENTERED, NONCENTERED, to_centered, to_noncentered
from .wentzell import EXACT_TOL, TERMS, convergence_study, verify_many

COMMANDS = ("verify", "converge", "convert", "list-scenarios")
FORMATS = ("csv", "json")
ROUND_TRIP_TOL = 1e-14
CONVERT_N = 10

VERIFY_COLUMNS = ("seed", "N", "lhs", "rhs", "residual") + TERMS + ("ok",)
CONVERGE_COLUMNS = ("N", "dt", "M", "rms", "max_abs", "order", "exact", "ok")


class ConfigError(ValueError):
    def __init__(self, message, line=None):
        self.line = line
        super().__init__(message if line is None else f"line {line}: {message}")


@dataclass
class RunConfig:
    command: str
    scenario: str = None
    params: dict = field(default_factory=dict)
    T: float = 1.0
    N: int = None
    levels: tuple = None
    M: int = 100
    seed: int = 0
    mode: str = NONCENTERED
    z: tuple = None
    format: str = "csv"

    def to_text(self):
        """Serialize to the config grammar; ``parse_config`` inverts it."""
        lines = [f"command = {self.command}"]
        if self.scenario is not None:
            lines.append(f"scenario = {self.scenario}")
        lines += [f"params.{k} = {v!r}" for k, v in sorted(self.params.items())]
        lines.append(f"T = {self.T!r}")
        if self.N is not None:
            lines.append(f"N = {self.N}")
        if self.levels is not None:
            lines.append("levels = " + ", ".join(str(n) for n in self.levels))
        lines += [f"M = {self.M}", f"seed = {self.seed}", f"mode = {self.mode}"]
        if self.z is not None:
            lines += [f"z.{i} = {v!r}" for i, v in enumerate(self.z)]
        lines.append(f"format = {self.format}")
        return "\n".join(lines) + "\n"


def _int(value, key, line, low):
    try:
        v = int(value)
    except ValueError:
        raise ConfigError(f"{key} must be an integer, got {value!r}", line) from None
    if v < low:
        raise ConfigError(f"{key} must be >= {low}, got {v}", line)
    return v


def _float(value, key, line):
    try:
        v = float(value)
    except ValueError:
        raise ConfigError(f"{key} must be a number, got {value!r}", line) from None
    if not math.isfinite(v):
        raise ConfigError(f"{key} must be finite, got {value!r}", line)
    return v


def parse_config(text, command=None):
    """Parse config text into a validated :class:`RunConfig`.

    ``command`` (from the command line) fills in or must agree with the
    ``command`` key.  Errors carry the offending line number.
    """
    raw, where = {}, {}
    params, z = {}, {}
    n_lines = 0
    for n_lines, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"expected 'key = value', got {body!r}", n_lines)
        key, value = (s.strip() for s in body.split("=", 1))
        if not value:
            raise ConfigError(f"empty value for {key!r}", n_lines)
        if key in where or (key.startswith("params.") and key[7:] in params) or (key.startswith("z.") and key[2:] in z):
            raise ConfigError(f"duplicate key {key!r}", n_lines)
        if key.startswith("params.") and len(key) > 7:
            params[key[7:]] = (_float(value, key, n_lines), n_lines)
        elif key.startswith("z.") and len(key) > 2:
            z[key[2:]] = (_float(value, key, n_lines), n_lines)
        elif key in ("command", "scenario", "T", "N", "levels", "M", "seed", "mode", "format"):
            raw[key] = value
        else:
            raise ConfigError(f"unknown key {key!r}", n_lines)
        where[key] = n_lines
    end = n_lines + 1

    def at(key):
        return where.get(key, end)

    cmd = raw.get("command", command)
    if cmd is None:
        raise ConfigError("missing required key 'command'", end)
    if cmd not in COMMANDS:
        raise ConfigError(f"unknown command {cmd!r}; expected one of {', '.join(COMMANDS)}", at("command"))
    if command is not None and cmd != command:
        raise ConfigError(f"config says command={cmd} but {command} was requested", at("command"))
    cfg = RunConfig(cmd)

    if "format" in raw:
        if raw["format"] not in FORMATS:
            raise ConfigError(f"format must be csv or json, got {raw['format']!r}", at("format"))
        cfg.format = raw["format"]
    if "mode" in raw:
        if raw["mode"] not in (CENTERED, NONCENTERED):
            raise ConfigError(f"mode must be {CENTERED} or {NONCENTERED}, got {raw['mode']!r}", at("mode"))
        cfg.mode = raw["mode"]
    if "T" in raw:
        cfg.T = _float(raw["T"], "T", at("T"))
        if cfg.T <= 0:
            raise ConfigError(f"T must be positive, got {cfg.T!r}", at("T"))
    if "N" in raw:
        cfg.N = _int(raw["N"], "N", at("N"), 1)
    if "M" in raw:
        cfg.M = _int(raw["M"], "M", at("M"), 1)
    if "seed" in raw:
        cfg.seed = _int(raw["seed"], "seed", at("seed"), 0)
    if "levels" in raw:
        levels = tuple(_int(s.strip(), "levels", at("levels"), 1) for s in raw["levels"].split(","))
        if any(b != 2 * a for a, b in zip(levels, levels[1:])):
            raise ConfigError(f"levels must double at every step, got {list(levels)}", at("levels"))
        cfg.levels = levels

    if cmd == "list-scenarios":
        return cfg

    if "scenario" not in raw:
        raise ConfigError("missing required key 'scenario'", end)
    name = raw["scenario"]
    if name not in CATALOG:
        raise ConfigError(f"unknown scenario {name!r}; known: {', '.join(CATALOG)}", at("scenario"))
    cfg.scenario = name
    entry = CATALOG[name]
    for k, (_, ln) in params.items():
        if k not in entry.required and k not in entry.optional:
            raise ConfigError(f"scenario {name!r} does not take parameter {k!r}", ln)
    try:
        cfg.params = check_params(name, {k: v for k, (v, _) in params.items()})
    except ScenarioError as exc:
        bad = [ln for k, (_, ln) in params.items() if k == "lambda"]
        raise ConfigError(str(exc), bad[0] if "lambda" in str(exc) and bad else end) from None

    if z:
        dim = len(CATALOG[name].z)
        try:
            idx = {int(k): v for k, (v, _) in z.items()}
        except ValueError:
            raise ConfigError("z components must be indexed 0..n-1", min(ln for _, ln in z.values())) from None
        if sorted(idx) != list(range(dim)):
            raise ConfigError(f"z needs components 0..{dim - 1} for {name!r}", min(ln for _, ln in z.values()))
        cfg.z = tuple(idx[i] for i in range(dim))

    if cmd == "verify" and cfg.N is None:
        raise ConfigError("verify needs N", end)
    if cmd == "converge":
        if cfg.levels is None:
            raise ConfigError("converge needs levels", end)
        if cfg.M < 30:
            raise ConfigError(f"converge needs M >= 30, got {cfg.M}", at("M"))
    return cfg


# -- running -------------------------------------------------------------------


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.17g}"


def _json_value(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if v is None or isinstance(v, str):
        return v
    v = float(v)
    return v if math.isfinite(v) else repr(v)


def render(columns, rows, fmt):
    if fmt == "json":
        return json.dumps([{c: _json_value(r[c]) for c in columns} for r in rows], indent=1) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in columns])
    return buf.getvalue()


def _spec(cfg):
    return catalog(cfg.scenario, cfg.params, centered=cfg.mode == CENTERED, T=cfg.T, z=cfg.z)


def _verify(cfg, threads):
    spec = _spec(cfg)
    reports = verify_many(spec, cfg.N, range(cfg.seed, cfg.seed + cfg.M), form=cfg.mode, threads=threads)
    rows = []
    for rep in reports:
        row = {c: getattr(rep, c) for c in VERIFY_COLUMNS[:-1]}
        ok = math.isfinite(rep.residual)
        if spec.exact:
            ok = ok and abs(rep.residual) < EXACT_TOL
        row["ok"] = ok
        rows.append(row)
    return VERIFY_COLUMNS, rows


def _converge(cfg, threads):
    spec = _spec(cfg)
    table = convergence_study(spec, cfg.levels, cfg.M, cfg.seed, form=cfg.mode, threads=threads)
    rows = []
    for i, r in enumerate(table.rows):
        row = dataclasses.asdict(r)
        if spec.exact:
            row["ok"] = r.exact
        else:
            row["ok"] = math.isfinite(r.rms) and (i == 0 or r.rms < table.rows[i - 1].rms)
        rows.append(row)
    return CONVERGE_COLUMNS, rows


def _convert(cfg, threads):
    spec = _spec(cfg)
    there = to_noncentered(spec) if cfg.mode == CENTERED else to_centered(spec)
    back = to_centered(there) if cfg.mode == CENTERED else to_noncentered(there)
    grid = TimeGrid(cfg.T, cfg.N or CONVERT_N)
    t = grid.nodes
    zz = np.repeat(spec.z[None, :], len(t), axis=0)
    a = [s.process.drift(t) for s in (spec, there, back)]
    q = [s.field.drift(t, zz) for s in (spec, there, back)]
    comp_g = spec.process.compensator(t)
    comp_G = spec.field.compensator(t, zz)

    n = spec.n
    columns = ["t"]
    for i in range(n):
        columns += [f"a{i}_original", f"a{i}_converted", f"a{i}_reconverted", f"int_g{i}"]
    columns += ["Q_original", "Q_converted", "Q_reconverted", "int_G", "ok"]
    rows = []
    for k, tk in enumerate(t):
        row = {"t": tk}
        err = 0.0
        for i in range(n):
            row.update({
                f"a{i}_original": a[0][k, i], f"a{i}_converted": a[1][k, i],
                f"a{i}_reconverted": a[2][k, i], f"int_g{i}": comp_g[k, i],
            })
            err = max(err, abs(a[2][k, i] - a[0][k, i]))
        row.update({"Q_original": q[0][k], "Q_converted": q[1][k], "Q_reconverted": q[2][k], "int_G": comp_G[k]})
        err = max(err, abs(q[2][k] - q[0][k]))
        row["ok"] = err <= ROUND_TRIP_TOL
        rows.append(row)
    return tuple(columns), rows


def _list(cfg, threads):
    rows = [
        {
            "name": e.name,
            "required": " ".join(e.required),
            "optional": " ".join(f"{k}={v!r}" for k, v in e.optional.items()),
            "exact": e.exact,
            "summary": e.summary,
        }
        for e in CATALOG.values()
    ]
    for r in rows:
        r["ok"] = True
    return ("name", "required", "optional", "exact", "summary"), rows


_RUNNERS = {"verify": _verify, "converge": _converge, "convert": _convert, "list-scenarios": _list}


def run(cfg, threads=1):
    """Execute ``cfg``; returns ``(exit_status, rendered_output)``."""
    columns, rows = _RUNNERS[cfg.command](cfg, threads)
    status = 0 if all(r["ok"] for r in rows) else 1
    return status, render(columns, rows, cfg.format)


def main(argv=None):
    ap = argparse.ArgumentParser(prog="itowentzell", description=__doc__.split("\n\n")[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="config file ('-' for stdin)")
    ap.add_argument("--out", help="output file (default stdout)")
    ap.add_argument("--format", choices=FORMATS)
    ap.add_argument("--seed", type=int)
    ap.add_argument("--threads", type=int, default=1)
    ns = ap.parse_args(argv)

    try:
        if ns.config is None:
            if ns.command != "list-scenarios":
                raise ConfigError(f"{ns.command} needs --config")
            text = ""
        elif ns.config == "-":
            text = sys.stdin.read()
        else:
            with open(ns.config, encoding="utf-8") as fh:
                text = fh.read()
        cfg = parse_config(text, command=ns.command)
        if ns.seed is not None:
            if ns.seed < 0:
                raise ConfigError(f"seed must be non-negative, got {ns.seed}")
            cfg.seed = ns.seed
        if ns.format is not None:
            cfg.format = ns.format
        if ns.threads < 1:
            raise ConfigError(f"threads must be >= 1, got {ns.threads}")
    except (ConfigError, ScenarioError, OSError) as exc:
        print(f"itowentzell: {exc}", file=sys.stderr)
        return 2

    try:
        status, text = run(cfg, threads=ns.threads)
    except ScenarioError as exc:
        print(f"itowentzell: {exc}", file=sys.stderr)
        return 2
    except ItoWentzellError as exc:
        print(f"itowentzell: {exc}", file=sys.stderr)
        return 3

    if ns.out:
        with open(ns.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if status:
        print("itowentzell: some rows failed their tolerance (ok=false)", file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())
