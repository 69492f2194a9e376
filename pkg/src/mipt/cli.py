"""Command line runner: ``mipt run <experiment>`` and ``mipt decode-external``.

Configuration comes from an optional JSON file overlaid with command line
flags. Every run writes its data files plus ``manifest.json`` (config echo,
git-style blob hashes of the data files, wall time). Exit code 2 signals an
invalid configuration and 1 a simulation failure.
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
import re
import sys
import time
from dataclasses import asdict, dataclass, field, fields
from decimal import Decimal, InvalidOperation
from fractions import Fraction
from pathlib import Path

import click
import numpy as np

from mipt import decoder as D
from mipt import experiments as E
from mipt.circuits.geometry import load_geometry
from mipt.circuits.ir import circuit_from_json
from mipt.circuits.shallow import build_shallow_2d

EXPERIMENTS = ("fig2-dual", "fig3-shallow", "fig4-decode", "spectral", "mps-decode", "noisy-haar")


class ConfigError(ValueError):
    """Invalid or incomplete configuration (exit code 2)."""


# -- literal parsing -----------------------------------------------------------------


def parse_real(text) -> float:
    """A real literal; a trailing ``pi`` multiplies an exact rational by pi (``0.4pi``, ``2/5pi``)."""
    if isinstance(text, (int, float)) and not isinstance(text, bool):
        return float(text)
    s = str(text).strip().replace(" ", "")
    if s.endswith("pi"):
        coef = s[:-2].rstrip("*") or "1"
        if coef == "-":
            coef = "-1"
        try:
            frac = Fraction(coef)
        except (ValueError, ZeroDivisionError):
            raise ConfigError(f"bad angle literal {text!r}") from None
        return math.pi * frac.numerator / frac.denominator
    try:
        return float(Fraction(s))
    except (ValueError, ZeroDivisionError):
        raise ConfigError(f"bad number {text!r}") from None


def parse_reals(text) -> list[float]:
    """Comma list of reals and ranges ``a..b`` (step 0.1) or ``a..b:step``, endpoints included."""
    if isinstance(text, (list, tuple)):
        return [v for item in text for v in parse_reals(item)]
    if isinstance(text, (int, float)):
        return [float(text)]
    out = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        m = re.fullmatch(r"([^.:]*\.?[^.:]*)\.\.([^:]+)(?::(.+))?", part)
        if m is None:
            out.append(parse_real(part))
            continue
        try:
            lo, hi = Decimal(m.group(1)), Decimal(m.group(2))
            step = Decimal(m.group(3) or "0.1")
        except InvalidOperation:
            raise ConfigError(f"bad range {part!r}") from None
        if step <= 0 or hi < lo:
            raise ConfigError(f"bad range {part!r}")
        k = 0
        while lo + k * step <= hi:
            out.append(float(lo + k * step))
            k += 1
    if not out:
        raise ConfigError(f"empty list {text!r}")
    return out


def parse_ints(text) -> list[int]:
    vals = parse_reals(text) if not isinstance(text, int) else [text]
    if any(v != int(v) for v in vals):
        raise ConfigError(f"expected integers, got {text!r}")
    return [int(v) for v in vals]


# -- configuration -------------------------------------------------------------------


@dataclass
class ExperimentConfig:
    experiment: str
    seed: int
    output: str
    geometry: list = field(default_factory=list)
    T: list = field(default_factory=list)
    rho: list = field(default_factory=list)
    theta: list = field(default_factory=list)
    N: list = field(default_factory=list)
    L: int | None = None
    shots: int | None = None
    instances: int | None = None
    epsilon: list = field(default_factory=list)
    chi: list = field(default_factory=list)
    backend: str = "exact"
    record: str = "most-probable"
    randomized: int | None = None  # randomized-measurement unitaries per instance (fig2-dual)
    final_layer: bool | None = None
    workers: int = 1

    def to_json(self) -> dict:
        return asdict(self)


DEFAULTS = {
    "fig2-dual": {"N": [12], "T": [7], "theta": [math.pi * 2 / 5, math.pi / 10], "instances": 20},
    "fig3-shallow": {"geometry": ["grid19"], "T": [1, 2, 3, 4, 5, 6, 7, 8], "rho": [1.0], "instances": 20,
                     "final_layer": False},
    "fig4-decode": {"T": [5], "N": [12, 24], "rho": [1.0], "instances": 200, "shots": 200, "epsilon": [0.0]},
    "spectral": {"L": 10, "theta": [math.pi / 10, math.pi * 2 / 5], "instances": 500},
    "mps-decode": {"geometry": ["grid19"], "T": [5], "rho": [0.3, 1.0], "chi": [16, 64], "instances": 20,
                   "shots": 50},
    "noisy-haar": {"N": [6], "epsilon": [0.05, 0.2], "instances": 500},
}

_LIST_PARSERS = {"T": parse_ints, "N": parse_ints, "chi": parse_ints, "rho": parse_reals, "theta": parse_reals,
                 "epsilon": parse_reals}


def build_config(file_values: dict, flag_values: dict) -> ExperimentConfig:
    """Merge defaults, a config file and flags (flags win), then validate."""
    raw = {k: v for k, v in file_values.items()}
    raw.update({k: v for k, v in flag_values.items() if v is not None})
    names = {f.name for f in fields(ExperimentConfig)}
    unknown = set(raw) - names
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    exp = raw.get("experiment")
    if exp not in EXPERIMENTS:
        raise ConfigError(f"experiment must be one of {', '.join(EXPERIMENTS)}")
    for key in ("seed", "output"):
        if raw.get(key) is None:
            raise ConfigError(f"missing required field {key!r}")
    merged = dict(DEFAULTS[exp])
    merged.update(raw)
    vals = {}
    try:
        for key, value in merged.items():
            if key in _LIST_PARSERS:
                vals[key] = _LIST_PARSERS[key](value)
            elif key == "geometry":
                vals[key] = [g.strip() for g in value.split(",")] if isinstance(value, str) else list(value)
            elif key in ("seed", "L", "shots", "instances", "randomized", "workers"):
                vals[key] = None if value is None else int(value)
            elif key == "final_layer":
                vals[key] = None if value is None else bool(value)
            else:
                vals[key] = value
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    cfg = ExperimentConfig(**vals)
    _validate(cfg)
    return cfg


def _validate(cfg: ExperimentConfig) -> None:
    def need(cond, msg):
        if not cond:
            raise ConfigError(msg)

    for key in ("shots", "instances", "L", "randomized"):
        v = getattr(cfg, key)
        need(v is None or v >= 1, f"{key} must be positive")
    need(cfg.workers >= 1, "workers must be positive")
    need(all(0.0 <= r <= 1.0 for r in cfg.rho), "rho must lie in [0, 1]")
    need(all(e >= 0.0 for e in cfg.epsilon), "epsilon must be non-negative")
    need(all(c >= 1 for c in cfg.chi), "chi must be positive")
    need(cfg.backend in ("exact", "mps"), "backend must be exact or mps")
    need(cfg.record in ("most-probable", "sampled"), "record must be most-probable or sampled")
    exp = cfg.experiment
    if exp == "fig2-dual":
        need(cfg.N and cfg.T and cfg.theta and cfg.instances, "fig2-dual needs N, T, theta and instances")
        need(all(n >= 2 and n % 2 == 0 for n in cfg.N), "fig2-dual N must be even")
        need(all(t >= 2 for t in cfg.T), "fig2-dual T must be at least 2")
        need(all(0 < th <= math.pi / 2 + 1e-12 for th in cfg.theta), "theta must lie in (0, pi/2]")
        need(cfg.randomized is None or cfg.shots, "randomized measurements need shots")
    elif exp == "fig3-shallow":
        need(cfg.geometry and cfg.T and cfg.instances, "fig3-shallow needs geometry, T and instances")
        need(all(1 <= t <= 8 for t in cfg.T), "T must lie in 1..8")
    elif exp in ("fig4-decode", "mps-decode"):
        need(cfg.T and cfg.rho and cfg.instances and cfg.shots, f"{exp} needs T, rho, instances and shots")
        need(cfg.geometry or cfg.N, f"{exp} needs a geometry or N list")
        need(all(1 <= t <= 8 for t in cfg.T), "T must lie in 1..8")
        if exp == "mps-decode" or cfg.backend == "mps":
            need(cfg.chi, "the mps backend needs chi")
    elif exp == "spectral":
        need(cfg.L and cfg.theta and cfg.instances, "spectral needs L, theta and instances")
        need(2 <= cfg.L <= 14 and cfg.L % 2 == 0, "L must be even and at most 14")
    elif exp == "noisy-haar":
        need(cfg.N and cfg.epsilon and cfg.instances, "noisy-haar needs N, epsilon and instances")
        need(all(1 <= n <= 8 for n in cfg.N), "noisy-haar N must lie in 1..8")


def _geometries(cfg: ExperimentConfig) -> list:
    names = list(cfg.geometry) or [f"n{n}" for n in cfg.N]
    out = []
    for name in names:
        try:
            out.append(load_geometry(name))
        except (OSError, KeyError, ValueError) as exc:
            raise ConfigError(f"unknown geometry {name!r}: {exc}") from None
    return out


# -- output --------------------------------------------------------------------------


def blob_hash(data: bytes) -> str:
    """Git blob object id of ``data``."""
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return int(v)
    return v


def write_rows(path: Path, columns: list, rows: list) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: _fmt(row.get(k, "")) for k in columns})


def write_manifest(out: Path, config: dict, files: list, wall: float, extra=None) -> None:
    manifest = {
        "config": config,
        "files": {p.name: blob_hash(p.read_bytes()) for p in files},
        "wall_time_s": round(wall, 3),
    }
    if extra:
        manifest.update(extra)
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


# -- experiments ---------------------------------------------------------------------


def run_fig2(cfg: ExperimentConfig, out: Path) -> list:
    rows = []
    randomized = None if cfg.randomized is None else (cfg.randomized, cfg.shots)
    for n in cfg.N:
        for t in cfg.T:
            for th in cfg.theta:
                res = E.dual_entropy_curves(n, t, th, cfg.instances, cfg.seed, cfg.record, randomized, cfg.workers)
                for i, curve in enumerate(res.entropies):
                    for v, s in enumerate(curve):
                        err = "" if res.errors is None else res.errors[i, v]
                        rows.append({"n": n, "t": t, "theta": th, "instance": i, "subsystem": "window",
                                     "volume": v, "s2": s, "stderr": err})
                    err = "" if res.half_cut_errors is None else res.half_cut_errors[i]
                    rows.append({"n": n, "t": t, "theta": th, "instance": i, "subsystem": "half-cut",
                                 "volume": n // 2, "s2": res.half_cut[i], "stderr": err})
    path = out / "fig2_dual.csv"
    write_rows(path, ["n", "t", "theta", "instance", "subsystem", "volume", "s2", "stderr"], rows)
    return [path]


def run_fig3(cfg: ExperimentConfig, out: Path) -> list:
    ent_rows, mi_rows = [], []
    for geom in _geometries(cfg):
        for rho in cfg.rho:
            for t in cfg.T:
                info = E.shallow_chain_information(geom, t, cfg.instances, cfg.seed, rho,
                                                   final_layer=bool(cfg.final_layer), workers=cfg.workers)
                for i in range(cfg.instances):
                    for v, s in enumerate(info.entropies[i]):
                        ent_rows.append({"geometry": geom.name, "rho": rho, "T": t, "instance": i, "volume": v,
                                         "s2": s})
                    for k, x in enumerate(info.separations):
                        mi_rows.append({"geometry": geom.name, "rho": rho, "T": t, "instance": i, "x": int(x),
                                        "mi_postselected": info.mi[i, k], "mi_control": info.mi_control[i, k]})
    p1, p2 = out / "fig3_entropy.csv", out / "fig3_mutual_information.csv"
    write_rows(p1, ["geometry", "rho", "T", "instance", "volume", "s2"], ent_rows)
    write_rows(p2, ["geometry", "rho", "T", "instance", "x", "mi_postselected", "mi_control"], mi_rows)
    return [p1, p2]


def run_fig4(cfg: ExperimentConfig, out: Path, save_shots: bool = False) -> list:
    results, files = [], []
    chis = cfg.chi if cfg.backend == "mps" else [None]
    for geom in _geometries(cfg):
        for t in cfg.T:
            for eps in cfg.epsilon:
                for chi in chis:
                    for rho in cfg.rho:
                        pt = E.decode_point(geom, t, rho, cfg.instances, cfg.shots, cfg.seed, eps, cfg.backend,
                                            chi, cfg.workers)
                        pt.result.labels.update(T=t, epsilon=eps)
                        results.append(pt.result)
                        if save_shots:
                            files.extend(_save_shots(out, geom, t, rho, eps, pt))
    path = out / "fig4_decode.csv"
    D.write_results(path, results, extra_columns=("T", "epsilon", "chi"))
    return [path] + files


def _save_shots(out: Path, geom, t, rho, eps, pt) -> list:
    """Shot records plus the circuits that produced them, ready for ``decode-external``."""
    ids = np.concatenate([np.full(len(b), i) for i, b in enumerate(pt.bits)])
    seeds = np.concatenate([np.full(len(b), s, dtype=np.int64) for b, s in zip(pt.bits, pt.seeds)])
    tag = f"{geom.name}_T{t}_rho{rho!r}_eps{eps!r}"
    shots_path, circuit_path = out / f"shots_{tag}.jsonl", out / f"circuits_{tag}.jsonl"
    D.write_shots(shots_path, ids, np.concatenate(pt.bits), seeds)
    write_circuits(circuit_path, {i: build_shallow_2d(geom, t, rho, s) for i, s in enumerate(pt.seeds)})
    return [shots_path, circuit_path]


def run_spectral(cfg: ExperimentConfig, out: Path) -> list:
    stats = E.level_statistics(cfg.L, cfg.theta, cfg.instances, cfg.seed, cfg.workers)
    rows = [{"L": cfg.L, "theta": th, "theta_over_pi": th / math.pi, "r_bar": s.r_bar, "stderr": s.stderr,
             "n_used": s.n_used, "n_skipped": s.n_skipped} for th, s in zip(cfg.theta, stats)]
    path = out / "spectral.csv"
    write_rows(path, ["L", "theta", "theta_over_pi", "r_bar", "stderr", "n_used", "n_skipped"], rows)
    return [path]


def run_mps(cfg: ExperimentConfig, out: Path) -> list:
    rows, results = [], []
    for geom in _geometries(cfg):
        for t in cfg.T:
            for rho in cfg.rho:
                exact, comps = E.mps_comparison(geom, t, rho, cfg.instances, cfg.shots, cfg.chi, cfg.seed,
                                                cfg.workers)
                exact.labels.update(T=t, chi="exact")
                results.append(exact)
                for c in comps:
                    c.result.labels.update(T=t)
                    results.append(c.result)
                    rows.append({"N": geom.n_qubits, "T": t, "rho": rho, "chi": c.chi,
                                 "tau_agreement": c.agreement, "trunc_error": c.trunc_error,
                                 "zeta_rmax": c.result.zeta[-1], "zeta_exact_rmax": exact.zeta[-1]})
    p1, p2 = out / "mps_decode.csv", out / "mps_summary.csv"
    D.write_results(p1, results, extra_columns=("T", "chi"))
    write_rows(p2, ["N", "T", "rho", "chi", "tau_agreement", "trunc_error", "zeta_rmax", "zeta_exact_rmax"], rows)
    return [p1, p2]


def run_haar(cfg: ExperimentConfig, out: Path) -> list:
    rows = []
    for n in cfg.N:
        for eps in cfg.epsilon:
            hp = E.noisy_haar_purities(n, eps, cfg.instances, cfg.seed)
            for n_a in range(n + 1):
                rows.append({"N": n, "epsilon": eps, "N_A": n_a, "purity": hp.mean[n_a],
                             "stderr": hp.stderr[n_a], "predicted": hp.predicted[n_a]})
    path = out / "noisy_haar.csv"
    write_rows(path, ["N", "epsilon", "N_A", "purity", "stderr", "predicted"], rows)
    return [path]


RUNNERS = {"fig2-dual": run_fig2, "fig3-shallow": run_fig3, "fig4-decode": run_fig4, "spectral": run_spectral,
           "mps-decode": run_mps, "noisy-haar": run_haar}


def execute(cfg: ExperimentConfig, **kw) -> list:
    """Run ``cfg`` and write data files plus the manifest; returns the data file paths."""
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    files = RUNNERS[cfg.experiment](cfg, out, **kw)
    write_manifest(out, cfg.to_json(), files, time.perf_counter() - start)
    return files


# -- click wiring --------------------------------------------------------------------


def _fail(code: int, msg: str):
    click.echo(f"error: {msg}", err=True)
    sys.exit(code)


def _common_options(fn):
    opts = [
        click.option("--config", "config_path", type=click.Path(dir_okay=False), help="JSON config file."),
        click.option("--seed", type=int, help="Master seed (required here or in the config)."),
        click.option("--output", "-o", help="Output directory."),
        click.option("--geometry", help="Geometry names or JSON paths, comma separated."),
        click.option("--T", "T", help="Depths, e.g. 3,6 or 1..8:1."),
        click.option("--rho", help="Gate densities, e.g. 0.3..1.0."),
        click.option("--theta", help="Angles, e.g. 0.1pi,0.4pi."),
        click.option("--N", "N", help="System sizes, e.g. 12,24."),
        click.option("--L", "L", type=int, help="Chain length (spectral)."),
        click.option("--shots", type=int),
        click.option("--instances", type=int, help="Circuit instances or disorder realizations."),
        click.option("--epsilon", help="Depolarizing strengths."),
        click.option("--chi", help="Bond dimensions."),
        click.option("--backend", type=click.Choice(["exact", "mps"])),
        click.option("--record", type=click.Choice(["most-probable", "sampled"])),
        click.option("--randomized", type=int, help="Randomized-measurement unitaries per instance."),
        click.option("--final-layer/--no-final-layer", "final_layer", default=None),
        click.option("--workers", type=int, help="Worker processes (changes wall time only)."),
    ]
    for opt in reversed(opts):
        fn = opt(fn)
    return fn


def _load_file(path) -> dict:
    if path is None:
        return {}
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, ValueError) as exc:
        _fail(2, f"cannot read config {path}: {exc}")
    if not isinstance(data, dict):
        _fail(2, f"config {path} must hold a JSON object")
    return data


@click.group()
def main():
    """Measurement-induced phase experiments on simulated processors."""


@main.group()
def run():
    """Run one experiment and write CSV data plus a manifest."""


def _make_command(name: str):
    @_common_options
    @click.option("--save-shots", is_flag=True, help="Also write the sampled shots as JSONL (fig4-decode).")
    def command(config_path, save_shots, **flags):
        file_values = _load_file(config_path)
        file_values.setdefault("experiment", name)
        if file_values["experiment"] != name:
            _fail(2, f"config is for {file_values['experiment']}, not {name}")
        try:
            cfg = build_config(file_values, flags)
        except ConfigError as exc:
            _fail(2, str(exc))
        kw = {"save_shots": True} if save_shots and name == "fig4-decode" else {}
        try:
            files = execute(cfg, **kw)
        except ConfigError as exc:
            _fail(2, str(exc))
        except Exception as exc:  # simulation failure
            _fail(1, f"{type(exc).__name__}: {exc}")
        for p in files:
            click.echo(str(p))

    command.__doc__ = f"Run the {name} experiment."
    return click.command(name)(command)


for _name in EXPERIMENTS:
    run.add_command(_make_command(_name))


def read_circuits(path) -> dict:
    """Circuit file: one serialized circuit, or JSONL lines ``{"circuit_id": k, "circuit": {...}}``."""
    text = Path(path).read_text()
    try:
        single = json.loads(text)
        if isinstance(single, dict) and "moments" in single:
            return {None: circuit_from_json(text)}
    except ValueError:
        pass
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            out[int(rec["circuit_id"])] = circuit_from_json(json.dumps(rec["circuit"]))
        except (ValueError, KeyError, TypeError) as exc:
            raise ConfigError(f"{path}:{lineno}: bad circuit record ({exc})") from None
    if not out:
        raise ConfigError(f"{path}: no circuits")
    return out


def write_circuits(path, circuits: dict) -> None:
    """Inverse of :func:`read_circuits` for ``{circuit_id: Circuit}``."""
    from mipt.circuits.ir import circuit_to_json

    with open(path, "w") as fh:
        for cid in sorted(circuits):
            fh.write(json.dumps({"circuit_id": int(cid), "circuit": json.loads(circuit_to_json(circuits[cid]))},
                                sort_keys=True) + "\n")


def decode_files(shots_file, circuit_file, geometry: str, backend: str = "exact", chi=None, seed: int = 0):
    """Decode a shots file against its circuits; returns (DecodeResult, rejected count)."""
    geom = load_geometry(geometry)
    circuits = read_circuits(circuit_file)
    ids, bits, _ = D.read_shots(shots_file, n_qubits=geom.n_qubits)
    decodes = []
    for cid in sorted(set(ids.tolist())):
        circ = circuits.get(cid, circuits.get(None))
        if circ is None:
            raise ConfigError(f"no circuit for circuit_id {cid}")
        if circ.n_qubits != bits.shape[1]:
            raise ConfigError(f"circuit {cid} has {circ.n_qubits} qubits, records have {bits.shape[1]} bits")
        dec, _ = E.decode_bits(circ, geom, bits[ids == cid], cid, backend, chi)
        decodes.append(dec)
    res = D.zeta(decodes, rng=seed, labels={"N": geom.n_qubits, "rho": circuits[next(iter(circuits))].metadata.get("rho", "")})
    return res


@main.command("decode-external")
@click.argument("shots_file", type=click.Path(exists=True, dir_okay=False))
@click.argument("circuit_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--geometry", required=True, help="Geometry supplying the probe and decoding patches.")
@click.option("--backend", type=click.Choice(["exact", "mps"]), default="exact")
@click.option("--chi", type=int, help="Bond dimension for the mps backend.")
@click.option("--seed", type=int, required=True, help="Seed of the bootstrap error bars.")
@click.option("--output", "-o", required=True, help="Result CSV path.")
def decode_external(shots_file, circuit_file, geometry, backend, chi, seed, output):
    """Decode externally produced shot records."""
    if backend == "mps" and not chi:
        _fail(2, "the mps backend needs --chi")
    start = time.perf_counter()
    try:
        res = decode_files(shots_file, circuit_file, geometry, backend, chi, seed)
    except ConfigError as exc:
        _fail(2, str(exc))
    except ValueError as exc:  # unparsable shot lines carry their line number
        _fail(2, str(exc))
    except Exception as exc:
        _fail(1, f"{type(exc).__name__}: {exc}")
    out = Path(output)
    out.parent.mkdir(parents=True, exist_ok=True)
    D.write_results(out, [res])
    config = {"shots_file": str(shots_file), "circuit_file": str(circuit_file), "geometry": geometry,
              "backend": backend, "chi": chi, "seed": seed, "output": str(output)}
    manifest = out.with_suffix(".manifest.json")
    body = {"config": config, "files": {out.name: blob_hash(out.read_bytes())},
            "wall_time_s": round(time.perf_counter() - start, 3), "n_rejected": res.n_rejected}
    manifest.write_text(json.dumps(body, indent=2, sort_keys=True) + "\n")
    if res.n_rejected:
        click.echo(f"rejected {res.n_rejected} records inconsistent with their circuits", err=True)
    click.echo(str(out))


if __name__ == "__main__":
    main()
