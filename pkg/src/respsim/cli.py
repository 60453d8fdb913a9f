"""Command-line entry point and the run pipelines behind each command.

Every command reads one config, writes plain CSV/JSON files into the output
directory and reports progress on stderr.  Exit status is 0 on success, 2 for
configuration or usage errors and 1 for failures during a run.
"""

import argparse
import itertools
import json
import logging
import os
import platform
import sys
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from importlib import metadata as importlib_metadata
from pathlib import Path

import numpy as np
import yaml

from . import analysis, auxiliary, continuum, protocol, sampling, tables
from .config import AUTO, ConfigError, expand_range, load_config, parse_axis_values, parse_config, resolve_axis

log = logging.getLogger("respsim")
CONFIG_DIR = Path(__file__).with_name("configs")
COMMANDS = ("oracle", "protocol", "sample", "convolve", "auxcheck", "budget", "sweep")


def package_version():
    try:
        return importlib_metadata.version("respsim")
    except importlib_metadata.PackageNotFoundError:
        return "0+unknown"


@dataclass
class ResultBundle:
    """Everything one command produced, with provenance for each artifact."""

    command: str
    config: object
    tables: dict = field(default_factory=dict)
    curves: dict = field(default_factory=dict)
    series: dict = field(default_factory=dict)
    elimination: object = None
    budget: object = None
    metadata: dict = field(default_factory=dict)

    def write(self, out_dir):
        """Write all artifacts under ``out_dir``; returns the written paths."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        written = []
        for name, table in self.tables.items():
            path = out / f"{name}.csv"
            tables.write_table(table, path)
            written.append(path)
        for name, curve in self.curves.items():
            path = out / f"{name}.csv"
            tables.write_series(path, {"t": curve.times, "P": curve.values, "sigma_P": curve.errors})
            written.append(path)
        for name, (columns, meta) in self.series.items():
            path = out / f"{name}.csv"
            tables.write_series(path, columns, meta)
            written.append(path)
        if self.elimination is not None:
            rep = self.elimination
            path = out / "elimination.csv"
            cols = {"chi": rep.chis, "chi_sq": rep.chis**2, "probe_error": rep.probe_errors, "max_error": rep.max_errors}
            tables.write_series(path, cols, {"exponent": rep.exponent, "probe_time": rep.probe_time})
            written.append(path)
            path = out / "elimination_curves.csv"
            cols = {"t": rep.times, **{f"error_chi_sq_{c**2:.6g}": rep.errors[n] for n, c in enumerate(rep.chis)}}
            tables.write_series(path, cols)
            written.append(path)
        if self.budget is not None:
            path = out / "budget.json"
            tables.write_json(path, asdict(self.budget))
            written.append(path)
        tables.atomic_write_text(out / "config.yaml", self.config.to_text())
        tables.write_json(out / "bundle.json", {**self.metadata, "files": sorted(p.name for p in written)})
        return written + [out / "config.yaml", out / "bundle.json"]


def _base_metadata(command, cfg):
    return {
        "command": command,
        "config_hash": cfg.hash(),
        "respsim_version": package_version(),
        "numpy_version": np.__version__,
        "python_version": platform.python_version(),
        "seed": cfg["sampling"]["seed"],
        "rng": sampling.RNG_ALGORITHM,
        "units": "dimensionless model units (times are inverse rates)",
    }


# ---------------------------------------------------------------- domains
def _eval_times(cfg):
    times = expand_range(cfg["wavepacket"]["times"])
    return np.array([cfg["wavepacket"]["t_eval"]]) if times is None or times.size == 0 else times


def _wavepacket(cfg, dt, t):
    w = cfg["wavepacket"]
    return continuum.aligned_gaussian(w["sigma_t"], w["t0"], dt, t, w["span"])


def table_extent(cfg, dt=None):
    """``(t_max_m, t_max_int)``; ``auto`` covers the wavepacket up to the last evaluation time."""
    dt = cfg["grid"]["dt"] if dt is None else dt
    g = cfg["grid"]
    if AUTO in (g["t_max_m"], g["t_max_int"]):
        t_last = max(float(_eval_times(cfg).max()), cfg["wavepacket"]["t_eval"])
        reach = t_last - _wavepacket(cfg, dt, t_last).t_start
    return tuple(reach if g[k] == AUTO else g[k] for k in ("t_max_m", "t_max_int"))


def protocol_config(cfg, composite=None, dt=None):
    dt = cfg["grid"]["dt"] if dt is None else dt
    t_m, t_int = table_extent(cfg, dt)
    p = cfg["pulse"]
    return protocol.ProtocolConfig(
        composite if composite is not None else cfg.build_composite(),
        dt,
        t_m,
        t_int,
        p["t_gamma"],
        p["n_gamma"],
        p["same_time_coeff"],
    )


# ---------------------------------------------------------------- commands
def cmd_oracle(cfg, overrides=None):
    cfg = cfg.with_overrides(overrides or {})
    t0 = time.perf_counter()
    model = cfg.build_model()
    t_m, t_int = table_extent(cfg)
    table = continuum.greens_table_exact(model, cfg["grid"]["dt"], t_m, t_int)
    table.metadata.update(provenance="exact", model=model.name, config_hash=cfg.hash())
    meta = _base_metadata("oracle", cfg)
    meta.update(wall_time=time.perf_counter() - t0, artifacts={"greens_exact": "exact"})
    return ResultBundle("oracle", cfg, tables={"greens_exact": table}, metadata=meta)


def _protocol_series(result, dt):
    M, K = result.p_two.shape
    jm, kk = np.meshgrid(np.arange(M), np.arange(K), indexing="ij")
    return {
        "p_one": ({"t_m": dt * np.arange(result.p_one.size), "P": result.p_one}, {"provenance": "simulated"}),
        "p_two": ({"t_m": dt * jm.ravel(), "t_int": dt * kk.ravel(), "P": result.p_two.ravel()}, {"provenance": "simulated"}),
    }


def cmd_protocol(cfg, overrides=None, exact_sampling=False):
    cfg = cfg.with_overrides(overrides or {})
    t0 = time.perf_counter()
    pc = protocol_config(cfg)
    result = protocol.protocol_run(pc)
    bundle_tables = {"greens_reconstructed": result.reconstruction}
    artifacts = {"greens_reconstructed": "reconstructed"}
    s = cfg["sampling"]
    if s["enabled"]:
        noisy = sampling.sampled_protocol_run(result, s["N"], s["seed"], exact=exact_sampling)
        bundle_tables["greens_sampled"] = noisy.reconstruction
        artifacts["greens_sampled"] = noisy.metadata["provenance"]
    meta = _base_metadata("protocol", cfg)
    meta.update(wall_time=time.perf_counter() - t0, artifacts=artifacts, protocol_hash=pc.hash(), **result.reconstruction.metadata)
    return ResultBundle("protocol", cfg, tables=bundle_tables, series=_protocol_series(result, pc.dt), metadata=meta)


def cmd_sample(cfg, overrides=None, exact_sampling=False):
    cfg = cfg.with_overrides({"sampling.enabled": True, **(overrides or {})})
    bundle = cmd_protocol(cfg, exact_sampling=exact_sampling)
    bundle.command = bundle.metadata["command"] = "sample"
    return bundle


@lru_cache(maxsize=32)
def _reference(canonical, t_eval, times_key):
    cfg = parse_config(canonical)
    w, ref_dt = cfg["wavepacket"], cfg["convolve"]["reference_dt"]
    model = cfg.build_model()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        ref = analysis.reference_population(model, w["sigma_t"], w["t0"], t_eval, ref_dt, w["span"])
        peak = analysis.peak_population(model, w["sigma_t"], w["t0"], np.array(times_key), ref_dt, w["span"])
    return ref, peak


def _reference_cfg_key(cfg):
    """Canonical text of the parts that determine the exact reference."""
    keep = {k: cfg[k] for k in ("model", "wavepacket", "convolve")}
    keep["grid"] = {"dt": 1.0}
    return json.dumps(keep, sort_keys=True)


def source_table(cfg, source=None):
    source = source or cfg["convolve"]["source"]
    if source == "exact":
        return cmd_oracle(cfg).tables["greens_exact"]
    bundle = cmd_sample(cfg) if source == "sampled" else cmd_protocol(cfg)
    return bundle.tables["greens_sampled" if source == "sampled" else "greens_reconstructed"]


def cmd_convolve(cfg, overrides=None, table=None):
    """Population curve for the configured wavepacket.

    ``table`` (a :class:`GreensTable` or a path) replaces the configured source.
    """
    cfg = cfg.with_overrides(overrides or {})
    t0 = time.perf_counter()
    if isinstance(table, (str, os.PathLike)):
        table = tables.read_table(table)
    provenance = table.metadata.get("provenance", "file") if table is not None else None
    if table is None:
        table = source_table(cfg)
        provenance = table.metadata.get("provenance", cfg["convolve"]["source"])
    q = cfg["convolve"]["quadrature"]
    times = _eval_times(cfg)
    vals, errs = [], []
    for t in times:
        wp = _wavepacket(cfg, table.dt, t)
        vals.append(continuum.convolve(table, wp, t, q))
        errs.append(sampling.sigma_population(wp, table, t, q))
    curve = continuum.PopulationCurve(times, np.array(vals), np.array(errs))
    meta = _base_metadata("convolve", cfg)
    meta.update(wall_time=time.perf_counter() - t0, artifacts={"population": provenance}, table_dt=table.dt, quadrature=q)
    return ResultBundle("convolve", cfg, curves={"population": curve}, metadata=meta)


def cmd_auxcheck(cfg, overrides=None):
    cfg = cfg.with_overrides(overrides or {})
    t0 = time.perf_counter()
    a = cfg["auxcheck"]
    times = expand_range(a["times"])
    chis = np.sqrt(np.asarray(a["chi_sq"], dtype=float))
    report = auxiliary.compare_elimination(cfg.build_model(), None, chis, times, probe_time=a["t_probe"])
    meta = _base_metadata("auxcheck", cfg)
    meta.update(wall_time=time.perf_counter() - t0, exponent=report.exponent, artifacts={"elimination": "exact"})
    return ResultBundle("auxcheck", cfg, elimination=report, metadata=meta)


def cmd_budget(cfg, overrides=None, target_sigma=None):
    cfg = cfg.with_overrides(overrides or {})
    if target_sigma is not None:
        cfg = cfg.with_overrides({"budget.target_sigma": float(target_sigma)})
    b = cfg["budget"]
    plan = sampling.plan_budget(b["target_sigma"], b["dt"], b["domain"], b["p_typical"], b["n_gamma"])
    meta = _base_metadata("budget", cfg)
    meta.update(artifacts={"budget": "planned"})
    return ResultBundle("budget", cfg, budget=plan, metadata=meta)


def _sweep_point(cfg_text, overrides, index, out_dir):
    cfg = parse_config(cfg_text).with_overrides(overrides)
    sw = cfg["sweep"]
    row = {"index": index, **{k: float(v) for k, v in overrides.items()}}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        if sw["quantity"] == "population":
            table = source_table(cfg)
            t = cfg["wavepacket"]["t_eval"]
            value = continuum.convolve(table, _wavepacket(cfg, table.dt, t), t, cfg["convolve"]["quadrature"])
            ref, peak = _reference(_reference_cfg_key(cfg), t, tuple(_eval_times(cfg)))
            scale = peak if cfg["convolve"]["scale"] == "peak" else abs(ref)
        else:
            table = source_table(cfg)
            j, k = (int(round(sw[x] / table.dt)) for x in ("t_m", "t_int"))
            if not (0 <= j < table.shape[0] and 0 <= k < table.shape[1]):
                raise ValueError(f"sweep point (t_m={sw['t_m']}, t_int={sw['t_int']}) lies outside the table")
            value = float(table.values[j, k])
            ref = continuum.greens_exact(cfg.build_model(), j * table.dt, k * table.dt)
            scale = abs(ref)
    row.update(value=value, reference=ref, scale=scale, error=(value - ref) / scale)
    if out_dir is not None:
        tables.write_json(Path(out_dir) / "points" / f"point_{index:05d}.json", row)
    return row


def cmd_sweep(cfg, overrides=None, axes=None, workers=None, out_dir=None):
    """Cartesian sweep over scalar parameters.

    ``axes`` maps axis names (``dt``, ``t_gamma``, ... or dotted paths) to
    value lists; it extends ``sweep.axes`` from the config.
    """
    cfg = cfg.with_overrides(overrides or {})
    t0 = time.perf_counter()
    all_axes = {**cfg["sweep"]["axes"], **(axes or {})}
    if not all_axes:
        raise ValueError("sweep needs at least one axis")
    for name in all_axes:
        if resolve_axis(name) is None:
            raise ValueError(f"unknown sweep axis {name!r}")
    names = list(all_axes)
    points = [dict(zip(names, combo)) for combo in itertools.product(*(all_axes[n] for n in names))]
    text = cfg.to_text()
    workers = workers or os.cpu_count() or 1
    if workers > 1 and len(points) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(points))) as pool:
            futures = [pool.submit(_sweep_point, text, p, i, out_dir) for i, p in enumerate(points)]
            rows = [f.result() for f in futures]
    else:
        rows = [_sweep_point(text, p, i, out_dir) for i, p in enumerate(points)]
    columns = {n: [r[n] for r in rows] for n in names}
    columns.update({k: [r[k] for r in rows] for k in ("value", "reference", "scale", "error")})
    meta = _base_metadata("sweep", cfg)
    meta.update(
        wall_time=time.perf_counter() - t0,
        axes={n: list(map(float, v)) for n, v in all_axes.items()},
        quantity=cfg["sweep"]["quantity"],
        source=cfg["convolve"]["source"],
        artifacts={"sweep": cfg["convolve"]["source"]},
    )
    if cfg["sweep"]["quantity"] == "population" and "dt" in names and len(names) == 1:
        scan = analysis.AliasingScan(np.asarray(columns["dt"]), np.asarray(columns["value"]), rows[0]["reference"], rows[0]["scale"])
        meta.update(local_maxima=scan.local_maxima().tolist(), sign_changes=scan.sign_changes().tolist())
    return ResultBundle("sweep", cfg, series={"sweep": (columns, None)}, metadata=meta)


# ---------------------------------------------------------------- argv
def _parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("config_pos", nargs="?", metavar="CONFIG", help="config file (or a shipped config name)")
    common.add_argument("--config", help="config file (YAML or JSON)")
    common.add_argument("--out", help="output directory (default: output.dir from the config)")
    common.add_argument("--seed", type=int, help="master seed for shot-noise sampling")
    common.add_argument("--workers", type=int, help="worker processes for sweeps (default: all cores)")
    common.add_argument("--axis", nargs=2, action="append", metavar=("NAME", "LIST"), default=[], help="sweep axis, e.g. --axis dt 5..50")
    common.add_argument("--exact-sampling", action="store_true", help="attach error bars but skip shot noise")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config value (dotted path)")
    common.add_argument("-v", "--verbose", action="store_true")
    parser = argparse.ArgumentParser(prog="respsim", description="Weak-field response simulator.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("oracle", parents=[common], help="exact Green's table from the continuum model")
    sub.add_parser("protocol", parents=[common], help="pulse-pair protocol and reconstruction")
    sub.add_parser("sample", parents=[common], help="protocol with binomial shot noise")
    p = sub.add_parser("convolve", parents=[common], help="population curve for the configured wavepacket")
    p.add_argument("--table", help="use this Green's table CSV instead of the configured source")
    sub.add_parser("auxcheck", parents=[common], help="auxiliary-qubit elimination accuracy")
    p = sub.add_parser("budget", parents=[common], help="trial-count planning")
    p.add_argument("--target-sigma", type=float, help="target population error")
    sub.add_parser("sweep", parents=[common], help="scan scalar parameters")
    return parser


def _resolve_config_path(args):
    path = args.config or args.config_pos
    if path is None:
        raise ConfigError([])
    p = Path(path)
    if not p.exists() and (CONFIG_DIR / p.name).exists():
        p = CONFIG_DIR / p.name
    if not p.exists() and (CONFIG_DIR / f"{p.name}.cfg").exists():
        p = CONFIG_DIR / f"{p.name}.cfg"
    return p


def _parse_set(items):
    out = {}
    for item in items:
        key, sep, value = item.partition("=")
        if not sep:
            raise ValueError(f"--set expects KEY=VALUE, got {item!r}")
        out[key.strip()] = _yaml_scalar(value)
    return out


def _yaml_scalar(text):
    return yaml.safe_load(text)


def run(argv=None):
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(levelname)s: %(message)s", stream=sys.stderr)
    logging.captureWarnings(True)
    try:
        path = _resolve_config_path(args)
        cfg = load_config(path)
        overrides = _parse_set(args.set)
        if args.seed is not None:
            overrides["sampling.seed"] = args.seed
        cfg = cfg.with_overrides(overrides)
        axes = {name: parse_axis_values(values) for name, values in args.axis}
        for name in axes:
            if resolve_axis(name) is None:
                raise ValueError(f"unknown sweep axis {name!r}")
    except ConfigError as exc:
        if not exc.issues:
            log.error("a config file is required (positional CONFIG or --config)")
        else:
            log.error("%s", exc)
        return 2
    except (OSError, ValueError) as exc:
        log.error("%s", exc)
        return 2

    out_dir = Path(args.out or cfg["output"]["dir"])
    try:
        if args.command == "oracle":
            bundle = cmd_oracle(cfg)
        elif args.command == "protocol":
            bundle = cmd_protocol(cfg, exact_sampling=args.exact_sampling)
        elif args.command == "sample":
            bundle = cmd_sample(cfg, exact_sampling=args.exact_sampling)
        elif args.command == "convolve":
            bundle = cmd_convolve(cfg, table=args.table)
        elif args.command == "auxcheck":
            bundle = cmd_auxcheck(cfg)
        elif args.command == "budget":
            bundle = cmd_budget(cfg, target_sigma=args.target_sigma)
        else:
            if not axes and not cfg["sweep"]["axes"]:
                log.error("sweep needs at least one --axis NAME LIST (or sweep.axes in the config)")
                return 2
            bundle = cmd_sweep(cfg, axes=axes, workers=args.workers, out_dir=out_dir)
        written = bundle.write(out_dir)
    except ConfigError as exc:
        log.error("%s", exc)
        return 2
    except Exception as exc:  # noqa: BLE001
        log.error("%s failed: %s: %s", args.command, type(exc).__name__, exc)
        if args.verbose:
            raise
        return 1
    for p in written:
        log.info("wrote %s", p)
    _summary(bundle)
    return 0


def _summary(bundle):
    if bundle.budget is not None:
        b = bundle.budget
        log.info("N per grid point %d (leading term %d); per-interval total %d (leading term %d)", b.N_per_point, b.N_leading, b.per_interval_total, b.per_interval_total_leading)
    if bundle.elimination is not None:
        log.info("elimination error exponent in chi: %.3f", bundle.elimination.exponent)
    if "local_maxima" in bundle.metadata:
        log.info("error maxima at dt = %s; sign changes at %s", bundle.metadata["local_maxima"], bundle.metadata["sign_changes"])


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
