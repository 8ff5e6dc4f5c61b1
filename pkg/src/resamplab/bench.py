"""Command-line driver for reproducible resampling experiments.

Subcommands: ``diagnose``, ``rate``, ``pf-variance``, ``pf-oracle``.  Each
reads a single JSON config (its ``kind`` must match the subcommand),
writes ``results.csv`` (or ``.json``) plus a ``meta.json`` sidecar carrying
the config hash, seed and library versions, and exits 0 on success, 2 on a
config error, 3 on a numerical failure.

Identical configs produce byte-identical outputs regardless of ``--jobs``:
every work unit derives its substreams from logical indices, and rows are
emitted in a fixed order.  The only environment override is
``RESAMPLAB_OUT`` for the default output directory.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import platform
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import __version__, diagnostics, smc
from .core import ResamplabError, UniformStream
from .resamplers import SchemeId

__all__ = ["ConfigError", "ResultRow", "run_diagnose", "run_rate",
           "run_pf_variance", "run_pf_oracle", "run_experiment", "main"]

# Reserved top-level stream tags, so experiment substreams never collide.
_TAG_DATA, _TAG_RUN, _TAG_SYSTEM, _TAG_REPLICATES = 0, 1, 2, 3


class ConfigError(ResamplabError, ValueError):
    pass


@dataclass(frozen=True)
class ResultRow:
    """One output record; ``t`` indexes time series, ``n`` particle counts."""

    experiment: str
    scheme: str
    n: int | None
    t: int | None
    kind: str          # "replicate" or "aggregate"
    metric: str
    value: float
    se: float | None
    seed: int

    HEADER = ("experiment", "scheme", "n", "t", "kind", "metric", "value", "se", "seed")

    def as_csv_fields(self) -> list[str]:
        return [
            self.experiment,
            self.scheme,
            "" if self.n is None else str(self.n),
            "" if self.t is None else str(self.t),
            self.kind,
            self.metric,
            _fmt(self.value),
            "" if self.se is None else _fmt(self.se),
            str(self.seed),
        ]

    def as_dict(self) -> dict:
        return {
            "experiment": self.experiment, "scheme": self.scheme, "n": self.n,
            "t": self.t, "kind": self.kind, "metric": self.metric,
            "value": self.value, "se": self.se, "seed": self.seed,
        }


def _fmt(x: float) -> str:
    return f"{float(x):.17g}"


def _check_keys(obj: dict, required: dict, optional: dict, path: str) -> None:
    if not isinstance(obj, dict):
        raise ConfigError(f"{path}: expected an object")
    unknown = set(obj) - set(required) - set(optional)
    if unknown:
        raise ConfigError(f"{path}: unknown field(s) {sorted(unknown)}")
    for key, typ in required.items():
        if key not in obj:
            raise ConfigError(f"{path}.{key}: required")
        if not isinstance(obj[key], typ):
            raise ConfigError(f"{path}.{key}: expected {typ}")
    for key, typ in optional.items():
        if key in obj and not isinstance(obj[key], typ):
            raise ConfigError(f"{path}.{key}: expected {typ}")


def _parse_schemes(names, path) -> list[SchemeId]:
    if not names:
        raise ConfigError(f"{path}: need at least one scheme")
    try:
        return [SchemeId.parse(s) for s in names]
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _model_from_config(cfg: dict, path: str) -> smc.LgssmParams:
    _check_keys(cfg, {"d": int, "horizon": int, "alpha": (int, float)}, {}, path)
    try:
        return smc.LgssmParams(cfg["d"], cfg["horizon"], float(cfg["alpha"]))
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _positive(cfg, key, path, minimum=1):
    v = cfg[key]
    if v < minimum:
        raise ConfigError(f"{path}.{key}: must be >= {minimum}")
    return v


def _parallel_map(fn, items, jobs: int):
    if jobs <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# diagnose

def _diagnose_systems(config):
    sys_cfg = config["systems"]
    if sys_cfg["type"] == "na-counterexample":
        return [("na-counterexample", diagnostics.na_counterexample_system())]
    seed = config["seed"]
    out = []
    for i in range(sys_cfg["count"]):
        stream = UniformStream(seed, (_TAG_SYSTEM, i))
        out.append((f"random-{i}", diagnostics.random_system(sys_cfg["n"], sys_cfg.get("d", 1), stream)))
    return out


def _diagnose_unit(args):
    config, scheme_text, sys_label, sys_index = args
    scheme = SchemeId.parse(scheme_text)
    systems = _diagnose_systems(config)
    label, system = systems[sys_index]
    n_reps = config["replicates"]
    seed = config["seed"]
    mom = diagnostics.offspring_moments(
        scheme, system, n_reps,
        seed=hash_to_seed(seed, str(scheme), label, "moments"),
    )
    cov = diagnostics.pairwise_count_cov(
        scheme, system, n_reps,
        seed=hash_to_seed(seed, str(scheme), label, "cov"),
    )
    return mom, cov, label


def hash_to_seed(seed: int, *parts) -> int:
    """Stable derived seed for a named sub-experiment."""
    digest = hashlib.sha256(("|".join([str(seed), *map(str, parts)])).encode()).digest()
    return int.from_bytes(digest[:8], "little") >> 1


def validate_diagnose(config: dict) -> None:
    _check_keys(
        config,
        {"kind": str, "seed": int, "schemes": list, "replicates": int, "systems": dict},
        {},
        "config",
    )
    _parse_schemes(config["schemes"], "config.schemes")
    _positive(config, "replicates", "config", minimum=2)
    sys_cfg = config["systems"]
    if sys_cfg.get("type") == "na-counterexample":
        _check_keys(sys_cfg, {"type": str}, {}, "config.systems")
    elif sys_cfg.get("type") == "random":
        _check_keys(sys_cfg, {"type": str, "count": int, "n": int}, {"d": int}, "config.systems")
        _positive(sys_cfg, "count", "config.systems")
        _positive(sys_cfg, "n", "config.systems")
    else:
        raise ConfigError("config.systems.type: expected 'random' or 'na-counterexample'")


def run_diagnose(config: dict, jobs: int = 1) -> list[ResultRow]:
    validate_diagnose(config)
    seed = config["seed"]
    systems = _diagnose_systems(config)
    units = [
        (config, s, label, i)
        for s in config["schemes"]
        for i, (label, _) in enumerate(systems)
    ]
    rows = []
    for (_, scheme_text, _, _), (mom, cov, label) in zip(
        units, _parallel_map(_diagnose_unit, units, jobs)
    ):
        exp = f"diagnose/{label}"
        n = mom.expected.shape[0]
        for i in range(n):
            rows.append(ResultRow(exp, scheme_text, n, None, "aggregate",
                                  f"mean_count[{i}]", mom.mean_counts[i],
                                  mom.se_counts[i], seed))
            rows.append(ResultRow(exp, scheme_text, n, None, "aggregate",
                                  f"expected_count[{i}]", mom.expected[i], None, seed))
        rows.append(ResultRow(exp, scheme_text, n, None, "aggregate",
                              "max_abs_dev", mom.max_abs_dev, None, seed))
        rows.append(ResultRow(exp, scheme_text, n, None, "aggregate",
                              "max_unbiasedness_z", mom.max_unbiasedness_z, None, seed))
        for i in range(n):
            for j in range(i + 1, n):
                rows.append(ResultRow(exp, scheme_text, n, None, "aggregate",
                                      f"cov[{i},{j}]", cov.cov[i, j], cov.se[i, j], seed))
    return rows


# ---------------------------------------------------------------------------
# rate

def validate_rate(config: dict) -> None:
    _check_keys(
        config,
        {"kind": str, "seed": int, "schemes": list, "n_grid": list,
         "replicates": int, "d": int, "phis": list},
        {},
        "config",
    )
    _parse_schemes(config["schemes"], "config.schemes")
    _positive(config, "replicates", "config", minimum=2)
    _positive(config, "d", "config")
    if len(config["n_grid"]) < 4:
        raise ConfigError("config.n_grid: need at least 4 points")
    if any(b <= a for a, b in zip(config["n_grid"], config["n_grid"][1:])):
        raise ConfigError("config.n_grid: must be strictly increasing")
    for phi in config["phis"]:
        if phi not in diagnostics.PHI_FUNCTIONS:
            raise ConfigError(
                f"config.phis: unknown {phi!r}; known: {sorted(diagnostics.PHI_FUNCTIONS)}"
            )


def _rate_unit(args):
    config, scheme_text, phi = args
    family = diagnostics.gaussian_likelihood_family(
        config["d"], hash_to_seed(config["seed"], "family", config["d"])
    )
    return diagnostics.variance_rate_fit(
        SchemeId.parse(scheme_text), family, phi, config["n_grid"],
        config["replicates"],
        seed=hash_to_seed(config["seed"], scheme_text, phi, "rate"),
    )


def run_rate(config: dict, jobs: int = 1) -> list[ResultRow]:
    validate_rate(config)
    seed = config["seed"]
    units = [(config, s, phi) for s in config["schemes"] for phi in config["phis"]]
    rows = []
    for (_, scheme_text, phi), fit in zip(units, _parallel_map(_rate_unit, units, jobs)):
        exp = f"rate/phi={phi}"
        for n, v in zip(fit.n_values, fit.variances):
            rows.append(ResultRow(exp, scheme_text, int(n), None, "aggregate",
                                  "var", v, None, seed))
        for n in fit.excluded:
            rows.append(ResultRow(exp, scheme_text, int(n), None, "aggregate",
                                  "degenerate_variance", 0.0, None, seed))
        rows.append(ResultRow(exp, scheme_text, None, None, "aggregate",
                              "slope", fit.slope, fit.slope_se, seed))
        rows.append(ResultRow(exp, scheme_text, None, None, "aggregate",
                              "intercept", fit.intercept, None, seed))
    return rows


# ---------------------------------------------------------------------------
# pf-variance

def validate_pf_variance(config: dict) -> None:
    _check_keys(
        config,
        {"kind": str, "seed": int, "schemes": list, "model": dict,
         "proposal": str, "n_particles": int, "runs": int},
        {"record_every": int},
        "config",
    )
    _parse_schemes(config["schemes"], "config.schemes")
    if config["proposal"] not in ("bootstrap", "guided"):
        raise ConfigError("config.proposal: expected 'bootstrap' or 'guided'")
    _positive(config, "n_particles", "config")
    _positive(config, "runs", "config", minimum=2)
    _model_from_config(config["model"], "config.model")
    if config.get("record_every", 1) < 1:
        raise ConfigError("config.record_every: must be >= 1")


def _pf_make_fk(config):
    params = _model_from_config(config["model"], "config.model")
    _, obs = smc.simulate_lgssm(params, UniformStream(config["seed"], (_TAG_DATA,)))
    maker = smc.make_guided_fk if config["proposal"] == "guided" else smc.make_bootstrap_fk
    return params, obs, maker(params, obs)


def _pf_variance_unit(args):
    config, scheme_text, run = args
    _, _, fk = _pf_make_fk(config)
    out = smc.particle_filter(
        fk, config["n_particles"], SchemeId.parse(scheme_text),
        UniformStream(config["seed"], (_TAG_RUN, run)),
    )
    return out.log_norm


def run_pf_variance(config: dict, jobs: int = 1) -> list[ResultRow]:
    validate_pf_variance(config)
    seed = config["seed"]
    runs = config["runs"]
    every = config.get("record_every", 1)
    horizon = config["model"]["horizon"]
    recorded = list(range(every, horizon + 1, every))
    if not recorded or recorded[-1] != horizon:
        recorded.append(horizon)
    schemes = config["schemes"]
    units = [(config, s, r) for s in schemes for r in range(runs)]
    results = _parallel_map(_pf_variance_unit, units, jobs)
    curves = {
        s: np.stack(results[i * runs:(i + 1) * runs])
        for i, s in enumerate(schemes)
    }
    rows = []
    n_particles = config["n_particles"]
    var = {}
    for s in schemes:
        log_l = curves[s]
        v = log_l.var(axis=0, ddof=1)
        var[s] = v
        se_factor = np.sqrt(2.0 / (runs - 1))
        for t in recorded:
            rows.append(ResultRow("pf-variance", s, n_particles, t, "aggregate",
                                  "mean_log_L", log_l[:, t].mean(),
                                  log_l[:, t].std(ddof=1) / np.sqrt(runs), seed))
            rows.append(ResultRow("pf-variance", s, n_particles, t, "aggregate",
                                  "var_log_L", v[t], v[t] * se_factor, seed))
    for a in schemes:
        for b in schemes:
            if a == b:
                continue
            dev_a = curves[a] - curves[a].mean(axis=0)
            dev_b = curves[b] - curves[b].mean(axis=0)
            paired = dev_a**2 - dev_b**2  # runs share streams, so pair them
            for t in recorded:
                ratio = var[a][t] / var[b][t] if var[b][t] > 0 else np.inf
                rows.append(ResultRow("pf-variance", f"{a}/{b}", n_particles, t,
                                      "aggregate", "var_ratio", ratio, None, seed))
                rows.append(ResultRow("pf-variance", f"{a}/{b}", n_particles, t,
                                      "aggregate", "var_gap",
                                      var[a][t] - var[b][t],
                                      paired[:, t].std(ddof=1) / np.sqrt(runs), seed))
    return rows


# ---------------------------------------------------------------------------
# pf-oracle

def validate_pf_oracle(config: dict) -> None:
    _check_keys(
        config,
        {"kind": str, "seed": int, "scheme": str, "model": dict,
         "n_grid": list, "runs": int},
        {},
        "config",
    )
    _parse_schemes([config["scheme"]], "config.scheme")
    _positive(config, "runs", "config", minimum=2)
    if not config["n_grid"] or any(n < 1 for n in config["n_grid"]):
        raise ConfigError("config.n_grid: need positive particle counts")
    if any(b <= a for a, b in zip(config["n_grid"], config["n_grid"][1:])):
        raise ConfigError("config.n_grid: must be strictly increasing")
    _model_from_config(config["model"], "config.model")


def _pf_oracle_unit(args):
    config, n_particles, run = args
    params, obs, fk = _pf_make_fk({**config, "proposal": "bootstrap"})
    out = smc.particle_filter(
        fk, n_particles, SchemeId.parse(config["scheme"]),
        UniformStream(config["seed"], (_TAG_RUN, run)),
    )
    return out.log_norm_final


def run_pf_oracle(config: dict, jobs: int = 1) -> list[ResultRow]:
    validate_pf_oracle(config)
    seed = config["seed"]
    runs = config["runs"]
    params = _model_from_config(config["model"], "config.model")
    _, obs = smc.simulate_lgssm(params, UniformStream(seed, (_TAG_DATA,)))
    oracle = smc.kalman_loglik(params, obs).log_lik
    rows = [ResultRow("pf-oracle", "", None, None, "aggregate",
                      "kalman_log_lik", oracle, None, seed)]
    scheme = config["scheme"]
    for n_particles in config["n_grid"]:
        units = [(config, n_particles, r) for r in range(runs)]
        log_l = np.asarray(_parallel_map(_pf_oracle_unit, units, jobs))
        ratio = np.exp(log_l - oracle)
        rmse = float(np.sqrt(np.mean((log_l - oracle) ** 2)))
        rows.append(ResultRow("pf-oracle", scheme, n_particles, None, "aggregate",
                              "mean_log_L", log_l.mean(),
                              log_l.std(ddof=1) / np.sqrt(runs), seed))
        rows.append(ResultRow("pf-oracle", scheme, n_particles, None, "aggregate",
                              "mean_ratio", ratio.mean(),
                              ratio.std(ddof=1) / np.sqrt(runs), seed))
        rows.append(ResultRow("pf-oracle", scheme, n_particles, None, "aggregate",
                              "rmse_log_L", rmse, None, seed))
    return rows


# ---------------------------------------------------------------------------
# driver

RUNNERS = {
    "diagnose": run_diagnose,
    "rate": run_rate,
    "pf-variance": run_pf_variance,
    "pf-oracle": run_pf_oracle,
}


def run_experiment(config: dict, jobs: int = 1) -> list[ResultRow]:
    kind = config.get("kind")
    if kind not in RUNNERS:
        raise ConfigError(f"config.kind: expected one of {sorted(RUNNERS)}, got {kind!r}")
    if not isinstance(config.get("seed"), int):
        raise ConfigError("config.seed: required integer (no wall-clock seeding)")
    return RUNNERS[kind](config, jobs)


def _config_hash(config: dict) -> str:
    canon = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def write_outputs(rows: list[ResultRow], config: dict, out_dir: str, fmt: str) -> None:
    os.makedirs(out_dir, exist_ok=True)
    if fmt == "csv":
        lines = [",".join(ResultRow.HEADER)]
        lines += [",".join(r.as_csv_fields()) for r in rows]
        body = "\n".join(lines) + "\n"
        with open(os.path.join(out_dir, "results.csv"), "w", newline="") as fh:
            fh.write(body)
    else:
        with open(os.path.join(out_dir, "results.json"), "w") as fh:
            json.dump([r.as_dict() for r in rows], fh, indent=1, sort_keys=True)
            fh.write("\n")
    meta = {
        "experiment": config["kind"],
        "config_hash": _config_hash(config),
        "seed": config["seed"],
        "versions": {
            "resamplab": __version__,
            "numpy": np.__version__,
            "python": platform.python_version(),
        },
    }
    with open(os.path.join(out_dir, "meta.json"), "w") as fh:
        json.dump(meta, fh, indent=1, sort_keys=True)
        fh.write("\n")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="resamplab-bench",
        description="Reproducible resampling-scheme experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in RUNNERS:
        p = sub.add_parser(name, help=f"run a {name} experiment")
        p.add_argument("--config", required=True, help="path to the JSON config")
        p.add_argument("--out", default=os.environ.get("RESAMPLAB_OUT", "bench-out"),
                       help="output directory (default: $RESAMPLAB_OUT or ./bench-out)")
        p.add_argument("--jobs", type=int, default=1, help="parallel worker count")
        p.add_argument("--format", choices=("csv", "json"), default="csv")
    args = parser.parse_args(argv)

    try:
        with open(args.config) as fh:
            config = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        if config.get("kind") != args.command:
            raise ConfigError(
                f"config.kind {config.get('kind')!r} does not match subcommand {args.command!r}"
            )
        rows = run_experiment(config, jobs=max(args.jobs, 1))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ResamplabError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure in {config.get('kind')}: {exc}", file=sys.stderr)
        return 3
    write_outputs(rows, config, args.out, args.format)
    return 0


if __name__ == "__main__":
    sys.exit(main())
