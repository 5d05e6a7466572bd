"""Experiment configuration, execution and output files.

Configs are flat ``key = value`` text with ``#`` comments.  Every field is
validated before anything is computed, and each run writes its CSVs next to
a ``manifest.txt`` holding the config digest, seed, library versions and
wall time.
"""

from __future__ import annotations

import csv
import hashlib
import math
import os
import platform
import sys
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy

from . import __version__, bpre, functionals, renewal, stable, walk
from .functionals import BudgetRefused, ConstraintSpec
from .rng import RandomStream

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "parse_config",
    "load_config",
    "build_model",
    "run",
    "EXPERIMENTS",
    "EXIT_OK",
    "EXIT_ERROR",
    "EXIT_BUDGET",
]

EXIT_OK, EXIT_ERROR, EXIT_BUDGET = 0, 1, 2

THEOREMS = ("theorem1", "theorem2", "theorem3", "theorem4", "corollary_vatvat", "maxsmall", "integvw")
EXPERIMENTS = ("density", "renewal") + THEOREMS + ("bpre_survival", "bpre_unconstrained", "hplus_check")
FAMILIES = ("gaussian", "exact_stable", "tail_equivalent", "logistic_logit")


class ConfigError(ValueError):
    """Config problem tied to a line and a field."""

    def __init__(self, message, line=None, key=None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"field '{key}'")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)
        self.line, self.key = line, key


def _int(v):
    return int(float(v)) if "e" in v.lower() else int(v)


def _float(v):
    x = float(v)
    if math.isnan(x):
        raise ValueError("nan is not allowed")
    return x


def _ints(v):
    return [_int(t) for t in v.split(",") if t.strip()]


def _floats(v):
    return [_float(t) for t in v.split(",") if t.strip()]


def _choice(options):
    def parse(v):
        if v not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return v
    return parse


# key -> (parser, default).  None defaults are filled per experiment.
FIELDS = {
    "experiment": (_choice(EXPERIMENTS), None),
    "family": (_choice(FAMILIES), "gaussian"),
    "alpha": (_float, None),
    "beta": (_float, 0.0),
    "c": (_float, 1.0),
    "sigma2": (_float, 1.0),
    "crossover": (_float, 5.0),
    "offspring": (_choice(bpre.FAMILIES), "geometric"),
    "constraint": (_choice(("power", "log_power")), "power"),
    "delta": (_float, None),
    "theta": (_float, 1.0),
    "x": (_float, 0.0),
    "K": (_float, 0.0),
    "J": (_ints, [16]),
    "q": (_ints, [1]),
    "n_grid": (_ints, None),
    "x_grid": (_floats, [-2.0, -1.0, 0.0, 1.0, 2.0]),
    "which": (_choice(("U", "V", "V0", "all")), "all"),
    "replicas": (_int, None),
    "target_rel": (_float, 0.05),
    "table_replicas": (_int, 1 << 18),
    "n_max": (_int, renewal.DEFAULT_N_MAX),
    "grid_max": (_float, 40.0),
    "grid_step": (_float, 0.25),
    "seed": (_int, 0),
    "chunk": (_int, None),
}


@dataclass
class ExperimentConfig:
    """Validated experiment description; ``values`` holds every field with defaults filled."""

    values: dict
    lines: dict = field(default_factory=dict, compare=False)

    def __getitem__(self, key):
        return self.values[key]

    @property
    def experiment(self) -> str:
        return self.values["experiment"]

    @property
    def seed(self) -> int:
        return self.values["seed"]

    def with_seed(self, seed: int) -> "ExperimentConfig":
        vals = dict(self.values, seed=int(seed))
        return ExperimentConfig(vals, dict(self.lines))

    def echo(self) -> str:
        """Canonical ``key = value`` text; parsing it gives back the same config."""
        out = []
        for k in sorted(self.values):
            v = self.values[k]
            if v is None:
                continue
            if isinstance(v, list):
                v = ",".join(repr(t) if isinstance(t, float) else str(t) for t in v)
            elif isinstance(v, float):
                v = repr(v)
            out.append(f"{k} = {v}")
        return "\n".join(out) + "\n"

    @property
    def digest(self) -> str:
        return hashlib.sha256(self.echo().encode()).hexdigest()[:16]

    def stream(self) -> RandomStream:
        return RandomStream(self.seed).child(self.experiment)


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate flat ``key = value`` config text.

    Raises
    ------
    ConfigError
        With the offending line and field: unknown or duplicate keys, bad
        values, inadmissible stable parameters, constraint exponents at or
        above ``1/alpha``.
    """
    raw, lines = {}, {}
    for no, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError("expected 'key = value'", no)
        key, val = (t.strip() for t in body.split("=", 1))
        if key not in FIELDS:
            raise ConfigError("unknown key", no, key)
        if key in raw:
            raise ConfigError(f"duplicate key (first set on line {lines[key]}, again on line {no})", no, key)
        if not val:
            raise ConfigError("empty value", no, key)
        try:
            raw[key] = FIELDS[key][0](val)
        except ValueError as exc:
            raise ConfigError(str(exc), no, key) from None
        lines[key] = no
    if "experiment" not in raw:
        raise ConfigError("missing required key", key="experiment")
    values = {k: (list(d) if isinstance(d, list) else d) for k, (_, d) in FIELDS.items()}
    values.update(raw)
    _fill_defaults(values, raw)
    cfg = ExperimentConfig(values, lines)
    _validate(cfg)
    return cfg


def load_config(path) -> ExperimentConfig:
    return parse_config(Path(path).read_text())


def _fill_defaults(v, given):
    exp = v["experiment"]
    if v["family"] == "gaussian":
        v["alpha"], v["beta"], v["c"] = None, None, None
    elif v["family"] == "logistic_logit":
        v["alpha"], v["beta"], v["c"], v["sigma2"] = None, None, None, None
    else:
        v["sigma2"] = None
        if v["alpha"] is None:
            v["alpha"] = 1.5
    if v["family"] != "tail_equivalent":
        v["crossover"] = None
    if v["n_grid"] is None:
        v["n_grid"] = {"bpre_unconstrained": [32, 64, 128, 256, 512], "hplus_check": [1, 64],
                       "bpre_survival": [128, 256, 512]}.get(exp, [64, 128, 256, 512])
    if exp in ("theorem1", "theorem2", "theorem3", "corollary_vatvat", "integvw") and v["delta"] is None:
        v["delta"] = 0.3 if v["constraint"] == "power" else 2.0
    if exp not in ("theorem1", "theorem2", "theorem3", "corollary_vatvat", "integvw"):
        v["constraint"], v["delta"] = None, None
    if "replicas" in given:
        v["target_rel"] = None
    elif exp not in THEOREMS:
        v["replicas"] = {"density": None, "renewal": None}.get(exp, 1 << 16)
        v["target_rel"] = None
    if v["chunk"] is None:
        v["chunk"] = renewal.RENEWAL_CHUNK if exp == "renewal" else 1 << 15
    irrelevant = {
        "density": ("offspring", "theta", "x", "K", "J", "q", "n_grid", "which", "replicas", "target_rel",
                    "table_replicas", "n_max", "grid_max", "grid_step", "chunk"),
        "renewal": ("offspring", "theta", "x", "K", "J", "q", "n_grid", "x_grid", "replicas", "target_rel"),
        "bpre_survival": ("theta", "x", "q", "x_grid", "which", "table_replicas", "n_max", "grid_max",
                          "grid_step"),
        "bpre_unconstrained": ("theta", "x", "K", "J", "q", "x_grid", "which", "table_replicas", "n_max",
                               "grid_max", "grid_step"),
        "hplus_check": ("theta", "K", "J", "x_grid", "which"),
    }.get(exp, ("offspring", "J", "q", "x_grid", "which"))
    for k in irrelevant:
        v[k] = None
    if exp not in ("theorem2", "maxsmall", "hplus_check"):
        v["x"] = None
    if exp != "theorem4" and exp != "bpre_survival":
        v["K"] = None


def _validate(cfg: ExperimentConfig):
    v, ln = cfg.values, cfg.lines
    try:
        build_model(v)
    except ValueError as exc:
        key = next((k for k in ("alpha", "beta", "c", "sigma2", "crossover") if k in ln), "family")
        raise ConfigError(str(exc), ln.get(key), key) from None
    if v["delta"] is not None:
        try:
            _constraint(v, "phi")
        except ValueError as exc:
            raise ConfigError(str(exc), ln.get("delta"), "delta") from None
    positive = ("replicas", "table_replicas", "n_max", "chunk")
    for k in positive:
        if v[k] is not None and v[k] < 1:
            raise ConfigError("must be >= 1", ln.get(k), k)
    if v["n_grid"] is not None:
        g = v["n_grid"]
        if not g:
            raise ConfigError("empty grid", ln.get("n_grid"), "n_grid")
        if g != sorted(set(g)) or g[0] < 1:
            raise ConfigError("must be strictly increasing positive integers", ln.get("n_grid"), "n_grid")
    if v["theta"] is not None and not v["theta"] > 0:
        raise ConfigError("must be > 0", ln.get("theta"), "theta")
    if v["target_rel"] is not None and not 0 < v["target_rel"] < 1:
        raise ConfigError("must lie in (0, 1)", ln.get("target_rel"), "target_rel")
    if v["grid_step"] is not None and not 0 < v["grid_step"] < v["grid_max"]:
        raise ConfigError("must lie in (0, grid_max)", ln.get("grid_step"), "grid_step")
    exp = cfg.experiment
    if exp == "theorem2" or exp == "maxsmall":
        if v["x"] > 0:
            raise ConfigError("start x must be <= 0", ln.get("x"), "x")
    if exp == "hplus_check" and v["x"] < 0:
        raise ConfigError("x is the P+ start and must be >= 0 (P- uses -x)", ln.get("x"), "x")
    if exp == "bpre_survival":
        for j in v["J"]:
            if j < 0 or v["n_grid"][0] <= 2 * j:
                raise ConfigError(f"need 0 <= J and n > 2J for every n (J={j})", ln.get("J"), "J")
    if exp == "hplus_check" and any(q < 1 for q in v["q"]):
        raise ConfigError("initial populations must be >= 1", ln.get("q"), "q")


def build_model(v: dict) -> walk.IncrementModel:
    fam = v["family"]
    if fam == "gaussian":
        return walk.gaussian(v["sigma2"])
    if fam == "logistic_logit":
        return walk.logistic_logit()
    if fam == "exact_stable":
        return walk.exact_stable(v["alpha"], v["beta"], v["c"])
    return walk.tail_equivalent(v["alpha"], v["beta"], v["crossover"], v["c"])


def _constraint(v, kind):
    model = build_model(v)
    maker = ConstraintSpec.phi if kind == "phi" else ConstraintSpec.psi
    return maker(v["constraint"], v["delta"], model.alpha)


# --- running --------------------------------------------------------------

class _Outputs:
    def __init__(self, out_dir):
        self.dir = Path(out_dir)
        self.files: list[str] = []
        self.notes: dict[str, str] = {}

    def path(self, name: str) -> Path:
        self.files.append(name)
        return self.dir / name


def _check_writable(out_dir: Path):
    out_dir.mkdir(parents=True, exist_ok=True)
    with tempfile.NamedTemporaryFile(dir=out_dir, prefix=".probe"):
        pass


def _tables(cfg, model, stream, workers, needed=("U", "V", "V0")):
    v = cfg.values
    grid = np.arange(0.0, v["grid_max"] + 0.5 * v["grid_step"], v["grid_step"])
    est = {"U": renewal.estimate_U, "V": renewal.estimate_V, "V0": renewal.estimate_V0}
    out = {}
    for w in needed:
        t = est[w](model, grid, v["table_replicas"], v["n_max"], stream.child("tables"), workers,
                   chunk=renewal.RENEWAL_CHUNK)
        t.check_truncation()
        out[w] = t
    return out


def _run_density(cfg, model, out, workers):
    p = model.attraction
    xs = cfg["x_grid"]
    with open(out.path("density.csv"), "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["x", "density", "abserr", "alpha", "beta", "c"])
        for x in xs:
            val, err = stable.density_with_error(p, x)
            if err > stable.DENSITY_TOL:
                raise stable.QuadratureError(f"density at x={x}: error {err:.2e}")
            wr.writerow([repr(float(x)), repr(val), repr(err), repr(p.alpha), repr(p.beta), repr(p.c)])
    out.notes["rho"] = repr(float(stable.positivity_rho(p)))
    out.notes["density_at_zero"] = repr(float(stable.density_at_zero(p)))


def _run_renewal(cfg, model, out, workers):
    needed = ("U", "V", "V0") if cfg["which"] == "all" else (cfg["which"],)
    for w, t in _tables(cfg, model, cfg.stream(), workers, needed).items():
        t.to_csv(out.path(f"renewal_{w}.csv"))
        out.notes[f"censor_frac_{w}"] = repr(float(t.censor_frac))


def _theorem_params(cfg):
    v, exp = cfg.values, cfg.experiment
    p = {"theta": v["theta"]}
    if exp == "theorem1":
        p["constraint"] = _constraint(v, "phi")
    elif exp in ("theorem2", "theorem3", "corollary_vatvat"):
        p["constraint"] = _constraint(v, "psi")
    elif exp == "integvw":
        p["x_upper"] = _constraint(v, "phi")
    if exp in ("theorem2", "maxsmall"):
        p["x"] = v["x"]
    if exp == "theorem4":
        p["K"] = v["K"]
    return p


def _run_theorem(cfg, model, out, workers):
    v, exp, st = cfg.values, cfg.experiment, cfg.stream()
    params = _theorem_params(cfg)
    replicas = v["replicas"]
    if replicas is None:
        func = functionals.functional_for(exp, params)
        replicas = functionals.pilot_replicas(model, func, v["n_grid"][-1], v["target_rel"], st, workers=workers)
        out.notes["auto_replicas"] = str(replicas)
    tables = _tables(cfg, model, st, workers)
    for w, t in tables.items():
        t.to_csv(out.path(f"renewal_{w}.csv"))
    rep = functionals.run_ratio_experiment(exp, model, params, v["n_grid"], replicas, st.child("lhs"),
                                           tables, workers)
    rep.to_csv(out.path(f"{exp}.csv"))
    out.notes["approaches_one"] = str(rep.approaches_one())


def _env_model(cfg, model):
    return bpre.EnvironmentModel(cfg["offspring"], model)


def _run_bpre_survival(cfg, model, out, workers):
    v = cfg.values
    reports = bpre.survival_constrained(_env_model(cfg, model), v["n_grid"], v["K"], v["replicas"], v["J"],
                                        cfg.stream(), workers=workers, chunk=v["chunk"])
    with open(out.path("bpre_survival.csv"), "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(bpre.SurvivalReport.HEADER)
        for r in reports:
            wr.writerows(r.rows())


def _run_bpre_unconstrained(cfg, model, out, workers):
    v = cfg.values
    res = bpre.survival_unconstrained(_env_model(cfg, model), v["n_grid"], v["replicas"], cfg.stream(),
                                      workers=workers, chunk=v["chunk"])
    with open(out.path("bpre_unconstrained.csv"), "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["n", "survival", "stderr", "negative_fraction", "replicas", "seed"])
        for n, e, f in zip(res.n_grid, res.survival, res.negative_fraction):
            wr.writerow([n, repr(e.value), repr(e.stderr), repr(float(f)), e.replicas, cfg.seed])
    if len(res.n_grid) > 1 and all(e.value > 0 for e in res.survival):
        out.notes["loglog_slope"] = repr(float(res.slope()))


def _run_hplus(cfg, model, out, workers):
    v, st = cfg.values, cfg.stream()
    tables = _tables(cfg, model, st, workers, ("U", "V"))
    for w, t in tables.items():
        t.to_csv(out.path(f"renewal_{w}.csv"))
    x = v["x"]
    rows = []
    for n in v["n_grid"]:
        plus = bpre.plus_measure_expectation(model, bpre.ConstantOne(), x, n, v["replicas"], tables["U"],
                                             st.child("plus", n), workers)
        minus = bpre.minus_measure_expectation(model, bpre.ConstantOne(), -x, n, v["replicas"], tables["V"],
                                               st.child("minus", n), workers)
        rows.append(["plus", "one", repr(x), n, repr(plus.value), repr(plus.stderr), plus.replicas])
        rows.append(["minus", "one", repr(-x), n, repr(minus.value), repr(minus.stderr), minus.replicas])
    n = v["n_grid"][-1]
    for q in v["q"]:
        g = bpre.EmbeddedSurvival(v["offspring"], q)
        e = bpre.plus_measure_expectation(model, g, x, n, v["replicas"], tables["U"], st.child("survival", q),
                                          workers)
        rows.append(["plus", f"survival_q={q}", repr(x), n, repr(e.value), repr(e.stderr), e.replicas])
    with open(out.path("hplus_check.csv"), "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["measure", "functional", "x", "n", "value", "stderr", "replicas", "seed"])
        wr.writerows(r + [cfg.seed] for r in rows)


RUNNERS = {
    "density": _run_density,
    "renewal": _run_renewal,
    "bpre_survival": _run_bpre_survival,
    "bpre_unconstrained": _run_bpre_unconstrained,
    "hplus_check": _run_hplus,
    **{t: _run_theorem for t in THEOREMS},
}


def _write_manifest(cfg, out, status, wall, workers, error=None):
    lines = {
        "experiment": cfg.experiment,
        "config_digest": cfg.digest,
        "seed": str(cfg.seed),
        "status": status,
        "walklab": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "workers": str(workers),
        "wall_time_s": f"{wall:.3f}",
        "files": ",".join(out.files),
        **out.notes,
    }
    if error:
        lines["error"] = " ".join(str(error).split())
    with open(out.dir / "manifest.txt", "w") as fh:
        fh.writelines(f"{k} = {v}\n" for k, v in lines.items())
        fh.write("# config\n")
        fh.writelines(f"# {ln}\n" for ln in cfg.echo().splitlines())


def run(cfg: ExperimentConfig, out_dir, workers: int = 1, log=None) -> int:
    """Execute ``cfg`` and write outputs under ``out_dir``.

    Returns 0 on success, 2 when the auto-budget is refused and 1 on any
    other failure (including an unwritable output directory, detected
    before computing anything).
    """
    log = log or (lambda msg: print(msg, file=sys.stderr))
    out_dir = Path(out_dir)
    try:
        _check_writable(out_dir)
    except OSError as exc:
        log(f"error: output directory {out_dir} is not writable: {exc}")
        return EXIT_ERROR
    out = _Outputs(out_dir)
    model = build_model(cfg.values)
    t0 = time.perf_counter()
    status, code, err = "ok", EXIT_OK, None
    try:
        RUNNERS[cfg.experiment](cfg, model, out, workers)
    except BudgetRefused as exc:
        status, code, err = "budget_refused", EXIT_BUDGET, exc
        if exc.pilot is not None:
            out.notes["pilot_value"] = repr(float(exc.pilot.value))
            out.notes["pilot_stderr"] = repr(float(exc.pilot.stderr))
            out.notes["pilot_replicas"] = str(exc.pilot.replicas)
        out.notes["needed_replicas"] = str(exc.needed)
        log(f"budget refused: {exc}")
    except Exception as exc:  # any estimator failure maps to exit 1
        status, code, err = "error", EXIT_ERROR, exc
        log(f"error: {type(exc).__name__}: {exc}")
    _write_manifest(cfg, out, status, time.perf_counter() - t0, workers, err)
    return code


# --- reference runs ---------------------------------------------------------

REFERENCE_DIR = Path(__file__).with_name("reference")


def reference_configs() -> list[Path]:
    return sorted(REFERENCE_DIR.glob("*.cfg"))


def verify_reference(workers: int = 1, log=None, names=None) -> int:
    """Re-run every shipped reference config and compare CSVs byte-for-byte."""
    log = log or print
    failures = 0
    for cfg_path in reference_configs():
        name = cfg_path.stem
        if names and name not in names:
            continue
        expected_dir = REFERENCE_DIR / name
        with tempfile.TemporaryDirectory() as tmp:
            code = run(load_config(cfg_path), tmp, workers, log=log)
            if code != EXIT_OK:
                log(f"FAIL {name}: run exited with {code}")
                failures += 1
                continue
            refs = sorted(expected_dir.glob("*.csv"))
            if not refs:
                log(f"FAIL {name}: no reference CSVs in {expected_dir}")
                failures += 1
            for ref in refs:
                got = Path(tmp) / ref.name
                same = got.exists() and got.read_bytes() == ref.read_bytes()
                log(f"{'ok  ' if same else 'FAIL'} {name}/{ref.name}")
                failures += not same
    return EXIT_OK if failures == 0 else EXIT_ERROR
