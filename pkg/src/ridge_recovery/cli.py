"""Experiment runner.

Subcommands
-----------
recover    one seeded instance; prints a report line, optionally writes JSON
batch      many instances; writes a CSV table and a JSON summary
alpha      the alpha parameter of seeded test profiles
plot-data  two-column data of the recovered and true profile from a run file

Every run parameter is available as a flag and as a ``key = value`` line in a
config file (``--config``); flags win over the file.

CSV columns: trial, a_error, profile_error, alpha, status, eval_count
(plus wall_time with ``--timings``).  The profile error is the sup-norm
distance on 2000 uniform points of [-1, 1], minimized over the two symmetric
orientations; the direction error is min(|a_hat - a|, |a_hat + a|).
"""
from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import logging
import math
import sys
import time
from dataclasses import dataclass, field, fields

import numpy as np

from .oracle import (Profile, RidgeOracle, alpha_parameter, make_test_profile,
                     sample_sphere_direction)
from .pipeline import AlgorithmConfig, RecoveryOutput, derive_parameters, recover
from .stats import EmpiricalSample, dkw_condition, median

log = logging.getLogger(__name__)

ERROR_GRID = 2000
PLOT_POINTS = 1000
CSV_COLUMNS = ("trial", "a_error", "profile_error", "alpha", "status", "eval_count")
OVERRIDE_KEYS = ("M", "M1", "N1", "N2", "N3", "b", "B", "omega1", "omega2", "omega3",
                 "window", "osc_halfwidth", "lambda_step", "embed_nu")


@dataclass
class ExperimentSpec:
    n: int = 50
    K1: int = 8
    K2: int = 7
    epsilon: float = 1e-20
    trials: int = 10
    seed: int = 1
    frequency: float = math.pi
    profile: str = "trig"          # trig | constant
    constant_value: float = 0.5
    noise: str = "uniform"
    Q: float = 1.0
    preset: str = "reference"      # reference: N1 = N3 = 200; derived: N1 = 2M^2, N3 = 2M1^2
    sigma: float = 1.0
    omega_star: float = 1e-4
    delta_star: float = 0.05
    overrides: dict = field(default_factory=dict)
    csv_path: str | None = None
    summary_path: str | None = None
    json_path: str | None = None
    plot_path: str | None = None
    timings: bool = False

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trial count must be at least 1")
        if self.profile not in ("trig", "constant"):
            raise ValueError("profile must be 'trig' or 'constant'")
        if self.preset not in ("reference", "derived"):
            raise ValueError("preset must be 'reference' or 'derived'")
        unknown = set(self.overrides) - set(OVERRIDE_KEYS)
        if unknown:
            raise ValueError(f"unknown parameter overrides: {sorted(unknown)}")

    def config(self) -> AlgorithmConfig:
        extra = {"N1": 200, "N3": 200} if self.preset == "reference" else {}
        extra.update(self.overrides)
        return derive_parameters(self.n, sigma=self.sigma, omega_star=self.omega_star,
                                 delta_star=self.delta_star, epsilon=self.epsilon,
                                 **extra)


# ---------------------------------------------------------------------------
# instances and scoring

def trial_seeds(seed: int, trials: int) -> list[np.random.SeedSequence]:
    """Independent child seeds, one per trial index."""
    return np.random.SeedSequence(seed).spawn(trials)


def draw_instance(spec: ExperimentSpec, seed_seq) -> tuple[RidgeOracle, np.random.Generator]:
    """Random direction and profile, the oracle, and the generator for the run."""
    rng = np.random.default_rng(seed_seq)
    a = sample_sphere_direction(spec.n, rng)
    if spec.profile == "constant":
        phi = Profile.constant(spec.constant_value)
    else:
        phi = make_test_profile(spec.K1, spec.K2, rng, frequency=spec.frequency)
    oracle = RidgeOracle(a, phi, spec.epsilon, noise=spec.noise,
                         seed=int(rng.integers(2 ** 63)))
    return oracle, rng


def direction_error(a_hat, a) -> float:
    return float(min(np.linalg.norm(a_hat - a), np.linalg.norm(a_hat + a)))


def profile_error(output: RecoveryOutput, truth, points: int = ERROR_GRID) -> float:
    t = np.linspace(-1.0, 1.0, points)
    if output.status == "constant":
        return float(np.max(np.abs(output.f0 - truth(t))))
    if output.status != "recovered":
        return math.nan
    p = output.phi_hat(t)
    return float(min(np.max(np.abs(p - truth(t))), np.max(np.abs(p - truth(-t)))))


def run_single(spec: ExperimentSpec, trial: int = 0, config: AlgorithmConfig | None = None,
               seed_seq=None, instance=None):
    """Run one instance; returns (output, record, oracle).

    ``instance`` is an optional (oracle, generator) pair used instead of a
    seeded draw from ``spec``.
    """
    config = config or spec.config()
    if instance is None:
        seed_seq = seed_seq or trial_seeds(spec.seed, trial + 1)[trial]
        instance = draw_instance(spec, seed_seq)
    oracle, rng = instance
    t0 = time.perf_counter()
    out = recover(oracle, config, rng, Q=spec.Q)
    wall = time.perf_counter() - t0

    probes = out.diagnostics.get("probes")
    if probes is not None:
        v = math.sqrt(spec.n) * np.abs(np.asarray(probes) @ oracle.a)
        holds, gap = dkw_condition(EmpiricalSample(v), n=spec.n)
        out.diagnostics.update(dkw=holds, dkw_gap=gap)

    record = {
        "trial": trial,
        "a_error": direction_error(out.a_hat, oracle.a) if out.status == "recovered" else math.nan,
        "profile_error": profile_error(out, oracle.profile),
        "alpha": alpha_parameter(oracle.profile, spec.n),
        "status": out.status if out.status != "failed" else f"failed: {out.reason}",
        "eval_count": out.eval_count,
        "wall_time": wall,
    }
    return out, record, oracle


def _fmt(x) -> str:
    if isinstance(x, float):
        return "nan" if math.isnan(x) else f"{x:.6e}"
    return str(x)


def format_csv(records, timings: bool = False) -> str:
    cols = CSV_COLUMNS + (("wall_time",) if timings else ())
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in records:
        w.writerow([_fmt(r[c]) for c in cols])
    return buf.getvalue()


def summarize(records) -> dict:
    """Medians (lower median) and maxima of the rounded CSV values."""
    out = {"trials": len(records),
           "recovered": sum(r["status"] == "recovered" for r in records),
           "constant": sum(r["status"] == "constant" for r in records),
           "failed": sum(r["status"].startswith("failed") for r in records),
           "error_grid_points": ERROR_GRID}
    for col in ("a_error", "profile_error", "alpha", "eval_count"):
        vals = [float(_fmt(r[col])) for r in records]
        vals = [v for v in vals if math.isfinite(v)]
        out[col] = ({"median": median(vals), "max": max(vals)} if vals
                    else {"median": None, "max": None})
    out["wall_time_total"] = sum(r["wall_time"] for r in records)
    return out


def run_batch(spec: ExperimentSpec):
    """Run spec.trials instances; writes CSV and summary when paths are set."""
    config = spec.config()
    records = []
    for trial, ss in enumerate(trial_seeds(spec.seed, spec.trials)):
        _, rec, _ = run_single(spec, trial, config=config, seed_seq=ss)
        log.info("trial %d: %s", trial, rec["status"])
        records.append(rec)
    text = format_csv(records, spec.timings)
    summary = summarize(records)
    summary["config"] = config.to_dict()
    if spec.csv_path:
        with open(spec.csv_path, "w", newline="") as fh:
            fh.write(text)
    if spec.summary_path:
        with open(spec.summary_path, "w") as fh:
            json.dump(summary, fh, indent=2, default=_json_default)
    return records, summary, text


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not serializable: {type(obj).__name__}")


def emit_profile_plot_data(output: RecoveryOutput, truth, path=None,
                           points: int = PLOT_POINTS) -> str:
    """Two whitespace-separated blocks: (t, phi_hat(t)) then (t, phi(t)).

    The true profile is oriented to match the recovered one.  Returns the text
    and writes it to ``path`` if given.
    """
    if output.status not in ("recovered", "constant"):
        raise ValueError("no recovered profile to plot")
    t = np.linspace(-1.0, 1.0, points)
    t[0], t[-1] = -1.0, 1.0
    if output.status == "constant":
        est, ref = np.full(points, output.f0), truth(t)
    else:
        est = output.phi_hat(t)
        plus, minus = truth(t), truth(-t)
        ref = plus if np.max(np.abs(est - plus)) <= np.max(np.abs(est - minus)) else minus
    lines = ["# t phi_hat"]
    lines += [f"{x:.17g} {y:.17g}" for x, y in zip(t, est)]
    lines += ["", "", "# t phi"]
    lines += [f"{x:.17g} {y:.17g}" for x, y in zip(t, ref)]
    text = "\n".join(lines) + "\n"
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    return text


def read_plot_data(text: str) -> tuple[np.ndarray, np.ndarray]:
    """Parse the two blocks written by emit_profile_plot_data."""
    blocks = [b for b in text.split("\n\n\n") if b.strip()]
    return tuple(np.loadtxt(io.StringIO(b)) for b in blocks)


# ---------------------------------------------------------------------------
# argument handling

_SPEC_TYPES = {f.name: f.type for f in fields(ExperimentSpec)}
_CASTS = {"int": int, "float": float, "str": str, "bool": lambda s: str(s).lower() in ("1", "true", "yes", "on")}
_OVERRIDE_CASTS = {k: (int if k in ("M", "M1", "N1", "N2", "N3") else float) for k in OVERRIDE_KEYS}


def read_config_file(path) -> dict:
    """Parse ``key = value`` lines (``#`` comments allowed)."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    parser.optionxform = str
    with open(path) as fh:
        parser.read_string("[run]\n" + fh.read())
    return {k.replace("-", "_"): v for k, v in parser["run"].items()}


def _cast(key, value):
    if key in _OVERRIDE_CASTS:
        return _OVERRIDE_CASTS[key](value)
    kind = str(_SPEC_TYPES[key]).split(" ")[0]
    return _CASTS.get(kind, str)(value)


def build_spec(args) -> ExperimentSpec:
    raw = read_config_file(args.config) if getattr(args, "config", None) else {}
    for key, value in vars(args).items():
        if value is not None and key not in ("command", "config", "func", "verbose"):
            raw[key] = value
    spec_kw, overrides = {}, {}
    for key, value in raw.items():
        if key in OVERRIDE_KEYS:
            overrides[key] = _cast(key, value)
        elif key in _SPEC_TYPES and key != "overrides":
            spec_kw[key] = _cast(key, value)
        elif key not in ("result", "output", "trial"):
            raise ValueError(f"unknown parameter {key!r}")
    return ExperimentSpec(overrides=overrides, **spec_kw)


def _add_run_flags(p):
    p.add_argument("--config", help="key=value parameter file")
    g = p.add_argument_group("instance")
    g.add_argument("--n", type=int)
    g.add_argument("--K1", type=int)
    g.add_argument("--K2", type=int)
    g.add_argument("--epsilon", type=float)
    g.add_argument("--frequency", type=float)
    g.add_argument("--profile", choices=("trig", "constant"))
    g.add_argument("--constant-value", dest="constant_value", type=float)
    g.add_argument("--noise", choices=("uniform", "round", "zero"))
    g.add_argument("--Q", type=float, help="bound on |phi|; values are divided by Q")
    g.add_argument("--seed", type=int)
    g = p.add_argument_group("algorithm")
    g.add_argument("--preset", choices=("reference", "derived"))
    g.add_argument("--sigma", type=float)
    g.add_argument("--omega-star", dest="omega_star", type=float)
    g.add_argument("--delta-star", dest="delta_star", type=float)
    for key in OVERRIDE_KEYS:
        g.add_argument("--" + key.replace("_", "-"), dest=key, type=_OVERRIDE_CASTS[key])


def _cmd_recover(args) -> int:
    spec = build_spec(args)
    trial = args.trial or 0
    out, rec, oracle = run_single(spec, trial)
    print(" ".join(f"{k}={_fmt(rec[k])}" for k in CSV_COLUMNS))
    if spec.json_path:
        with open(spec.json_path, "w") as fh:
            json.dump({"output": out.to_dict(), "oracle": oracle.to_dict(), "record": rec},
                      fh, indent=2, default=_json_default)
    if spec.plot_path and out.status in ("recovered", "constant"):
        emit_profile_plot_data(out, oracle.profile, spec.plot_path)
    return 0


def _cmd_batch(args) -> int:
    spec = build_spec(args)
    records, summary, text = run_batch(spec)
    if not spec.csv_path:
        sys.stdout.write(text)
    print(f"# {summary['recovered']}/{summary['trials']} recovered", file=sys.stderr)
    return 0


def _cmd_alpha(args) -> int:
    spec = build_spec(args)
    for trial, ss in enumerate(trial_seeds(spec.seed, spec.trials)):
        oracle, _ = draw_instance(spec, ss)
        print(f"{trial} {alpha_parameter(oracle.profile, spec.n):.6e}")
    return 0


def _cmd_plot(args) -> int:
    with open(args.result) as fh:
        doc = json.load(fh)
    out = RecoveryOutput.from_dict(doc["output"])
    truth = Profile.from_dict(doc["oracle"]["profile"])
    text = emit_profile_plot_data(out, truth, args.output)
    if not args.output:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ridge-recovery", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("recover", help="run one instance")
    _add_run_flags(p)
    p.add_argument("--trial", type=int, help="trial index within the seed (default 0)")
    p.add_argument("--json", dest="json_path", help="write output, oracle and record as JSON")
    p.add_argument("--plot-data", dest="plot_path", help="write profile plot data")
    p.set_defaults(func=_cmd_recover)

    p = sub.add_parser("batch", help="run a seeded batch of instances")
    _add_run_flags(p)
    p.add_argument("--trials", type=int)
    p.add_argument("--csv", dest="csv_path", help="results table (stdout if omitted)")
    p.add_argument("--summary", dest="summary_path", help="JSON summary")
    p.add_argument("--timings", action="store_const", const=True,
                   help="add a wall_time column (breaks byte-reproducibility)")
    p.set_defaults(func=_cmd_batch)

    p = sub.add_parser("alpha", help="alpha parameter of seeded test profiles")
    _add_run_flags(p)
    p.add_argument("--trials", type=int)
    p.set_defaults(func=_cmd_alpha)

    p = sub.add_parser("plot-data", help="plot data from a `recover --json` file")
    p.add_argument("result", help="JSON file written by `recover --json`")
    p.add_argument("-o", "--output", help="output file (stdout if omitted)")
    p.set_defaults(func=_cmd_plot)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, OSError, KeyError, configparser.Error) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
