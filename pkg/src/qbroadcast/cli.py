"""Command-line driver: seeded sweeps over the library with deterministic reports.

Every command reads an optional JSON config, lets flags override it, runs its
trials (possibly on several threads) and writes a JSON envelope or a CSV
table. Reports contain no timestamps and floats are printed with 12
significant digits, so a rerun with the same config and seed reproduces the
file byte for byte whatever ``--workers`` is.

Exit codes: 0 when every asserted bound holds, 1 on a violation or a failed
trial, 2 on a configuration error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Optional, Sequence

import numpy as np

from . import __version__
from .channels import (
    PRESETS,
    ChannelInformation,
    OptimizerConfig,
    QuantumChannel,
    capacity_region,
    channel_error_exponent,
    preset_channel,
    region_membership,
)
from .convex_split import convex_split_bound, random_split_instance
from .errors import ConfigParseError, IoError, MissingSeed, QBroadcastError, ShapeMismatch
from .operators import DEFAULT_DIM_CAP, HilbertFactorization, make_rng, partial_trace, random_density_operator
from .renyi import petz_divergence, renyi_information, sandwiched_divergence
from .simulation import (
    BlocklengthParams,
    ModerateSchedule,
    bound_from_exponents,
    bound_slope,
    channel_subset_exponents,
    moderate_deviation_curve,
)
from .state_splitting import qss_error_bound, random_qss_instance, run_qss_protocol

SIG_DIGITS = 12
MONOTONE_SLACK = 1e-7
PETZ_SLACK = 1e-9
QSS_SLACK = 1e-6
DEFAULT_CHANNEL = {"preset": "depolarizing", "p": 0.3}

COMMON_DEFAULTS = {
    "seed": None,
    "trials": 1,
    "out": None,
    "format": "json",
    "dim_cap": DEFAULT_DIM_CAP,
    "workers": 1,
    "tol": 1e-9,
}

COMMAND_DEFAULTS: dict[str, dict[str, Any]] = {
    "divergence": {"dim": 2, "orders": [1.0, 1.25, 1.5, 2.0]},
    "renyi-info": {"dims": [2, 2], "orders": [1.0, 1.25, 1.5, 2.0]},
    "convex-split": {"parties": 1, "counts": None, "max_count": 8, "dim": 2, "dim_e": 2, "tau_mode": "random"},
    "qss-bound": {"rates": [1.0, 1.0], "dim": 2},
    "qss-demo": {"rates": [1, 1], "dim": 2},
    "capacity-region": {"channel": DEFAULT_CHANNEL, "memberships": [], "optimizer": {}},
    "exponent": {"channel": DEFAULT_CHANNEL, "subset": None, "rates": [1.0, 1.5, 2.0], "optimizer": {}},
    "simulate-bound": {"channel": DEFAULT_CHANNEL, "rates": [2.0], "n_grid": [10, 100, 1000, 10000, 100000],
                       "optimizer": {}},
    "moderate": {"channel": DEFAULT_CHANNEL, "t": 0.25, "n_grid": [10**4, 10**6, 10**8, 10**10], "scales": {},
                 "band": 0.05, "optimizer": {}},
}

# CSV header per command, in column order
CSV_COLUMNS: dict[str, tuple[str, ...]] = {
    "divergence": ("trial", "alpha", "sandwiched", "petz"),
    "renyi-info": ("trial", "alpha", "information", "converged", "certificate_gap"),
    "convex-split": ("trial", "counts", "delta", "bound", "exponents", "satisfied", "error"),
    "qss-bound": ("trial", "rates", "epsilon_bound", "all_positive", "exponents", "error"),
    "qss-demo": ("trial", "rates", "epsilon_prime", "achieved_error", "guarantee", "satisfied", "error"),
    "capacity-region": ("subset", "threshold", "certified_gap"),
    "exponent": ("rate", "exponent", "alpha_star"),
    "simulate-bound": ("n", "log2_prefactor", "log2_epsilon_bound", "epsilon_bound"),
    "moderate": ("n", "a_n", "rates", "log2_bound", "normalized_exponent"),
}


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated settings of one command run.

    Attributes:
        command: subcommand name.
        seed: master seed; every trial derives its own stream from it.
        trials: number of random trials (ignored by the channel commands).
        out: report path, or None for standard output.
        format: ``"json"`` or ``"csv"``.
        dim_cap: largest total dimension a construction may allocate.
        workers: threads used for trials or subsets.
        tol: numerical tolerance passed to the inner solvers.
        params: command-specific settings with defaults filled in.
        channel: the channel, for channel commands.
    """

    command: str
    seed: int
    trials: int = 1
    out: Optional[str] = None
    format: str = "json"
    dim_cap: int = DEFAULT_DIM_CAP
    workers: int = 1
    tol: float = 1e-9
    params: dict = field(default_factory=dict)
    channel: Optional[QuantumChannel] = field(default=None, compare=False, repr=False)

    def echo(self) -> dict:
        """Settings as written into the report (``out`` and ``workers`` excluded)."""
        d = {"seed": self.seed, "trials": self.trials, "format": self.format, "dim_cap": self.dim_cap,
             "tol": self.tol}
        d.update(self.params)
        return d

    def optimizer(self) -> OptimizerConfig:
        return OptimizerConfig(**{**self.params.get("optimizer", {}), "seed": self.seed})


def _line_of(text: str, key: str) -> int:
    idx = text.find(f'"{key}"')
    return text.count("\n", 0, idx) + 1 if idx >= 0 else 0


def _load_json(path: str) -> tuple[dict, str]:
    try:
        with open(path, encoding="utf-8") as f:
            text = f.read()
    except OSError as exc:
        raise ConfigParseError(f"{path}: cannot read config ({exc.strerror})") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigParseError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise ConfigParseError(f"{path}: line 1: top level must be a JSON object")
    return data, text


def load_kraus_file(path: str) -> QuantumChannel:
    """Channel from ``{"d_in": int, "out_dims": [int], "kraus": [...]}``.

    Each Kraus operator is a row-major list of ``[re, im]`` pairs, either flat
    (``d_out * d_in`` entries) or as ``d_out`` rows of ``d_in`` entries.

    Raises:
        ConfigParseError: on malformed content.
        NotTracePreserving: if ``sum K^dagger K`` deviates from the identity.
    """
    data, _ = _load_json(path)
    unknown = set(data) - {"d_in", "out_dims", "kraus"}
    if unknown:
        raise ConfigParseError(f"{path}: unknown key {sorted(unknown)[0]!r}")
    try:
        d_in = int(data["d_in"])
        out_dims = tuple(int(d) for d in data["out_dims"])
        d_out = int(np.prod(out_dims))
        kraus = []
        for k in data["kraus"]:
            arr = np.asarray(k, dtype=float)
            if arr.shape[-1] != 2 or arr.size != 2 * d_out * d_in:
                raise ValueError(f"Kraus operator with shape {arr.shape} does not fit {d_out}x{d_in}")
            kraus.append((arr[..., 0] + 1j * arr[..., 1]).reshape(d_out, d_in))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigParseError(f"{path}: invalid Kraus data: {exc}") from exc
    labels = ("B",) if len(out_dims) == 1 else tuple(f"B{l + 1}" for l in range(len(out_dims)))
    return QuantumChannel(tuple(kraus), output_space=HilbertFactorization(labels, out_dims))


def _build_channel(channel_cfg: Any, base_dir: str) -> QuantumChannel:
    if not isinstance(channel_cfg, dict):
        raise ConfigParseError(f"channel must be an object, got {channel_cfg!r}")
    channel_cfg = dict(channel_cfg)
    if "kraus_file" in channel_cfg:
        if len(channel_cfg) != 1:
            raise ConfigParseError("a Kraus-file channel takes no other keys")
        path = channel_cfg["kraus_file"]
        if not os.path.isabs(path):
            path = os.path.join(base_dir, path)
        if not os.path.exists(path):
            raise ConfigParseError(f"Kraus file {path} does not exist")
        return load_kraus_file(path)
    name = channel_cfg.pop("preset", None)
    if name not in PRESETS:
        raise ConfigParseError(f"unknown channel preset {name!r}; choose from {sorted(PRESETS)}")
    try:
        return preset_channel(name, **channel_cfg)
    except TypeError as exc:
        raise ConfigParseError(f"bad parameters for preset {name!r}: {exc}") from exc


def _check_positive_int(name: str, value: Any, minimum: int = 1) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
        raise ConfigParseError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return value


def parse_config(command: str, path: Optional[str] = None, overrides: Optional[dict] = None) -> ExperimentConfig:
    """Merge defaults, an optional JSON file and flag overrides into a validated config.

    Args:
        command: subcommand name.
        path: JSON config file; its keys are the common settings, the
            command's own settings and optionally ``"command"``.
        overrides: values from flags; None entries are ignored.

    Raises:
        ConfigParseError: malformed file, unknown key or invalid value.
        MissingSeed: if no seed is given.
    """
    if command not in COMMAND_DEFAULTS:
        raise ConfigParseError(f"unknown command {command!r}")
    allowed = {**COMMON_DEFAULTS, **COMMAND_DEFAULTS[command]}
    data, text, base_dir = {}, "", os.getcwd()
    if path is not None:
        data, text = _load_json(path)
        base_dir = os.path.dirname(os.path.abspath(path))
        if "command" in data and data.pop("command") != command:
            raise ConfigParseError(f"{path}: line {_line_of(text, 'command')}: config is for another command")
        for key in sorted(data):
            if key not in allowed:
                raise ConfigParseError(f"{path}: line {_line_of(text, key)}: unknown key {key!r}")
    merged = {**COMMON_DEFAULTS, **COMMAND_DEFAULTS[command], **data}
    merged.update({k: v for k, v in (overrides or {}).items() if v is not None})

    if merged["seed"] is None:
        raise MissingSeed(f"command {command!r} needs a seed (--seed or \"seed\" in the config)")
    seed = _check_positive_int("seed", merged["seed"], 0)
    trials = _check_positive_int("trials", merged["trials"])
    dim_cap = _check_positive_int("dim_cap", merged["dim_cap"])
    workers = _check_positive_int("workers", merged["workers"])
    if merged["format"] not in ("json", "csv"):
        raise ConfigParseError(f"format must be 'json' or 'csv', got {merged['format']!r}")
    tol = merged["tol"]
    if isinstance(tol, bool) or not isinstance(tol, (int, float)) or not tol > 0:
        raise ConfigParseError(f"tol must be positive, got {tol!r}")

    params = {k: merged[k] for k in COMMAND_DEFAULTS[command]}
    channel = None
    if "channel" in params:
        channel = _build_channel(params["channel"], base_dir)
    if "optimizer" in params:
        opt = params["optimizer"]
        if not isinstance(opt, dict):
            raise ConfigParseError(f"optimizer must be an object, got {opt!r}")
        # the optimizer seed always follows the master seed
        bad = sorted(k for k in opt if k not in OptimizerConfig.__dataclass_fields__ or k == "seed")
        if bad:
            raise ConfigParseError(f"{path}: line {_line_of(text, bad[0])}: unknown optimizer key {bad[0]!r}")
    return ExperimentConfig(command, seed, trials, merged["out"], merged["format"], dim_cap, workers, float(tol),
                            params, channel)


# ---------------------------------------------------------------------------
# Report envelope
# ---------------------------------------------------------------------------


@dataclass
class ReportEnvelope:
    """Command results plus the pass/fail summary.

    Attributes:
        command: subcommand name.
        config: settings echo.
        results: command-specific values; ``rows`` holds the table.
        violations: number of asserted bounds that failed.
        failures: number of trials that raised.
    """

    command: str
    config: dict
    results: dict
    violations: int = 0
    failures: int = 0

    @property
    def passed(self) -> bool:
        return self.violations == 0 and self.failures == 0

    def to_dict(self) -> dict:
        return {
            "tool": "qbroadcast",
            "version": __version__,
            "command": self.command,
            "config": self.config,
            "results": self.results,
            "summary": {"violations": self.violations, "failures": self.failures, "pass": self.passed},
        }


def format_value(x: Any) -> Any:
    """Round floats to 12 significant digits, recursively; non-finite floats become strings."""
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return float(f"{x:.{SIG_DIGITS}g}")
    if isinstance(x, dict):
        return {str(k): format_value(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [format_value(v) for v in x]
    return x


def _csv_cell(x: Any) -> str:
    x = format_value(x)
    if x is None:
        return ""
    if isinstance(x, float):
        return f"{x:.{SIG_DIGITS}g}"
    if isinstance(x, list):
        return " ".join(_csv_cell(v) for v in x)
    if isinstance(x, dict):
        return ";".join(f"{k}={_csv_cell(v)}" for k, v in sorted(x.items()))
    return str(x)


def render_report(env: ReportEnvelope, fmt: str = "json") -> str:
    """Serialize deterministically: sorted JSON keys, or the command's fixed CSV header."""
    if fmt == "json":
        return json.dumps(format_value(env.to_dict()), sort_keys=True, indent=2) + "\n"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    cols = CSV_COLUMNS[env.command]
    writer.writerow(cols)
    for row in env.results.get("rows", []):
        writer.writerow([_csv_cell(row.get(c)) for c in cols])
    return buf.getvalue()


def emit_report(env: ReportEnvelope, path: Optional[str] = None, fmt: str = "json") -> None:
    """Write the report to ``path`` (standard output when None).

    Raises:
        IoError: if the file cannot be written.
    """
    text = render_report(env, fmt)
    if path is None:
        sys.stdout.write(text)
        return
    try:
        with open(path, "w", encoding="utf-8", newline="") as f:
            f.write(text)
    except OSError as exc:
        raise IoError(f"cannot write report to {path}: {exc.strerror}") from exc


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def _map(fn: Callable, items: Sequence, workers: int) -> list:
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def _trial_rows(cfg: ExperimentConfig, fn: Callable[[int], list[dict]]) -> tuple[list[dict], int]:
    """Run ``fn`` per trial; a raising trial becomes an error row."""

    def safe(trial):
        try:
            return fn(trial)
        except (QBroadcastError, FloatingPointError, np.linalg.LinAlgError) as exc:
            return [{"trial": trial, "error": f"{type(exc).__name__}: {exc}"}]

    rows = [r for chunk in _map(safe, range(cfg.trials), cfg.workers) for r in chunk]
    return rows, sum(1 for r in rows if "error" in r)


def _subset_key(s: Sequence[str]) -> str:
    return ",".join(s)


def run_divergence(cfg: ExperimentConfig) -> ReportEnvelope:
    """Random state pairs: sandwiched and Petz divergences, monotonicity in the order."""
    dim, orders = int(cfg.params["dim"]), sorted(float(a) for a in cfg.params["orders"])
    if orders[0] < 1:
        raise ConfigParseError("orders must be >= 1")

    def trial(t):
        rng = make_rng(cfg.seed, t)
        rho, sigma = random_density_operator(dim, seed=rng), random_density_operator(dim, seed=rng)
        rows = []
        for a in orders:
            petz = petz_divergence(rho, sigma, a) if a > 1 else None
            rows.append({"trial": t, "alpha": a, "sandwiched": sandwiched_divergence(rho, sigma, a), "petz": petz})
        return rows

    rows, failures = _trial_rows(cfg, trial)
    violations = 0
    good = [r for r in rows if "error" not in r]
    for prev, cur in zip(good, good[1:]):
        if prev["trial"] == cur["trial"] and cur["sandwiched"] < prev["sandwiched"] - MONOTONE_SLACK:
            violations += 1
    violations += sum(1 for r in good if r["petz"] is not None and r["sandwiched"] > r["petz"] + PETZ_SLACK)
    return ReportEnvelope(cfg.command, cfg.echo(), {"rows": rows}, violations, failures)


def run_renyi_info(cfg: ExperimentConfig) -> ReportEnvelope:
    """Random ``rho_AB`` with ``tau_A = rho_A``: Renyi information per order."""
    d_a, d_b = (int(d) for d in cfg.params["dims"])
    orders = sorted(float(a) for a in cfg.params["orders"])
    space = HilbertFactorization(("A", "B"), (d_a, d_b))

    def trial(t):
        rho = random_density_operator(space, seed=make_rng(cfg.seed, t))
        tau = partial_trace(rho, "A")
        rows = []
        for a in orders:
            rep = renyi_information(rho, tau, ("B",), a, tol=min(cfg.tol, 1e-9), seed=cfg.seed)
            rows.append({"trial": t, "alpha": a, "information": rep.objective, "converged": rep.converged,
                         "certificate_gap": rep.certificate_gap})
        return rows

    rows, failures = _trial_rows(cfg, trial)
    good = [r for r in rows if "error" not in r]
    violations = sum(1 for p, c in zip(good, good[1:])
                     if p["trial"] == c["trial"] and c["information"] < p["information"] - MONOTONE_SLACK)
    violations += sum(1 for r in good if r["certificate_gap"] < -MONOTONE_SLACK)
    return ReportEnvelope(cfg.command, cfg.echo(), {"rows": rows}, violations, failures)


def _split_counts(cfg: ExperimentConfig, trial: int) -> tuple[int, ...]:
    parties = int(cfg.params["parties"])
    if cfg.params["counts"] is not None:
        counts = tuple(int(m) for m in cfg.params["counts"])
        if len(counts) != parties:
            raise ShapeMismatch(f"{len(counts)} counts for {parties} parties")
        return counts
    rng = make_rng(cfg.seed, trial, 1)
    counts = [int(m) for m in rng.integers(1, int(cfg.params["max_count"]) + 1, size=parties)]
    dim, dim_e = int(cfg.params["dim"]), int(cfg.params["dim_e"])
    # shrink the largest count until the copied space fits the cap
    while dim ** sum(counts) * dim_e > cfg.dim_cap and max(counts) > 1:
        counts[counts.index(max(counts))] -= 1
    return tuple(counts)


def run_convex_split_sweep(cfg: ExperimentConfig) -> ReportEnvelope:
    """Random convex-split instances: exact error against the subset-exponent bound."""
    p = cfg.params

    def trial(t):
        counts = _split_counts(cfg, t)
        inst = random_split_instance(int(p["parties"]), counts, make_rng(cfg.seed, t), dim=int(p["dim"]),
                                     dim_e=int(p["dim_e"]), tau_mode=p["tau_mode"])
        v = convex_split_bound(inst, cfg.dim_cap)
        exps = {_subset_key(s): e for s, e in v.per_subset_exponents.items()}
        return [{"trial": t, "counts": list(counts), "delta": v.delta, "bound": v.bound, "exponents": exps,
                 "satisfied": v.satisfied}]

    rows, failures = _trial_rows(cfg, trial)
    violations = sum(1 for r in rows if r.get("satisfied") is False)
    return ReportEnvelope(cfg.command, cfg.echo(), {"rows": rows}, violations, failures)


def run_qss_bound(cfg: ExperimentConfig) -> ReportEnvelope:
    """Random state-splitting instances: error bound and per-subset exponents."""
    rates = tuple(float(r) for r in cfg.params["rates"])

    def trial(t):
        inst = random_qss_instance(rates, make_rng(cfg.seed, t), dim=int(cfg.params["dim"]))
        rep = qss_error_bound(inst)
        exps = {_subset_key(s): e for s, e in rep.per_subset_exponents.items()}
        return [{"trial": t, "rates": list(rates), "epsilon_bound": rep.epsilon_bound,
                 "all_positive": rep.all_positive, "exponents": exps}]

    rows, failures = _trial_rows(cfg, trial)
    return ReportEnvelope(cfg.command, cfg.echo(), {"rows": rows}, 0, failures)


def run_qss_demo(cfg: ExperimentConfig) -> ReportEnvelope:
    """Run the state-splitting protocol on small random instances."""
    rates = tuple(cfg.params["rates"])

    def trial(t):
        inst = random_qss_instance(rates, make_rng(cfg.seed, t), dim=int(cfg.params["dim"]))
        run = run_qss_protocol(inst, cfg.dim_cap)
        ok = run.achieved_error <= run.guarantee + QSS_SLACK
        return [{"trial": t, "rates": list(rates), "epsilon_prime": run.epsilon_prime,
                 "achieved_error": run.achieved_error, "guarantee": run.guarantee, "satisfied": ok}]

    rows, failures = _trial_rows(cfg, trial)
    violations = sum(1 for r in rows if r.get("satisfied") is False)
    return ReportEnvelope(cfg.command, cfg.echo(), {"rows": rows}, violations, failures)


def run_capacity_region(cfg: ExperimentConfig) -> ReportEnvelope:
    """Thresholds for every receiver subset, corners and membership verdicts."""
    rep = capacity_region(cfg.channel, cfg.optimizer(), workers=cfg.workers)
    rows = [{"subset": _subset_key(s), "threshold": t, "certified_gap": rep.optima[s].certified_gap}
            for s, t in rep.thresholds.items()]
    memberships = []
    for rates in cfg.params["memberships"]:
        member, slack = region_membership(rep, rates)
        memberships.append({"rates": list(rates), "member": member,
                            "slack": {_subset_key(s): v for s, v in slack.items()}})
    results = {"rows": rows, "receivers": list(rep.labels), "memberships": memberships,
               "vertices": [list(v) for v in rep.vertices_2d] if rep.vertices_2d else None}
    return ReportEnvelope(cfg.command, cfg.echo(), results)


def run_exponent(cfg: ExperimentConfig) -> ReportEnvelope:
    """Channel error exponent ``E_r`` over a list of rates."""
    ch = cfg.channel
    subset = tuple(cfg.params["subset"]) if cfg.params["subset"] is not None else ch.output_labels
    base = ChannelInformation(ch, subset, cfg.optimizer())

    def one(r):
        e = channel_error_exponent(ch, subset, float(r), cfg.optimizer(), info=base.fork())
        return {"rate": float(r), "exponent": e.value, "alpha_star": e.alpha_star}

    rows = _map(one, list(cfg.params["rates"]), cfg.workers)
    results = {"rows": rows, "subset": list(subset), "threshold": base.capacity}
    return ReportEnvelope(cfg.command, cfg.echo(), results)


def run_simulation_bound(cfg: ExperimentConfig) -> ReportEnvelope:
    """Bound versus blocklength for fixed rates, with the exponent lower bound."""
    ch = cfg.channel
    exps = channel_subset_exponents(ch, cfg.params["rates"], cfg.optimizer(), workers=cfg.workers)
    params = BlocklengthParams(1, len(ch.output_labels), ch.d_in)
    rows = []
    for n in sorted(int(n) for n in cfg.params["n_grid"]):
        rep = bound_from_exponents(exps, params.with_n(n))
        rows.append({"n": n, "log2_prefactor": rep.log2_prefactor, "log2_epsilon_bound": rep.log2_epsilon_bound,
                     "epsilon_bound": rep.epsilon_bound})
    lower = 0.5 * min(exps.values())
    largest = params.with_n(rows[-1]["n"]) if rows else params
    results = {
        "rows": rows,
        "exponents": {_subset_key(s): e for s, e in exps.items()},
        "exponent_lower": lower,
        "boundary": lower <= 0.0,
        "slope_at_largest_n": bound_slope(exps, largest),
    }
    return ReportEnvelope(cfg.command, cfg.echo(), results)


def run_moderate(cfg: ExperimentConfig) -> ReportEnvelope:
    """Moderate-deviation table; asserts the normalized exponent band at the largest ``n``."""
    ch = cfg.channel
    scales = {}
    for key, v in (cfg.params["scales"] or {}).items():
        scales[tuple(key.split(","))] = float(v)
    sched = ModerateSchedule(float(cfg.params["t"]), tuple(cfg.params["n_grid"]), scales)
    tab = moderate_deviation_curve(ch, sched, cfg.optimizer(), workers=cfg.workers)
    rows = [{"n": r.n, "a_n": r.a_n, "rates": list(r.rates), "log2_bound": r.log2_bound,
             "normalized_exponent": r.normalized_exponent} for r in tab.rows]
    floor = tab.proven_constant - float(cfg.params["band"])
    last = tab.rows[-1].normalized_exponent
    results = {
        "rows": rows,
        "thresholds": {_subset_key(s): v for s, v in tab.thresholds.items()},
        "scales": {_subset_key(s): v for s, v in tab.scales.items()},
        "base_rates": list(tab.base_rates),
        "proven_constant": tab.proven_constant,
        "conjectured_constant": tab.conjectured_constant,
        "monotone": tab.is_monotone(),
        "band_floor": floor,
    }
    return ReportEnvelope(cfg.command, cfg.echo(), results, int(last < floor))


RUNNERS: dict[str, Callable[[ExperimentConfig], ReportEnvelope]] = {
    "divergence": run_divergence,
    "renyi-info": run_renyi_info,
    "convex-split": run_convex_split_sweep,
    "qss-bound": run_qss_bound,
    "qss-demo": run_qss_demo,
    "capacity-region": run_capacity_region,
    "exponent": run_exponent,
    "simulate-bound": run_simulation_bound,
    "moderate": run_moderate,
}


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qbroadcast", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, runner in RUNNERS.items():
        p = sub.add_parser(name, help=runner.__doc__.splitlines()[0])
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--seed", type=int, help="master seed (required here or in the config)")
        p.add_argument("--trials", type=int, help="number of random trials")
        p.add_argument("--out", help="report path (default: standard output)")
        p.add_argument("--format", choices=("json", "csv"), help="report format")
        p.add_argument("--dim-cap", type=int, dest="dim_cap", help=f"dimension cap (default {DEFAULT_DIM_CAP})")
        p.add_argument("--workers", type=int, help="worker threads; does not change the report")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {k: getattr(args, k) for k in ("seed", "trials", "out", "format", "dim_cap", "workers")}
    try:
        cfg = parse_config(args.command, args.config, overrides)
    except QBroadcastError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    try:
        env = RUNNERS[cfg.command](cfg)
    except QBroadcastError as exc:
        env = ReportEnvelope(cfg.command, cfg.echo(), {"rows": [], "error": f"{type(exc).__name__}: {exc}"},
                             failures=1)
    try:
        emit_report(env, cfg.out, cfg.format)
    except IoError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0 if env.passed else 1


if __name__ == "__main__":
    sys.exit(main())
