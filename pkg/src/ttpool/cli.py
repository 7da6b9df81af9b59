"""Batch command-line interface: `ttpool test | simulate | null-study`.

Configuration is a flat JSON object of dotted key paths; selected keys
accept lists and expand into a Cartesian sweep.  Every output embeds the
fully-resolved effective configuration so each row is reproducible from
its own metadata plus the recorded seeds.

Exit codes: 0 success, 2 config error, 3 data error, 4 statistical
precondition failure.  Statistical reject/accept decisions never affect
exit codes.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import itertools
import json
import math
import sys
from pathlib import Path

from .causality import CausalityConfig, CausalityOutcome, DiagnosticsReport, Method
from .errors import (
    ConfigError,
    DataError,
    DegenerateSample,
    DimensionMismatch,
    IndexOutOfRange,
    NonVStatEstimator,
    SampleTooSmall,
    TTPoolError,
)
from .estimators import Estimator
from .fusion import FusionConfig, FusionMode, FusionOutcome
from .kernels import Arm, KernelFamily, KernelSpec, Sample
from .pipeline import TTPConfig, TTPReport, run_classic_ttp, run_equivalence_ttp
from .simulate import (
    MeanShift,
    Scenario,
    VarShift,
    null_distribution_study,
    run_campaign,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_STATISTICAL = 4

_STATISTICAL_ERRORS = (
    DegenerateSample,
    SampleTooSmall,
    DimensionMismatch,
    IndexOutOfRange,
    NonVStatEstimator,
)

# ---------------------------------------------------------------------------
# Configuration schema.
# ---------------------------------------------------------------------------

_COMMON_DEFAULTS = {
    "kernel.family": "rbf",
    "kernel.bandwidth": "median",
    "kernel.epsilon": 0.0,
    "fusion.mode": "equivalence",
    "fusion.theta": 0.4,
    "fusion.alpha": 0.05,
    "fusion.num_bootstrap": 1000,
    "causality.alpha": 0.05,
    "causality.num_resamples": 1000,
    "causality.estimator": "v",
    "merged_method": "partial_bootstrap",
    "seed": 0,
}

_DEFAULTS = {
    "test": {**_COMMON_DEFAULTS, "data": ""},
    "simulate": {
        **_COMMON_DEFAULTS,
        "compare_methods": [],
        "scenario.generator": "mean_shift",
        "scenario.mu_c_minus_mu_t": 0.0,
        "scenario.mu_h_minus_mu_c": 0.0,
        "scenario.var_c_over_var_t": 1.0,
        "scenario.var_h_over_var_c": 1.0,
        "sizes.n": 100,
        "sizes.m": 50,
        "sizes.l": 100,
        "replicates": 1000,
    },
    "null-study": {
        **_COMMON_DEFAULTS,
        "scenario.generator": "mean_shift",
        "scenario.mu_c_minus_mu_t": 0.0,
        "scenario.mu_h_minus_mu_c": 0.0,
        "scenario.var_c_over_var_t": 1.0,
        "scenario.var_h_over_var_c": 1.0,
        "sizes.n": 100,
        "sizes.m": 50,
        "sizes.l": 100,
        "replicates": 1000,
        "nullstudy.probe_levels": [0.9, 0.95],
        "nullstudy.probe_mu_c_minus_mu_t": None,
        "nullstudy.ref_draws": 20,
    },
}

#: Keys whose value may be a list, expanding into a Cartesian sweep.
_SWEEP_KEYS = (
    "kernel.bandwidth",
    "fusion.theta",
    "scenario.mu_c_minus_mu_t",
    "scenario.mu_h_minus_mu_c",
    "scenario.var_c_over_var_t",
    "scenario.var_h_over_var_c",
    "sizes.n",
)

#: Keys that are legitimately list-valued (not sweeps).
_LIST_KEYS = ("compare_methods", "nullstudy.probe_levels")


def load_config(command: str, config_path, overrides) -> dict:
    """Merge file config and --set overrides over the command defaults."""
    defaults = _DEFAULTS[command]
    cfg = dict(defaults)
    if config_path is not None:
        try:
            raw = json.loads(Path(config_path).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config file {config_path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {config_path} is not valid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("config file must hold a flat JSON object")
        for key, value in raw.items():
            if key not in defaults:
                raise ConfigError(f"unknown config key {key!r} for command {command!r}")
            cfg[key] = value
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, _, text = item.partition("=")
        if key not in defaults:
            raise ConfigError(f"unknown config key {key!r} for command {command!r}")
        cfg[key] = _coerce_override(key, text, defaults[key])
    _validate_types(command, cfg)
    return cfg


def _coerce_scalar(text: str, template):
    if isinstance(template, bool):
        return text.lower() in ("1", "true", "yes")
    if isinstance(template, int) and not isinstance(template, bool):
        return int(text)
    if isinstance(template, float):
        return float(text)
    return text


def _coerce_override(key: str, text: str, default):
    if key in _SWEEP_KEYS or key in _LIST_KEYS:
        template = default[0] if isinstance(default, list) and default else default
        if key == "kernel.bandwidth":
            items = [t if t == "median" else float(t) for t in text.split(",")]
        elif key == "compare_methods":
            items = text.split(",") if text else []
        else:
            base = 0.0 if not isinstance(template, (int, float, str)) else template
            items = [_coerce_scalar(t, base if base != "median" else 0.0) for t in text.split(",")]
        return items if (len(items) > 1 or key in _LIST_KEYS) else items[0]
    if default is None:
        return float(text)
    return _coerce_scalar(text, default)


def _validate_types(command: str, cfg: dict) -> None:
    for key, value in cfg.items():
        if isinstance(value, list) and key not in _SWEEP_KEYS and key not in _LIST_KEYS:
            raise ConfigError(f"config key {key!r} does not accept a list")


def expand_sweeps(cfg: dict) -> list[dict]:
    """Cartesian product over every sweep key holding a list."""
    sweeps = [(k, cfg[k]) for k in _SWEEP_KEYS if k in cfg and isinstance(cfg[k], list)]
    if not sweeps:
        return [dict(cfg)]
    cells = []
    keys = [k for k, _ in sweeps]
    for combo in itertools.product(*(v for _, v in sweeps)):
        cell = dict(cfg)
        cell.update(zip(keys, combo))
        cells.append(cell)
    return cells


# ---------------------------------------------------------------------------
# Config -> domain objects.
# ---------------------------------------------------------------------------

_METHODS = {m.value: m for m in Method}


def _parse_enum(mapping: dict, value: str, what: str):
    try:
        return mapping[value]
    except KeyError:
        raise ConfigError(f"unknown {what} {value!r}; expected one of {sorted(mapping)}")


def build_kernel_spec(cfg: dict) -> KernelSpec:
    family = _parse_enum({k.value: k for k in KernelFamily}, cfg["kernel.family"], "kernel family")
    bw = cfg["kernel.bandwidth"]
    bandwidth = None if bw == "median" else float(bw)
    return KernelSpec(family=family, bandwidth=bandwidth, epsilon=float(cfg["kernel.epsilon"]))


def build_ttp_config(cfg: dict) -> TTPConfig:
    mode = _parse_enum(
        {"equivalence": FusionMode.EQUIVALENCE, "classic": FusionMode.CLASSIC_PERMUTATION},
        cfg["fusion.mode"],
        "fusion mode",
    )
    estimator = _parse_enum(
        {"v": Estimator.VSTAT, "u": Estimator.USTAT}, cfg["causality.estimator"], "estimator"
    )
    return TTPConfig(
        kernel=build_kernel_spec(cfg),
        fusion=FusionConfig(
            theta=float(cfg["fusion.theta"]),
            alpha_f=float(cfg["fusion.alpha"]),
            num_bootstrap=int(cfg["fusion.num_bootstrap"]),
            mode=mode,
        ),
        causality=CausalityConfig(
            alpha=float(cfg["causality.alpha"]),
            num_resamples=int(cfg["causality.num_resamples"]),
            estimator=estimator,
        ),
        merged_method=_parse_enum(_METHODS, cfg["merged_method"], "merged method"),
    )


def build_generator(cfg: dict):
    kind = cfg["scenario.generator"]
    if kind == "mean_shift":
        return MeanShift(
            mu_c_minus_mu_t=float(cfg["scenario.mu_c_minus_mu_t"]),
            mu_h_minus_mu_c=float(cfg["scenario.mu_h_minus_mu_c"]),
        )
    if kind == "var_shift":
        return VarShift(
            var_c_over_var_t=float(cfg["scenario.var_c_over_var_t"]),
            var_h_over_var_c=float(cfg["scenario.var_h_over_var_c"]),
        )
    raise ConfigError(f"unknown scenario generator {kind!r}")


def build_scenario(cfg: dict) -> Scenario:
    compare = tuple(
        _parse_enum(_METHODS, name, "compare method") for name in cfg.get("compare_methods", [])
    )
    return Scenario(
        generator=build_generator(cfg),
        n=int(cfg["sizes.n"]),
        m=int(cfg["sizes.m"]),
        l=int(cfg["sizes.l"]),
        ttp=build_ttp_config(cfg),
        replicates=int(cfg["replicates"]),
        master_seed=int(cfg["seed"]),
        compare_methods=compare,
    )


# ---------------------------------------------------------------------------
# Dataset ingestion.
# ---------------------------------------------------------------------------

_ARMS = {a.value: a for a in Arm}


def load_dataset(path) -> dict:
    """Parse the arm-labelled CSV into one (size, d) array per arm."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise DataError(f"cannot read dataset {path}: {exc}") from exc
    rows = list(csv.reader(text.splitlines()))
    if not rows:
        raise DataError(f"dataset {path} is empty")
    start = 0
    if rows[0] and rows[0][0].strip().lower() == "arm":
        start = 1
    arms: dict = {a: [] for a in Arm}
    width = None
    for lineno, row in enumerate(rows[start:], start=start + 1):
        if not row or all(not cell.strip() for cell in row):
            continue
        label = row[0].strip().lower()
        if label not in _ARMS:
            raise DataError(f"row {lineno}: unknown arm label {row[0]!r}")
        if width is None:
            width = len(row)
            if width < 2:
                raise DataError(f"row {lineno}: expected at least one value column")
        elif len(row) != width:
            raise DataError(f"row {lineno}: expected {width} columns, found {len(row)}")
        values = []
        for col, cell in enumerate(row[1:], start=2):
            try:
                value = float(cell)
            except ValueError:
                raise DataError(f"row {lineno}, column {col}: not a number: {cell!r}")
            if math.isnan(value) or math.isinf(value):
                raise DataError(f"row {lineno}, column {col}: non-finite value {cell!r}")
            values.append(value)
        arms[_ARMS[label]].append(values)
    for arm, pts in arms.items():
        if not pts:
            raise DataError(f"dataset {path} has no rows for arm {arm.value!r}")
    return {arm: Sample(pts, arm) for arm, pts in arms.items()}


# ---------------------------------------------------------------------------
# Serialization.
# ---------------------------------------------------------------------------


def report_to_dict(report: TTPReport, effective_config: dict) -> dict:
    return {
        "fusion": {
            "statistic": report.fusion.statistic,
            "critical_value": report.fusion.critical_value,
            "merged": report.fusion.merged,
            "mode": report.fusion.mode.value,
            "resamples_used": report.fusion.resamples_used,
        },
        "causality": {
            "statistic": report.causality.statistic,
            "critical_value": report.causality.critical_value,
            "reject": report.causality.reject,
            "method": report.causality.method.value,
            "merged_analysis": report.causality.merged_analysis,
        },
        "diagnostics": dataclasses.asdict(report.diagnostics),
        "bandwidth_pooled3": report.bandwidth_pooled3,
        "bandwidth_pooled2": report.bandwidth_pooled2,
        "bandwidth_used": report.bandwidth_used,
        "seeds": report.seeds,
        "config": effective_config,
    }


def report_from_dict(payload: dict) -> tuple:
    """Rebuild the outcome objects from a serialized report (round-trip)."""
    f = payload["fusion"]
    fusion = FusionOutcome(
        statistic=f["statistic"],
        critical_value=f["critical_value"],
        merged=f["merged"],
        mode=FusionMode(f["mode"]),
        resamples_used=f["resamples_used"],
    )
    c = payload["causality"]
    causality = CausalityOutcome(
        statistic=c["statistic"],
        critical_value=c["critical_value"],
        reject=c["reject"],
        method=Method(c["method"]),
        merged_analysis=c["merged_analysis"],
    )
    diagnostics = DiagnosticsReport(**payload["diagnostics"])
    return fusion, causality, diagnostics, payload["config"]


def _config_header_lines(cfg: dict) -> list[str]:
    return [f"# {key}={json.dumps(cfg[key])}" for key in sorted(cfg)]


def write_table(path, cfg: dict, header: list[str], rows: list[list]) -> None:
    lines = _config_header_lines(cfg)
    lines.append("\t".join(header))
    for row in rows:
        lines.append("\t".join(_format_cell(c) for c in row))
    Path(path).write_text("\n".join(lines) + "\n")


def _format_cell(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


# ---------------------------------------------------------------------------
# Commands.
# ---------------------------------------------------------------------------


def cmd_test(args) -> int:
    cfg = load_config("test", args.config, args.set)
    if args.seed is not None:
        cfg["seed"] = args.seed
    if not cfg["data"]:
        raise ConfigError("the test command requires a 'data' config key (CSV path)")
    arms = load_dataset(cfg["data"])
    ttp = build_ttp_config(cfg)
    runner = (
        run_equivalence_ttp if ttp.fusion.mode is FusionMode.EQUIVALENCE else run_classic_ttp
    )
    report = runner(
        arms[Arm.CURRENT],
        arms[Arm.HISTORICAL],
        arms[Arm.TREATMENT],
        ttp,
        master_seed=int(cfg["seed"]),
    )
    payload = report_to_dict(report, cfg)
    text = _render_report_text(report, cfg)
    Path(args.out).write_text(text)
    Path(str(args.out) + ".json").write_text(json.dumps(payload, indent=2) + "\n")
    print(text, end="")
    return EXIT_OK


def _render_report_text(report: TTPReport, cfg: dict) -> str:
    d = report.diagnostics
    lines = [
        "ttpool test report",
        "==================",
        f"fusion mode         : {report.fusion.mode.value}",
        f"fusion statistic    : {report.fusion.statistic:.6g}",
        f"fusion critical     : {report.fusion.critical_value:.6g}",
        f"merged              : {report.fusion.merged}",
        f"causality method    : {report.causality.method.value}",
        f"causality statistic : {report.causality.statistic:.6g}",
        f"causality critical  : {report.causality.critical_value:.6g}",
        f"reject H0 (Qc = Qt) : {report.causality.reject}",
        f"D_hat(Qc, Qh)       : {d.d_hat_ch:.6g}",
        f"D_hat(Qc, Qt)       : {d.d_hat_ct:.6g}",
        f"gamma, lambda       : {d.gamma:.6g}, {d.lam:.6g}",
        f"sufficient consist. : {d.sufficient_consistency}",
        f"bandwidth (3-arm)   : {report.bandwidth_pooled3}",
        f"bandwidth (2-arm)   : {report.bandwidth_pooled2}",
        f"bandwidth used      : {report.bandwidth_used}",
        f"seeds               : {json.dumps(report.seeds)}",
        "effective config    :",
    ]
    lines += [f"  {k} = {json.dumps(cfg[k])}" for k in sorted(cfg)]
    return "\n".join(lines) + "\n"


_SIM_SWEEP_COLS = (
    "kernel.bandwidth",
    "fusion.theta",
    "scenario.mu_c_minus_mu_t",
    "scenario.mu_h_minus_mu_c",
    "scenario.var_c_over_var_t",
    "scenario.var_h_over_var_c",
    "sizes.n",
)


def cmd_simulate(args) -> int:
    cfg = load_config("simulate", args.config, args.set)
    if args.seed is not None:
        cfg["seed"] = args.seed
    cells = expand_sweeps(cfg)
    results = []
    for cell in cells:
        scn = build_scenario(cell)
        results.append((cell, run_campaign(scn, workers=args.workers)))

    method_names = [cfg["merged_method"], *cfg.get("compare_methods", [])]
    header = list(_SIM_SWEEP_COLS) + [
        "merge_rate",
        "stderr_merge",
        *[f"reject_rate.{name}" for name in method_names],
        "stderr_reject",
        "replicates",
    ]
    rows = []
    for cell, res in results:
        rows.append(
            [cell[c] for c in _SIM_SWEEP_COLS]
            + [res.merge_rate, res.stderr_merge]
            + [res.per_method_rates[name] for name in method_names]
            + [res.stderr_reject, res.scenario.replicates]
        )
    write_table(Path(str(args.out) + ".tsv"), cfg, header, rows)

    lines = ["ttpool simulate report", "======================"]
    for cell, res in results:
        sweep = ", ".join(f"{c}={cell[c]}" for c in _SIM_SWEEP_COLS if isinstance(cfg[c], list))
        lines.append(
            f"[{sweep or 'single cell'}] merge={res.merge_rate:.3f} "
            + " ".join(
                f"reject[{name}]={res.per_method_rates[name]:.3f}" for name in method_names
            )
            + f" ({res.wall_time:.1f}s)"
        )
    text = "\n".join(lines) + "\n"
    Path(args.out).write_text(text)
    print(text, end="")
    return EXIT_OK


def cmd_null_study(args) -> int:
    cfg = load_config("null-study", args.config, args.set)
    if args.seed is not None:
        cfg["seed"] = args.seed
    if cfg["scenario.generator"] == "mean_shift" and float(cfg["scenario.mu_c_minus_mu_t"]) != 0.0:
        raise ConfigError("null-study requires Qc = Qt (scenario.mu_c_minus_mu_t = 0)")
    if cfg["scenario.generator"] == "var_shift" and float(cfg["scenario.var_c_over_var_t"]) != 1.0:
        raise ConfigError("null-study requires Qc = Qt (scenario.var_c_over_var_t = 1)")

    cells = expand_sweeps(cfg)
    header = ["sizes.n", "method", "level", "reference_quantile", "true_quantile", "ks_distance"]
    rows = []
    for cell in cells:
        scn = build_scenario(cell)
        probe = None
        if cell["nullstudy.probe_mu_c_minus_mu_t"] is not None:
            probe = MeanShift(
                mu_c_minus_mu_t=float(cell["nullstudy.probe_mu_c_minus_mu_t"]),
                mu_h_minus_mu_c=float(cell["scenario.mu_h_minus_mu_c"]),
            )
        study = null_distribution_study(
            scn,
            probe_levels=tuple(cell["nullstudy.probe_levels"]),
            probe_generator=probe,
            ref_draws=int(cell["nullstudy.ref_draws"]),
        )
        for row in study:
            rows.append(
                [
                    cell["sizes.n"],
                    row.method,
                    row.level,
                    row.reference_quantile,
                    row.true_quantile,
                    row.ks_distance,
                ]
            )
    write_table(Path(str(args.out) + ".tsv"), cfg, header, rows)
    lines = ["ttpool null-study report", "========================"]
    for row in rows:
        lines.append(
            f"n={row[0]} method={row[1]} level={row[2]} ref_q={row[3]:.4g} "
            f"true_q={row[4]:.4g} ks={row[5]:.4f}"
        )
    text = "\n".join(lines) + "\n"
    Path(args.out).write_text(text)
    print(text, end="")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Entry point.
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ttpool",
        description="Equivalence test-then-pool with kernel MMD two-sample tests.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in (("test", cmd_test), ("simulate", cmd_simulate), ("null-study", cmd_null_study)):
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="JSON config file (flat key paths)")
        p.add_argument("--out", required=True, help="output path for the text report")
        p.add_argument(
            "--set",
            action="append",
            default=[],
            metavar="KEY=VALUE",
            help="override a config key (repeatable; comma-separated values sweep)",
        )
        p.add_argument("--workers", type=int, default=1, help="parallel workers for campaigns")
        p.add_argument("--seed", type=int, default=None, help="master seed override")
        p.set_defaults(handler=fn)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except _STATISTICAL_ERRORS as exc:
        print(
            f"statistical precondition failure: {exc}\n"
            "hint: check for constant-valued arms (median heuristic needs spread) "
            "and minimum arm sizes",
            file=sys.stderr,
        )
        return EXIT_STATISTICAL
    except TTPoolError as exc:
        cause = exc.__cause__
        if isinstance(cause, _STATISTICAL_ERRORS):
            print(f"statistical precondition failure: {exc}", file=sys.stderr)
            return EXIT_STATISTICAL
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
