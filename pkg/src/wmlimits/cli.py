"""Command-line entry point: ``wmlimits {bound,scheme,simulate,sweep}``.

Every command reads one JSON config, writes its artifacts plus a
``manifest.json`` into ``--out``, and prints a JSON summary on stdout.
Outputs depend only on the config and the seed, so reruns are byte-identical.

Exit codes: 0 success, 2 invalid config, 3 infeasible parameters,
4 failed audit, 1 any other library error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import scipy

from wmlimits import __version__
from wmlimits.asymptotics import (
    AsymptoticScheme,
    build_typical_scheme,
    error_decay_sweep,
    evaluate_typical_exact,
    rate_sweep,
)
from wmlimits.bounds import (
    BoundQuery,
    DistortionKind,
    bound_value,
    deterministic_feasible,
    detection_error_lower_bound,
    max_message_count,
)
from wmlimits.curves import TradeoffCurve
from wmlimits.errors import AuditError, ConfigError, InfeasibleError, WatermarkError
from wmlimits.eval_harness import (
    monte_carlo_errors,
    secrecy_audit,
    worst_case_false_alarm_exact,
)
from wmlimits.process_models import (
    MarkovSource,
    SequencePmf,
    enumerate_sequence_pmf,
)
from wmlimits.scheme_deterministic import (
    build_deterministic_scheme,
    load_deterministic_scheme,
    optimize_grouping,
)
from wmlimits.scheme_randomized import build_randomized_scheme, load_randomized_scheme
from wmlimits.scheme_tables import evaluate_exact
from wmlimits.tv_transport import surplus_and_deficit

EXIT_OK, EXIT_ERROR, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_AUDIT = 0, 1, 2, 3, 4
SCHEME_KINDS = ("randomized", "deterministic", "typical")
GROUPING_MODES = ("exhaustive", "greedy")
INTERVAL_METHODS = ("normal", "clopper-pearson")
PANELS = ("a", "b", "c", "d", "e", "f")
FALSE_ALARM_TOLERANCE = 1e-12
DEFAULT_FLIP = 0.1


@dataclass(frozen=True)
class ExperimentConfig:
    source: Optional[MarkovSource]
    pmf: Optional[SequencePmf]
    lengths: tuple[int, ...]
    alphas: tuple[float, ...]
    budgets: tuple[float, ...]
    message_counts: Optional[tuple[int, ...]]
    rates: Optional[tuple[float, ...]]
    distortion_kind: DistortionKind
    scheme: str
    grouping_mode: str
    trials: int
    seed: int
    confidence: float
    interval_method: str
    distinct_alphabet: bool
    normalized: dict

    def sequence_pmf(self, length: Optional[int] = None) -> SequencePmf:
        if self.pmf is not None:
            return self.pmf
        return enumerate_sequence_pmf(self.source, self.lengths[0] if length is None else length)

    @property
    def length(self) -> int:
        return self.pmf.length if self.pmf is not None else self.lengths[0]

    def message_count_for_rate(self, rate: float, length: Optional[int] = None) -> int:
        return max(1, round(math.exp(rate * (self.length if length is None else length))))

    def message_axis(self) -> list[tuple[float, int]]:
        """``(rate, m)`` pairs, from the ``m`` list or the ``rate`` list."""
        if self.message_counts is not None:
            return [(math.log(m) / self.length, m) for m in self.message_counts]
        return [(r, self.message_count_for_rate(r)) for r in self.rates]


def _as_list(raw: dict, key: str, required: bool = True):
    if key not in raw:
        if required:
            raise ConfigError(f"config.{key}: required field is missing")
        return None
    value = raw[key]
    values = value if isinstance(value, list) else [value]
    if not values:
        raise ConfigError(f"config.{key}: list must be nonempty")
    return values


def _number(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ConfigError(f"{path}: expected a finite number, got {value!r}")
    return float(value)


def _integer(value, path: str, low: int, high: Optional[int] = None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{path}: expected an integer, got {value!r}")
    if value < low or (high is not None and value > high):
        bound = f"[{low}, {high}]" if high is not None else f">= {low}"
        raise ConfigError(f"{path}: must be {bound}, got {value}")
    return value


def _choice(raw: dict, key: str, options: Sequence[str], default: str) -> str:
    value = raw.get(key, default)
    if value not in options:
        raise ConfigError(f"config.{key}: must be one of {list(options)}, got {value!r}")
    return value


def _parse_source(raw, base: Path) -> MarkovSource:
    if not isinstance(raw, dict):
        raise ConfigError("config.source: expected an object")
    kind = raw.get("type", "markov" if "transition" in raw else None)
    try:
        if "path" in raw:
            return MarkovSource.from_json(base / raw["path"])
        if kind == "symmetric_binary":
            return MarkovSource.symmetric_binary(_number(raw.get("flip"), "config.source.flip"))
        if kind == "iid":
            return MarkovSource.iid(raw["probs"])
        if kind == "markov":
            if "initial" in raw:
                return MarkovSource.from_dict(
                    {"alphabet_size": len(raw["transition"]), **raw}
                )
            return MarkovSource.stationary(raw["transition"])
    except KeyError as missing:
        raise ConfigError(f"config.source.{missing.args[0]}: required field is missing") from None
    except ConfigError as err:
        raise ConfigError(f"config.source: {err}") from None
    raise ConfigError(
        f"config.source.type: must be 'symmetric_binary', 'iid' or 'markov', got {kind!r}"
    )


def _parse_pmf(raw, base: Path) -> SequencePmf:
    try:
        if isinstance(raw, list):
            return SequencePmf.from_vector(raw)
        if isinstance(raw, dict) and "path" in raw:
            return SequencePmf.from_csv(base / raw["path"], int(raw.get("alphabet_size", 2)))
    except ConfigError as err:
        raise ConfigError(f"config.pmf: {err}") from None
    raise ConfigError("config.pmf: expected a probability list or {path, alphabet_size}")


def parse_config(raw: dict, base: Path = Path(".")) -> ExperimentConfig:
    """Validate every field before any computation; errors name the field path."""
    if not isinstance(raw, dict):
        raise ConfigError("config: top level must be a JSON object")
    pmf = _parse_pmf(raw["pmf"], base) if "pmf" in raw else None
    source = None
    if pmf is None:
        source = (
            _parse_source(raw["source"], base)
            if "source" in raw
            else MarkovSource.symmetric_binary(DEFAULT_FLIP)
        )
    lengths = _as_list(raw, "T", required=pmf is None) or [pmf.length]
    lengths = tuple(_integer(v, f"config.T[{i}]", 1) for i, v in enumerate(lengths))
    alphas = tuple(_number(v, f"config.alpha[{i}]") for i, v in enumerate(_as_list(raw, "alpha")))
    for i, a in enumerate(alphas):
        if not 0 < a < 1:
            raise ConfigError(f"config.alpha[{i}]: must lie in (0, 1), got {a}")
    budgets = tuple(
        _number(v, f"config.d[{i}]") for i, v in enumerate(_as_list(raw, "d", False) or [0.0])
    )
    for i, d in enumerate(budgets):
        if d < 0:
            raise ConfigError(f"config.d[{i}]: distortion budget must be >= 0, got {d}")
    counts = _as_list(raw, "m", required=False)
    rates = _as_list(raw, "rate", required=False)
    if counts is None and rates is None:
        raise ConfigError("config.m: required field is missing (give 'm' or 'rate')")
    if counts is not None and rates is not None:
        raise ConfigError("config.m: give either 'm' or 'rate', not both")
    if counts is not None:
        counts = tuple(_integer(v, f"config.m[{i}]", 1) for i, v in enumerate(counts))
    if rates is not None:
        rates = tuple(_number(v, f"config.rate[{i}]") for i, v in enumerate(rates))
        for i, r in enumerate(rates):
            if r < 0:
                raise ConfigError(f"config.rate[{i}]: must be >= 0, got {r}")
    try:
        kind = DistortionKind.parse(raw.get("distortion_kind", "tv"))
    except ConfigError as err:
        raise ConfigError(f"config.distortion_kind: {err}") from None
    confidence = _number(raw.get("confidence", 0.95), "config.confidence")
    if not 0 < confidence < 1:
        raise ConfigError(f"config.confidence: must lie in (0, 1), got {confidence}")
    distinct = raw.get("distinct_alphabet", False)
    if not isinstance(distinct, bool):
        raise ConfigError("config.distinct_alphabet: expected true or false")
    config = ExperimentConfig(
        source=source,
        pmf=pmf,
        lengths=lengths,
        alphas=alphas,
        budgets=budgets,
        message_counts=counts,
        rates=rates,
        distortion_kind=kind,
        scheme=_choice(raw, "scheme", SCHEME_KINDS, "randomized"),
        grouping_mode=_choice(raw, "grouping_mode", GROUPING_MODES, "exhaustive"),
        trials=_integer(raw.get("trials", 100_000), "config.trials", 1),
        seed=_integer(raw.get("seed", 0), "config.seed", 0, 2**64 - 1),
        confidence=confidence,
        interval_method=_choice(raw, "interval_method", INTERVAL_METHODS, "normal"),
        distinct_alphabet=distinct,
        normalized={},
    )
    normalized = {
        "source": source.to_dict() if source is not None else None,
        "pmf": pmf.probs.tolist() if pmf is not None else None,
        "T": list(lengths),
        "alpha": list(alphas),
        "d": list(budgets),
        "m": list(counts) if counts is not None else None,
        "rate": list(rates) if rates is not None else None,
        "distortion_kind": kind.value,
        "scheme": config.scheme,
        "grouping_mode": config.grouping_mode,
        "trials": config.trials,
        "seed": config.seed,
        "confidence": confidence,
        "interval_method": config.interval_method,
        "distinct_alphabet": distinct,
    }
    object.__setattr__(config, "normalized", normalized)
    return config


def load_config(path: Path, seed: Optional[int] = None) -> ExperimentConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file {path} does not exist") from None
    except json.JSONDecodeError as err:
        raise ConfigError(f"config file {path} is not valid JSON: {err}") from None
    if seed is not None:
        raw["seed"] = seed
    return parse_config(raw, Path(path).parent)


def _single(config: ExperimentConfig, command: str) -> tuple[float, float, int]:
    """The one ``(alpha, d, m)`` point that point commands operate on."""
    axis = config.message_axis()
    for name, values in (("alpha", config.alphas), ("d", config.budgets), ("m", axis)):
        if len(values) != 1:
            raise ConfigError(f"config.{name}: '{command}' takes a single value, got {len(values)}")
    if config.pmf is None and len(config.lengths) != 1:
        raise ConfigError(f"config.T: '{command}' takes a single value, got {len(config.lengths)}")
    return config.alphas[0], config.budgets[0], axis[0][1]


def _dump(payload) -> str:
    return json.dumps(payload, sort_keys=True, indent=1) + "\n"


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_manifest(out: Path, command: str, config: ExperimentConfig, outputs: list[Path]) -> Path:
    config_text = json.dumps(config.normalized, sort_keys=True)
    manifest = {
        "command": command,
        "config": config.normalized,
        "config_sha256": hashlib.sha256(config_text.encode()).hexdigest(),
        "versions": {"wmlimits": __version__, "numpy": np.__version__, "scipy": scipy.__version__},
        "rng": "numpy SeedSequence -> Philox, one child stream per message plus one null stream",
        "outputs": {p.name: _sha256(p) for p in sorted(outputs)},
    }
    path = out / "manifest.json"
    path.write_text(_dump(manifest))
    return path


def _bound_for(config: ExperimentConfig, alpha: float, budget: float, m: int):
    query = BoundQuery(config.sequence_pmf(), alpha, budget, m, config.distortion_kind)
    return detection_error_lower_bound(query)


def cmd_bound(config: ExperimentConfig, out: Path) -> tuple[dict, list[Path]]:
    alpha, budget, m = _single(config, "bound")
    result = _bound_for(config, alpha, budget, m)
    optimizer = out / "optimizer.csv"
    result.optimizer.to_csv(optimizer)
    payload = {**result.as_dict(), "optimizer_csv_path": optimizer.name}
    path = out / "bound.json"
    path.write_text(_dump(payload))
    return payload, [path, optimizer]


def _check_randomized_count(config: ExperimentConfig, alpha: float, budget: float, m: int) -> None:
    q = config.sequence_pmf()
    m_star = max_message_count(q, alpha, budget, config.distortion_kind)
    if m > m_star:
        raise InfeasibleError(f"m = {m} exceeds m* = {m_star}: the benchmark exceeds 1 - alpha")


def build_scheme(config: ExperimentConfig):
    """Construct the configured scheme; returns ``(scheme, summary)``."""
    alpha, budget, m = _single(config, "scheme")
    if config.scheme == "typical":
        if budget != 0:
            raise ConfigError("config.d: the typical-set scheme is distortion-free; d must be 0")
        if config.source is None:
            raise ConfigError("config.source: the typical-set scheme needs a Markov source")
        scheme = build_typical_scheme(
            config.source, config.length, m, alpha, distinct_alphabet=config.distinct_alphabet
        )
        result = evaluate_typical_exact(scheme)
        summary = {
            "beta": list(result.beta_per_message),
            "max_beta": result.max_beta,
            "benchmark": bound_value(scheme.p_star, alpha, 0.0, m),
            "fa": result.worst_case_false_alarm,
            "fa_excess": result.fa_excess,
            "typical_mass": result.typical_mass,
            "zeta_secrecy_gap": result.zeta_secrecy_gap,
        }
        return scheme, summary
    _check_randomized_count(config, alpha, budget, m)
    p_star = _bound_for(config, alpha, budget, m).optimizer
    if config.scheme == "randomized":
        scheme = build_randomized_scheme(p_star, alpha, m)
        residual = 0.0
    else:
        feasible = deterministic_feasible(p_star, alpha, m)
        if not feasible:
            raise InfeasibleError(
                f"light-mass condition M fails: light mass {feasible.light_mass:.6g} < "
                f"required {feasible.required_light_mass:.6g}"
            )
        grouping = optimize_grouping(p_star, alpha, m, config.grouping_mode)
        scheme = build_deterministic_scheme(grouping, p_star, alpha, m)
        residual = scheme.residual_error
    return scheme, _exact_summary(scheme, residual)


def _exact_summary(scheme, residual: float) -> dict:
    result = evaluate_exact(scheme)
    return {
        "beta": list(result.beta_per_message),
        "avg_beta": result.avg_beta,
        "benchmark": scheme.benchmark,
        "residual": residual,
        "fa": result.worst_case_false_alarm,
    }


def _typical_record(config: ExperimentConfig, scheme) -> dict:
    return {
        "decoder_kind": "typical",
        "source": config.source.to_dict(),
        "T": scheme.length,
        "m": scheme.m,
        "alpha": scheme.alpha,
        "eta": scheme.typical_x.eta,
        "distinct_alphabet": config.distinct_alphabet,
    }


def load_scheme_file(path: Path):
    """Rebuild a scheme from a file written by ``wmlimits scheme``."""
    try:
        data = json.loads(Path(path).read_text())
    except (FileNotFoundError, json.JSONDecodeError) as err:
        raise ConfigError(f"cannot read scheme file {path}: {err}") from None
    kind = data.get("decoder_kind")
    if kind == "randomized":
        return load_randomized_scheme(data)
    if kind == "deterministic":
        return load_deterministic_scheme(data)
    if kind == "typical":
        return build_typical_scheme(
            MarkovSource.from_dict(data["source"]), data["T"], data["m"], data["alpha"],
            eta_override=data["eta"], distinct_alphabet=data["distinct_alphabet"],
        )
    raise ConfigError(f"scheme file {path}: unknown decoder_kind {kind!r}")


def evaluate_scheme_file(path: Path) -> dict:
    scheme = load_scheme_file(path)
    if isinstance(scheme, AsymptoticScheme):
        result = evaluate_typical_exact(scheme)
        return {"beta": list(result.beta_per_message), "fa": result.worst_case_false_alarm}
    return _exact_summary(scheme, getattr(scheme, "residual_error", 0.0))


def cmd_scheme(config: ExperimentConfig, out: Path) -> tuple[dict, list[Path]]:
    scheme, summary = build_scheme(config)
    path = out / "scheme.json"
    if config.scheme == "typical":
        path.write_text(_dump(_typical_record(config, scheme)))
    else:
        path.write_text(_dump(scheme.to_dict()))
    evaluation = out / "evaluation.json"
    evaluation.write_text(_dump(summary))
    return summary, [path, evaluation]


def cmd_simulate(config: ExperimentConfig, out: Path) -> tuple[dict, list[Path]]:
    scheme, summary = build_scheme(config)
    report = monte_carlo_errors(
        scheme, config.trials, config.seed, config.confidence, config.interval_method
    )
    audit = secrecy_audit(scheme)
    worst_fa = worst_case_false_alarm_exact(scheme)
    exact_family = config.scheme != "typical"
    failures = list(report.discrepancies)
    if exact_family and not audit.passed:
        failures.append(
            f"strong secrecy: zeta gap {audit.max_zeta_gap:.3e}, x gap {audit.max_x_gap:.3e}"
        )
    if exact_family and abs(worst_fa - scheme.alpha) > FALSE_ALARM_TOLERANCE:
        failures.append(f"worst-case false alarm {worst_fa!r} differs from alpha {scheme.alpha!r}")
    payload = {
        "report": report.to_dict(),
        "exact": summary,
        "secrecy": {
            "max_zeta_gap": audit.max_zeta_gap,
            "max_x_gap": audit.max_x_gap,
            "passed": audit.passed,
        },
        "worst_case_false_alarm": worst_fa,
        "audit_failures": failures,
    }
    path = out / "simulation.json"
    path.write_text(_dump(payload))
    return payload, [path]


def _deterministic_point(q: SequencePmf, config: ExperimentConfig, alpha: float, budget: float, m: int):
    """``(converse, beta_det, eps_res)`` or ``None`` when the point is infeasible."""
    if m > max_message_count(q, alpha, budget, config.distortion_kind):
        return None
    query = BoundQuery(q, alpha, budget, m, config.distortion_kind)
    result = detection_error_lower_bound(query)
    if not deterministic_feasible(result.optimizer, alpha, m):
        return None
    try:
        grouping = optimize_grouping(result.optimizer, alpha, m, config.grouping_mode)
    except InfeasibleError:
        return None
    scheme = build_deterministic_scheme(grouping, result.optimizer, alpha, m)
    beta = evaluate_exact(scheme).avg_beta
    return result.value, beta, scheme.residual_error


def _relative_gap(gap: float, converse: float) -> float:
    if converse > 0:
        return gap / converse
    return 0.0 if gap == 0 else math.inf


def _tag(value: float) -> str:
    return f"{value:g}"


def sweep_curves(config: ExperimentConfig, panel: str) -> list[tuple[str, TradeoffCurve]]:
    """Named curves for one panel, each sorted by its x column."""
    kind = config.distortion_kind
    budget = config.budgets[0]
    curves = []
    if panel in ("e",):
        if config.source is None:
            raise ConfigError("config.source: panel e needs a Markov source, not a fixed pmf")
        for alpha in config.alphas:
            rates = rate_sweep(config.source, alpha, config.lengths, budget, kind)
            decay = error_decay_sweep(config.source, None, alpha, config.lengths)
            curves.append((f"panel_e__alpha_{_tag(alpha)}", rates))
            curves.append((f"panel_e_decay__alpha_{_tag(alpha)}", decay))
        return curves
    q = config.sequence_pmf()
    if panel in ("a", "c"):
        for alpha in config.alphas:
            curves.append((f"panel_{panel}__alpha_{_tag(alpha)}",
                           _message_curve(config, q, panel, alpha, budget)))
    elif panel in ("b", "d"):
        first_rate: dict[int, float] = {}
        for rate, m in config.message_axis():
            first_rate.setdefault(m, rate)
        for m, rate in sorted(first_rate.items()):
            curves.append((f"panel_{panel}__m_{m}",
                           _alpha_curve(config, q, panel, m, rate, budget)))
    elif panel == "f":
        m = config.message_axis()[0][1]
        for alpha in config.alphas:
            curve = TradeoffCurve("f", "d", "beta_bar", ("d", "beta_bar", "threshold", "surplus", "deficit", "m"),
                                  series=f"alpha={alpha!r}")
            t = alpha / m
            surplus, deficit = surplus_and_deficit(q.probs, t)
            for d in sorted(set(config.budgets)):
                curve.rows.append((d, bound_value(q, alpha, d, m, "tv"), t, surplus, deficit, m))
            curves.append((f"panel_f__alpha_{_tag(alpha)}", curve))
    else:
        raise ConfigError(f"--panel: must be one of {list(PANELS)}, got {panel!r}")
    return curves


# The gap between the deterministic scheme and the converse is its residual error.
_DET_COLUMNS = ("converse", "beta_det", "eps_res", "gap_abs", "gap_rel")


def _message_curve(config, q, panel, alpha, budget) -> TradeoffCurve:
    points = sorted(set(config.message_axis()))
    if panel == "a":
        curve = TradeoffCurve("a", "R", "beta_bar", ("R", "beta_bar", "m", "threshold"),
                              series=f"alpha={alpha!r}")
        for rate, m in points:
            curve.rows.append((rate, bound_value(q, alpha, budget, m, config.distortion_kind),
                               m, alpha / m))
        return curve
    curve = TradeoffCurve("c", "R", "beta_det", ("R", "m") + _DET_COLUMNS, series=f"alpha={alpha!r}")
    for rate, m in points:
        point = _deterministic_point(q, config, alpha, budget, m)
        if point is not None:
            converse, beta, eps = point
            curve.rows.append((rate, m, converse, beta, eps, eps, _relative_gap(eps, converse)))
    return curve


def _alpha_curve(config, q, panel, m, rate, budget) -> TradeoffCurve:
    alphas = sorted(set(config.alphas))
    if panel == "b":
        curve = TradeoffCurve("b", "alpha", "beta_bar", ("alpha", "beta_bar", "m", "R"),
                              series=f"m={m}")
        for alpha in alphas:
            curve.rows.append((alpha, bound_value(q, alpha, budget, m, config.distortion_kind),
                               m, rate))
        return curve
    curve = TradeoffCurve("d", "alpha", "beta_det", ("alpha", "m") + _DET_COLUMNS, series=f"m={m}")
    for alpha in alphas:
        point = _deterministic_point(q, config, alpha, budget, m)
        if point is not None:
            converse, beta, eps = point
            curve.rows.append((alpha, m, converse, beta, eps, eps, _relative_gap(eps, converse)))
    return curve


def cmd_sweep(config: ExperimentConfig, out: Path, panel: str, fmt: str) -> tuple[dict, list[Path]]:
    written = []
    summary = {}
    for name, curve in sweep_curves(config, panel):
        curve.validate()
        path = out / f"{name}.{fmt}"
        if fmt == "csv":
            curve.to_csv(path)
        else:
            curve.to_json(path)
        written.append(path)
        summary[path.name] = len(curve.rows)
    return {"panel": panel, "curves": summary}, written


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wmlimits",
        description="Detection limits and schemes for multi-bit watermarking of finite-alphabet sources.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", type=Path, required=True, help="JSON experiment config")
        p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")

    common(sub.add_parser("bound", help="smallest achievable average detection error"))
    common(sub.add_parser("scheme", help="build a scheme and evaluate it exactly"))
    common(sub.add_parser("simulate", help="Monte Carlo check of a scheme plus audits"))
    sweep = sub.add_parser("sweep", help="trade-off curves for one panel")
    common(sweep)
    sweep.add_argument("--panel", choices=PANELS, required=True)
    sweep.add_argument("--format", choices=("csv", "json"), default="csv")
    return parser


def run(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.seed is not None and not 0 <= args.seed < 2**64:
            raise ConfigError(f"--seed: must be a 64-bit unsigned integer, got {args.seed}")
        config = load_config(args.config, args.seed)
        args.out.mkdir(parents=True, exist_ok=True)
        if args.command == "bound":
            payload, files = cmd_bound(config, args.out)
        elif args.command == "scheme":
            payload, files = cmd_scheme(config, args.out)
        elif args.command == "simulate":
            payload, files = cmd_simulate(config, args.out)
        else:
            payload, files = cmd_sweep(config, args.out, args.panel, args.format)
        write_manifest(args.out, args.command, config, files)
        sys.stdout.write(_dump(payload))
        if args.command == "simulate" and payload["audit_failures"]:
            raise AuditError("; ".join(payload["audit_failures"]))
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except InfeasibleError as err:
        print(f"infeasible: {err}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except AuditError as err:
        print(f"audit failed: {err}", file=sys.stderr)
        return EXIT_AUDIT
    except WatermarkError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
