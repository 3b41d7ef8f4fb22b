"""Command-line interface.

Four subcommands, all driven by one JSON config file:

  correctors  compute the corrector set and effective potential
  verify      evaluate the exact-identity report and gate on it
  solve       solve the eps-problem and its homogenized limit for one eps
  sweep       run a convergence-rate sweep over an eps ladder

Every run writes a manifest echoing the fully resolved configuration, so
reruns can be compared and reproduced.  Exit codes: 0 success, 1
malformed config, 2 regime or admissibility rejection, 3 identity
failure, 4 resolution or budget violation, 5 rate verdict failure.
"""

from __future__ import annotations

import argparse
import json
import platform
import sys
from pathlib import Path

import numpy
import scipy

from . import __version__
from .correctors import build_correctors, identity_report
from .errors import (BlowUp, BudgetExceeded, DegenerateFit, NoApplicableRegime,
                     ResolutionViolation, UnsupportedK)
from .potential import (GammaMode, ScalarSeries, SpatialField, TrigField,
                        descriptor_from_field, field_from_descriptor)
from .pdesolve import (GridSpec, InitialDescriptor, InitialTerm, ProblemSpec,
                       SourceDescriptor, SourceTerm, check_resolution,
                       error_linf_l2, policy_grid, solve_epsilon,
                       solve_homogenized)
from .ratelab import (SweepConfig, ceff_as_json, default_workers, run_sweep,
                      write_outputs)
from .regimes import resolve_regime

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_REGIME = 2
EXIT_IDENTITY = 3
EXIT_RESOURCE = 4
EXIT_VERDICT = 5


class ConfigError(ValueError):
    """Malformed configuration; message names the offending key."""


# ---------------------------------------------------------------------------
# Config loading and validation
# ---------------------------------------------------------------------------

_TOP_KEYS = {"potential", "regime", "problem", "grid", "epsilon", "sweep",
             "output", "workers", "budget"}
_REQUIRED = {
    "correctors": {"potential", "regime"},
    "verify": {"potential", "regime"},
    "solve": {"potential", "regime", "problem", "epsilon"},
    "sweep": {"potential", "regime", "problem", "sweep"},
}


def _require_keys(block: dict, allowed: set, required: set, where: str):
    if not isinstance(block, dict):
        raise ConfigError(f"'{where}' must be an object")
    for key in block:
        if key not in allowed:
            raise ConfigError(f"unknown key '{where}.{key}'")
    for key in required:
        if key not in block:
            raise ConfigError(f"missing key '{where}.{key}'")


def _number(block: dict, key: str, where: str, *, positive=False):
    val = block[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(f"'{where}.{key}' must be a number")
    if positive and not val > 0:
        raise ConfigError(f"'{where}.{key}' must be positive")
    return float(val)


def load_config(path: str | Path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be an object")
    return cfg


def validate_config(cfg: dict, command: str) -> None:
    for key in cfg:
        if key not in _TOP_KEYS:
            raise ConfigError(f"unknown key '{key}'")
    for key in _REQUIRED[command]:
        if key not in cfg:
            raise ConfigError(f"missing key '{key}' (required by {command})")
    _require_keys(cfg["potential"], {"d", "modes"}, {"modes"}, "potential")
    _require_keys(cfg["regime"], {"k", "gamma_mode", "sign_override"}, {"k"},
                  "regime")
    if "problem" in cfg:
        _require_keys(cfg["problem"], {"T", "f", "g"}, {"T", "g"}, "problem")
    if "grid" in cfg:
        _require_keys(cfg["grid"], {"nx", "dt", "checkpoints"}, set(), "grid")
    if "sweep" in cfg:
        _require_keys(cfg["sweep"],
                      {"epsilons", "slope_tolerance", "r2_min",
                       "richardson_max", "richardson"},
                      {"epsilons"}, "sweep")
    if "output" in cfg:
        _require_keys(cfg["output"], {"dir"}, set(), "output")


def build_potential(cfg: dict) -> TrigField:
    block = cfg["potential"]
    d = block.get("d")
    if d is not None and d not in (1, 2):
        raise ConfigError("'potential.d' must be 1 or 2")
    try:
        return field_from_descriptor(block["modes"], d)
    except ValueError as exc:
        raise ConfigError(f"'potential.modes': {exc}") from exc


def parse_gamma_mode(block: dict) -> GammaMode:
    raw = block.get("gamma_mode", "unit")
    try:
        return GammaMode(raw)
    except ValueError:
        raise ConfigError(
            f"'regime.gamma_mode' must be 'unit' or 'k_minus_1', got {raw!r}")


def parse_sign_override(block: dict) -> bool:
    raw = block.get("sign_override", False)
    if raw in (False, None):
        return False
    if raw is True or raw == "flip":
        return True
    raise ConfigError(
        f"'regime.sign_override' must be false, true or 'flip', got {raw!r}")


def build_regime(cfg: dict, W: TrigField):
    block = cfg["regime"]
    k = _number(block, "k", "regime")
    return resolve_regime(k, parse_gamma_mode(block), W,
                          sign_override=parse_sign_override(block))


def _parse_terms(raw, where: str, d: int, *, with_time: bool):
    if not isinstance(raw, list):
        raise ConfigError(f"'{where}' must be a list of terms")
    allowed = {"amp", "j", "sigma", "omega"} if with_time else {"amp", "j"}
    out = []
    for i, term in enumerate(raw):
        _require_keys(term, allowed, {"amp", "j"}, f"{where}[{i}]")
        j = term["j"]
        if (not isinstance(j, list) or len(j) != d
                or any(not isinstance(v, int) or v < 1 for v in j)):
            raise ConfigError(
                f"'{where}[{i}].j' must be a list of {d} integers >= 1")
        amp = _number(term, "amp", f"{where}[{i}]")
        if with_time:
            sigma = float(term.get("sigma", 0.0))
            omega = float(term.get("omega", 0.0))
            out.append(SourceTerm(amp, tuple(j), sigma, omega))
        else:
            out.append(InitialTerm(amp, tuple(j)))
    return out


def build_problem(cfg: dict, d: int):
    block = cfg["problem"]
    T = _number(block, "T", "problem", positive=True)
    f = SourceDescriptor(tuple(_parse_terms(block.get("f", []), "problem.f",
                                            d, with_time=True)))
    g = InitialDescriptor(tuple(_parse_terms(block["g"], "problem.g",
                                             d, with_time=False)))
    return T, f, g


def build_sweep_config(cfg: dict, W: TrigField, args) -> SweepConfig:
    block = cfg["sweep"]
    eps = block["epsilons"]
    if not isinstance(eps, list) or any(
            isinstance(e, bool) or not isinstance(e, (int, float))
            for e in eps):
        raise ConfigError("'sweep.epsilons' must be a list of numbers")
    T, f, g = build_problem(cfg, W.d)
    checkpoints = int(cfg.get("grid", {}).get("checkpoints", 64))
    regime_block = cfg["regime"]
    try:
        return SweepConfig(
            W=W,
            k=_number(regime_block, "k", "regime"),
            gamma_mode=parse_gamma_mode(regime_block),
            f=f, g=g, T=T,
            epsilons=tuple(float(e) for e in eps),
            checkpoints=checkpoints,
            sign_override=parse_sign_override(regime_block),
            slope_tolerance=float(block.get("slope_tolerance", 0.3)),
            r2_min=float(block.get("r2_min", 0.95)),
            richardson_max=float(block.get("richardson_max", 0.1)),
            run_richardson=bool(block.get("richardson", True)),
            budget=args.budget if args.budget is not None else cfg.get("budget"),
            workers=args.workers if args.workers is not None
            else cfg.get("workers"),
        )
    except ValueError as exc:
        raise ConfigError(f"'sweep': {exc}") from exc


# ---------------------------------------------------------------------------
# Serialization helpers
# ---------------------------------------------------------------------------

def _field_json(value):
    if value is None:
        return None
    if isinstance(value, SpatialField):
        value = value.as_field()
    if isinstance(value, TrigField):
        return descriptor_from_field(value)
    if isinstance(value, ScalarSeries):
        return ceff_as_json(value)
    raise TypeError(f"cannot serialize {type(value)!r}")


def versions() -> dict:
    return {
        "oscpot": __version__,
        "numpy": numpy.__version__,
        "scipy": scipy.__version__,
        "python": platform.python_version(),
    }


def _outdir(cfg: dict, args) -> Path:
    if args.out:
        out = Path(args.out)
    else:
        out = Path(cfg.get("output", {}).get("dir", "."))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _manifest(cfg: dict, command: str, W: TrigField, extra: dict) -> dict:
    manifest = {
        "command": command,
        "potential": {"d": W.d, "modes": descriptor_from_field(W)},
        "versions": versions(),
    }
    manifest.update(extra)
    return manifest


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_correctors(cfg: dict, args) -> int:
    W = build_potential(cfg)
    regime = build_regime(cfg, W)
    cset = build_correctors(W, regime)
    out = _outdir(cfg, args)
    payload = {
        "regime": regime.as_dict(),
        "c_eff": ceff_as_json(cset.effective),
        "chi1": _field_json(cset.chi1),
        "chi2": _field_json(cset.chi2),
        "chi3": _field_json(cset.chi3),
        "chi4": _field_json(cset.primitives.chi4 if cset.primitives else None),
        "chi5": _field_json(cset.primitives.chi5 if cset.primitives else None),
        "chi5_tilde": _field_json(
            cset.primitives.chi5_tilde if cset.primitives else None),
        "chi7": _field_json(cset.chi7),
        "chain": [ceff_as_json(s) for s in cset.chain],
    }
    _write_json(out / "correctors.json", payload)
    _write_json(out / "manifest.json",
                _manifest(cfg, "correctors", W, {"regime": regime.as_dict()}))
    print(f"effective potential: {ceff_as_json(cset.effective)}")
    return EXIT_OK


def cmd_verify(cfg: dict, args) -> int:
    W = build_potential(cfg)
    regime = build_regime(cfg, W)
    report = identity_report(W, regime)
    out = _outdir(cfg, args)
    _write_json(out / "identities.json", report.as_dict())
    _write_json(out / "manifest.json",
                _manifest(cfg, "verify", W, {"regime": regime.as_dict()}))
    for check in report.checks:
        state = ("skipped" if check.skipped
                 else "ok" if check.passed else "FAIL")
        resid = "" if check.residual is None else f" residual={check.residual:.3e}"
        print(f"{check.name}: {state}{resid}")
    failure = report.first_failure()
    if failure is not None:
        print(f"identity failure: {failure.name} residual "
              f"{failure.residual:.3e} > {failure.tol:g}", file=sys.stderr)
        return EXIT_IDENTITY
    return EXIT_OK


def cmd_solve(cfg: dict, args) -> int:
    W = build_potential(cfg)
    regime = build_regime(cfg, W)
    eps = cfg["epsilon"]
    if isinstance(eps, bool) or not isinstance(eps, (int, float)) \
            or not 0 < eps < 1:
        raise ConfigError("'epsilon' must be a number in (0, 1)")
    eps = float(eps)
    T, f, g = build_problem(cfg, W.d)
    grid_block = cfg.get("grid", {})
    checkpoints = int(grid_block.get("checkpoints", 64))
    base = policy_grid(eps, regime.k, regime.gamma, T, W.d, checkpoints)
    grid = GridSpec(W.d,
                    int(grid_block.get("nx", base.nx)),
                    float(grid_block.get("dt", base.dt)),
                    T, checkpoints)
    check_resolution(grid, eps, regime.k, regime.gamma)
    from .correctors import effective_potential
    ceff = effective_potential(regime, W)
    problem = ProblemSpec(W=W, eps=eps, regime=regime, f=f, g=g)
    u_eps = solve_epsilon(problem, grid)
    u_hom = solve_homogenized(ceff, f, g, grid)
    err = error_linf_l2(u_eps, u_hom)
    out = _outdir(cfg, args)
    _write_json(out / "solve.json", {
        "eps": eps,
        "error_linf_l2": err,
        "max_l2_eps": u_eps.max_l2,
        "max_l2_hom": u_hom.max_l2,
        "c_eff": ceff_as_json(ceff),
        "regime": regime.as_dict(),
        "grid": {"nx": grid.nx, "dt": grid.dt_effective, "T": grid.T,
                 "checkpoints": grid.checkpoints},
    })
    norms_e = u_eps.l2_series()
    norms_h = u_hom.l2_series()
    lines = ["t,l2_eps,l2_hom,l2_diff\n"]
    h = grid.h
    axis = tuple(range(1, u_eps.snapshots.ndim))
    diffs = h ** (grid.d / 2.0) * numpy.sqrt(
        numpy.sum((u_eps.snapshots - u_hom.snapshots) ** 2, axis=axis))
    for t, ne, nh, nd in zip(u_eps.times, norms_e, norms_h, diffs):
        lines.append(f"{float(t)!r},{float(ne)!r},{float(nh)!r},"
                     f"{float(nd)!r}\n")
    (out / "checkpoint_norms.csv").write_text("".join(lines))
    _write_json(out / "manifest.json", _manifest(cfg, "solve", W, {
        "regime": regime.as_dict(),
        "epsilon": eps,
        "problem": cfg["problem"],
        "grid": {"nx": grid.nx, "dt": grid.dt_effective, "T": grid.T,
                 "checkpoints": grid.checkpoints},
    }))
    print(f"error (max over checkpoints, L2): {err:.6e}")
    return EXIT_OK


def cmd_sweep(cfg: dict, args) -> int:
    W = build_potential(cfg)
    sweep_cfg = build_sweep_config(cfg, W, args)
    report = run_sweep(sweep_cfg)
    out = _outdir(cfg, args)
    write_outputs(report, out)
    _write_json(out / "manifest.json", _manifest(cfg, "sweep", W, {
        "regime": report.regime.as_dict(),
        "problem": cfg["problem"],
        "sweep": {
            "epsilons": list(sweep_cfg.epsilons),
            "slope_tolerance": sweep_cfg.slope_tolerance,
            "r2_min": sweep_cfg.r2_min,
            "richardson_max": sweep_cfg.richardson_max,
            "richardson": sweep_cfg.run_richardson,
            "checkpoints": sweep_cfg.checkpoints,
        },
        "workers": sweep_cfg.workers,
        "budget": sweep_cfg.budget,
    }))
    if report.fit is not None:
        print(f"slope {report.fit.slope:.3f} (theoretical "
              f"{report.theoretical:.3f}), R^2 {report.fit.r2:.4f}, "
              f"verdict {report.verdict}")
    else:
        print(f"verdict {report.verdict}")
    for reason in report.reasons:
        print(f"  {reason}")
    if not report.passed:
        return EXIT_VERDICT
    return EXIT_OK


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="oscpot",
        description="verification lab for homogenization with highly "
                    "oscillating potentials")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
            ("correctors", "compute correctors and the effective potential"),
            ("verify", "evaluate the exact-identity report"),
            ("solve", "solve the eps and homogenized problems for one eps"),
            ("sweep", "run a convergence-rate sweep")]:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="JSON config path")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--workers", type=int, default=None,
                       help=f"process fan-out over eps (default from "
                            f"$OSCPOT_WORKERS, currently {default_workers()})")
        p.add_argument("--budget", type=int, default=None,
                       help="cap on total cell updates for a sweep")
    return parser


_COMMANDS = {
    "correctors": cmd_correctors,
    "verify": cmd_verify,
    "solve": cmd_solve,
    "sweep": cmd_sweep,
}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        validate_config(cfg, args.command)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return _COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NoApplicableRegime, UnsupportedK) as exc:
        print(f"regime rejection: {exc}", file=sys.stderr)
        return EXIT_REGIME
    except (ResolutionViolation, BudgetExceeded, BlowUp) as exc:
        print(f"resource violation: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except DegenerateFit as exc:
        print(f"rate fit failed: {exc}", file=sys.stderr)
        return EXIT_VERDICT


def console() -> None:
    sys.exit(main())


if __name__ == "__main__":
    sys.exit(main())
