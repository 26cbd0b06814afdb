"""Command-line driver: energies, profiles, identity checks and balancing.

Configuration is one JSON file plus flag overrides (flags win). Every run
writes ``manifest.json`` to the output directory. Exit codes: 0 pass, 1 a
check failed, 2 configuration error, 3 numerical error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__, bundles, chow, energies, registry, textio
from .projlin import ContractError, GeodesicDirection, GroupElement, SingularityError, exp_path
from .sampler import MCEstimate, SeededStream
from .varieties import FrozenBatch, Hypersurface

log = logging.getLogger("chowstab")

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3
COMMANDS = ("energy", "profile", "verify", "balance")
CHECKS = ("theorem2", "theorem5", "theorem6", "grassmannian_balance", "convexity", "criticality")
NUMERIC_ERRORS = (SingularityError, FloatingPointError, ArithmeticError, np.linalg.LinAlgError)


@dataclass
class RunConfig:
    command: str = "energy"
    target: str | None = None            # registry name
    poly: str | None = None              # polynomial file
    bundle_file: str | None = None       # bundle frame file
    bundle_c: float = 1.0
    sigma_file: str | None = None
    direction: str = "diag"              # registry name or matrix file
    direction_seed: int = 0
    t_grid: list | None = None
    functionals: list | None = None
    checks: list | None = None
    samples: int = 20_000
    seed: int = 0
    tolerance: float = 3.0               # in combined standard errors
    out: str = "chowstab-out"
    workers: int = 1
    max_iters: int = 200
    balance_tol: float = 1e-8
    symmetrize: bool = True
    ricci_method: str = "fd"

    @classmethod
    def from_sources(cls, config_path: str | None, overrides: dict) -> "RunConfig":
        data = {}
        if config_path:
            text, src = textio.read_text(config_path)
            try:
                data = json.loads(text)
            except json.JSONDecodeError as exc:
                raise textio.ParseError(exc.lineno, exc.msg, src) from None
            if not isinstance(data, dict):
                raise ContractError(f"{src}: config must be a JSON object")
            known = {f.name for f in fields(cls)}
            unknown = sorted(set(data) - known)
            if unknown:
                raise ContractError(f"{src}: unknown config keys {unknown}")
        data.update({k: v for k, v in overrides.items() if v is not None})
        cfg = cls(**data)
        cfg.validate()
        return cfg

    def validate(self):
        if self.command not in COMMANDS:
            raise ContractError(f"unknown command {self.command!r}; choose from {COMMANDS}")
        if sum(v is not None for v in (self.target, self.poly, self.bundle_file)) > 1:
            raise ContractError("give at most one of target, poly, bundle_file")
        for path in (self.poly, self.bundle_file, self.sigma_file):
            if path is not None and not Path(path).is_file():
                raise ContractError(f"file not found: {path}")
        if self.target is not None:
            registry.lookup(self.target)
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ContractError("seed must be a non-negative integer")
        if not isinstance(self.samples, int) or self.samples < 2:
            raise ContractError("samples must be an integer >= 2")
        if self.workers < 1 or self.max_iters < 0 or self.tolerance <= 0:
            raise ContractError("workers >= 1, max_iters >= 0 and tolerance > 0 required")
        if self.t_grid is not None:
            t = np.asarray(self.t_grid, dtype=float)
            if t.ndim != 1 or len(t) == 0 or np.any(np.diff(t) <= 0):
                raise ContractError("t_grid must be a non-empty strictly increasing list")
        if self.checks is not None:
            bad = sorted(set(self.checks) - set(CHECKS))
            if bad:
                raise ContractError(f"unknown checks {bad}; known: {CHECKS}")
        if self.ricci_method not in ("fd", "analytic"):
            raise ContractError("ricci_method must be 'fd' or 'analytic'")


# --- resolving the config ---------------------------------------------------------

def _target(cfg: RunConfig):
    if cfg.poly:
        text, src = textio.read_text(cfg.poly)
        return Hypersurface(textio.parse_polynomial(text, src), Path(cfg.poly).stem)
    if cfg.bundle_file:
        text, src = textio.read_text(cfg.bundle_file)
        return bundles.polynomial_bundle(textio.parse_bundle_frame(text, src), cfg.bundle_c,
                                         Path(cfg.bundle_file).stem)
    if cfg.target:
        return registry.lookup(cfg.target)
    raise ContractError("no target: give --registry, --poly or a bundle_file")


def _size(target) -> int:
    if isinstance(target, bundles.BundleChart):
        return target.N
    return target.ambient_dim + 1


def _direction(cfg: RunConfig, size: int) -> GeodesicDirection:
    if cfg.direction in registry.DIRECTIONS:
        return registry.direction(cfg.direction, size, cfg.direction_seed)
    text, src = textio.read_text(cfg.direction)
    m = textio.parse_matrix(text, src)
    if m.shape[0] != size:
        raise ContractError(f"{src}: direction is {m.shape[0]}x{m.shape[0]}, expected {size}")
    return GeodesicDirection(m)


def _sigma(cfg: RunConfig, size: int) -> GroupElement:
    """sigma from a matrix file (rescaled to det 1), else exp(t c) for a single t."""
    if cfg.sigma_file:
        text, src = textio.read_text(cfg.sigma_file)
        m = textio.parse_matrix(text, src)
        if m.shape[0] != size:
            raise ContractError(f"{src}: sigma is {m.shape[0]}x{m.shape[0]}, expected {size}")
        return GroupElement.sl(m)
    if cfg.t_grid is None:
        return GroupElement.identity(size)
    if len(cfg.t_grid) != 1:
        raise ContractError("a single sigma needs a one-point t_grid or a sigma file")
    t = float(cfg.t_grid[0])
    if t == 0.0:
        return GroupElement.identity(size)
    return exp_path(_direction(cfg, size), t)


def _matrix_json(m) -> list:
    return [[[float(v.real), float(v.imag)] for v in row] for row in np.asarray(m)]


def _batch(cfg: RunConfig, target, index: int = 0):
    stream = SeededStream(cfg.seed, index)
    if isinstance(target, bundles.BundleChart):
        return bundles.FrozenBundleBatch.draw(target, cfg.samples, stream)
    return FrozenBatch.draw(target, cfg.samples, stream, workers=cfg.workers,
                            ricci_method=cfg.ricci_method)


# --- commands ----------------------------------------------------------------------

def cmd_energy(cfg: RunConfig) -> dict:
    target = _target(cfg)
    s = _sigma(cfg, _size(target))
    batch = _batch(cfg, target)
    if isinstance(target, bundles.BundleChart):
        names = cfg.functionals or ["L"]
        if set(names) - {"L"}:
            raise ContractError(f"bundles support only L, got {names}")
        reports = [{"functional": "L", **bundles.donaldson_L(batch, s).to_dict(),
                    "sigma": _matrix_json(s.matrix), "target": target.descriptor()}]
    else:
        names = cfg.functionals or list(energies.ENERGIES)
        bad = sorted(set(names) - set(energies.ENERGIES))
        if bad:
            raise ContractError(f"unknown functionals {bad}; known: {energies.ENERGIES}")
        reports = [energies.energy(n, batch, s).to_dict() for n in names]
    return {"reports": reports, "passed": True}


def _convex_sign(name: str) -> float:
    # F0 is concave along geodesics; its negative (the Chow log-norm side) is convex.
    return -1.0 if name == "F0" else 1.0


def cmd_profile(cfg: RunConfig) -> dict:
    target = _target(cfg)
    size = _size(target)
    c = _direction(cfg, size)
    s0 = _sigma(cfg, size) if cfg.sigma_file else None
    if cfg.t_grid is None:
        raise ContractError("profile needs a t_grid")
    batch = _batch(cfg, target)
    t = [float(v) for v in cfg.t_grid]
    if isinstance(target, bundles.BundleChart):
        name = (cfg.functionals or ["L"])[0]
        if name != "L":
            raise ContractError("bundles support only L")
        vals = tuple(bundles.L_profile(batch, c, t, s0))
        prof = energies.EnergyProfile(c, GroupElement.identity(size), tuple(t), vals, "L")
    else:
        name = (cfg.functionals or ["F0"])[0]
        if name not in energies.ENERGIES:
            raise ContractError(f"unknown functional {name!r}")
        prof = energies.energy_profile(name, batch, c, t, s0)
    sign = _convex_sign(name)
    try:
        diffs = prof.second_differences()
    except ContractError:
        diffs = None
    convex = None
    if diffs:
        convex = all(sign * v >= -cfg.tolerance * se for v, se in diffs)
    table = prof.to_table()
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "profile.csv").write_text(table)
    return {"reports": [{"functional": name, "table": textio.parse_profile_table(table),
                         "second_differences": diffs, "convexity_sign": sign,
                         "convex": convex, "direction": _matrix_json(c.matrix)}],
            "passed": True}


def _status(ok: bool) -> str:
    return "pass" if ok else "fail"


def _check_report(rep: chow.CheckReport, target: str) -> dict:
    d = rep.to_dict()
    d["pass"] = bool(abs(rep.gap) <= rep.tolerance)
    d.update(target=target, status=_status(d["pass"]))
    return d


def _sigma_or_default(cfg: RunConfig, size: int, t_default: float = 0.3) -> GroupElement:
    if cfg.sigma_file or cfg.t_grid is not None:
        return _sigma(cfg, size)
    return exp_path(_direction(cfg, size), t_default)


def _run_theorem(cfg, name, target_name, target) -> dict:
    n = cfg.samples
    size = _size(target)
    s = _sigma_or_default(cfg, size)
    seeds = dict(seed_lhs=2 * cfg.seed + 1, seed_rhs=2 * cfg.seed + 2)
    if name == "theorem2":
        if not isinstance(target, bundles.BundleChart):
            raise ContractError("theorem2 needs a bundle target")
        rep = bundles.theorem2_check(target, s, n, n, **seeds)
    elif name == "theorem5":
        rep = chow.theorem5_check(_hyp(target).f, s, n, 2 * n, **seeds)
    else:
        rep = chow.theorem6_check(_hyp(target).f, s, n, n, 2 * n, **seeds,
                                  ricci_method=cfg.ricci_method)
    rep = chow.CheckReport(rep.name, rep.lhs, rep.rhs, cfg.tolerance)
    out = _check_report(rep, target_name)
    out["sigma"] = _matrix_json(s.matrix)
    return out


def _hyp(target) -> Hypersurface:
    if not isinstance(target, Hypersurface):
        raise ContractError("this check needs a hypersurface target")
    return target


def _run_grassmannian(cfg) -> dict:
    rng = np.random.default_rng(cfg.seed)
    rows = []
    for j in range(5):
        c = GeodesicDirection.random(4, rng)
        est = chow.grassmannian_balance_test(3, 2, c, cfg.samples, SeededStream(cfg.seed, 10 + j))
        ok = abs(est.value) <= cfg.tolerance * est.stderr
        rows.append({**est.to_dict(), "pass": bool(ok)})
    ok = all(r["pass"] for r in rows)
    return {"check": "grassmannian_balance", "target": "Gr(2,4)", "status": _status(ok),
            "pass": ok, "directions": rows}


def convexity_suite(target, batch, n_dirs: int = 20, seed: int = 0, h: float = 0.25,
                    tol: float = 3.0) -> dict:
    """Analytic second derivatives and 5-point FD second differences along random geodesics.

    For varieties the convex side is -F0; for bundles it is L.
    """
    rng = np.random.default_rng(seed)
    size = _size(target)
    grid = [-2 * h, -h, 0.0, h, 2 * h]
    rows = []
    for _ in range(n_dirs):
        c = GeodesicDirection.random(size, rng)
        if isinstance(target, bundles.BundleChart):
            d2 = bundles.L_second_derivative(batch, None, c)
            vals = tuple(bundles.L_profile(batch, c, grid))
            prof = energies.EnergyProfile(c, GroupElement.identity(size), tuple(grid), vals, "L")
            sign = 1.0
        else:
            d2 = energies.f0_second_derivative(batch, None, c)
            prof = energies.energy_profile("F0", batch, c, grid)
            sign = -1.0
        an = sign * float(d2.value)
        fd = [(sign * v, se) for v, se in prof.second_differences()]
        ok = an >= -tol * d2.stderr and all(v >= -tol * se for v, se in fd)
        rows.append({"analytic": an, "analytic_stderr": d2.stderr,
                     "fd": [v for v, _ in fd], "fd_stderr": [se for _, se in fd], "pass": bool(ok)})
    return {"n_directions": n_dirs, "n_pass": sum(r["pass"] for r in rows),
            "pass": all(r["pass"] for r in rows), "directions": rows}


def criticality_suite(target, batch, sigma_init, max_iters: int = 200, tol: float = 1e-8,
                      n_dirs: int = 5, seed: int = 0) -> dict:
    """Balance on a frozen batch, then compare residual and first derivatives."""
    rng = np.random.default_rng(seed)
    size = _size(target)
    if isinstance(target, bundles.BundleChart):
        st = bundles.bundle_balance_iterate(batch, sigma_init, max_iters, tol)
        deriv = lambda c: bundles.L_derivative(batch, st.sigma, c)   # noqa: E731
    else:
        st = energies.balance_iterate(batch, sigma_init, max_iters, tol)
        deriv = lambda c: energies.f0_derivative(batch, st.sigma, c)  # noqa: E731
    ders = [abs(float(deriv(GeodesicDirection.random(size, rng)).value)) for _ in range(n_dirs)]
    ok = st.converged and st.residual_norm < 1e-8 and max(ders) < 1e-8
    return {"iterations": st.iteration, "residual_norm": st.residual_norm,
            "max_abs_derivative": max(ders), "converged": st.converged,
            "residual_trace": list(st.trace), "pass": bool(ok)}


def _symmetric_batch(cfg, target, batch):
    if not cfg.symmetrize:
        return batch
    if isinstance(target, bundles.BundleChart):
        return batch.symmetrized()
    return batch.symmetrized() if target.symmetries() is not None else batch


def _run_property(cfg, name, target_name, target) -> dict:
    batch = _batch(cfg, target, index=20)
    if name == "convexity":
        res = convexity_suite(target, batch, seed=cfg.seed, tol=cfg.tolerance)
    else:
        batch = _symmetric_batch(cfg, target, batch)
        s0 = exp_path(registry.direction("diag", _size(target)), 0.2)
        res = criticality_suite(target, batch, s0, cfg.max_iters, min(cfg.balance_tol, 1e-9),
                                seed=cfg.seed)
    return {"check": name, "target": target_name, "status": _status(res["pass"]), **res}


DEFAULT_SUITE = (
    ("theorem2", "o_minus_one_p1"), ("theorem2", "taut_gr12"),
    ("theorem5", "fermat_conic"), ("theorem6", "fermat_conic"), ("theorem6", "fermat_cubic"),
    ("grassmannian_balance", None),
    ("convexity", "fermat_conic"), ("convexity", "o_minus_one_p1"),
    ("criticality", "fermat_conic"), ("criticality", "o_minus_one_p1"),
)


def _error_entry(check, target_name, exc) -> dict:
    if isinstance(exc, chow.DegenerateWeightError):
        kind = "degenerate-weight"
    elif isinstance(exc, NUMERIC_ERRORS):
        kind = "numerical"
    else:
        kind = "config"
    return {"check": check, "target": target_name, "status": "error", "error_kind": kind,
            "error": f"{type(exc).__name__}: {exc}", "pass": False}


def cmd_verify(cfg: RunConfig) -> dict:
    if cfg.target or cfg.poly or cfg.bundle_file:
        target = _target(cfg)
        name = cfg.target or getattr(target, "name", "user")
        if isinstance(target, bundles.BundleChart):
            default = ["theorem2", "convexity", "criticality"]
        else:
            default = ["theorem5", "convexity"]
            if target.degree >= 2:
                # a hyperplane has no #-seminorm and no balanced embedding
                default += ["theorem6", "criticality"]
        suite = [(chk, name) for chk in (cfg.checks or default)]
        targets = {name: target}
    else:
        suite = [(c, t) for c, t in DEFAULT_SUITE if cfg.checks is None or c in cfg.checks]
        targets = {}
    results, timings = [], []
    for check, tname in suite:
        t0 = time.perf_counter()
        try:
            if check == "grassmannian_balance":
                res = _run_grassmannian(cfg)
            else:
                target = targets.get(tname) or registry.lookup(tname)
                if check in ("theorem2", "theorem5", "theorem6"):
                    res = _run_theorem(cfg, check, tname, target)
                else:
                    res = _run_property(cfg, check, tname, target)
        except (ContractError, *NUMERIC_ERRORS) as exc:
            res = _error_entry(check, tname, exc)
        timings.append({"check": check, "target": tname, "seconds": time.perf_counter() - t0})
        log.info("%s %s: %s", check, tname, res["status"])
        results.append(res)
    return {"reports": results, "timings": timings,
            "passed": all(r["status"] == "pass" for r in results)}


def cmd_balance(cfg: RunConfig) -> dict:
    target = _target(cfg)
    size = _size(target)
    s0 = _sigma(cfg, size)
    batch = _symmetric_batch(cfg, target, _batch(cfg, target))
    if isinstance(target, bundles.BundleChart):
        st = bundles.bundle_balance_iterate(batch, s0, cfg.max_iters, cfg.balance_tol)
    else:
        st = energies.balance_iterate(batch, s0, cfg.max_iters, cfg.balance_tol)
    rep = st.to_dict()
    if not st.converged and cfg.max_iters > 0:
        rep["warning"] = "balancing did not converge"
    return {"reports": [rep], "passed": bool(st.converged or cfg.max_iters == 0),
            "numerical_failure": bool(not st.converged and cfg.max_iters > 0)}


RUNNERS = {"energy": cmd_energy, "profile": cmd_profile, "verify": cmd_verify,
           "balance": cmd_balance}


# --- manifest and entry point ---------------------------------------------------------

def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, MCEstimate):
        return obj.to_dict()
    return obj


def exit_code(result: dict) -> int:
    reports = result.get("reports", [])
    kinds = {r.get("error_kind") for r in reports if r.get("status") == "error"}
    if "numerical" in kinds or result.get("numerical_failure"):
        return EXIT_NUMERIC
    if kinds:
        return EXIT_CONFIG
    return EXIT_PASS if result.get("passed", True) else EXIT_FAIL


def run(cfg: RunConfig) -> tuple[dict, int]:
    t0 = time.perf_counter()
    result = RUNNERS[cfg.command](cfg)
    code = exit_code(result)
    manifest = {"tool": "chowstab", "version": __version__, "config": asdict(cfg),
                "wall_time_s": time.perf_counter() - t0, "exit_code": code,
                "results": _jsonable(result["reports"])}
    if "timings" in result:
        # wall times live outside the results so those stay bit-reproducible
        manifest["timings"] = result["timings"]
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest, code


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="chowstab", description=__doc__.splitlines()[0])
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--command", choices=COMMANDS)
    p.add_argument("--poly", help="hypersurface polynomial file")
    p.add_argument("--registry", dest="target", help="built-in variety or bundle name")
    p.add_argument("--sigma-file", help="group element matrix file")
    p.add_argument("--direction", help="'diag', 'random' or a matrix file")
    p.add_argument("--t-grid", help="comma-separated strictly increasing t values")
    p.add_argument("--samples", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--tolerance", type=float, help="pass threshold in combined stderr")
    p.add_argument("--out", help="output directory")
    p.add_argument("--workers", type=int)
    p.add_argument("--list", action="store_true", help="print registry names and exit")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _parse_grid(text: str | None):
    if text is None:
        return None
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ContractError(f"bad --t-grid {text!r}") from None


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if args.list:
        print(json.dumps(registry.names(), indent=2))
        return EXIT_PASS
    try:
        overrides = {k: getattr(args, k) for k in ("command", "poly", "target", "sigma_file",
                                                     "direction", "samples", "seed",
                                                     "tolerance", "out", "workers")}
        overrides["t_grid"] = _parse_grid(args.t_grid)
        cfg = RunConfig.from_sources(args.config, overrides)
        manifest, code = run(cfg)
    except (ContractError, TypeError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NUMERIC_ERRORS as exc:
        print(f"numerical error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    summary = [{"check": r.get("check", r.get("functional")), "status": r.get("status", "ok")}
               for r in manifest["results"]]
    print(json.dumps({"exit_code": code, "out": cfg.out, "results": summary}, indent=2))
    return code


if __name__ == "__main__":
    sys.exit(main())
