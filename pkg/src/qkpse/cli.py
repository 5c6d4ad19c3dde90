"""Config-driven experiment runner.

    qkpse run <config.ini> [--threads N] [--out PATH]
    qkpse plot <report.jsonl> --out PATH

Configs are INI files with an [experiment] section (scenario, seed, epsilon,
delta, oracle, repeats, out) and a [params] section read per scenario.  Reports
are JSON Lines, one record per estimate.  Exit codes: 0 success, 2 invalid
config, 1 runtime failure.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import estimator, gaussian, kernelml, oracle, permanent
from .sources import InputStateSpec, LonEncoding

SCENARIOS = ("algorithm1_lon", "algorithm2_gaussian", "gaussian_exact", "gurvits", "depth_scan", "ridge_demo")
PLOT_COLUMNS = (
    "scenario", "seed", "x", "estimate", "oracle_value", "abs_error", "within_eps",
    "n_samples", "range_bound", "epsilon", "delta", "wall_seconds",
)


class ConfigError(ValueError):
    pass


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.replace(",", " ").split()]


def _complex(text: str) -> complex:
    return complex(text.replace(" ", ""))


class Config:
    """Validated view of an experiment config."""

    def __init__(self, path: str | os.PathLike):
        cp = configparser.ConfigParser()
        try:
            with open(path) as fh:
                cp.read_file(fh)
        except (OSError, configparser.Error) as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        if "experiment" not in cp:
            raise ConfigError("missing [experiment] section")
        ex = cp["experiment"]
        self.path = Path(path)
        self.scenario = ex.get("scenario", "")
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}; choose from {', '.join(SCENARIOS)}")
        try:
            self.seed = int(os.environ.get("QKPSE_SEED", ex.get("seed", "0")))
            self.epsilon = ex.getfloat("epsilon", 0.05)
            self.delta = ex.getfloat("delta", 0.05)
            self.oracle = ex.getboolean("oracle", True)
            self.repeats = ex.getint("repeats", 1)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        self.out = ex.get("out")
        if not (0 < self.epsilon < 1 and 0 < self.delta < 1):
            raise ConfigError("epsilon and delta must lie in (0, 1)")
        if self.repeats < 1:
            raise ConfigError("repeats must be positive")
        self.raw = dict(cp["params"]) if "params" in cp else {}
        try:
            self.params = getattr(self, f"_parse_{self.scenario}")(self.raw)
        except (KeyError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"invalid [params] for {self.scenario}: {exc}") from exc

    @staticmethod
    def _ordering(text: str):
        if text.strip() == "auto":
            return "auto"
        s = float(text)
        if not -1 < s < 1:
            raise ConfigError("ordering parameter s must lie in (-1, 1)")
        return s

    def _parse_algorithm1_lon(self, p):
        kind = p.get("kind", "single_photon")
        out = {
            "modes": int(p.get("modes", "2")),
            "kind": kind,
            "eta": float(p.get("eta", "1")),
            "gamma": _complex(p.get("gamma", "0")),
            "nbar": float(p.get("nbar", "0")),
            "s": self._ordering(p.get("s", "0")),
            "v_seed": int(p.get("v_seed", "0")),
            "cutoff": int(p.get("cutoff", "6")),
        }
        InputStateSpec(kind, out["eta"], out["gamma"], out["nbar"])
        if out["modes"] < 1:
            raise ConfigError("modes must be positive")
        return out

    def _parse_algorithm2_gaussian(self, p):
        out = {
            "lam": float(p.get("lam", "0.3")),
            "herald": int(p.get("herald", "1")),
            "herald_prime": int(p.get("herald_prime", p.get("herald", "1"))),
            "lam_prime": float(p.get("lam_prime", p.get("lam", "0.3"))),
        }
        for key in ("lam", "lam_prime"):
            if not 0 <= out[key] < 1:
                raise ConfigError(f"{key} must lie in [0, 1)")
        if min(out["herald"], out["herald_prime"]) < 0:
            raise ConfigError("herald photon numbers must be non-negative")
        return out

    def _parse_gaussian_exact(self, p):
        out = {
            "family": p.get("family", "coherent"),
            "gamma": _complex(p.get("gamma", "0")),
            "gamma_prime": _complex(p.get("gamma_prime", "0")),
            "r": float(p.get("r", "0")),
            "r_prime": float(p.get("r_prime", "0")),
            "s": self._ordering(p.get("s", "auto")),
            "cutoff": int(p.get("cutoff", "40")),
        }
        if out["family"] not in ("coherent", "squeezed"):
            raise ConfigError("family must be coherent or squeezed")
        return out

    def _parse_gurvits(self, p):
        out = {
            "modes": int(p.get("modes", "2")),
            "eta": float(p.get("eta", "0.5")),
            "v_seed": int(p.get("v_seed", "0")),
        }
        if not 0 <= out["eta"] <= 1:
            raise ConfigError("eta must lie in [0, 1]")
        return out

    def _parse_depth_scan(self, p):
        out = {"r": float(p.get("r", "0.5")), "etas": _floats(p.get("etas", "0 0.25 0.5 0.75 1"))}
        if any(not 0 <= e <= 1 for e in out["etas"]):
            raise ConfigError("etas must lie in [0, 1]")
        return out

    def _parse_ridge_demo(self, p):
        out = {
            "n_train": int(p.get("n_train", "20")),
            "n_test": int(p.get("n_test", "40")),
            "lam": float(p.get("lam", "1e-3")),
            "noise": float(p.get("noise", "0.05")),
            "estimated": p.get("estimated", "false").lower() in ("1", "true", "yes", "on"),
        }
        if out["lam"] <= 0:
            raise ConfigError("lam must be positive")
        return out


# ---------------------------------------------------------------------------
# scenarios


def _record(cfg: Config, seed: int, report: estimator.EstimateReport | None, oracle_value=None, **extra) -> dict:
    rec = {"scenario": cfg.scenario, "params": {k: str(v) for k, v in cfg.raw.items()}}
    if report is not None:
        rec.update(report.as_record())
    rec["seed"] = seed
    if oracle_value is not None:
        rec["oracle_value"] = oracle_value
    rec.update(extra)
    return rec


def _haar_pair(m: int, v_seed: int):
    rng = np.random.default_rng(v_seed)
    return gaussian.haar_unitary(m, rng), gaussian.haar_unitary(m, rng)


def _scenario_algorithm1_lon(cfg, threads):
    p = cfg.params
    V1, V2 = _haar_pair(p["modes"], p["v_seed"])
    spec = InputStateSpec(p["kind"], p["eta"], p["gamma"], p["nbar"])
    e1 = LonEncoding([spec] * p["modes"], V1)
    e2 = LonEncoding([spec] * p["modes"], V2)
    ref = None
    if cfg.oracle:
        d = p["cutoff"]
        r1 = oracle.apply_unitary(oracle.fock_density(e1.inputs, d), oracle.lon_fock_unitary(V1, p["modes"], d))
        r2 = oracle.apply_unitary(oracle.fock_density(e2.inputs, d), oracle.lon_fock_unitary(V2, p["modes"], d))
        ref = oracle.exact_kernel(r1, r2)
    for i in range(cfg.repeats):
        seed = cfg.seed + i
        rep = estimator.algorithm1_kernel(e1, e2, p["s"], cfg.epsilon, cfg.delta, seed, threads)
        yield _record(cfg, seed, rep, ref)


def _scenario_algorithm2_gaussian(cfg, threads):
    p = cfg.params
    d = max(p["herald"], p["herald_prime"]) + 8
    g1, g2 = gaussian.two_mode_squeezed(p["lam"]), gaussian.two_mode_squeezed(p["lam_prime"])
    P1 = oracle.FockOperator(1, d, oracle.projector(oracle.fock_ket(p["herald"], d)))
    P2 = oracle.FockOperator(1, d, oracle.projector(oracle.fock_ket(p["herald_prime"], d)))
    ref = float(p["herald"] == p["herald_prime"]) if cfg.oracle else None
    for i in range(cfg.repeats):
        seed = cfg.seed + i
        rep = estimator.algorithm2_kernel(g1, g2, [P1], [P2], cfg.epsilon, cfg.delta, seed, threads=threads)
        yield _record(cfg, seed, rep, ref)


def _gaussian_pair(p):
    if p["family"] == "coherent":
        return gaussian.coherent([p["gamma"]]), gaussian.coherent([p["gamma_prime"]])
    return gaussian.squeezed([p["r"]]), gaussian.squeezed([p["r_prime"]])


def _scenario_gaussian_exact(cfg, threads):
    p = cfg.params
    g1, g2 = _gaussian_pair(p)
    exact = gaussian.exact_gaussian_kernel(g1, g2)
    ref = None
    if cfg.oracle:
        d = p["cutoff"]
        if p["family"] == "coherent":
            k1, k2 = oracle.coherent_ket(p["gamma"], d), oracle.coherent_ket(p["gamma_prime"], d)
        else:
            k1, k2 = oracle.squeezed_ket(p["r"], 0.0, d), oracle.squeezed_ket(p["r_prime"], 0.0, d)
        ref = float(abs(np.vdot(k1, k2)) ** 2)
    for i in range(cfg.repeats):
        seed = cfg.seed + i
        rep = estimator.algorithm1_kernel(g1, g2, p["s"], cfg.epsilon, cfg.delta, seed, threads)
        yield _record(cfg, seed, rep, ref, exact_value=exact)


def _scenario_gurvits(cfg, threads):
    p = cfg.params
    V1, V2 = _haar_pair(p["modes"], p["v_seed"])
    ref = None
    if cfg.oracle:
        d = p["modes"] + 1
        specs = [InputStateSpec("single_photon", p["eta"])] * p["modes"]
        rho = oracle.fock_density(specs, d)
        r1 = oracle.apply_unitary(rho, oracle.lon_fock_unitary(V1, p["modes"], d))
        r2 = oracle.apply_unitary(rho, oracle.lon_fock_unitary(V2, p["modes"], d))
        ref = oracle.exact_kernel(r1, r2)
    for i in range(cfg.repeats):
        seed = cfg.seed + i
        rep = permanent.lossy_photonic_kernel(V1, V2, p["eta"], seed=seed, epsilon=cfg.epsilon, delta=cfg.delta, threads=threads)
        yield _record(cfg, seed, rep, ref)


def _scenario_depth_scan(cfg, threads):
    p = cfg.params
    g = gaussian.squeezed([p["r"]])
    tau0 = gaussian.nonclassical_depth(g)
    for eta in p["etas"]:
        t0 = time.perf_counter()
        tau = gaussian.nonclassical_depth(gaussian.apply_loss(g, eta))
        yield {
            "scenario": cfg.scenario,
            "params": {k: str(v) for k, v in cfg.raw.items()},
            "x": eta,
            "estimate": tau,
            "oracle_value": eta * tau0,
            "seed": cfg.seed,
            "wall_seconds": time.perf_counter() - t0,
        }


def _scenario_ridge_demo(cfg, threads):
    """1-D regression with coherent-state encoding x -> |x>, exact or estimated kernels."""
    p = cfg.params
    t0 = time.perf_counter()
    rng = np.random.default_rng(cfg.seed)
    x_train = np.sort(rng.uniform(-2, 2, p["n_train"]))
    x_test = np.linspace(-2, 2, p["n_test"])

    def target(x):
        return np.sin(2 * x)

    y_train = target(x_train) + p["noise"] * rng.standard_normal(p["n_train"])
    states = {float(x): gaussian.coherent([x]) for x in np.concatenate([x_train, x_test])}
    counter = iter(range(10**9))

    def kernel(a, b):
        if p["estimated"]:
            return estimator.algorithm1_kernel(states[a], states[b], "auto", cfg.epsilon, cfg.delta, cfg.seed + next(counter), threads).value
        return gaussian.exact_gaussian_kernel(states[a], states[b])

    K = kernelml.kernel_matrix(kernelml.Dataset([float(x) for x in x_train], y_train), kernel)
    model = kernelml.ridge_fit(K, y_train, p["lam"], points=x_train)
    preds = np.array([
        kernelml.predict(model, [kernel(float(xt), float(xs)) for xs in x_train]) for xt in x_test
    ])
    mse = float(np.mean((preds - target(x_test)) ** 2))
    baseline = float(np.var(target(x_test)))
    yield {
        "scenario": cfg.scenario,
        "params": {k: str(v) for k, v in cfg.raw.items()},
        "estimate": mse,
        "oracle_value": baseline,
        "seed": cfg.seed,
        "wall_seconds": time.perf_counter() - t0,
    }


def run_config(cfg: Config, threads: int = 1) -> list[dict]:
    return list(globals()[f"_scenario_{cfg.scenario}"](cfg, threads))


def write_report(records: list[dict], path: Path) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True, allow_nan=False) + "\n")
    os.replace(tmp, path)


def read_report(path) -> list[dict]:
    records = []
    with open(path) as fh:
        for line_no, line in enumerate(fh, 1):
            if not line.strip():
                continue
            rec = json.loads(line)
            if not isinstance(rec, dict) or "scenario" not in rec or "estimate" not in rec:
                raise ValueError(f"line {line_no}: not an estimate record")
            records.append(rec)
    return records


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def emit_plot_data(report_path, out_path) -> int:
    records = read_report(report_path)
    with open(out_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(PLOT_COLUMNS)
        for rec in records:
            est, ref, eps = rec.get("estimate"), rec.get("oracle_value"), rec.get("epsilon")
            err = abs(est - ref) if ref is not None else None
            within = (err <= eps) if (err is not None and eps is not None) else None
            row = dict(rec, abs_error=err, within_eps=within)
            w.writerow([_fmt(row.get(c)) for c in PLOT_COLUMNS])
    return len(records)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="qkpse", description="Phase-space quantum-kernel estimation experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    run_p = sub.add_parser("run", help="run an experiment config")
    run_p.add_argument("config")
    run_p.add_argument("--threads", type=int, default=1)
    run_p.add_argument("--out")
    plot_p = sub.add_parser("plot", help="flatten a report into a CSV table")
    plot_p.add_argument("report")
    plot_p.add_argument("--out", required=True)
    args = parser.parse_args(argv)

    if args.command == "run":
        try:
            cfg = Config(args.config)
            if args.threads < 1:
                raise ConfigError("--threads must be positive")
        except ValueError as exc:
            print(f"qkpse: invalid config: {exc}", file=sys.stderr)
            return 2
        out = Path(args.out or cfg.out or cfg.path.with_suffix(".jsonl"))
        try:
            records = run_config(cfg, args.threads)
            write_report(records, out)
        except Exception as exc:  # noqa: BLE001 - reported as a runtime failure
            print(f"qkpse: run failed: {type(exc).__name__}: {exc}", file=sys.stderr)
            return 1
        print(f"wrote {len(records)} record(s) to {out}")
        return 0

    try:
        n = emit_plot_data(args.report, args.out)
    except (OSError, ValueError, TypeError, KeyError) as exc:
        print(f"qkpse: cannot read report: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {n} row(s) to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
