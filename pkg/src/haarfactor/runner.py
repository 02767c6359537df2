"""Scenario configs, seed sweeps and reports."""
from __future__ import annotations

import csv
import io
import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .bounds import corollary_ntilde, eta_from_epsilon, nmin, nmin_unconditional
from .errors import HaarFactorError, SearchExhausted
from .operators import (FactorizationCertificate, OperatorMatrix, identity, operator_from_json,
                        random_operator)
from .reduce_positive import factor_through_signed, ntilde_min
from .spaces import HILBERT, SpaceSpec
from .stabilize import StabilizationParams, factorize

SCHEMA_VERSION = 1
MODES = ("positive", "split", "signed-diagonal")
OVERRIDE_KEYS = ("ntilde", "m", "N", "Ntilde", "threshold", "threshold_off", "threshold_diag",
                 "width")


class ConfigError(HaarFactorError, ValueError):
    pass


@dataclass
class ScenarioConfig:
    n: int
    gamma: float = 1.0
    delta: float = 0.5
    epsilon: float = 1.0
    eta: Optional[float] = None
    spec: SpaceSpec = HILBERT
    seeds: list = field(default_factory=lambda: [0])
    mode: str = "positive"
    operator: str = "random"  # "random", "identity" or a path to an operator JSON
    noise: float = 0.5
    max_tries: int = 50
    K: Optional[float] = None
    overrides: dict = field(default_factory=dict)
    assertions: dict = field(default_factory=dict)
    name: str = "scenario"

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        unknown = set(self.overrides) - set(OVERRIDE_KEYS)
        if unknown:
            raise ConfigError(f"unknown overrides: {sorted(unknown)}")
        if not isinstance(self.n, int) or self.n < 0:
            raise ConfigError("n must be a nonnegative integer")
        if not self.seeds:
            raise ConfigError("seeds must be nonempty")

    @property
    def resolved_eta(self) -> float:
        return float(eta_from_epsilon(self.epsilon)) if self.eta is None else self.eta

    def override(self, key, default=None):
        return self.overrides.get(key, default)

    @property
    def N(self) -> int:
        if "N" in self.overrides:
            return int(self.overrides["N"])
        raise ConfigError("desk-scale runs need overrides.N")

    def paper_sizes(self) -> dict:
        out = {"nmin": nmin(self.gamma, self.delta, self.epsilon, self.n)}
        if self.K is not None:
            out["nmin_unconditional"] = nmin_unconditional(self.gamma, self.delta, self.epsilon,
                                                           self.n, self.K)
        if self.mode == "signed-diagonal":
            out["corollary_ntilde"] = corollary_ntilde(self.gamma, self.delta, self.epsilon,
                                                       self.n, self.K)
        return {k: str(v) for k, v in out.items()}

    def stabilization(self, seed: int) -> StabilizationParams:
        tau = self.override("threshold")
        return StabilizationParams(
            n=self.n, gamma=self.gamma, delta=self.delta, epsilon=self.epsilon, eta=self.eta,
            ntilde=self.override("ntilde"), m=self.override("m"),
            threshold_off=self.override("threshold_off", tau),
            threshold_diag=self.override("threshold_diag", tau),
            width=self.override("width"), max_tries=self.max_tries, seed=seed, K=self.K,
            spec=self.spec)

    def to_json(self) -> dict:
        d = asdict(self)
        d["spec"] = self.spec.to_json()
        return d

    @classmethod
    def from_json(cls, data: dict) -> "ScenarioConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        data = dict(data)
        allowed = set(cls.__dataclass_fields__)
        unknown = set(data) - allowed
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "n" not in data:
            raise ConfigError("config needs n")
        if "spec" in data:
            s = data["spec"]
            data["spec"] = SpaceSpec.parse(s) if isinstance(s, str) else SpaceSpec.from_json(s)
        try:
            return cls(**data)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def load(cls, path) -> "ScenarioConfig":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
        return cls.from_json(data)


@dataclass
class SeedRecord:
    seed: int
    ok: bool
    stages: list
    certificate: Optional[dict] = None
    error: Optional[str] = None


@dataclass
class RunReport:
    config: dict
    records: list
    paper_sizes: dict
    timings: dict = field(default_factory=dict)
    schema: int = SCHEMA_VERSION

    @property
    def success_rate(self) -> float:
        return sum(r.ok for r in self.records) / len(self.records)

    @property
    def max_residual(self) -> float:
        vals = [r.certificate["residual"] for r in self.records if r.certificate]
        return max(vals, default=float("nan"))

    def to_json(self, timings: bool = True) -> dict:
        return {
            "schema": self.schema,
            "config": self.config,
            "paper_sizes": self.paper_sizes,
            "success_rate": self.success_rate,
            "records": [asdict(r) for r in self.records],
            "timings": self.timings if timings else {},
        }

    @classmethod
    def from_json(cls, data: dict) -> "RunReport":
        if data.get("schema") != SCHEMA_VERSION:
            raise ConfigError(f"unsupported report schema {data.get('schema')!r}")
        return cls(data["config"], [SeedRecord(**r) for r in data["records"]],
                   data["paper_sizes"], data.get("timings", {}), data["schema"])

    def certificates(self) -> list[FactorizationCertificate]:
        return [FactorizationCertificate.from_json(r.certificate)
                for r in self.records if r.certificate]

    def to_csv(self) -> str:
        buf = io.StringIO()
        cols = ["seed", "stage", "ok", "threshold_off", "threshold_diag", "offdiag_max",
                "diag_dev_max", "value", "residual", "error"]
        w = csv.DictWriter(buf, fieldnames=cols, extrasaction="ignore")
        w.writeheader()
        for r in self.records:
            for st in r.stages:
                w.writerow({"seed": r.seed, **st})
        return buf.getvalue()


def make_operator(config: ScenarioConfig, seed: int) -> OperatorMatrix:
    ambient = int(config.override("Ntilde", config.N)) if config.mode == "signed-diagonal" else config.N
    if config.operator == "identity":
        return identity(ambient)
    if config.operator == "random":
        kind = {"positive": "positive", "split": "none", "signed-diagonal": "signed"}[config.mode]
        delta = 0.0 if kind == "none" else config.delta
        return random_operator(ambient, config.gamma, delta, kind, seed=seed, spec=config.spec,
                               noise=config.noise)
    return operator_from_json(json.loads(Path(config.operator).read_text()))


def _stage_rows(cert: FactorizationCertificate) -> list:
    d = cert.details
    tau = d.get("thresholds", [None, None])
    rows = [
        {"stage": "diagonalize", "ok": True, "threshold_off": tau[0], "threshold_diag": tau[1],
         "offdiag_max": d.get("offdiag_max"), "diag_dev_max": d.get("diag_dev_max"),
         "value": d.get("tries_used")},
        {"stage": "stabilize", "ok": True, "value": d.get("c"),
         "residual": d.get("stabilization_residual")},
        {"stage": "factorize", "ok": True, "value": cert.constant_bound, "residual": cert.residual},
    ]
    if "sigma" in d:
        rows.insert(0, {"stage": "reduce_positive", "ok": True, "value": d.get("a_bound")})
    return rows


def run_seed(config: ScenarioConfig, seed: int, tol: float) -> SeedRecord:
    try:
        T = make_operator(config, seed)
        params = config.stabilization(seed)
        if config.mode == "signed-diagonal":
            override = T.ambient < ntilde_min(config.N, config.epsilon)
            cert, _ = factor_through_signed(T, config.N, config.delta, config.epsilon, params,
                                            override=override)
        else:
            mode = "positive_diagonal" if config.mode == "positive" else "identity_split"
            cert = factorize(T, params, mode=mode)
    except SearchExhausted as exc:
        res = exc.result
        row = {"stage": "diagonalize", "ok": False, "threshold_off": res.thresholds[0],
               "threshold_diag": res.thresholds[1], "offdiag_max": res.offdiag_max,
               "diag_dev_max": res.diag_dev_max, "value": res.tries_used, "error": str(exc)}
        return SeedRecord(seed, False, [row], error=f"SearchExhausted: {exc}")
    except (HaarFactorError, ValueError, np.linalg.LinAlgError) as exc:
        err = f"{type(exc).__name__}: {exc}"
        return SeedRecord(seed, False, [{"stage": "pipeline", "ok": False, "error": err}],
                          error=err)
    ok = cert.residual <= tol
    return SeedRecord(seed, ok, _stage_rows(cert), certificate=cert.to_json())


def run(config: ScenarioConfig, tol: float = 1e-8) -> RunReport:
    records, timings = [], {}
    for seed in config.seeds:
        t0 = time.perf_counter()
        records.append(run_seed(config, int(seed), tol))
        timings[str(seed)] = time.perf_counter() - t0
    return RunReport(config.to_json(), records, config.paper_sizes(), timings)


def assertions_pass(config: ScenarioConfig, report: RunReport) -> bool:
    a = config.assertions
    ok = report.success_rate >= a.get("min_success_rate", 1.0)
    if "max_residual" in a:
        ok = ok and report.max_residual <= a["max_residual"]
    return bool(ok)


def bundled_scenario(name: str) -> Path:
    return Path(__file__).with_name("scenarios") / f"{name}.json"
