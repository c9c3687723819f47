"""Command-line entry point: ``mixtype <command> --config run.json [--out DIR]``.

Exit codes: 0 when every check passes, 1 when a check fails, 2 when the
configuration is unusable (nothing is written in that case).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import energy, friedrichs, geometry, operators, optics, solver
from .mesh import box_grid
from .report import VerificationReport, _plain

COMMANDS = ("classify", "check-sp", "check-adm", "energy", "solve", "optics")
OUT_ENV = "MIXTYPE_OUT"
DEFAULT_OUT = "mixtype-out"

DEFAULT_CASE_DOMAINS = {
    1: ("omega1", {"theta": 0.0}),
    2: ("omega2", {}),
    3: ("omega3", {}),
}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str
    seed: int = 0
    system: dict = field(default_factory=dict)
    domain: dict | None = None
    verification: dict = field(default_factory=dict)
    energy: dict = field(default_factory=dict)
    solve: dict = field(default_factory=dict)
    optics: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)

    @property
    def hash(self) -> str:
        blob = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def rng(self, stream: int = 0) -> np.random.Generator:
        return np.random.Generator(np.random.Philox(key=self.seed, counter=stream))


@dataclass
class RunReport:
    command: str
    config_hash: str
    seed: int
    reports: list[VerificationReport] = field(default_factory=list)
    tables: dict[str, Any] = field(default_factory=dict)
    csv: dict[str, tuple[tuple[str, ...], list]] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.reports)

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "config_hash": self.config_hash,
            "seed": self.seed,
            "pass": self.passed,
            "reports": [r.to_dict() for r in self.reports],
            "tables": _plain(self.tables),
        }


_BLOCKS = ("system", "domain", "verification", "energy", "solve", "optics")


def parse_config(data: Any, command: str | None = None) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(data) - set(_BLOCKS) - {"command", "seed"}
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    cmd = data.get("command", command)
    if command is not None and cmd != command:
        raise ConfigError(f"config command {cmd!r} does not match {command!r}")
    if cmd not in COMMANDS:
        raise ConfigError(f"command must be one of {COMMANDS}, got {cmd!r}")
    seed = data.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise ConfigError("seed must be a nonnegative integer")
    blocks = {}
    for b in _BLOCKS:
        v = data.get(b)
        if v is not None and not isinstance(v, dict):
            raise ConfigError(f"block {b!r} must be an object")
        blocks[b] = v
    raw = dict(data, command=cmd, seed=seed)
    return RunConfig(cmd, seed, blocks["system"] or {}, blocks["domain"], blocks["verification"] or {},
                     blocks["energy"] or {}, blocks["solve"] or {}, blocks["optics"] or {}, raw)


def _need(block: dict, key: str, name: str):
    if key not in block:
        raise ConfigError(f"missing {name}.{key}")
    return block[key]


def _system(cfg: RunConfig) -> operators.SystemSpec:
    sid = _need(cfg.system, "id", "system")
    try:
        return operators.assemble_system(sid, cfg.system.get("params"), cfg.system.get("k"))
    except (TypeError, ValueError) as e:
        raise ConfigError(f"system: {e}") from e


def _domain(block: dict | None, default=None) -> geometry.DomainSpec | None:
    if block is None:
        if default is None:
            return None
        kind, params = default
    else:
        kind = _need(block, "kind", "domain")
        params = block.get("params", {})
    try:
        dom = geometry.build_domain(kind, **params)
        geometry.validate_domain(dom)
    except (TypeError, ValueError, geometry.GeometryError) as e:
        raise ConfigError(f"domain: {e}") from e
    return dom


def _case(block: dict, name: str) -> int:
    c = _need(block, "case", name)
    if c not in energy.CASES:
        raise ConfigError(f"{name}.case must be 1, 2 or 3")
    return c


def _resolutions(block: dict, default, name: str) -> list[int]:
    res = block.get("resolutions", default)
    if not isinstance(res, list) or not res or not all(isinstance(r, int) and r >= 8 for r in res):
        raise ConfigError(f"{name}.resolutions must be a list of integers >= 8")
    return res


# ---------------------------------------------------------------------------
# commands: each returns a thunk so configuration errors surface before work


def _prep_classify(cfg: RunConfig) -> Callable[[RunReport], None]:
    sysm = _system(cfg)
    v = cfg.verification
    xlim = v.get("xlim", [-1.5, 1.5])
    ylim = v.get("ylim", [-1.5, 1.5])
    n = v.get("n", 61)
    if not (isinstance(n, int) and n >= 2):
        raise ConfigError("verification.n must be an integer >= 2")

    def run(rep: RunReport):
        xs = np.linspace(xlim[0], xlim[1], n)
        ys = np.linspace(ylim[0], ylim[1], n)
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        labels = [str(c) for c in operators.classify_points(sysm, X.ravel(), Y.ravel(), strict=False)]
        counts = {k: labels.count(k) for k in [t.value for t in operators.TypeClass] + [operators.UNDEFINED]}
        rep.tables["classify"] = {"system": sysm.name, "resolution": [n, n], "tol": 1e-10, "counts": counts}
        rep.reports.append(VerificationReport("classification complete", True, 0.0, None, (n, n), 0.0,
                                              {"points": n * n}))
        rep.csv["classify.csv"] = (("x", "y", "class"),
                                   [(float(x), float(y), c) for x, y, c in zip(X.ravel(), Y.ravel(), labels)])

    return run


def _prep_check_sp(cfg: RunConfig):
    sysm = _system(cfg)
    v = cfg.verification
    dom = _domain(cfg.domain)
    res = v.get("resolution", 32)
    tol = v.get("tol", 1e-10)
    expect_zero = bool(v.get("expect_zero", False))
    if dom is None:
        xlim = v.get("xlim", [-0.9, 0.9])
        ylim = v.get("ylim", [-0.9, 0.9])
        target = box_grid(xlim, ylim, res)
    else:
        target = dom

    def run(rep: RunReport):
        r = friedrichs.check_symmetric_positive(sysm, target, res, tol)
        rep.reports.append(r)
        if expect_zero:
            mx = r.child("Q >= 0").details["max_abs_Q"]
            rep.reports.append(VerificationReport("Q = 0", mx == 0.0, -mx, r.location, r.resolution, 0.0))
        if sysm.perturbation is not None:
            rep.reports.append(friedrichs.validate_perturbation(sysm.perturbation, target, res))

    return run


def _prep_check_adm(cfg: RunConfig):
    v = cfg.verification
    try:
        c = float(v.get("c", 1.0))
        eps1 = float(v.get("eps1", 0.1))
        eps2 = float(v.get("eps2", 0.1))
        sigma = float(v.get("sigma", 1.0))
        tau = float(v.get("tau", 0.0))
        margin = float(v.get("margin", 1e-6))
    except (TypeError, ValueError) as e:
        raise ConfigError(f"verification: {e}") from e
    res = v.get("resolution", 16)
    dom = _domain(cfg.domain, ("omega5", {"eps0": 0.1}))
    if dom.kind != geometry.DomainKind.OMEGA5:
        raise ConfigError("check-adm runs on the annulus (omega5)")
    if not (c > 0 and eps1 > 0 and eps2 > 0 and margin >= 0):
        raise ConfigError("need c, eps1, eps2 > 0 and margin >= 0")

    def run(rep: RunReport):
        sel = friedrichs.select_M(c, eps1, eps2, dom, margin, sigma, tau, res)
        rep.tables["select_M"] = {"M": sel.M, "feasible": sel.feasible, "resolution": res,
                                  "tol": 1e-10, "margin": margin,
                                  "trials": [list(t) for t in sel.trials]}
        if not sel.feasible:
            rep.reports.append(VerificationReport("feasible M exists", False, -1.0, None, res, 0.0,
                                                  {"sigma": sigma, "tau": tau}))
        rep.reports.extend(sel.reports)

    return run


def _prep_energy(cfg: RunConfig):
    e = cfg.energy
    case = _case(e, "energy")
    dom = _domain(cfg.domain, DEFAULT_CASE_DOMAINS[case])
    resolutions = _resolutions(e, [32, 64], "energy")
    scan_res = e.get("scan_resolution", 256)
    exclusion = float(e.get("exclusion", 1e-8))
    samples = int(e.get("samples", 100))

    def run(rep: RunReport):
        rep.reports.append(energy.scan_quadratic_form(case, dom, scan_res, seed=cfg.seed))
        rep.reports.append(_gamma_report(case, cfg.rng(1), samples))
        rows = []
        for r in resolutions:
            est = energy.estimate_basic_constant(case, dom, r, exclusion)
            d = est.to_dict()
            d["tol"] = 1e-8
            rows.append(d)
            rep.reports.append(VerificationReport("K > 0", est.K > 0, est.K, None, est.resolution, 0.0,
                                                  {"excluded_fraction": est.excluded_fraction}))
        rep.tables["K"] = rows
        if len(rows) > 1:
            Ks = [r["K"] for r in rows]
            spread = max(abs(b - a) / a for a, b in zip(Ks, Ks[1:]))
            rep.reports.append(VerificationReport("K stable under refinement (< 25%)", spread < 0.25,
                                                  0.25 - spread, None, resolutions, 0.0, {"K": Ks}))

    return run


def _gamma_report(case: int, rng: np.random.Generator, samples: int) -> VerificationReport:
    worst, where = 0.0, None
    for _ in range(samples):
        th = rng.uniform(0, 2 * math.pi)
        s = rng.uniform(-3, 3)
        scale = 10 ** rng.uniform(-2, 2)
        d = np.array([-math.sin(th), math.cos(th)])
        p = np.array([math.cos(th), math.sin(th)]) + s * d
        if abs(d[1]) < 1e-3:
            continue
        w = scale * np.array([1.0, -d[0] / d[1]])
        val = abs(energy.gamma_integrand(case, p, w, d)) / (scale * scale)
        if val >= worst:
            worst, where = val, (float(p[0]), float(p[1]))
    return VerificationReport(f"Gamma integrand vanishes (case {case})", worst <= 1e-12, -worst, where,
                              samples, 1e-12)


def _prep_solve(cfg: RunConfig):
    s = cfg.solve
    name = _need(s, "case", "solve")
    makers = {"optics-polar": solver.manufactured_optics_polar, "hodge-case3": solver.manufactured_hodge_case3}
    if name not in makers:
        raise ConfigError(f"solve.case must be one of {sorted(makers)}")
    resolutions = _resolutions(s, [16, 32, 64], "solve")
    if len(resolutions) < 2:
        raise ConfigError("solve.resolutions needs at least two entries")
    rtol = float(s.get("tol", 1e-10))

    def run(rep: RunReport):
        case = makers[name]()
        table = solver.convergence_study(case, resolutions, rtol)
        for row in table:
            row["tol"] = rtol
        rep.tables["convergence"] = table
        errs = [row["l2_error"] for row in table]
        mono = all(b < a for a, b in zip(errs, errs[1:]))
        rep.reports.append(VerificationReport("weighted L2 error decreases", mono,
                                              min((a - b for a, b in zip(errs, errs[1:]))), None,
                                              resolutions, 0.0, {"errors": errs}))
        orders = [row["order_l2"] for row in table[1:]]
        worst = min(orders)
        rep.reports.append(VerificationReport("observed order >= 1", bool(worst >= 1.0), worst - 1.0, None,
                                              resolutions, 0.0, {"orders": orders}))
        u, _, _ = solver.solve_manufactured(case, resolutions[-1], rtol)
        pts = u.grid.nodes
        rep.csv["fields.csv"] = (("c1", "c2", "u1", "u2"),
                                 [tuple(float(v) for v in (*p, *val)) for p, val in zip(pts, u.values)])

    return run


def _prep_optics(cfg: RunConfig):
    o = cfg.optics
    t_min = float(o.get("t_min", -10.0))
    t_max = float(o.get("t_max", 10.0))
    n = int(o.get("n", 101))
    samples = int(o.get("samples", 100))
    if not (-optics.T_MAX <= t_min < t_max <= optics.T_MAX) or n < 2:
        raise ConfigError("optics: need -20 <= t_min < t_max <= 20 and n >= 2")

    def run(rep: RunReport):
        ts = np.linspace(t_min, t_max, n)
        rows, worst, at = [], 0.0, None
        for t in ts:
            s = optics.airy_series(float(t))
            r = optics.airy_rk4(float(t))
            d = optics.state_discrepancy(r, s)
            if d >= worst:
                worst, at = d, (float(t),)
            rows.append((float(t), s.Z, s.dZ))
        rep.csv["airy.csv"] = (("t", "Z", "dZ"), rows)
        rep.reports.append(VerificationReport("Airy series vs RK4", worst <= 1e-10, -worst, at, n, 1e-10,
                                              {"step": optics.RK4_STEP}))
        rng = cfg.rng(2)
        zero = optics.constant_field(0.0)
        w1 = 0.0
        for _ in range(samples):
            p = rng.uniform(-5, 5, 2)
            phi = rng.uniform(0, 2 * math.pi)
            v = optics.linear_field(math.cos(phi), math.sin(phi), rng.uniform(-1, 1))
            u2 = optics.constant_field(float(rng.uniform(-3, 3)))
            for u in (zero, u2):
                w1 = max(w1, max(abs(x) for x in optics.eikonal_residual(u, v, p)))
        rep.reports.append(VerificationReport("eikonal branches", w1 <= 1e-12, -w1, None, samples, 1e-12))
        pairs = [(optics.quadratic_field(1, 0, 1), optics.quadratic_field(1, 0, 1)),
                 (optics.quadratic_field(0, 1, 0), optics.ScalarField2(lambda p, q: p * q))]
        lw = 0.0
        for _ in range(samples):
            p = rng.uniform(-3, 3, 2)
            for v, V in pairs:
                lw = max(lw, optics.legendre_check(v, V, p))
        rep.reports.append(VerificationReport("Legendre pairs", lw <= 1e-12, -lw, None, samples, 1e-12))
        hw = 0.0
        for _ in range(samples):
            pq = rng.uniform(-2, 2, 2)
            a, b, c = rng.standard_normal(3)
            hw = max(hw, abs(optics.hodograph_system_check(pq, optics.quadratic_field(a, b, c))[1]))
        rep.reports.append(VerificationReport("hodograph x_q - y_p = 0", hw == 0.0, -hw, None, samples, 0.0))

    return run


_PREP = {
    "classify": _prep_classify,
    "check-sp": _prep_check_sp,
    "check-adm": _prep_check_adm,
    "energy": _prep_energy,
    "solve": _prep_solve,
    "optics": _prep_optics,
}


def run(cfg: RunConfig) -> RunReport:
    thunk = _PREP[cfg.command](cfg)
    rep = RunReport(cfg.command, cfg.hash, cfg.seed)
    thunk(rep)
    return rep


def _csv_bytes(header, rows) -> bytes:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue().encode()


def write_outputs(rep: RunReport, out: Path) -> list[Path]:
    out.mkdir(parents=True, exist_ok=True)
    files = {"report.json": (json.dumps(rep.to_dict(), indent=2, sort_keys=True) + "\n").encode()}
    for name, (header, rows) in rep.csv.items():
        files[name] = _csv_bytes(header, rows)
    written = []
    for name, data in files.items():
        path = out / name
        path.write_bytes(data)
        written.append(path)
    return written


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="mixtype", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, type=Path)
    ap.add_argument("--out", type=Path, default=None,
                    help=f"output directory (default: ${OUT_ENV} or ./{DEFAULT_OUT})")
    args = ap.parse_args(argv)
    out = args.out or Path(os.environ.get(OUT_ENV) or DEFAULT_OUT)
    try:
        data = json.loads(args.config.read_text())
        cfg = parse_config(data, args.command)
        thunk = _PREP[cfg.command](cfg)
    except (OSError, json.JSONDecodeError, ConfigError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    rep = RunReport(cfg.command, cfg.hash, cfg.seed)
    thunk(rep)
    write_outputs(rep, out)
    for r in rep.reports:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.condition}  worst={r.worst!r}  at={r.location}")
    return 0 if rep.passed else 1


if __name__ == "__main__":
    raise SystemExit(main())
