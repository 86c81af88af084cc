"""Command-line front end.

Every subcommand writes ``report.json`` and ``run_record.json`` to the
output directory, plus ``curves.csv`` and ``points.csv`` where it has curve
or point data.  Exit status is 0 on success, 1 when a mathematical check
fails and 2 on usage or configuration errors.
"""
from __future__ import annotations

import argparse
import configparser
import hashlib
import logging
import math
import os
import re
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from . import coholder, covering, folding, funcspace, packing, serialize
from .errors import AssouadError, AuditFailure

log = logging.getLogger("assouad_graphs")

COMMANDS = ("generate", "boxdim", "spectrum", "audit-upper", "fold", "verify-fold",
            "coholder", "pack", "energy", "bv-check")


class UsageError(Exception):
    pass


def _theta_grid(text):
    """``start:stop:step`` (inclusive) or a comma list."""
    text = str(text).strip()
    if ":" in text:
        parts = [float(p) for p in text.split(":")]
        if len(parts) != 3 or parts[2] <= 0 or parts[1] < parts[0]:
            raise ValueError(f"bad range {text!r}")
        start, stop, step = parts
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + i * step, 12) for i in range(n)]
    return [float(p) for p in text.split(",") if p.strip()]


def _float_list(text):
    return [float(p) for p in str(text).split(",") if p.strip()]


def _int_list(text):
    return [int(p) for p in str(text).split(",") if p.strip()]


def _power(text):
    """Integers, also written as ``2^k``, ``2**k`` or ``2^k+1``."""
    text = str(text).strip().replace("**", "^")
    m = re.fullmatch(r"(\d+)\^(\d+)([+-]\d+)?", text)
    if m:
        return int(m.group(1)) ** int(m.group(2)) + int(m.group(3) or 0)
    return int(text)


# name -> (parser, default, help)
OPTIONS = {
    "family": (str, None, "weierstrass, takagi or zigzag"),
    "a": (float, None, "amplitude ratio a in (0, 1)"),
    "b": (float, None, "frequency ratio b > 1"),
    "s": (float, 3.0, "zigzag decay exponent s > 2"),
    "variant": (str, "plain", "zigzag sequence: plain or log_corrected"),
    "m_max": (int, 2000, "last zigzag vertex index"),
    "truncation_tol": (float, None, "series truncation tolerance"),
    "samples": (_power, 2 ** 18 + 1, "number of grid samples"),
    "lo": (float, None, "left end of the domain"),
    "hi": (float, None, "right end of the domain"),
    "r_ladder": (_float_list, None, "covering scales r, comma separated"),
    "theta_grid": (_theta_grid, None, "start:stop:step or comma list"),
    "theta": (float, None, "spectrum parameter theta"),
    "centers": (int, 20, "number of random graph centres"),
    "center_list": (_float_list, None, "explicit centre abscissae"),
    "ladder_lambdas": (_float_list, [0.05, 0.2, 0.35, 0.5], "R_max = R_min**lambda per ladder"),
    "ladder_steps": (int, 6, "scales per R ladder"),
    "estimator": (str, "regression", "regression or max"),
    "tol": (float, 0.05, "audit tolerance"),
    "theta0": (float, None, "folding or co-Hölder threshold theta0"),
    "K": (int, None, "number of folding squares"),
    "C": (float, None, "upper Hölder constant (measured if omitted)"),
    "c": (float, None, "lower oscillation constant (measured if omitted)"),
    "r0": (float, 0.1, "witness scale r0"),
    "pairs": (int, 100_000, "random pairs for the Hölder check"),
    "alpha": (float, None, "Hölder exponent alpha"),
    "eta": (float, 0.0, "co-Hölder eta"),
    "epsilon": (float, 0.0, "co-Hölder epsilon"),
    "radii": (_float_list, None, "square radii for proposed co-Hölder squares"),
    "squares": (str, None, "explicit squares x:R,x:R,..."),
    "n": (_int_list, None, "packing index n (comma list allowed)"),
    "c0": (float, None, "packing constant c0"),
    "q": (_float_list, [1.5, 2.0], "energy exponents q"),
    "trials": (int, 10_000, "random (g, h, J) triples"),
    "staircases": (int, 20, "random monotone staircases"),
}
COMMON = {"out": (str, "out", "output directory"), "seed": (int, 0, "random seed"),
          "precision": (str, "double", "double or extended"),
          "jobs": (int, None, "worker threads (default $ASLB_JOBS or 1)")}

FUNC = ("family", "a", "b", "s", "variant", "m_max", "truncation_tol", "samples", "lo", "hi")
SPECTRUM = ("theta_grid", "centers", "center_list", "ladder_lambdas", "ladder_steps")
FOLD = ("theta0", "K", "C", "c", "r0")
PER_COMMAND = {
    "generate": FUNC,
    "boxdim": FUNC + ("r_ladder",),
    "spectrum": FUNC + SPECTRUM,
    "audit-upper": FUNC + SPECTRUM + ("estimator", "tol"),
    "fold": FUNC + FOLD,
    "verify-fold": FUNC + FOLD + ("theta_grid", "pairs"),
    "coholder": FUNC + ("alpha", "eta", "epsilon", "radii", "squares", "J_count"),
    "pack": ("s", "theta", "n", "variant", "c0"),
    "energy": ("s", "variant", "q", "m_max"),
    "bv-check": ("trials", "staircases", "samples"),
}
OPTIONS["J_count"] = (int, 4096, "dyadic test intervals per square")
REQUIRED = {
    "generate": ("family",), "boxdim": ("family",), "spectrum": ("family", "theta_grid"),
    "audit-upper": ("family", "theta_grid"), "fold": ("family", "theta0", "K"),
    "verify-fold": ("family", "theta0", "K", "theta_grid"),
    "coholder": ("family", "alpha"), "pack": ("s", "theta", "n"), "energy": ("s",),
    "bv-check": (),
}


@dataclass
class RunConfig:
    command: str
    params: dict
    out: str = "out"
    seed: int = 0
    precision: str = "double"
    jobs: int = 1
    sources: dict = field(default_factory=dict)

    def snapshot(self) -> dict:
        return {"command": self.command, "out": self.out, "seed": self.seed,
                "precision": self.precision, "jobs": self.jobs, "params": self.params}


def _flag(name):
    return "--" + name.replace("_", "-")


def build_parser():
    parser = argparse.ArgumentParser(prog="aslb", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for cmd in COMMANDS:
        p = sub.add_parser(cmd, argument_default=argparse.SUPPRESS)
        p.add_argument("--config", help="flat key=value file; flags take precedence")
        for name in ("out", "seed", "precision", "jobs") + PER_COMMAND[cmd]:
            typ, _, help_ = COMMON.get(name) or OPTIONS[name]
            p.add_argument(_flag(name), dest=name, type=str if typ is not int else int,
                           help=help_)
    return parser


def _read_config_file(path):
    text = Path(path).read_text(encoding="utf-8")
    cp = configparser.ConfigParser(interpolation=None, delimiters=("=",))
    cp.optionxform = str
    cp.read_string("[run]\n" + text)
    return {k.strip().replace("-", "_"): v.strip() for k, v in cp["run"].items()}


def parse_config(argv, parser=None) -> RunConfig:
    """Merge defaults, config file and flags (flags win) into a RunConfig."""
    parser = parser or build_parser()
    ns = vars(parser.parse_args(argv))
    cmd = ns.pop("command")
    allowed = set(PER_COMMAND[cmd]) | set(COMMON)
    raw, sources = {}, {}
    if "config" in ns:
        cfg_path = ns.pop("config")
        try:
            from_file = _read_config_file(cfg_path)
        except (OSError, configparser.Error) as exc:
            raise UsageError(f"cannot read config file {cfg_path}: {exc}") from exc
        for key, value in from_file.items():
            if key not in allowed:
                raise UsageError(f"unknown key {key!r} in {cfg_path} for command {cmd!r}")
            raw[key], sources[key] = value, "file"
    for key, value in ns.items():
        if sources.get(key) == "file" and str(raw[key]) != str(value):
            log.warning("flag %s=%s overrides config value %s", _flag(key), value, raw[key])
        raw[key], sources[key] = value, "flag"

    values = {}
    for key in allowed:
        typ, default, _ = COMMON.get(key) or OPTIONS[key]
        if key in raw:
            try:
                values[key] = typ(raw[key]) if isinstance(raw[key], str) else raw[key]
            except ValueError as exc:
                raise UsageError(f"invalid value for {_flag(key)}: {raw[key]!r} ({exc})") from exc
        else:
            values[key] = default
    for key in REQUIRED[cmd]:
        if values.get(key) is None:
            raise UsageError(f"the following argument is required: {_flag(key)}")
    if values["jobs"] is None:
        values["jobs"] = int(os.environ.get("ASLB_JOBS", "1"))
    common = {k: values.pop(k) for k in COMMON}
    cfg = RunConfig(cmd, values, common["out"], common["seed"], common["precision"],
                    common["jobs"], sources)
    validate(cfg)
    return cfg


def validate(cfg: RunConfig):
    p = cfg.params
    if cfg.precision not in ("double", "extended"):
        raise UsageError("--precision must be 'double' or 'extended'")
    if cfg.jobs < 1:
        raise UsageError("--jobs must be at least 1")
    if p.get("family") is not None and p["family"] not in ("weierstrass", "takagi", "zigzag"):
        raise UsageError(f"unknown --family {p['family']!r}")
    if p.get("family") in ("weierstrass", "takagi"):
        for k in ("a", "b"):
            if p.get(k) is None:
                raise UsageError(f"the following argument is required: --{k}")
    for key in ("theta", "theta0"):
        if p.get(key) is not None and not 0 < p[key] < 1:
            raise UsageError(f"{_flag(key)} must lie in (0, 1), got {p[key]}")
    for theta in p.get("theta_grid") or []:
        if not 0 < theta < 1:
            raise UsageError(f"--theta-grid values must lie in (0, 1), got {theta}")
    if "theta_grid" in p and p["theta_grid"] is not None and not p["theta_grid"]:
        raise UsageError("--theta-grid is empty")
    if p.get("K") is not None and p["K"] < 1:
        raise UsageError(f"--K must be at least 1, got {p['K']}")
    if p.get("samples") is not None and p["samples"] < 16:
        raise UsageError("--samples must be at least 16")
    if p.get("estimator") is not None and p["estimator"] not in ("regression", "max"):
        raise UsageError("--estimator must be 'regression' or 'max'")
    if p.get("variant") is not None and p["variant"] not in packing.VARIANTS:
        raise UsageError(f"unknown --variant {p['variant']!r}")
    if p.get("centers") is not None and p["centers"] < 1:
        raise UsageError("--centers must be positive")


# -- pipelines ------------------------------------------------------------------

def _spec(p, fold=False):
    fam = p["family"]
    if fam == "zigzag":
        return funcspace.ZigzagSpec(s=p["s"], variant=p["variant"], m_max=p["m_max"])
    tol = p.get("truncation_tol") or (1e-15 if fold else 1e-12)
    cls = funcspace.WeierstrassSpec if fam == "weierstrass" else funcspace.TakagiSpec
    return cls(p["a"], p["b"], truncation_tol=tol)


def _sample(p, fold=False):
    spec = _spec(p, fold)
    if isinstance(spec, funcspace.ZigzagSpec):
        gen = funcspace.build_zigzag(spec)
        lo, hi = gen.domain
        gen.describe = spec.describe
    else:
        gen, lo, hi = spec, 0.0, 1.0
    lo = lo if p.get("lo") is None else p["lo"]
    hi = hi if p.get("hi") is None else p["hi"]
    return spec, funcspace.sample_function(gen, lo, hi, p["samples"])


def _regularity(spec):
    if isinstance(spec, funcspace.ZigzagSpec):
        return covering.Sobolev(spec.s - 1)
    return covering.Holder(spec.alpha)


def _centers(p, f, seed):
    if p.get("center_list"):
        return list(p["center_list"])
    rng = np.random.default_rng(seed)
    span = f.hi - f.lo
    return rng.uniform(f.lo + 0.05 * span, f.hi - 0.05 * span, p["centers"]).tolist()


class Output:
    def __init__(self, out):
        self.dir = Path(out)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.files = []

    def json(self, name, obj):
        self.files.append(serialize.write_json(self.dir / name, obj))

    def csv(self, name, header, rows, meta=None):
        self.files.append(serialize.write_csv(self.dir / name, header, rows, meta))

    def binary(self, name, f):
        self.files.append(serialize.write_binary(f, self.dir / name))


def run_generate(cfg, out):
    spec, f = _sample(cfg.params)
    out.files.append(serialize.sampled_to_csv(f, out.dir / "points.csv"))
    out.binary("samples.aslb", f)
    out.json("report.json", {"function": f.meta, "n": f.n, "step": f.step,
                             "min": float(f.values.min()), "max": float(f.values.max())})
    return True


def run_boxdim(cfg, out):
    spec, f = _sample(cfg.params)
    ladder = cfg.params["r_ladder"] or [2.0 ** -k for k in range(6, 15)]
    est, fit = covering.box_dimension(f, ladder)
    reg = _regularity(spec)
    bound = 2 - reg.alpha if isinstance(reg, covering.Holder) else 1.0
    rows = [(math.exp(-x), int(round(math.exp(y))), est, bound) for x, y in zip(fit.x, fit.y)]
    out.csv("curves.csv", ["r", "count", "estimate", "bound"], rows)
    out.json("report.json", {"function": f.meta, "estimate": est, "bound": bound,
                             "fit": fit.to_dict()})
    return True


def _spectrum_setup(p, f, seed):
    centers = _centers(p, f, seed)

    def ladders(theta):
        return covering.resolution_ladders(f, theta, p["ladder_lambdas"], p["ladder_steps"])
    return centers, ladders


def run_spectrum(cfg, out):
    p = cfg.params
    spec, f = _sample(p)
    reg = _regularity(spec)
    centers, ladders = _spectrum_setup(p, f, cfg.seed)
    rows, points = [], []
    for theta in p["theta_grid"]:
        pts = [covering.spectrum_at_theta(f, theta, lad, centers, cfg.jobs)
               for lad in ladders(theta)]
        best = max(pts, key=lambda q: q.exponent)
        reg_exp = max(q.regression_exponent for q in pts)
        bound = min(reg.bound(theta), 2.0)
        rows.append((theta, best.exponent, reg_exp, bound))
        points.append(best)
    out.csv("curves.csv", ["theta", "exponent", "regression_exponent", "bound"], rows)
    out.json("report.json", {"function": f.meta, "centers": centers,
                             "curve": covering.SpectrumCurve(points).to_dict(),
                             "bounds": [r[3] for r in rows]})
    return True


def run_audit_upper(cfg, out):
    p = cfg.params
    spec, f = _sample(p)
    reg = _regularity(spec)
    centers, ladders = _spectrum_setup(p, f, cfg.seed)
    report = covering.audit_upper_bound(f, reg, p["theta_grid"], ladders, centers,
                                        p["estimator"], p["tol"], cfg.jobs)
    out.csv("curves.csv", ["theta", "exponent", "regression_exponent", "bound", "violation"],
            [(r.theta, r.exponent, r.regression_exponent, r.bound, r.violation)
             for r in report.rows])
    out.json("report.json", {"function": f.meta, "centers": centers, "audit": report.to_dict()})
    return report.passed


def _fold(cfg):
    p = cfg.params
    spec, f = _sample(p, fold=True)
    if isinstance(spec, funcspace.ZigzagSpec):
        raise UsageError("folding needs a Hölder family (weierstrass or takagi)")
    if p["C"] is not None and p["c"] is not None:
        witness = funcspace.HolderWitness(spec.alpha, p["C"], p["c"], p["r0"])
    else:
        witness = funcspace.measure_holder_witness(spec, spec.alpha, f.lo, f.hi, p["r0"],
                                                   seed=cfg.seed)
    ff = folding.run_folding(f, witness, p["theta0"], p["K"], cfg.precision, seed=cfg.seed)
    return f, witness, ff


def _write_fold(out, ff, witness):
    rows = []
    for idx, (sq, patch) in enumerate(zip(ff.plan.squares, ff.patches)):
        u = np.linspace(0.0, 1.0, len(patch))
        x = sq.x0 + (sq.x1 - sq.x0) * u
        rows.extend((idx, xi, yi) for xi, yi in zip(x.tolist(), np.asarray(patch).tolist()))
    out.csv("points.csv", ["square", "x", "y"], rows)
    out.binary("folded.aslb", ff.sampled())
    return {"witness": witness, "fold": ff.to_dict()}


def run_fold(cfg, out):
    _, witness, ff = _fold(cfg)
    out.json("report.json", _write_fold(out, ff, witness))
    return True


def run_verify_fold(cfg, out):
    p = cfg.params
    _, witness, ff = _fold(cfg)
    body = _write_fold(out, ff, witness)
    rep = folding.verify_fold(ff, witness, p["theta_grid"], n_pairs=p["pairs"], seed=cfg.seed)
    rows = []
    for c in rep.checks:
        d = c.detail
        value = d.get("max_ratio", d.get("min_osc", d.get("count")))
        bound = d.get("limit", d.get("required"))
        rows.append((c.name, d.get("theta", ""), d.get("square", ""),
                     "" if value is None else value, "" if bound is None else bound, c.passed))
    out.csv("curves.csv", ["check", "theta", "square", "value", "bound", "passed"], rows)
    body["verification"] = rep.to_dict()
    out.json("report.json", body)
    return rep.passed


def run_coholder(cfg, out):
    p = cfg.params
    _, f = _sample(p)
    if p["squares"]:
        try:
            squares = [tuple(float(v) for v in item.split(":")) for item in p["squares"].split(",")]
        except ValueError as exc:
            raise UsageError(f"bad --squares {p['squares']!r}") from exc
        if any(len(sq) != 2 for sq in squares):
            raise UsageError("--squares entries must be x:R")
    else:
        squares = coholder.propose_squares(f, p["radii"] or [1e-2, 1e-3, 1e-4])
    res = coholder.certificate_search(f, p["alpha"], p["eta"], p["epsilon"], squares,
                                      J_count=p["J_count"])
    ok = isinstance(res, coholder.CoHolderCertificate)
    theta0 = coholder.theta0_of(p["alpha"], p["eta"], p["epsilon"])
    grid = [theta0 * k / 10 for k in range(1, 11)]
    rows = [(th, coholder.lower_spectrum_bound(res, th), min(covering.Holder(p["alpha"]).bound(th), 2.0))
            for th in grid]
    out.csv("curves.csv", ["theta", "lower_bound", "holder_upper_bound"], rows)
    out.json("report.json", {"function": f.meta, "squares": squares,
                             "kind": "certificate" if ok else "deviation", "result": res.to_dict()})
    return ok


def run_pack(cfg, out):
    p = cfg.params
    ns = sorted(set(p["n"]))
    audits, rows, pts = [], [], []
    for n in ns:
        ps = packing.build_packing(p["s"], p["theta"], n, p["c0"], p["variant"])
        au = packing.verify_packing(ps)
        audits.append({"params": ps.params(), "audit": au.to_dict()})
        rows.append((n, au.cardinality, au.min_pairwise_distance, ps.r_n,
                     au.empirical_gamma, au.target_gamma))
        pts.extend((n,) + r for r in ps.rows())
    out.csv("points.csv", ["n", "m", "k", "x", "y"], pts)
    out.csv("curves.csv", ["n", "cardinality", "min_distance", "r_n", "empirical_gamma",
                           "target_gamma"], rows)
    out.json("report.json", {"packings": audits})
    return all(a["audit"]["passed"] for a in audits)


def run_energy(cfg, out):
    p = cfg.params
    z = funcspace.ZigzagSpec(s=p["s"], variant=p["variant"], m_max=p["m_max"])
    rows, results = [], {}
    for q in p["q"]:
        res = funcspace.p_energy(z, q)
        pick = np.unique(np.geomspace(1, len(res.m), 256).astype(int)) - 1
        rows.extend((q, int(res.m[i]), float(res.partial_sums[i]), res.verdict) for i in pick)
        results[repr(q)] = {"verdict": res.verdict, "tail_exponent": res.tail_exponent,
                            "log_exponent": res.log_exponent,
                            "partial_sum": float(res.partial_sums[-1])}
    out.csv("curves.csv", ["q", "m", "partial_sum", "verdict"], rows)
    out.json("report.json", {"zigzag": z.describe(), "energies": results})
    return True


def run_bv_check(cfg, out):
    p = cfg.params
    rng = np.random.default_rng(cfg.seed)
    n = min(p["samples"], 4097)
    rows, ok = [], True
    for i in range(p["staircases"]):
        f = funcspace.random_staircase(rng, n)
        slope, passed = covering.rotate_monotone_check(f)
        rows.append((i, slope, 1 + 1e-9, passed))
        ok &= passed
    g = funcspace.sample_function(lambda t: np.cumsum(rng.normal(size=t.shape)) / np.sqrt(n),
                                  0.0, 1.0, n)
    h = funcspace.sample_function(lambda t: np.sin(40 * t) + rng.normal(size=t.shape) * 0.1,
                                  0.0, 1.0, n)
    sum_ok = covering.graph_sum_osc_check(g, h, p["trials"], seed=cfg.seed)
    out.csv("curves.csv", ["staircase", "max_slope", "bound", "passed"], rows)
    out.json("report.json", {"rotation": {"staircases": p["staircases"], "passed": ok,
                                          "max_slope": max(r[1] for r in rows)},
                             "graph_sum": {"trials": p["trials"], "passed": sum_ok}})
    return ok and sum_ok


PIPELINES = {"generate": run_generate, "boxdim": run_boxdim, "spectrum": run_spectrum,
             "audit-upper": run_audit_upper, "fold": run_fold, "verify-fold": run_verify_fold,
             "coholder": run_coholder, "pack": run_pack, "energy": run_energy,
             "bv-check": run_bv_check}


def _sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def dispatch(cfg: RunConfig) -> int:
    out = Output(cfg.out)
    start = time.perf_counter()
    try:
        passed = PIPELINES[cfg.command](cfg, out)
    except AuditFailure as exc:
        log.error("%s: %s", cfg.command, exc)
        passed = False
    status = 0 if passed else 1
    record = {"config": cfg.snapshot(), "version": __version__,
              "wall_time_s": round(time.perf_counter() - start, 3),
              "files": {p.name: _sha256(p) for p in out.files},
              "summary": {"passed": bool(passed), "exit_code": status}}
    serialize.write_json(out.dir / "run_record.json", record)
    return status


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        cfg = parse_config(argv, parser)
    except SystemExit as exc:
        return int(exc.code or 0)
    except UsageError as exc:
        print(f"aslb: error: {exc}", file=sys.stderr)
        return 2
    try:
        return dispatch(cfg)
    except (UsageError, AssouadError, ValueError) as exc:
        print(f"aslb {cfg.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
