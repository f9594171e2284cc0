"""Command line entry point: ``jacobi3 <command> --config FILE [flags]``.

Exit codes: 0 every check passed, 1 a check failed or the structure is
mathematically unusable (degenerate input, wrong kind, ...), 2 the
configuration or a flag could not be parsed.

Reports are plain ``key: value`` lines. Apart from the final wall-time
line they depend only on the config file and the flags.
"""

from __future__ import annotations

import argparse
import re
import sys
import time

import numpy as np

from . import casimir as cas
from . import contactform, hamflow, structures
from .config import ConfigError, StructureConfig, build_structure, load_config
from .errors import ExprSyntaxError, JacobiError
from .sampling import random_polynomial, uniform_box
from .vfield import ScalarField, scalar

COMMANDS = ("verify", "bracket", "flow", "casimir", "contact", "classify", "poissonize", "conformal")


def fmt(v) -> str:
    return "%.17g" % float(v)


class Report:
    def __init__(self, command: str, argv, cfg: StructureConfig):
        self.lines = [f"command: jacobi3 {' '.join(argv)}",
                      f"config_sha256: {cfg.sha256}",
                      f"kind: {cfg.kind}"]
        self.ok = True

    def add(self, key, value):
        if isinstance(value, (float, np.floating)):
            value = fmt(value)
        self.lines.append(f"{key}: {value}")

    def summary(self, key, s: structures.Summary):
        self.add(f"{key}.max_abs", s.max_abs)
        self.add(f"{key}.mean_abs", s.mean_abs)
        self.add(f"{key}.points", s.points_checked)

    def check(self, name, value, tol) -> bool:
        passed = bool(value <= tol)
        self.ok &= passed
        self.lines.append(f"check {name}: {fmt(value)} <= {fmt(tol)} {'PASS' if passed else 'FAIL'}")
        return passed

    def fail(self, why: str):
        self.ok = False
        self.lines.append(f"failure: {why}")

    def render(self, started: float) -> str:
        tail = [f"verdict: {'PASS' if self.ok else 'FAIL'}",
                f"wall_time_s: {time.perf_counter() - started:.3f}"]
        return "\n".join(self.lines + tail) + "\n"


def _seed(cfg, k: int) -> int:
    return (cfg.seed + k) % 2**64


def _point(text: str) -> tuple:
    try:
        vals = tuple(float(v) for v in text.split(","))
    except ValueError:
        vals = ()
    if len(vals) != 3:
        raise ConfigError(f"expected a point as x,y,z, got {text!r}")
    return vals


def _points(args, cfg, default_n: int) -> np.ndarray:
    if args.point:
        return np.array([_point(p) for p in args.point])
    return cfg.domain.points(default_n)


def _field(text: str, what: str) -> ScalarField:
    try:
        return scalar(text)
    except ExprSyntaxError as exc:
        raise ConfigError(f"{what}: {exc}") from exc


# ---------------------------------------------------------------------------
# commands


def cmd_verify(args, cfg, rep: Report):
    J = build_structure(cfg)
    res = structures.verify(J, cfg.domain.points())
    rep.add("r1.max_abs", float(np.max(np.abs(res.r1))))
    rep.add("r1.mean_abs", float(np.mean(np.abs(res.r1))))
    rep.add("r2.max_abs", float(np.max(np.abs(res.r2))))
    rep.summary("residual", res.summary)
    rep.check("residual_scaled", res.max_scaled, cfg.tol("residual"))
    rng = np.random.default_rng(cfg.seed)
    pts = cfg.domain.points(200, _seed(cfg, 1))
    for i in range(3):
        f, g, h = (random_polynomial(rng) for _ in range(3))
        jac = structures.jacobi_identity_residual(J, f, g, h, pts)
        rep.check(f"jacobi_identity[{i}]", jac.max_abs, cfg.tol("jacobi"))
        fo = structures.first_order_rule_residual(J, f, g, h, pts)
        rep.check(f"first_order_rule[{i}]", fo.max_abs, cfg.tol("first_order"))


def cmd_bracket(args, cfg, rep: Report):
    J = build_structure(cfg)
    f, g = _field(args.f, "--f"), _field(args.g, "--g")
    b = structures.bracket(J, f, g)
    rep.add("bracket", b)
    pts = _points(args, cfg, 10)
    rep.add("columns", "x y z value")
    for p, val in zip(pts, b(pts)):
        rep.add("row", " ".join(fmt(c) for c in (*p, val)))


def _casimir_field(args, J):
    if args.transversal is None:
        return None
    tr = cas.Transversal(args.transversal, args.side)
    return cas.casimir(J, args.gamma_bar, tr, args.arc_budget)


def cmd_flow(args, cfg, rep: Report):
    J = build_structure(cfg)
    H = _field(args.H, "--H")
    C = _casimir_field(args, J) if isinstance(J.kind, structures.Rank2) else None
    traj = hamflow.integrate(J, H, _point(args.x0), args.t_end, n_out=args.n_out,
                             casimir=C, convention=args.convention)
    if args.out:
        traj.to_csv(args.out)
        rep.add("csv", args.out)
    rep.add("steps", traj.steps)
    rep.add("rejected", traj.rejected)
    rep.add("final", " ".join(fmt(c) for c in traj.final))
    drift = hamflow.conservation_report(traj)
    for name in sorted(drift):
        rep.add(f"drift.{name}", drift[name])
    if "psi" in drift:
        rep.check("psi_conserved", drift["psi"], cfg.tol("conservation"))
    if "casimir" in drift:
        rep.check("casimir_conserved", drift["casimir"], cfg.tol("casimir_drift"))
    if isinstance(J.kind, structures.Poisson):
        rep.check("H_conserved", drift["H"], cfg.tol("conservation"))
    if args.n_out and args.n_out % 2 == 0:
        eb = hamflow.energy_balance(traj, J, H)
        rep.check("energy_balance", eb.max_discrepancy, cfg.tol("energy"))
    if not isinstance(J.kind, structures.Custom):
        dv = hamflow.divergence_check(J, H, traj.states, args.convention)
        rep.check("div_vH_formula", dv.max_abs, cfg.tol("divergence"))


def cmd_casimir(args, cfg, rep: Report):
    J = build_structure(cfg)
    tr = cas.Transversal(args.transversal, args.side)
    C = cas.casimir(J, args.gamma_bar, tr, args.arc_budget)
    rep.add("gamma_bar", C.gamma_bar)
    rep.add("transversal", tr)
    pts = _points(args, cfg, 10)
    rep.add("columns", "x y z C")
    for p, c in zip(pts, C(pts)):
        rep.add("row", " ".join(fmt(v) for v in (*p, c)))
    res = cas.casimir_residual(J, C, pts)
    rep.check("grad_C_cross_A_minus_CE", res.cross.max_abs, cfg.tol("casimir"))
    rep.check("E_of_C", res.reeb.max_abs, cfg.tol("casimir"))


def cmd_contact(args, cfg, rep: Report):
    J = build_structure(cfg)
    theta = contactform.contact_form(J)
    rep.add("theta", theta.coefficients)
    r = contactform.check(J, cfg.domain.points())
    tol = cfg.tol("contact")
    rep.check("i_E_theta_minus_1", r.reeb.max_abs, tol)
    rep.check("theta_dtheta_minus_inv_h_rel", r.volume.max_abs, tol)
    rep.check("i_theta_Lambda", r.interior.max_abs, tol)
    rep.check("A_dot_E_minus_h_rel", r.lambda_e.max_abs, tol)


def cmd_classify(args, cfg, rep: Report):
    J = build_structure(cfg, check_domain=False)
    pts = np.vstack([cfg.domain.points(), cfg.domain.vertices()])
    rank = structures.classify_rank(J, pts)
    rep.add("rank", rank.value)
    rep.add("points", len(pts))
    if args.expect is not None and rank.value != args.expect:
        rep.fail(f"expected {args.expect}, got {rank.value}")


def cmd_poissonize(args, cfg, rep: Report):
    J = build_structure(cfg)
    P = structures.poissonize(J)
    lo = cfg.domain.lo + (-args.t_range,)
    hi = cfg.domain.hi + (args.t_range,)
    pts4 = uniform_box(lo, hi, args.n_points, _seed(cfg, 2))
    s = P.residual(pts4)
    rep.summary("residual4", s)
    rep.check("poisson4", s.max_abs, cfg.tol("poisson4"))


def _lambda_text(text: str, cfg) -> str:
    if re.search(r"\bmu\b", text):
        if "mu" not in cfg.fields:
            raise ConfigError(f"--lambda uses mu but a {cfg.kind} config has no mu")
        text = re.sub(r"\bmu\b", f"({cfg.fields['mu']})", text)
    return text


def cmd_conformal(args, cfg, rep: Report):
    J = build_structure(cfg)
    lam = _field(_lambda_text(args.lam, cfg), "--lambda")
    Jc = structures.conformal(J, lam, cfg.domain)
    rep.add("lambda", lam)
    rep.add("A_tilde", Jc.A)
    rep.add("E_tilde", Jc.E)
    res = structures.verify(Jc, cfg.domain.points())
    rep.summary("residual", res.summary)
    rep.check("residual_scaled", res.max_scaled, cfg.tol("residual"))


HANDLERS = {
    "verify": cmd_verify, "bracket": cmd_bracket, "flow": cmd_flow, "casimir": cmd_casimir,
    "contact": cmd_contact, "classify": cmd_classify, "poissonize": cmd_poissonize,
    "conformal": cmd_conformal,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="jacobi3", description="Jacobi structures on R^3")
    sub = p.add_subparsers(dest="command", required=True)
    cmds = {name: sub.add_parser(name) for name in COMMANDS}
    for sp in cmds.values():
        sp.add_argument("--config", required=True, help="JSON structure config")
    for name in ("bracket", "casimir"):
        cmds[name].add_argument("--point", action="append", help="x,y,z (repeatable); default: domain samples")
    cmds["bracket"].add_argument("--f", required=True)
    cmds["bracket"].add_argument("--g", required=True)

    fl = cmds["flow"]
    fl.add_argument("--H", default="1", help="Hamiltonian (default 1)")
    fl.add_argument("--x0", required=True, help="start point x,y,z")
    fl.add_argument("--t-end", type=float, required=True)
    fl.add_argument("--n-out", type=int, default=200, help="output intervals")
    fl.add_argument("--out", help="CSV path")
    fl.add_argument("--convention", choices=hamflow.CONVENTIONS, default="sharp")
    for sp, required in ((fl, False), (cmds["casimir"], True)):
        sp.add_argument("--transversal", required=required, help="curve(u, v) = 0 in the leaf plane")
        sp.add_argument("--side", help="keep only the part where side(u, v) > 0")
        sp.add_argument("--gamma-bar", default="0", help="value of Γ on the transversal, one variable")
        sp.add_argument("--arc-budget", type=float, default=50.0)

    cmds["classify"].add_argument("--expect", choices=[r.value for r in structures.Rank])
    cmds["poissonize"].add_argument("--n-points", type=int, default=500)
    cmds["poissonize"].add_argument("--t-range", type=float, default=1.0)
    cmds["conformal"].add_argument("--lambda", dest="lam", required=True,
                                   help="conformal factor over x, y, z; 'mu' refers to the config's mu")
    return p


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    started = time.perf_counter()
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        rep = Report(args.command, argv, cfg)
        HANDLERS[args.command](args, cfg, rep)
    except (ConfigError, ExprSyntaxError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except JacobiError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    sys.stdout.write(rep.render(started))
    return 0 if rep.ok else 1


if __name__ == "__main__":
    sys.exit(main())
