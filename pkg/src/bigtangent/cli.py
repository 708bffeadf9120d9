"""Command line front end: scene checking, object evaluation, version.

Exit code contract: 0 all identities pass, 1 at least one identity
fails, 2 input error (bad scene, unknown object, bad point).  Reports
are emitted as JSON and are byte-identical across runs for the same
scene, seed, and flags; point evaluation inside each suite is batched
over numpy arrays, report assembly is sequential and ordered.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import __version__, bigcore, conns, dfield, fields, gstruct, horizon
from . import metrics, scene as scene_mod, tensorcalc as tc
from .points import ChartPoint, sample_box
from .report import Report
from .scene import SceneError, SceneFile, load_scene


# -- suite runners ---------------------------------------------------------
def _suite_canonical(sc: SceneFile, seed, samples, tol) -> list:
    return [
        bigcore.verify_section2(
            sc.m, seed, samples, tol=tol, perturb_S=sc.perturb_s
        )
    ]


def _suite_triple(sc: SceneFile, seed, samples, tol) -> list:
    m = sc.m
    T = gstruct.triple_from_pack(bigcore.canonical_pack(m))
    p = sample_box(m, samples, seed=seed)
    rep = gstruct.triple_axiom_check(T, p, tol=tol)
    Delta = [tc.basis_vector(2 * m + i, m) for i in range(m)]
    rep.extend(gstruct.integrability_check(T, p, Delta=Delta, tol=tol, seed=seed))
    worst = 0.0
    for k in range(min(samples, 10)):
        fr = gstruct.adapted_frame(T, p.select(k))
        worst = max(worst, max(gstruct.frame_residuals(T, fr).values()))
    rep.add("adapted frame reconstructs the canonical pair", worst)
    return [rep]


def _suite_horizontal(sc: SceneFile, seed, samples, tol) -> list:
    rep = conns.verify_section4(
        sc.bundle, sc.big_metric.tensor, seed=seed, n=samples, tol=tol
    )
    if sc.spray is not None:
        p = sample_box(sc.m, samples, seed=seed)
        rep.add(
            "spray satisfies the Lagrangian field equation",
            horizon.lagrangian_spray_residual(sc.lagrangian, sc.spray, p),
        )
        Q, _ = horizon.second_order_projector(sc.spray)
        Qv = np.moveaxis(Q.value(p), -1, 0)
        rep.add(
            "second-order projector satisfies Q^3 = Q",
            float(np.max(np.abs(Qv @ Qv @ Qv - Qv))),
            tol=1e-10,
        )
    return [rep]


def _suite_metric(sc: SceneFile, seed, samples, tol) -> list:
    reports = []
    _, rep = metrics.canonical_metric_connection(
        sc.big_metric, seed=seed, n=samples, tol=tol
    )
    rep.extend(
        metrics.curvature_identity_suite(
            sc.big_metric, seed=seed, n=samples, tol=max(tol, 1e-7)
        )
    )
    reports.append(rep)
    if sc.lagrangian_metric is not None:
        _, lrep = metrics.canonical_metric_connection(
            sc.lagrangian_metric, seed=seed, n=samples, tol=tol
        )
        lrep.extend(
            metrics.curvature_identity_suite(
                sc.lagrangian_metric, seed=seed, n=samples, tol=max(tol, 1e-7)
            )
        )
        lrep.title = "lagrangian metric identities"
        reports.append(lrep)
    return reports


def _suite_double(sc: SceneFile, seed, samples, tol) -> list:
    F = sc.double_field
    rep = dfield.verify_double_field(F, seed=seed, n=samples, tol=tol)
    gauss = dfield.action(F, box=sc.box, method="gauss", order=4)
    mc = dfield.action(F, box=sc.box, method="mc", samples=sc.mc_samples, seed=seed)
    rep.meta["action_value"] = gauss.value
    rep.meta["action_quadrature_error"] = gauss.error
    rep.meta["action_mc_value"] = mc.value
    rep.meta["action_mc_stderr"] = mc.error
    rep.add_bool(
        "action values are finite",
        bool(np.isfinite([gauss.value, gauss.error, mc.value, mc.error]).all()),
    )
    rep.add_bool(
        "monte carlo action is within four standard errors of the quadrature",
        abs(mc.value - gauss.value) <= 4.0 * mc.error + gauss.error + 1e-12,
    )
    return [rep]


_SUITES = {
    "canonical": _suite_canonical,
    "triple": _suite_triple,
    "horizontal": _suite_horizontal,
    "metric": _suite_metric,
    "double": _suite_double,
}


def run_suites(
    sc: SceneFile,
    which=None,
    seed: int | None = None,
    samples: int | None = None,
    tol: float | None = None,
) -> tuple[int, dict]:
    """Run the selected verification suites; return (exit code, report).

    ``which`` defaults to the scene's suite selection; seed, samples,
    and tol override the scene's values when given.
    """
    which = list(which) if which else list(sc.suites)
    for name in which:
        if name not in _SUITES:
            raise SceneError(f"unknown suite {name!r}")
    seed = sc.seed if seed is None else seed
    samples = sc.samples if samples is None else samples
    out = {
        "tool": "bigtangent",
        "version": __version__,
        "scene": sc.path,
        "m": sc.m,
        "seed": seed,
        "samples": samples,
        "suites": [],
    }
    all_pass = True
    for name in which:
        reports = _SUITES[name](sc, seed, samples, sc.suite_tol(name, tol))
        ok = all(r.passed for r in reports)
        all_pass &= ok
        out["suites"].append(
            {"suite": name, "pass": ok, "reports": [r.as_dict() for r in reports]}
        )
    out["pass"] = all_pass
    return (0 if all_pass else 1), out


# -- point evaluation ------------------------------------------------------
def parse_point(text: str, m: int) -> ChartPoint:
    """Parse "x=a,b;y=c,d;z=e,f" into a one-point batch."""
    blocks = {"x": None, "y": None, "z": None}
    for part in text.split(";"):
        part = part.strip()
        if not part:
            continue
        if "=" not in part:
            raise SceneError(f"bad point component {part!r}")
        key, _, vals = part.partition("=")
        key = key.strip()
        if key not in blocks:
            raise SceneError(f"unknown coordinate block {key!r}")
        try:
            arr = np.array([float(v) for v in vals.split(",")], dtype=float)
        except ValueError as exc:
            raise SceneError(f"bad number in {part!r}: {exc}") from exc
        if arr.shape != (m,):
            raise SceneError(f"{key} needs {m} values, got {arr.size}")
        blocks[key] = arr
    for key, arr in blocks.items():
        if arr is None:
            blocks[key] = np.zeros(m)
    return ChartPoint(
        blocks["x"][:, None], blocks["y"][:, None], blocks["z"][:, None]
    )


def _object_registry(sc: SceneFile) -> dict:
    """Name -> components table (object ndarray of ScalarFields)."""
    pack = bigcore.canonical_pack(sc.m)
    reg = {
        "S": pack.S.comps,
        "P": pack.P.comps,
        "Q": pack.Q.comps,
        "U": pack.U.comps,
        "lambda": pack.lam.comps,
        "g_V": pack.g_V.comps,
        "omega_V": pack.omega_V.comps,
        "H.t": sc.bundle.t,
        "H.tau": sc.bundle.tau,
        "metric.tensor": sc.big_metric.tensor.comps,
        "dfield.sigma": sc.double_field.sigma,
        "dfield.psi": sc.double_field.psi,
        "dfield.density": np.array([sc.double_field.density], dtype=object),
    }
    if sc.spray is not None:
        reg["spray.eta"] = sc.spray.eta
        reg["spray.zeta"] = sc.spray.zeta
    for name, comps in sc.vector_fields.items():
        reg[name] = comps
    return reg


def eval_object(sc: SceneFile, name: str, point: ChartPoint) -> dict:
    """Evaluate a named object of the scene at one chart point."""
    if name == "dfield.rho":
        nabla, _, pack = dfield.field_adapted_connection(sc.double_field)
        _, _, rho = dfield.deformed_curvatures(nabla, pack)
        comps = np.array([rho], dtype=object)
    else:
        reg = _object_registry(sc)
        if name not in reg:
            known = ", ".join(sorted(reg) + ["dfield.rho"])
            raise SceneError(f"unknown object {name!r} (known: {known})")
        comps = reg[name]
    vals = fields.fvalue(np.asarray(comps, dtype=object), point)[..., 0]
    return {
        "object": name,
        "frame": "natural",
        "shape": list(vals.shape),
        "components": vals.tolist(),
    }


# -- entry point -----------------------------------------------------------
def _emit(payload: dict, json_path: str | None):
    text = json.dumps(payload, indent=2, sort_keys=False) + "\n"
    sys.stdout.write(text)
    if json_path:
        with open(json_path, "w") as fh:
            fh.write(text)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        prog="bigtangent",
        description="Verify big-tangent geometry identities from scene files.",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p_check = sub.add_parser("check", help="run verification suites on a scene")
    p_check.add_argument("scene")
    p_check.add_argument("--suite", action="append", default=None)
    p_check.add_argument("--seed", type=int, default=None)
    p_check.add_argument("--samples", type=int, default=None)
    p_check.add_argument("--tol", type=float, default=None)
    p_check.add_argument("--json", dest="json_path", default=None)

    p_eval = sub.add_parser("eval", help="evaluate a named object at a point")
    p_eval.add_argument("scene")
    p_eval.add_argument("--object", required=True)
    p_eval.add_argument("--point", required=True)
    p_eval.add_argument("--json", dest="json_path", default=None)

    sub.add_parser("version", help="print the package version")

    args = ap.parse_args(argv)
    if args.command == "version":
        print(__version__)
        return 0
    try:
        sc = load_scene(args.scene)
        if args.command == "check":
            code, payload = run_suites(
                sc,
                which=args.suite,
                seed=args.seed,
                samples=args.samples,
                tol=args.tol,
            )
            _emit(payload, args.json_path)
            return code
        point = parse_point(args.point, sc.m)
        _emit(eval_object(sc, args.object, point), args.json_path)
        return 0
    except (SceneError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
