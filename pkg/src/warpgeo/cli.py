"""Manifest-driven command line: eval, audit, presets.

Manifests are TOML: chart tables with string-valued expressions, a warping
expression, a connection table (preset id + free parameters, or full custom
data) and audit settings. The exact schema is documented in the README with
committed examples under manifests/.

Exit status: 0 all requested checks pass, 1 any check fails,
2 configuration or expression error.
"""

from __future__ import annotations

import argparse
import json
import sys

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .audit import (
    AuditConfigError,
    AuditReport,
    Placement,
    assemble_block_phi,
    expand_checks,
    run_audit,
    sample_points,
)
from .expr import ExprError, parse
from .geometry import (
    ChartMetric,
    GeometryError,
    Tensor11Field,
    VectorField,
    christoffel_at,
    metric_at,
    nonmetricity_at,
    torsion_at,
)
from .tripathi import (
    PRESET_CATALOG,
    PresetId,
    TripathiData,
    coefficients,
    coefficients_at,
    nonmetricity_claimed_at,
    preset,
    torsion_claimed_at,
)
from .warped import WarpedProduct, build_warped, lift_field

__all__ = ["ManifestError", "Scenario", "load_manifest", "report_to_json", "main"]


class ManifestError(ValueError):
    """Schema or expression error in a scenario manifest; names the field."""


@dataclass
class Scenario:
    wp: WarpedProduct
    data: TripathiData
    placement: Placement | None
    preset_id: PresetId | None  # None for fully custom data
    checks: list[str]
    box: list[tuple[float, float]]
    samples: int
    seed: int
    tolerance: float
    path: str


def _require(table: dict, key: str, where: str):
    if key not in table:
        raise ManifestError(f"manifest field [{where}].{key} is missing")
    return table[key]


def _section(doc: dict, name: str):
    if name not in doc:
        raise ManifestError(f"manifest section [{name}] is missing")
    return doc[name]


def _chart(table: dict, where: str) -> tuple[ChartMetric, list[tuple[float, float]]]:
    names = _require(table, "names", where)
    metric = _require(table, "metric", where)
    box = _require(table, "box", where)
    if not isinstance(names, list) or not all(isinstance(n, str) for n in names):
        raise ManifestError(f"[{where}].names must be a list of coordinate names")
    try:
        chart = ChartMetric.from_rows(names, metric)
    except (ExprError, GeometryError) as err:
        raise ManifestError(f"[{where}].metric: {err}") from None
    if (
        not isinstance(box, list)
        or len(box) != len(names)
        or any(len(iv) != 2 for iv in box)
    ):
        raise ManifestError(
            f"[{where}].box must give one [low, high] interval per coordinate"
        )
    return chart, [(float(lo), float(hi)) for lo, hi in box]


def _factor_exprs(wp: WarpedProduct, placement: Placement | None, where: str):
    if placement is None:
        raise ManifestError(
            f"[{where}].placement is required to interpret connection parameters"
        )
    factor = wp.base if placement is Placement.HORIZONTAL else wp.fiber
    side = "base" if placement is Placement.HORIZONTAL else "fiber"
    return factor, side


def _parse_field(wp, factor, side, comps, field_name) -> VectorField:
    if not isinstance(comps, list) or len(comps) != factor.dim:
        raise ManifestError(
            f"[connection.params].{field_name} must list {factor.dim} component "
            f"expression(s) over {factor.names}"
        )
    try:
        return lift_field(wp, side, VectorField.from_components(factor.names, comps))
    except (ExprError, GeometryError) as err:
        raise ManifestError(f"[connection.params].{field_name}: {err}") from None


def _parse_phi(wp, params) -> Tensor11Field:
    def block(chart, key):
        if key not in params:
            return None
        try:
            return Tensor11Field.from_rows(chart.names, params[key])
        except (ExprError, GeometryError) as err:
            raise ManifestError(f"[connection.params].{key}: {err}") from None

    return assemble_block_phi(wp, block(wp.base, "phi_base"), block(wp.fiber, "phi_fiber"))


def _build_data(
    wp: WarpedProduct,
    conn: dict,
    placement: Placement | None,
    box: list[tuple[float, float]],
    seed: int,
) -> tuple[TripathiData, PresetId | None]:
    preset_name = _require(conn, "preset", "connection")
    params = conn.get("params", {})
    names = wp.chart.names

    if preset_name == "custom":
        factor, side = _factor_exprs(wp, placement, "connection")

        def scalar(key):
            text = params.get(key, "0")
            try:
                return parse(str(text), factor.names).rebase(names)
            except ExprError as err:
                raise ManifestError(f"[connection.params].{key}: {err}") from None

        def field(key):
            if key not in params:
                return VectorField.zero(names)
            return _parse_field(wp, factor, side, params[key], key)

        data = TripathiData(
            scalar("f1"),
            scalar("f2"),
            field("P"),
            field("P1"),
            field("P2"),
            _parse_phi(wp, params),
        )
        return data, None

    try:
        pid = PresetId(preset_name)
    except ValueError:
        valid = ", ".join([p.value for p in PresetId] + ["custom"])
        raise ManifestError(
            f"[connection].preset {preset_name!r} unknown; expected one of: {valid}"
        ) from None

    if pid is PresetId.LEVI_CIVITA:
        if params:
            raise ManifestError("[connection.params]: levi_civita takes no parameters")
        return preset(pid, names), pid

    factor, side = _factor_exprs(wp, placement, "connection")
    kwargs = {}
    free = PRESET_CATALOG[pid]["free"]
    allowed = set()
    for key in free:
        allowed |= {"phi_base", "phi_fiber"} if key == "phi" else {key}
    unknown = sorted(set(params) - allowed)
    if unknown:
        raise ManifestError(
            f"[connection.params]: preset {pid.value} fixes parameter(s) {unknown}; "
            f"allowed keys are {sorted(allowed)}"
        )
    for key in free:
        have = (
            ("phi_base" in params or "phi_fiber" in params)
            if key == "phi"
            else key in params
        )
        if not have:
            raise ManifestError(
                f"[connection.params].{key} is required by preset {pid.value}"
            )
    if "P" in free:
        kwargs["P"] = _parse_field(wp, factor, side, params["P"], "P")
    if "P2" in free:
        kwargs["P2"] = _parse_field(wp, factor, side, params["P2"], "P2")
    if "f2" in free:
        try:
            kwargs["f2"] = parse(str(params["f2"]), factor.names).rebase(names)
        except ExprError as err:
            raise ManifestError(f"[connection.params].f2: {err}") from None
    if "phi" in free:
        kwargs["phi"] = _parse_phi(wp, params)
    probe = sample_points(wp, box, 10, seed)
    try:
        data = preset(pid, names, metric=wp.chart, probe_points=probe, **kwargs)
    except GeometryError as err:
        raise ManifestError(f"[connection.params]: {err}") from None
    return data, pid


def default_checks(placement: Placement | None, pid: PresetId | None) -> list[str]:
    out = ["thm1", "lemma21", "prop22"]
    if placement is Placement.HORIZONTAL:
        out.append("prop31")
    elif placement is Placement.VERTICAL:
        out.append("prop32")
    suites = {
        (PresetId.SEMI_SYMMETRIC_METRIC, Placement.HORIZONTAL): "cor41",
        (PresetId.SEMI_SYMMETRIC_METRIC, Placement.VERTICAL): "cor42",
        (PresetId.SEMI_SYMMETRIC_NON_METRIC, Placement.HORIZONTAL): "cor43",
        (PresetId.SEMI_SYMMETRIC_NON_METRIC, Placement.VERTICAL): "cor44",
        (PresetId.QUARTER_SYMMETRIC_METRIC, Placement.HORIZONTAL): "cor45",
        (PresetId.QUARTER_SYMMETRIC_METRIC, Placement.VERTICAL): "cor46",
        (PresetId.QUARTER_SYMMETRIC_NON_METRIC, Placement.HORIZONTAL): "cor47",
        (PresetId.QUARTER_SYMMETRIC_NON_METRIC, Placement.VERTICAL): "cor48",
    }
    if (pid, placement) in suites:
        out.append(suites[(pid, placement)])
    return out


def load_manifest(path: str | Path) -> Scenario:
    """Parse and fully validate a scenario manifest."""
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except FileNotFoundError:
        raise ManifestError(f"manifest {path} does not exist") from None
    except tomllib.TOMLDecodeError as err:
        raise ManifestError(f"manifest {path} is not valid TOML: {err}") from None

    base, base_box = _chart(_section(doc, "base"), "base")
    fiber, fiber_box = _chart(_section(doc, "fiber"), "fiber")
    warp_src = _require(_section(doc, "warp"), "expression", "warp")
    try:
        wp = build_warped(base, fiber, str(warp_src))
    except (ExprError, GeometryError) as err:
        raise ManifestError(f"[warp].expression: {err}") from None
    box = base_box + fiber_box

    conn = _section(doc, "connection")
    placement = None
    if "placement" in conn:
        try:
            placement = Placement(conn["placement"])
        except ValueError:
            raise ManifestError(
                "[connection].placement must be 'horizontal' or 'vertical'"
            ) from None

    audit_table = doc.get("audit", {})
    samples = int(audit_table.get("samples", 100))
    seed = int(audit_table.get("seed", 42))
    tolerance = float(audit_table.get("tolerance", 1e-9))

    data, pid = _build_data(wp, conn, placement, box, seed)

    checks = audit_table.get("checks", None)
    if checks is None:
        checks = default_checks(placement, pid)
    if not isinstance(checks, list) or not all(isinstance(c, str) for c in checks):
        raise ManifestError("[audit].checks must be a list of check selectors")
    expand_checks(checks)  # validate selectors now

    return Scenario(
        wp=wp,
        data=data,
        placement=placement,
        preset_id=pid,
        checks=list(checks),
        box=box,
        samples=samples,
        seed=seed,
        tolerance=tolerance,
        path=str(path),
    )


# ---------------------------------------------------------------------------
# report serialization
# ---------------------------------------------------------------------------


def report_to_dict(report: AuditReport) -> dict:
    rows = []
    for r in report.results:
        row = {
            "check": r.check,
            "variant": r.variant,
            "samples": r.samples,
            "max_residual": r.max_residual,
            "mean_residual": r.mean_residual,
            "tolerance": r.tolerance,
            "pass": r.passed,
            "argmax_point": r.argmax_point,
        }
        if r.note:
            row["note"] = r.note
        rows.append(row)
    return {
        "seed": report.seed,
        "samples": report.samples,
        "tolerance": report.tolerance,
        "placement": report.placement,
        "preset": report.preset,
        "checks": rows,
    }


def report_to_json(report: AuditReport) -> str:
    """Deterministic machine form; floats use shortest round-trip notation."""
    return json.dumps(report_to_dict(report), indent=2, sort_keys=True) + "\n"


def report_from_json(text: str) -> dict:
    return json.loads(text)


def format_report_table(report: AuditReport) -> str:
    header = f"{'check':<28} {'samples':>7} {'max residual':>14} {'mean residual':>14} {'tolerance':>10} {'status':>6}"
    lines = [header, "-" * len(header)]
    for r in report.results:
        lines.append(
            f"{r.check_id:<28} {r.samples:>7d} {r.max_residual:>14.4e} "
            f"{r.mean_residual:>14.4e} {r.tolerance:>10.1e} "
            f"{'PASS' if r.passed else 'FAIL':>6}"
        )
        if not r.passed:
            lines.append(
                f"    max at point ({', '.join(f'{v:.6g}' for v in r.argmax_point)})"
                + (f"  [{r.note}]" if r.note else "")
            )
    lines.append(
        f"{sum(r.passed for r in report.results)}/{len(report.results)} checks passed"
    )
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _cmd_eval(args) -> int:
    sc = load_manifest(args.manifest)
    try:
        point = np.array([float(v) for v in args.point.split(",")])
    except ValueError:
        raise ManifestError(f"--point {args.point!r} is not a comma-separated real list")
    if point.shape[0] != sc.wp.dim:
        raise ManifestError(
            f"--point has {point.shape[0]} coordinates, chart dimension is {sc.wp.dim}"
        )
    sc.wp.validate_point(point)
    chart = sc.wp.chart
    names = chart.names
    g, ginv = metric_at(chart, point)
    gamma0 = christoffel_at(chart, point)
    gamma = coefficients_at(chart, sc.data, point)

    out = []
    out.append(f"chart coordinates: {', '.join(names)}")
    out.append(f"point: ({', '.join(f'{v:.6g}' for v in point)})")
    out.append(f"warping function F = {sc.wp.warp} = {sc.wp.warp_value(point):.12g}")
    out.append("")
    out.append("metric g_ij:")
    for row in g:
        out.append("  [" + "  ".join(f"{v: .12g}" for v in row) + "]")
    out.append("inverse metric g^ij:")
    for row in ginv:
        out.append("  [" + "  ".join(f"{v: .12g}" for v in row) + "]")

    def coeff_lines(label, arr):
        out.append("")
        out.append(f"{label} (k: output, i: direction, j: argument), nonzero entries:")
        any_nonzero = False
        for k in range(chart.dim):
            for i in range(chart.dim):
                for j in range(chart.dim):
                    if abs(arr[k, i, j]) > 1e-14:
                        any_nonzero = True
                        out.append(
                            f"  [{names[k]}][{names[i]}][{names[j]}] = {arr[k, i, j]:.12g}"
                        )
        if not any_nonzero:
            out.append("  (all zero)")

    coeff_lines("Levi-Civita coefficients", gamma0)
    coeff_lines("connection coefficients", gamma)

    conn = coefficients(chart, sc.data)
    out.append("")
    out.append("torsion samples T(d_i, d_j): computed | claimed:")
    for i in range(chart.dim):
        for j in range(i + 1, chart.dim):
            X = VectorField.coordinate(names, i)
            Y = VectorField.coordinate(names, j)
            computed = torsion_at(conn, X, Y, point)
            claimed = torsion_claimed_at(chart, sc.data, X, Y, point)
            out.append(
                f"  T(d_{names[i]}, d_{names[j]}) = "
                f"[{', '.join(f'{v:.6g}' for v in computed)}] | "
                f"[{', '.join(f'{v:.6g}' for v in claimed)}]"
            )
    out.append("non-metricity samples (nabla_{d_i} g)(d_j, d_k): computed | claimed:")
    for i in range(chart.dim):
        for j in range(chart.dim):
            for k in range(j, chart.dim):
                X = VectorField.coordinate(names, i)
                Y = VectorField.coordinate(names, j)
                Z = VectorField.coordinate(names, k)
                computed = nonmetricity_at(conn, chart, X, Y, Z, point)
                claimed = nonmetricity_claimed_at(chart, sc.data, X, Y, Z, point)
                out.append(
                    f"  ({names[i]}; {names[j]}, {names[k]}): "
                    f"{computed:.6g} | {claimed:.6g}"
                )
    print("\n".join(out))
    return 0


def _cmd_audit(args) -> int:
    sc = load_manifest(args.manifest)
    checks = sc.checks
    if args.checks:
        checks = [tok for blob in args.checks for tok in blob.replace(",", " ").split()]
    samples = args.samples if args.samples is not None else sc.samples
    seed = args.seed if args.seed is not None else sc.seed
    tolerance = args.tol if args.tol is not None else sc.tolerance
    report = run_audit(
        sc.wp,
        sc.data,
        sc.placement,
        checks,
        box=sc.box,
        samples=samples,
        seed=seed,
        tolerance=tolerance,
        preset_id=sc.preset_id,
    )
    print(format_report_table(report))
    if args.json:
        Path(args.json).write_text(report_to_json(report))
        print(f"machine report written to {args.json}")
    return 0 if report.all_passed else 1


def _cmd_presets(_args) -> int:
    print("named connection presets:")
    for pid, spec in PRESET_CATALOG.items():
        free = ", ".join(spec["free"]) if spec["free"] else "(none)"
        print(f"  {pid.value}")
        print(f"      fixed: {spec['fixed']}")
        print(f"      free parameters: {free}")
    print(
        "\nmanifest usage: set [connection].preset to one of the ids above (or"
        " 'custom'),\nsupply exactly the free parameters in [connection.params],"
        " and choose\n[connection].placement = 'horizontal' or 'vertical'."
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="warpgeo",
        description="Audit warped-product connection identities from a scenario manifest.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_eval = sub.add_parser("eval", help="print metric, coefficients and samples at a point")
    p_eval.add_argument("--manifest", required=True)
    p_eval.add_argument("--point", required=True, help="comma-separated coordinates")
    p_eval.set_defaults(func=_cmd_eval)

    p_audit = sub.add_parser("audit", help="run identity checks over sampled points")
    p_audit.add_argument("--manifest", required=True)
    p_audit.add_argument(
        "--checks", action="append", help="check selectors (comma/space separated)"
    )
    p_audit.add_argument("--seed", type=int, default=None)
    p_audit.add_argument("--samples", type=int, default=None)
    p_audit.add_argument("--tol", type=float, default=None)
    p_audit.add_argument("--json", help="write the machine-readable report here")
    p_audit.set_defaults(func=_cmd_audit)

    p_presets = sub.add_parser("presets", help="list the named connection presets")
    p_presets.set_defaults(func=_cmd_presets)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ManifestError, AuditConfigError, ExprError, GeometryError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
