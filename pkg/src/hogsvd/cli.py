"""Command-line interface: decompose, sweep, verify, subspaces."""

import argparse
import csv
import io as _stdio
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__, analysis, csd, gsvd
from . import io as hio
from .errors import DimensionError, DomainError, InputError, RankDeficiencyError, ShapeMismatchError

SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_VERIFY = 1
EXIT_IO = 2
EXIT_RANK = 3
EXIT_DIMENSION = 4
EXIT_ARGS = 5


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; 2 is reserved for I/O errors here
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ARGS, f"{self.prog}: error: {message}\n")


def _load(args):
    manifest = hio.load_manifest(args.manifest)
    blocks = hio.load_blocks(manifest)
    mset = gsvd.MatrixSet(blocks, manifest.labels)
    pi = getattr(args, "pi", None)
    if pi is None:
        pi = manifest.pi if manifest.pi is not None else gsvd.default_pi(mset.n_blocks)
    if not (np.isfinite(pi) and pi > 0):
        raise UsageError(f"pi must be positive and finite, got {pi}")
    return manifest, mset, float(pi)


def _rel(x, ref):
    return float(x / ref) if ref > 0 else float(x)


def _floats(a):
    return [float(x) for x in np.ravel(a)]


def _s_residuals(mset, result):
    """Agreement of the two S routes and the S/T similarity residual."""
    pi, nb, r = result.pi, mset.n_blocks, result.qr.R
    s_direct = gsvd.build_s_pi_direct(mset, pi, result.qr.rank_tol).matrix
    s_via_t = gsvd.build_s_pi_via_t(result.qr, pi).matrix
    t = csd.build_t_pi(csd.OrthoSet(result.qr.q_blocks, pi)).matrix
    m = ((1.0 + pi * nb) * t - np.eye(mset.n)) / (nb - 1)
    norm_s = np.linalg.norm(s_direct)
    return (
        s_direct,
        _rel(np.linalg.norm(s_direct - s_via_t), norm_s),
        _rel(np.linalg.norm(s_direct @ r.T - r.T @ m), norm_s * np.linalg.norm(r)),
    )


def decomposition_report(mset, result, class_tol, rank_tol):
    s_direct, path_resid, relation_resid = _s_residuals(mset, result)
    lo, hi = gsvd.varsigma_bounds(result.pi, mset.n_blocks)
    blocks = []
    for i, a in enumerate(mset.blocks):
        resid = np.linalg.norm(a - result.reconstruct(i))
        blocks.append({
            "label": mset.labels[i],
            "rows": int(a.shape[0]),
            "cols": int(a.shape[1]),
            "sigma": _floats(result.sigmas[i]),
            "reconstruction_residual": _rel(resid, np.linalg.norm(a)),
        })
    rep = result.labels
    return {
        "schema_version": SCHEMA_VERSION,
        "tool": "hogsvd",
        "version": __version__,
        "n": mset.n,
        "n_blocks": mset.n_blocks,
        "pi": result.pi,
        "normalize_v": result.normalize_v,
        "tolerances": {
            "class_tol": float(class_tol),
            "rank_tol": float(result.qr.rank_tol if rank_tol is None else rank_tol),
            "free_col_tol": csd.free_col_tol(mset.n),
        },
        "rank": {
            "sigma_min_R": result.qr.sigma_min,
            "sigma_max_R": result.qr.sigma_max,
            "ratio": result.qr.ratio,
        },
        "bounds": {
            "tau_min": csd.tau_min(mset.n_blocks, result.pi),
            "tau_max": csd.tau_max(mset.n_blocks, result.pi),
            "varsigma_min": lo,
            "varsigma_max": hi,
        },
        "tau": _floats(result.taus),
        "varsigma": _floats(result.varsigmas),
        "subspaces": [
            {"index": k, "label": rep.labels[k], "p_estimate": int(rep.null_counts[k]),
             "target_distance": float(rep.target_distance[k])}
            for k in range(mset.n)
        ],
        "blocks": blocks,
        "residuals": {
            "max_reconstruction": max(b["reconstruction_residual"] for b in blocks),
            "s_path_agreement": path_resid,
            "s_t_relation": relation_resid,
        },
    }


def cmd_decompose(args):
    manifest, mset, pi = _load(args)
    normalize_v = args.normalize_v or manifest.normalize_v
    result = gsvd.hogsvd_factor(mset, pi, normalize_v, manifest.class_tol, manifest.rank_tol)
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise InputError(f"cannot create {out}: {exc}") from None
    report = decomposition_report(mset, result, manifest.class_tol, manifest.rank_tol)
    try:
        hio.write_matrix(out / "V.csv", result.V)
        hio.write_matrix(out / "Z.csv", result.Z)
        for i in range(mset.n_blocks):
            hio.write_matrix(out / f"U_{i + 1}.csv", result.U[i])
            hio.write_matrix(out / f"sigma_{i + 1}.csv", result.sigmas[i][np.newaxis, :])
        hio.write_json(out / "report.json", report)
    except OSError as exc:
        raise InputError(f"cannot write to {out}: {exc}") from None
    varsig = ", ".join(f"{x:.4f}" for x in result.varsigmas)
    print(f"pi = {pi:.6g}; varsigma = [{varsig}]; labels = {list(result.labels.labels)}")
    print(f"wrote {out / 'report.json'}")
    return EXIT_OK


def sweep_rows(sweep, nb):
    n = sweep.Z.shape[1]
    header = (["kind", "pi", "index", "tau", "varsigma", "overlap", "crossing"]
              + [f"z{k + 1}" for k in range(n)] + [f"v{k + 1}" for k in range(n)])
    rows = []
    f = hio.format_float
    for j, pi in enumerate(sweep.grid):
        for k in range(n):
            rows.append(["tracked", f(pi), k, f(sweep.taus[j, k]), f(sweep.varsigmas[j, k]),
                         f(sweep.overlaps[j, k]), int(sweep.crossings[j, k])]
                        + [f(x) for x in sweep.Z[j][:, k]] + [f(x) for x in sweep.V[j][:, k]])
    # limit eigenvectors, paired with the tracked curve they end on
    for kind, z_end, vals, vecs in (
        ("t_tilde_zero", sweep.Z[0], sweep.t0_eigenvalues, sweep.t0_vectors),
        ("t_tilde_infinity", sweep.Z[-1], sweep.tinf_eigenvalues, sweep.tinf_vectors),
    ):
        perm, signs, ov = analysis.match_columns(z_end, vecs)
        for k in range(n):
            col = vecs[:, perm[k]] * signs[k]
            rows.append([kind, "", k, f(vals[perm[k]]), "", f(ov[k]), int(ov[k] < analysis.CROSSING_OVERLAP)]
                        + [f(x) for x in col] + [""] * n)
    return header, rows


def cmd_sweep(args):
    try:
        grid = analysis.parse_grid(args.grid)
    except DomainError as exc:
        raise UsageError(str(exc)) from None
    if grid.size < 2:
        raise UsageError("grid needs at least two points")
    manifest, mset, _ = _load(args)
    sweep = analysis.pi_sweep(mset, grid, manifest.rank_tol)
    header, rows = sweep_rows(sweep, mset.n_blocks)
    buf = _stdio.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    try:
        hio.write_text(args.out, buf.getvalue())
    except OSError as exc:
        raise InputError(f"cannot write {args.out}: {exc}") from None
    n_cross = int(sweep.crossings.sum())
    print(f"{grid.size} grid points, {mset.n} curves, {n_cross} flagged crossings; wrote {args.out}")
    return EXIT_OK


def run_checks(mset, pi, class_tol=csd.DEFAULT_CLASS_TOL, rank_tol=None):
    """Invariant checks on one matrix set: list of (name, value, tolerance)."""
    nb = mset.n_blocks
    checks = []
    for normalize_v in (False, True):
        res = gsvd.hogsvd_factor(mset, pi, normalize_v, class_tol, rank_tol)
        worst = max(_rel(np.linalg.norm(a - res.reconstruct(i)), np.linalg.norm(a))
                    for i, a in enumerate(mset.blocks))
        checks.append((f"reconstruction (normalize_v={normalize_v})", worst, 1e-8))
    res = gsvd.hogsvd_factor(mset, pi, False, class_tol, rank_tol)
    s_direct, path_resid, relation_resid = _s_residuals(mset, res)
    checks.append(("S direct vs via T", path_resid, 1e-8))
    checks.append(("S/T similarity relation", relation_resid, 1e-8))

    lo, hi = csd.tau_min(nb, pi), csd.tau_max(nb, pi)
    tau_out = max(0.0, lo - res.taus.min(), res.taus.max() - hi)
    checks.append(("tau within bounds", tau_out, 1e-8))
    vlo, vhi = gsvd.varsigma_bounds(pi, nb)
    vs_out = max(0.0, vlo - res.varsigmas.min(), res.varsigmas.max() - vhi)
    checks.append(("varsigma within bounds", vs_out, 1e-8))
    # S V = V diag(varsigma) ties the tau -> varsigma map to the direct S route
    v = res.V / np.linalg.norm(res.V, axis=0)
    eig_resid = np.linalg.norm(s_direct @ v - v * res.varsigmas) / max(np.linalg.norm(s_direct), 1.0)
    checks.append(("S eigenpairs from varsigma map", eig_resid, 1e-8))

    common_resid, isolated_bad = gsvd.subspace_certificates(mset, res)
    checks.append(("common certificate", common_resid, 1e-7))
    checks.append(("isolated certificate (failing vectors)", float(isolated_bad), 0.0))

    oset = csd.OrthoSet(res.qr.q_blocks, pi)
    grad = 0.0
    for k in res.labels.common + res.labels.isolated:
        grad = max(grad, float(np.linalg.norm(analysis.g_pi_gradient(oset, res.Z[:, k]))))
    checks.append(("gradient stationarity", grad, 1e-6))

    try:
        red = gsvd.verify_reductions(mset, pi)
    except ShapeMismatchError:
        red = {"checks": []}
    if "svd" in red["checks"]:
        checks.append(("SVD reduction: singular values", red["svd_singular_value_residual"], 1e-8))
        checks.append(("SVD reduction: right vectors", red["svd_right_vector_residual"], 1e-8))
    if "csd" in red["checks"]:
        checks.append(("CSD reduction: identity", red["csd_identity_residual"], 1e-8))
        checks.append(("CSD reduction: U orthonormality", max(red["u_orthonormality_residual"]), 1e-8))
    return checks


def cmd_verify(args):
    manifest, mset, pi = _load(args)
    checks = run_checks(mset, pi, manifest.class_tol, manifest.rank_tol)
    width = max(len(name) for name, _, _ in checks)
    failed = 0
    for name, value, tol in checks:
        ok = value <= tol
        failed += not ok
        print(f"{'PASS' if ok else 'FAIL'}  {name:<{width}}  {value:.3e}  (tol {tol:.0e})")
    print(f"{len(checks) - failed}/{len(checks)} checks passed")
    return EXIT_OK if failed == 0 else EXIT_VERIFY


def subspace_rows(mset, result):
    lo, hi = gsvd.varsigma_bounds(result.pi, mset.n_blocks)
    rows = []
    for k in range(mset.n):
        v = result.V[:, k]
        nv = np.linalg.norm(v)
        rows.append({
            "index": k,
            "varsigma": float(result.varsigmas[k]),
            "dist_min": float(abs(result.varsigmas[k] - lo)),
            "dist_max": float(abs(result.varsigmas[k] - hi)),
            "label": result.labels.labels[k],
            "p_estimate": int(result.labels.null_counts[k]),
            "sigma": _floats(result.sigmas[:, k]),
            "gain": [float(np.linalg.norm(a @ v) / nv) for a in mset.blocks],
        })
    return rows


def cmd_subspaces(args):
    manifest, mset, pi = _load(args)
    tol = manifest.class_tol if args.tol is None else args.tol
    if not (np.isfinite(tol) and tol > 0):
        raise UsageError("--tol must be positive")
    result = gsvd.hogsvd_factor(mset, pi, False, tol, manifest.rank_tol)
    rows = subspace_rows(mset, result)
    if args.json:
        print(json.dumps({"schema_version": SCHEMA_VERSION, "pi": pi, "class_tol": tol,
                          "blocks": list(mset.labels), "rows": rows}, indent=2, allow_nan=False))
        return EXIT_OK
    gains = " ".join(f"{'sigma_' + lab:>10}" for lab in mset.labels)
    print(f"{'k':>3} {'varsigma':>10} {'d_min':>10} {'d_max':>10} {'label':>13} {'P':>2} {gains}")
    for r in rows:
        g = " ".join(f"{x:>10.4f}" for x in r["sigma"])
        print(f"{r['index']:>3} {r['varsigma']:>10.6f} {r['dist_min']:>10.2e} {r['dist_max']:>10.2e}"
              f" {r['label']:>13} {r['p_estimate']:>2} {g}")
    return EXIT_OK


def build_parser():
    p = _Parser(prog="hogsvd", description="Regularized higher-order GSVD of several matrices.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    d = sub.add_parser("decompose", help="factor the matrix set and write report + factors")
    d.add_argument("--manifest", required=True)
    d.add_argument("--out", required=True, help="output directory")
    d.add_argument("--pi", type=float)
    d.add_argument("--normalize-v", action="store_true")
    d.set_defaults(func=cmd_decompose)

    s = sub.add_parser("sweep", help="track eigenvectors over a log grid of pi")
    s.add_argument("--manifest", required=True)
    s.add_argument("--grid", required=True, help="log:LO:HI:K")
    s.add_argument("--out", required=True, help="output CSV file")
    s.set_defaults(func=cmd_sweep)

    v = sub.add_parser("verify", help="run invariant checks and print a pass/fail table")
    v.add_argument("--manifest", required=True)
    v.add_argument("--pi", type=float)
    v.set_defaults(func=cmd_verify)

    c = sub.add_parser("subspaces", help="classify the right basis vectors")
    c.add_argument("--manifest", required=True)
    c.add_argument("--tol", type=float)
    c.add_argument("--pi", type=float)
    c.add_argument("--json", action="store_true")
    c.set_defaults(func=cmd_subspaces)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ARGS
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except RankDeficiencyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RANK
    except DimensionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIMENSION


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
