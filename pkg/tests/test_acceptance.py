"""Acceptance criteria 1-12 at their stated tolerances.

Each test carries a ``criterion`` marker; conftest prints one PASS/FAIL
line per criterion at the end of the run.
"""

import json

import numpy as np
import pytest

from hogsvd import analysis as an
from hogsvd import cli, csd, gsvd
from hogsvd import io as hio
from hogsvd.linalg import principal_angles

from helpers import (SPLIT_ROWS, MIXED_ROWS, SKEW_ROWS, SKEW_Q_REF, SKEW_T0_VALUES_REF, SKEW_T0_VECTORS_REF, SKEW_TINF_VALUES_REF,
                     SKEW_TINF_VECTORS_REF, low_rank, random_matrix_set)

crit = pytest.mark.criterion
PI_SET = ("1e-3", "1/N", "1", "1e3")


def pi_value(label, nb):
    return 1.0 / nb if label == "1/N" else float(label)


def tau_formula(nb, pi, p):
    return (p * (1 - pi * nb) + pi * nb ** 2) / (pi * nb * (1 + pi * (nb - p)))


def numpy_q_blocks(mset):
    q, r = np.linalg.qr(mset.stacked())
    q = q * np.sign(np.diag(r))
    rows = np.cumsum([0] + [b.shape[0] for b in mset.blocks])
    return [q[rows[i]:rows[i + 1]] for i in range(mset.n_blocks)]


def numpy_t(q_blocks, pi):
    n = q_blocks[0].shape[1]
    return sum(np.linalg.inv(q.T @ q + pi * np.eye(n)) for q in q_blocks) / len(q_blocks)


def numpy_s(mset, pi):
    ata = mset.stacked().T @ mset.stacked()
    d = [b.T @ b + pi * ata for b in mset.blocks]
    nb = mset.n_blocks
    return sum(d[i] @ np.linalg.inv(d[j]) + d[j] @ np.linalg.inv(d[i])
               for i in range(nb) for j in range(i + 1, nb)) / (nb * (nb - 1))


def max_angle(x, y):
    if x.shape[1] == 0 and y.shape[1] == 0:
        return 0.0
    if x.shape[1] != y.shape[1]:
        return np.pi / 2
    return float(np.max(principal_angles(x, y)))


# ---------------------------------------------------------------- 1, 2


@crit(1, "split rows: S = diag(19/18, 7/6), y isolated with pattern (0,1,0)")
def test_criterion_01_split_rows():
    mset = gsvd.MatrixSet(SPLIT_ROWS)
    target = np.diag([19 / 18, 7 / 6])
    qr = gsvd.stack_and_qr(mset)
    assert np.max(np.abs(gsvd.build_s_pi_direct(mset, 1.0).matrix - target)) <= 1e-10
    assert np.max(np.abs(gsvd.build_s_pi_via_t(qr, 1.0).matrix - target)) <= 1e-10
    assert np.max(np.abs(numpy_s(mset, 1.0) - target)) <= 1e-10
    res = gsvd.hogsvd_factor(mset, 1.0)
    v = res.V / np.linalg.norm(res.V, axis=0)
    k = int(np.argmax(np.abs(v[1])))
    assert abs(v[1, k]) >= 1 - 1e-12
    assert res.labels.labels[k] == csd.ISOLATED
    assert res.labels.isolated == [k]
    assert np.max(np.abs(res.sigmas[:, k] - [0.0, 1.0, 0.0])) <= 1e-8


@crit(2, "mixed rows: S = (11/10) I, no common or isolated labels")
def test_criterion_02_mixed_rows():
    mset = gsvd.MatrixSet(MIXED_ROWS)
    target = 1.1 * np.eye(2)
    qr = gsvd.stack_and_qr(mset)
    assert np.max(np.abs(gsvd.build_s_pi_direct(mset, 1.0).matrix - target)) <= 1e-10
    assert np.max(np.abs(gsvd.build_s_pi_via_t(qr, 1.0).matrix - target)) <= 1e-10
    res = gsvd.hogsvd_factor(mset, 1.0)
    assert res.labels.common == [] and res.labels.isolated == []


# ---------------------------------------------------------------- 3


def skew_limits():
    mset = gsvd.MatrixSet(SKEW_ROWS)
    qr = gsvd.stack_and_qr(mset)
    oset = csd.OrthoSet(qr.q_blocks, 1.0)
    # reference quantities use a Q basis with some columns negated
    d = np.diag(np.sign(np.sum(np.vstack(qr.q_blocks) * SKEW_Q_REF, axis=0)))
    return mset, oset, d


def match_reference(vecs, reference):
    out = np.empty_like(reference)
    for k in range(reference.shape[1]):
        j = int(np.argmax(np.abs(vecs.T @ reference[:, k])))
        out[:, k] = vecs[:, j] * np.sign(vecs[:, j] @ reference[:, k])
    return out


@crit(3, "skewed rows: limit eigenpairs match reference values, sweep endpoints match limits")
def test_criterion_03_skew_rows_limit_eigenvalues():
    _, oset, _ = skew_limits()
    w0 = np.linalg.eigvalsh(an.t_tilde_zero(oset))
    winf = np.linalg.eigvalsh(an.t_tilde_infinity(oset))
    print(f"T~0 eigenvalues {w0} vs reference {SKEW_T0_VALUES_REF}")
    print(f"T~inf eigenvalues {winf} vs reference {SKEW_TINF_VALUES_REF}")
    assert np.max(np.abs(w0 - SKEW_T0_VALUES_REF)) <= 0.02
    assert np.max(np.abs(winf - SKEW_TINF_VALUES_REF)) <= 0.02


@crit(3, "skewed rows: limit eigenpairs match reference values, sweep endpoints match limits")
def test_criterion_03_skew_rows_limit_eigenvectors():
    _, oset, d = skew_limits()
    for t, reference in ((an.t_tilde_zero(oset), SKEW_T0_VECTORS_REF), (an.t_tilde_infinity(oset), SKEW_TINF_VECTORS_REF)):
        vecs = d @ np.linalg.eigh(t)[1]
        assert np.max(np.abs(match_reference(vecs, reference) - reference)) <= 0.02


@crit(3, "skewed rows: limit eigenpairs match reference values, sweep endpoints match limits")
def test_criterion_03_skew_rows_sweep_endpoints():
    mset = gsvd.MatrixSet(SKEW_ROWS)
    sweep = an.pi_sweep(mset, an.parse_grid("log:1e-4:1e4:55"))
    assert sweep.Z.shape == (55, 2, 2)
    # limit operators rebuilt from a numpy QR, in the library's Q basis
    q_blocks = numpy_q_blocks(mset)
    t0 = sum(np.linalg.pinv(q) @ q for q in q_blocks) / 3
    tinf = sum((q.T @ q) @ (q.T @ q) for q in q_blocks) / 3
    for z_end, t in ((sweep.Z[0], t0), (sweep.Z[-1], tinf)):
        limit = np.linalg.eigh(t)[1]
        for k in range(2):
            cos = np.max(np.abs(limit.T @ z_end[:, k]))
            assert np.arccos(min(cos, 1.0)) <= 0.05


# ---------------------------------------------------------------- 4, 5

N_RANDOM = 200


@pytest.fixture(scope="module")
def random_runs():
    rng = np.random.default_rng(20240501)
    runs = []
    for _ in range(N_RANDOM):
        mset, ranks = random_matrix_set(rng)
        full = np.linalg.matrix_rank(mset.stacked()) == mset.n
        entry = {"mset": mset, "ranks": ranks, "full": full, "results": {}, "errors": []}
        for label in PI_SET:
            pi = pi_value(label, mset.n_blocks)
            try:
                entry["results"][label] = gsvd.hogsvd_factor(mset, pi)
            except Exception as exc:  # recorded, asserted on below
                entry["errors"].append((label, repr(exc)))
        try:
            entry["normalized"] = gsvd.hogsvd_factor(mset, normalize_v=True)
        except Exception as exc:
            entry["errors"].append(("normalized", repr(exc)))
        runs.append(entry)
    return runs


@crit(4, "exact factorization on 200 random instances")
def test_criterion_04_instance_coverage(random_runs):
    sizes = [(r["mset"].n_blocks, r["mset"].n) for r in random_runs]
    assert {nb for nb, _ in sizes} == {2, 3, 4, 5}
    assert min(n for _, n in sizes) <= 3 and max(n for _, n in sizes) >= 18
    assert any(0 in r["ranks"] for r in random_runs)
    assert any(min(b.shape[0] for b in r["mset"].blocks) == 1 for r in random_runs)
    assert all(r["full"] for r in random_runs)


@crit(4, "exact factorization on 200 random instances")
def test_criterion_04_exact_factorization(random_runs):
    worst = 0.0
    for r in random_runs:
        assert not r["errors"], r["errors"]
        fits = list(r["results"].values()) + [r["normalized"]]
        for res in fits:
            for i, a in enumerate(r["mset"].blocks):
                na = np.linalg.norm(a)
                resid = np.linalg.norm(a - (res.U[i] * res.sigmas[i]) @ res.V.T)
                worst = max(worst, resid / na if na > 0 else resid)
    print(f"worst relative reconstruction residual {worst:.2e}")
    assert worst <= 1e-8


@crit(5, "spectrum bounds and tau -> varsigma map on 200 instances x 4 pi")
def test_criterion_05_spectrum_bounds(random_runs):
    for r in random_runs:
        nb = r["mset"].n_blocks
        for label, res in r["results"].items():
            pi = pi_value(label, nb)
            lo = nb / (1 + pi * nb)
            hi = (pi * nb + nb - 1) / (pi * nb * (1 + pi))
            assert res.taus.min() >= lo - 1e-8 and res.taus.max() <= hi + 1e-8, (label, res.taus, lo, hi)
            vhi = 1 + 1 / (pi * nb * (1 + pi))
            assert res.varsigmas.min() >= 1 - 1e-8 and res.varsigmas.max() <= vhi + 1e-8


@crit(5, "spectrum bounds and tau -> varsigma map on 200 instances x 4 pi")
def test_criterion_05_varsigma_map(random_runs):
    worst_map, worst_oracle = 0.0, 0.0
    for r in random_runs:
        mset = r["mset"]
        nb = mset.n_blocks
        q_blocks = numpy_q_blocks(mset)
        for label, res in r["results"].items():
            pi = pi_value(label, nb)
            mapped = ((1 + pi * nb) * res.taus - 1) / (nb - 1)
            worst_map = max(worst_map, float(np.max(np.abs(res.varsigmas - mapped))))
            # independent route: spectrum of ((1 + pi N) T - I) / (N - 1), T from a numpy QR
            m = ((1 + pi * nb) * numpy_t(q_blocks, pi) - np.eye(mset.n)) / (nb - 1)
            oracle = np.linalg.eigvalsh(0.5 * (m + m.T))
            err = np.max(np.abs(np.sort(res.varsigmas) - oracle)) / max(1.0, oracle[-1])
            worst_oracle = max(worst_oracle, float(err))
    print(f"map residual {worst_map:.2e}; oracle spectrum mismatch {worst_oracle:.2e}")
    assert worst_map <= 1e-9
    assert worst_oracle <= 1e-9


# ---------------------------------------------------------------- 6


@crit(6, "S direct vs via T on 100 full-rank-per-block instances")
def test_criterion_06_path_equivalence():
    rng = np.random.default_rng(6)
    worst = 0.0
    for _ in range(100):
        nb, n = int(rng.integers(2, 6)), int(rng.integers(2, 21))
        mset = gsvd.MatrixSet([rng.standard_normal((n + int(rng.integers(0, 10)), n)) for _ in range(nb)])
        pi = 10.0 ** rng.uniform(-2, 2)
        direct = gsvd.build_s_pi_direct(mset, pi).matrix
        via_t = gsvd.build_s_pi_via_t(gsvd.stack_and_qr(mset), pi).matrix
        worst = max(worst, np.linalg.norm(direct - via_t) / np.linalg.norm(direct))
    print(f"worst relative path disagreement {worst:.2e}")
    assert worst <= 1e-8


# ---------------------------------------------------------------- 7


@crit(7, "reductions to the SVD and to the CSD")
def test_criterion_07a_svd_reduction():
    rng = np.random.default_rng(7)
    for trial in range(50):
        nb = (2, 3, 4)[trial % 3]
        n = int(rng.integers(2, 9))
        m = int(rng.integers(1, n + 4))
        r = int(rng.integers(0, min(m, n) + 1)) if trial % 2 else min(m, n)
        a = low_rank(rng, m, n, r)
        mset = gsvd.MatrixSet([a] + [np.eye(n)] * (nb - 1))
        res = gsvd.hogsvd_factor(mset, normalize_v=True)
        # numpy SVD oracle (full V); missing singular values are zero when m < n
        _, s, vt = np.linalg.svd(a)
        s = np.concatenate([s, np.zeros(n - s.size)])
        got = res.sigmas[0]
        assert np.max(np.abs(np.sort(got)[::-1] - s)) <= 1e-8
        # right vectors agree per cluster of equal singular values
        tol = 1e-6 * max(s[0], 1.0)
        used = np.zeros(n, dtype=bool)
        k = 0
        while k < n:
            grp = [k]
            while grp[-1] + 1 < n and s[grp[-1]] - s[grp[-1] + 1] <= tol:
                grp.append(grp[-1] + 1)
            cand = np.flatnonzero(~used & (np.abs(got - s[k]) <= tol))[:len(grp)]
            used[cand] = True
            assert max_angle(vt.T[:, grp], res.V[:, cand]) <= 1e-8
            k = grp[-1] + 1


@crit(7, "reductions to the SVD and to the CSD")
def test_criterion_07b_csd_reduction():
    rng = np.random.default_rng(77)
    accepted = excluded = 0
    while accepted < 50:
        n = int(rng.integers(2, 9))
        a1 = rng.standard_normal((n + int(rng.integers(0, 4)), n))
        a2 = low_rank(rng, n + int(rng.integers(0, 4)), n, int(rng.integers(max(n - 2, 0), n + 1)))
        mset = gsvd.MatrixSet([a1, a2])
        pi = 0.5
        w = np.linalg.eigvalsh(numpy_t(numpy_q_blocks(mset), pi))
        if np.min(np.diff(w)) <= 1e-6 * (w[-1] - w[0] + 1e-300):
            excluded += 1
            continue
        accepted += 1
        hc = csd.hocsd_factor(csd.OrthoSet(gsvd.stack_and_qr(mset).q_blocks, pi))
        s1, s2 = hc.sigmas
        assert np.linalg.norm(np.diag(s1 ** 2 + s2 ** 2) - np.eye(n)) <= 1e-8
        for u in hc.U:
            assert np.linalg.norm(u.T @ u - np.eye(n)) <= 1e-8
    print(f"{accepted} instances checked, {excluded} repeated-eigenvalue instances excluded")
    assert excluded > 0


# ---------------------------------------------------------------- 8, 9


def planted_draws(count, seed):
    rng = np.random.default_rng(seed)
    draws = []
    while len(draws) < count:
        nb = int(rng.integers(2, 6))
        p = int(rng.integers(0, 4))
        owners = [int(o) for o in rng.integers(0, nb, int(rng.integers(0, 3)))]
        n = max(p + len(owners) + int(rng.integers(0, 4)), 2)
        draws.append(an.synthesize_instance(n, nb, p_common=p, isolated=owners,
                                            seed=int(rng.integers(2**31))))
    return draws


@pytest.fixture(scope="module")
def planted():
    return planted_draws(100, 8)


@crit(8, "planted common/isolated recovery and pi-invariance")
def test_criterion_08_labels_recovered(planted):
    assert {inst.p_common for inst in planted} == {0, 1, 2, 3}
    assert {len(inst.owners) for inst in planted} == {0, 1, 2}
    for inst in planted:
        res = gsvd.hogsvd_factor(inst.matrices)
        for label in (csd.COMMON, csd.ISOLATED):
            want = inst.columns(label)
            got = res.labels.indices(label)
            assert len(got) == len(want)
            assert max_angle(inst.Z[:, want], res.Z[:, got]) <= 1e-6
        assert res.labels.indices(csd.INTERMEDIATE) == []


@crit(8, "planted common/isolated recovery and pi-invariance")
def test_criterion_08_pi_invariance(planted):
    worst = 0.0
    for inst in planted:
        a = gsvd.hogsvd_factor(inst.matrices, 0.5)
        b = gsvd.hogsvd_factor(inst.matrices, 2.0)
        for label in (csd.COMMON, csd.ISOLATED):
            ka, kb = a.labels.indices(label), b.labels.indices(label)
            worst = max(worst, max_angle(a.Z[:, ka], b.Z[:, kb]), max_angle(a.V[:, ka], b.V[:, kb]))
    print(f"largest principal angle between pi=0.5 and pi=2 subspaces {worst:.2e}")
    assert worst <= 1e-6


@crit(9, "canonical forms on planted instances")
def test_criterion_09_canonical_forms(planted):
    checked = 0
    for inst in planted:
        res = gsvd.canonicalize_hogsvd(gsvd.hogsvd_factor(inst.matrices))
        nb = inst.matrices.n_blocks
        com, iso = res.labels.common, res.labels.isolated
        assert np.max(np.abs(res.sigmas[:, com] - 1 / np.sqrt(nb)), initial=0.0) <= 1e-8
        other = [k for k in range(inst.matrices.n) if k not in com]
        for i in range(nb):
            uc, uu = res.U[i][:, com], res.U[i][:, other]
            assert np.linalg.norm(uc.T @ uc - np.eye(len(com))) <= 1e-9
            assert np.linalg.norm(uc.T @ uu) <= 1e-8
        for k in iso:
            s = res.sigmas[:, k]
            assert np.sum(np.abs(s - 1) <= 1e-8) == 1 and np.sum(np.abs(s) <= 1e-8) == nb - 1
        for i, a in enumerate(inst.matrices.blocks):
            assert np.linalg.norm(a - res.reconstruct(i)) <= 1e-8 * np.linalg.norm(a)
        checked += bool(com) or bool(iso)
    assert checked > 50


# ---------------------------------------------------------------- 10


def g_oracle(q_blocks, pi, z):
    a = [np.sum((q @ z) ** 2) + pi * (z @ z) for q in q_blocks]
    nb = len(a)
    return sum(a[i] / a[j] for i in range(nb) for j in range(nb) if i != j) / (nb * (nb - 1))


@crit(10, "analytic gradient of g vs central differences; stationarity at planted vectors")
def test_criterion_10_gradient_matches_differences():
    rng = np.random.default_rng(10)
    worst = 0.0
    for _ in range(50):
        mset, _ = random_matrix_set(rng, n=int(rng.integers(2, 11)))
        pi = 10.0 ** rng.uniform(-1, 1)
        oset = csd.OrthoSet(gsvd.stack_and_qr(mset).q_blocks, pi)
        z = rng.standard_normal(mset.n)
        z /= np.linalg.norm(z)
        h = 1e-6
        fd = np.array([(g_oracle(oset.blocks, pi, z + h * e) - g_oracle(oset.blocks, pi, z - h * e)) / (2 * h)
                       for e in np.eye(mset.n)])
        fd -= (z @ fd) * z
        grad = an.g_pi_gradient(oset, z)
        worst = max(worst, np.linalg.norm(grad - fd) / max(1.0, np.linalg.norm(fd)))
    print(f"worst gradient mismatch {worst:.2e}")
    assert worst <= 1e-5


@crit(10, "analytic gradient of g vs central differences; stationarity at planted vectors")
def test_criterion_10_stationary_at_planted_vectors(planted):
    worst = 0.0
    for inst in planted[:40]:
        for pi in (0.5, 1.0, 2.0):
            oset = csd.OrthoSet(inst.q_blocks, pi)
            for k in inst.columns(csd.COMMON) + inst.columns(csd.ISOLATED):
                worst = max(worst, float(np.linalg.norm(an.g_pi_gradient(oset, inst.Z[:, k]))))
    assert worst <= 1e-6


# ---------------------------------------------------------------- 11


@crit(11, "T has an eigenvalue at tau(P) for directions in P kernels")
@pytest.mark.parametrize("nb,p", [(3, 1), (4, 1), (4, 2)])
@pytest.mark.parametrize("pi", [0.5, 1.0])
def test_criterion_11_tau_of_p(nb, p, pi):
    for seed in range(5):
        inst = an.synthesize_instance(nb + 2, nb, intermediate=[tuple(range(p))], seed=seed)
        want = tau_formula(nb, pi, p)
        assert abs(csd.tau_of_p(nb, pi, p) - want) <= 1e-12
        w = np.linalg.eigvalsh(numpy_t(numpy_q_blocks(inst.matrices), pi))
        assert np.min(np.abs(w - want)) <= 1e-8
        taus = gsvd.hogsvd_factor(inst.matrices, pi).taus
        assert np.min(np.abs(taus - want)) <= 1e-8


# ---------------------------------------------------------------- 12


def write_set(path, mats, **extra):
    names = []
    for i, m in enumerate(mats):
        hio.write_matrix(path / f"A{i + 1}.csv", np.atleast_2d(m))
        names.append(f"A{i + 1}.csv")
    (path / "manifest.json").write_text(json.dumps({"matrices": names, **extra}))
    return str(path / "manifest.json")


@crit(12, "CLI exit codes and report schema")
def test_criterion_12_exit_codes(tmp_path, monkeypatch):
    good = write_set(tmp_path, SPLIT_ROWS)
    assert cli.main(["verify", "--manifest", good]) == 0
    (tmp_path / "bad").mkdir()
    bad = write_set(tmp_path / "bad", SPLIT_ROWS)
    (tmp_path / "bad" / "A1.csv").write_text("1,zero\n")
    assert cli.main(["verify", "--manifest", bad]) == 2
    (tmp_path / "rank").mkdir()
    rank = write_set(tmp_path / "rank", [[1.0, 0.0], [2.0, 0.0]])
    assert cli.main(["decompose", "--manifest", rank, "--out", str(tmp_path / "o")]) == 3
    (tmp_path / "dim").mkdir()
    dim = write_set(tmp_path / "dim", [np.eye(2), np.eye(3)])
    assert cli.main(["decompose", "--manifest", dim, "--out", str(tmp_path / "o")]) == 4
    assert cli.main(["sweep", "--manifest", good, "--grid", "log:1:10:1", "--out", str(tmp_path / "s.csv")]) == 5
    with pytest.raises(SystemExit) as exc:
        cli.main(["decompose", "--manifest", good])
    assert exc.value.code == 5
    monkeypatch.setattr(cli, "run_checks", lambda *a, **k: [("forced", 1.0, 0.0)])
    assert cli.main(["verify", "--manifest", good]) == 1


@crit(12, "CLI exit codes and report schema")
def test_criterion_12_report_schema(tmp_path):
    path = write_set(tmp_path, SPLIT_ROWS, pi=1.0)
    out = tmp_path / "out"
    assert cli.main(["decompose", "--manifest", path, "--out", str(out)]) == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["schema_version"] == 1 and rep["version"] and rep["pi"] == 1.0
    assert [round(x, 4) for x in rep["varsigma"]] == [1.0556, 1.1667]
    assert [s["label"] for s in rep["subspaces"]].count("isolated") == 1
    for b in rep["blocks"]:
        assert set(b) >= {"rows", "cols", "sigma", "reconstruction_residual"}
    assert set(rep["residuals"]) == {"max_reconstruction", "s_path_agreement", "s_t_relation"}
    for name in ("V.csv", "Z.csv", "U_1.csv", "U_2.csv", "U_3.csv", "sigma_1.csv", "sigma_2.csv", "sigma_3.csv"):
        assert (out / name).is_file()
    text = (out / "report.json").read_text()
    assert "NaN" not in text and "Infinity" not in text
