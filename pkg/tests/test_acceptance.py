"""Acceptance criteria, one test each; every test prints a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -s``; the lines are also
repeated in the terminal summary of any pytest run that includes this file.
"""
import json
import time

import numpy as np
import pytest

from chowstab import bundles as bd
from chowstab import chow, cli, energies as en, hypergeo as hg, registry
from chowstab.projlin import GeodesicDirection, exp_path, fs_gram, phi_dot
from chowstab.sampler import SeededStream, sample_hypersurface, sample_pn_batch
from chowstab.varieties import FrozenBatch

SIGMAS = 3.0
RESULTS: list[str] = []


def report(num: int, title: str, ok: bool, detail: str, t0: float):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {num:2d} {title}: {detail} ({time.perf_counter() - t0:.1f}s)"
    RESULTS.append(line)
    print(line)
    assert ok, line


def diag_sigma(size: int, t: float):
    return exp_path(registry.direction("diag", size), t)


def test_01_moment_identity():
    t0 = time.perf_counter()
    worst = 0.0
    for N in (1, 2, 3):
        b = sample_pn_batch(SeededStream(100 + N), N, 100_000)
        z = b.points / np.linalg.norm(b.points, axis=1, keepdims=True)
        outer = z[:, :, None] * z[:, None, :].conj()
        for i in range(N + 1):
            for j in range(N + 1):
                est = b.mean(outer[:, i, j])
                worst = max(worst, abs(est.value - (i == j) / (N + 1)) / est.stderr)
    elapsed = time.perf_counter() - t0
    report(1, "moment identity on P^1..P^3", worst <= SIGMAS and elapsed < 10,
           f"max |entry error| = {worst:.2f} stderr", t0)


def test_02_degree_mass_identity():
    t0 = time.perf_counter()
    rows, ok = [], True
    for d in (2, 3):
        b = sample_hypersurface(SeededStream(200 + d), registry.variety(
            "fermat_conic" if d == 2 else "fermat_cubic").f, 10_000)
        est = b.integrate(np.ones(len(b)))
        ok &= abs(est.value - d) <= SIGMAS * est.stderr + 1e-9
        rows.append(f"d={d}: {est.value:.6f}+-{est.stderr:.1e}")
    report(2, "sampler mass equals degree", ok and time.perf_counter() - t0 < 30, ", ".join(rows), t0)


def test_03_scalar_curvature_calibration():
    t0 = time.perf_counter()
    f = registry.variety("fermat_conic").f
    b = sample_hypersurface(SeededStream(300), f, 20_000)
    s = b.mean(hg.scalar_curvature(f, b.points))
    ok_avg = abs(s.value - hg.mu_invariant(1, 2)) <= SIGMAS * s.stderr + 1e-6
    worst = 0.0
    for name in ("hyperplane_p2", "hyperplane_p3"):
        v = registry.variety(name)
        x = sample_hypersurface(SeededStream(301), v.f, 200).points
        fr = hg.tangent_frame(v.f, x)
        g = fs_gram(fr.base, fr.vectors)
        ric = hg.ricci_matrix(v.f, fr)
        worst = max(worst, float(np.max(np.abs(ric - (v.dim + 1) * g)) / np.max(np.abs(g))))
    report(3, "scalar curvature calibration", ok_avg and worst <= 1e-4,
           f"conic mean s = {s.value:.4f}+-{s.stderr:.1e} (mu = 1); hyperplane Ric rel err {worst:.1e}", t0)


@pytest.mark.parametrize("t", [0.2, 0.5])
def test_04_chow_norm_identity(t):
    t0 = time.perf_counter()
    r = chow.theorem5_check(registry.variety("fermat_conic").f, diag_sigma(3, t))
    ok = r.passed and r.relative_precision <= 0.02 and time.perf_counter() - t0 < 120
    report(4, f"Chow norm identity, conic, t={t}", ok,
           f"lhs {r.lhs.value:.5f}+-{r.lhs.stderr:.1e}, rhs {r.rhs.value:.5f}+-{r.rhs.stderr:.1e}, "
           f"gap {r.gap:.1e} <= {r.tolerance:.1e}, rel prec {100 * r.relative_precision:.2f}%", t0)


@pytest.mark.parametrize("name", ["fermat_conic", "fermat_cubic"])
@pytest.mark.parametrize("t", [0.2, 0.5])
def test_05_mabuchi_identity(name, t):
    t0 = time.perf_counter()
    r = chow.theorem6_check(registry.variety(name).f, diag_sigma(3, t))
    ok = r.passed and r.relative_precision <= 0.05 and time.perf_counter() - t0 < 300
    report(5, f"Mabuchi / sharp-norm identity, {name}, t={t}", ok,
           f"lhs {r.lhs.value:.5f}+-{r.lhs.stderr:.1e}, rhs {r.rhs.value:.5f}+-{r.rhs.stderr:.1e}, "
           f"gap {r.gap:.1e} <= {r.tolerance:.1e}, rel prec {100 * r.relative_precision:.2f}%", t0)


@pytest.mark.parametrize("name", ["o_minus_one_p1", "taut_gr12"])
def test_06_gieseker_identity(name):
    t0 = time.perf_counter()
    b = registry.bundle(name)
    r = bd.theorem2_check(b, bd.sigma_diag(0.4, b.N), 100_000, 100_000)
    report(6, f"Donaldson L / Gieseker identity, {name}", r.passed and time.perf_counter() - t0 < 60,
           f"lhs {r.lhs.value:.5f}+-{r.lhs.stderr:.1e}, rhs {r.rhs.value:.5f}+-{r.rhs.stderr:.1e}, "
           f"gap {r.gap:.1e} <= {r.tolerance:.1e}", t0)


@pytest.mark.parametrize("name", ["fermat_conic", "o_minus_one_p1"])
def test_07_convexity(name):
    t0 = time.perf_counter()
    target = registry.lookup(name)
    if isinstance(target, bd.BundleChart):
        batch = bd.FrozenBundleBatch.draw(target, 20_000, SeededStream(700))
    else:
        batch = FrozenBatch.draw(target, 20_000, SeededStream(700))
    res = cli.convexity_suite(target, batch, n_dirs=20, seed=7, tol=SIGMAS)
    report(7, f"geodesic convexity, {name}", res["pass"],
           f"{res['n_pass']}/{res['n_directions']} directions pass", t0)


@pytest.mark.parametrize("name", ["fermat_conic", "o_minus_one_p1"])
def test_08_criticality_iff_balanced(name):
    t0 = time.perf_counter()
    target = registry.lookup(name)
    size = 3 if name == "fermat_conic" else 2
    if isinstance(target, bd.BundleChart):
        batch = bd.FrozenBundleBatch.draw(target, 20_000, SeededStream(800)).symmetrized()
    else:
        batch = FrozenBatch.draw(target, 20_000, SeededStream(800)).symmetrized()
    res = cli.criticality_suite(target, batch, diag_sigma(size, 0.2), max_iters=200, tol=1e-9)
    ok = res["pass"] and res["iterations"] <= 200
    report(8, f"criticality iff balanced, perturbed {name}", ok,
           f"{res['iterations']} iterations, residual {res['residual_norm']:.1e}, "
           f"max |dF| {res['max_abs_derivative']:.1e}", t0)


def test_09_grassmannian_balance():
    t0 = time.perf_counter()
    rng = np.random.default_rng(900)
    worst = 0.0
    for j in range(5):
        c = GeodesicDirection.random(4, rng)
        est = chow.grassmannian_balance_test(3, 2, c, 100_000, SeededStream(900, j))
        worst = max(worst, abs(est.value) / est.stderr)
    report(9, "Grassmannian balance on Gr(2,4)", worst <= SIGMAS,
           f"max |estimate| = {worst:.2f} stderr over 5 directions", t0)


N_LINES_DERIV = 600_000


@pytest.mark.parametrize("name", sorted(registry.VARIETIES) + sorted(registry.BUNDLES))
def test_10_derivative_oracles(name):
    t0 = time.perf_counter()
    target = registry.lookup(name)
    h = 1e-4
    if isinstance(target, bd.BundleChart):
        size = target.N
        c = registry.direction("diag", size)
        s = diag_sigma(size, 0.3)
        batch = bd.FrozenBundleBatch.draw(target, 50_000, SeededStream(1000))
        fd = (bd.donaldson_L(batch, exp_path(c, h, s)).value
              - bd.donaldson_L(batch, exp_path(c, -h, s)).value) / (2 * h)
        an = bd.L_derivative(batch, s, c)
        extra = ""
    else:
        size = target.f.n_vars
        c = registry.direction("diag", size)
        s = diag_sigma(size, 0.3)
        batch = FrozenBatch.draw(target, N_LINES_DERIV, SeededStream(1000))
        fd_pts = (en.f0_density(batch, exp_path(c, h, s))
                  - en.f0_density(batch, exp_path(c, -h, s))) / (2 * h)
        fd = batch.mean(fd_pts).value
        an = en.f0_derivative(batch, s, c)
        _, r = en._ratios(batch, s)
        gap = batch.mean(fd_pts + phi_dot(s, c.matrix, batch.x) * r[:, 0])
        extra = f", paired gap stderr {gap.stderr:.1e}"
    rel = abs(fd - an.value) / abs(an.value)
    report(10, f"derivative vs finite difference, {name}", rel <= 1e-3,
           f"analytic {an.value:.6f}, FD {fd:.6f}, rel diff {rel:.1e}{extra}", t0)


def test_11_reproducibility(tmp_path):
    t0 = time.perf_counter()
    base = dict(command="verify", target="fermat_conic", samples=5000, seed=11,
                checks=["theorem5", "theorem6", "convexity"])
    runs = []
    for w in (1, 3):
        cfg = cli.RunConfig(**base, workers=w, out=str(tmp_path / f"w{w}"))
        manifest, _ = cli.run(cfg)
        runs.append(json.dumps(manifest["results"], sort_keys=True))
    # re-run from the persisted manifest's config echo
    echo = json.loads((tmp_path / "w1" / "manifest.json").read_text())["config"]
    echo["out"] = str(tmp_path / "again")
    again, _ = cli.run(cli.RunConfig(**echo))
    runs.append(json.dumps(again["results"], sort_keys=True))
    ok = runs[0] == runs[1] == runs[2]
    report(11, "bit-identical manifest re-runs", ok,
           "workers 1, workers 3 and manifest re-run identical" if ok else "results differ", t0)
