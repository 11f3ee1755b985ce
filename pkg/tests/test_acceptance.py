"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line."""

import random
import time

import numpy as np
import pytest
from conftest import record
from oracles import brute_series, numeric_gradients, random_gradient_case, relative_error

from lsa import barrington as B
from lsa import cli
from lsa import groups as G
from lsa.embed import ProbeParams, TrainConfig, batch_gradients, make_encoder
from lsa.evalrec import compounding_sim
from lsa.pipeline import evaluate_split, prepare_encoder, train_on_dataset
from lsa.scene import (
    CANONICAL,
    SPHERE_ID,
    Dataset,
    DatasetConfig,
    PoseState,
    apply,
    check_injectivity,
    level_generators,
    object_mesh,
    render,
    rotation_generators,
    rotation_only_pairs,
    sample_state_pairs,
)


def test_criterion_1_group_algebra():
    t0 = time.perf_counter()
    s4 = G.derived_series(G.preset("S4"))
    a5 = G.derived_series(G.preset("A5"))
    ico = G.derived_series(G.permutation_spec_of(G.preset("icosahedral")))
    elapsed = time.perf_counter() - t0
    oracle_s4 = brute_series([g.images for g in G.preset("S4").generators])
    oracle_a5 = brute_series([g.images for g in G.preset("A5").generators])
    ok = (
        s4.series_orders == [24, 12, 4, 1] == oracle_s4
        and s4.level == G.Level.SOLVABLE_NON_ABELIAN
        and a5.series_orders[0] == a5.series_orders[-1] == 60
        and a5.series_orders == oracle_a5
        and a5.level == ico.level == G.Level.NON_SOLVABLE
        and elapsed < 2.0
    )
    record(1, ok, f"S4 {s4.series_orders} {s4.level.value}, A5 {a5.series_orders} {a5.level.value}, {elapsed:.2f}s")
    assert ok


def test_criterion_2_barrington():
    rng = random.Random(2024)
    t0 = time.perf_counter()
    bad = []
    for i in range(100):
        f = B.random_formula(rng, rng.randint(0, 4), rng.randint(1, 8))
        p = B.compile_formula(f)
        n = max(B.num_vars(f), 1)
        if len(p) != 4 ** B.depth(f):
            bad.append((i, "length"))
        if not B.truth_table_report(f, p, n)["verified"]:
            bad.append((i, "truth table"))
        for bits in np.ndindex(*(2,) * n):
            out = B.evaluate(p, bits)
            if not (out.is_identity() or out == p.accept_cycle):
                bad.append((i, "output"))
                break
    elapsed = time.perf_counter() - t0
    ok = not bad and elapsed < 30.0
    record(2, ok, f"100 formulas, {len(bad)} problems, {elapsed:.1f}s")
    assert ok, bad[:5]


def test_criterion_3_word_problem():
    rng = random.Random(3)
    failures = 0
    for name in ("S4", "A5", "Z5", "icosahedral"):
        spec = G.preset(name)
        for _ in range(1000):
            word = [(rng.randrange(len(spec.generators)), rng.random() < 0.5) for _ in range(rng.randint(1, 40))]
            if not G.is_identity(G.word_evaluate(spec, word + G.inverse_word(word))):
                failures += 1
    v = np.array([0.4, -0.7, 1.3])
    closure_err = float(np.max(np.abs(G.iterated_matrix_action([G.axis_rotation("z", 30)] * 12, v) - v)))
    ok = failures == 0 and closure_err < 1e-9
    record(3, ok, f"{failures} non-identity words over 4 groups, 360 deg closure error {closure_err:.1e}")
    assert ok


def test_criterion_4_lsa_generation():
    problems = []
    # level 1: every pair commutes on states, and interior translations shift frames exactly
    start = PoseState(translation_2d=(20.0, -20.0))
    gens1 = level_generators(1)
    for a in gens1:
        for b in gens1:
            if apply(apply(start, a), b) != apply(apply(start, b), a):
                problems.append(f"L1 {a.name},{b.name}")
    mesh = object_mesh(0)
    base = render(CANONICAL, mesh)
    for g in gens1:
        dx, dy = (int(v) for v in g.params["vector"])
        if not np.array_equal(render(apply(CANONICAL, g), mesh), np.roll(base, (dy, dx), axis=(0, 1))):
            problems.append(f"L1 frame shift {g.name}")
    # documented witnesses: ScaleUp/R at level 2, RX/RY at level 3
    g2, g3 = level_generators(2), level_generators(3)
    if apply(apply(CANONICAL, g2[0]), g2[2]) == apply(apply(CANONICAL, g2[2]), g2[0]):
        problems.append("L2 witness commutes")
    if apply(apply(CANONICAL, g3[0]), g3[1]).distance(apply(apply(CANONICAL, g3[1]), g3[0])) < 1e-6:
        problems.append("L3 witness commutes")
    # injectivity on procedural meshes, 100 pairs per level spread over the 7 objects
    min_dist = {}
    for level in (1, 2, 3):
        pairs = sample_state_pairs(level, 100, seed=level)
        dists = []
        for obj in range(7):
            rep = check_injectivity(pairs[obj::7], object_mesh(obj))
            if not rep["passed"]:
                problems.append(f"L{level} injectivity on object {obj}")
            dists.append(rep["min_distance"])
        min_dist[level] = min(dists)
    sphere = check_injectivity(rotation_only_pairs(20, seed=0), object_mesh(SPHERE_ID))
    if sphere["passed"]:
        problems.append("sphere control passed injectivity")
    # generation time for 500 trajectories
    t0 = time.perf_counter()
    ds = Dataset.generate(DatasetConfig(level=3, train_trajectories=430, test_trajectories=70))
    elapsed = time.perf_counter() - t0
    if len(ds.trajectories) != 500 or elapsed >= 120.0:
        problems.append(f"500-trajectory generation took {elapsed:.1f}s")
    ok = not problems
    dists = ", ".join(f"L{k}={v:.0f}" for k, v in min_dist.items())
    detail = f"min distances {dists}, sphere violations {len(sphere['violations'])}/20, 500 trajectories in {elapsed:.1f}s"
    record(4, ok, detail + (f"; {problems}" if problems else ""))
    assert ok, problems


@pytest.fixture(scope="module")
def default_datasets():
    """Default-scale datasets (210 atomic training tuples, 35 test walks) per level."""
    return {level: Dataset.generate(DatasetConfig(level=level)) for level in (1, 2, 3)}


def test_criterion_5_oracle_encoder(default_datasets):
    ds = default_datasets[1]
    enc = make_encoder("oracle")
    cfg = TrainConfig(learning_rate=1e-2, batch_size=64, epochs=200, seed=42)
    probe, curve = train_on_dataset(ds, enc, cfg)
    report = evaluate_split(ds, probe, enc, "mse")
    ratios = [s.ratio for s in report.per_step]
    ok = len(ratios) == 20 and all(r is not None and r < 1.0 for r in ratios)
    record(5, ok, f"final train loss {curve[-1]:.1e}, max ratio over N=1..20 {max(ratios):.2e}")
    assert ok


def test_criterion_6_hierarchy(default_datasets):
    t0 = time.perf_counter()
    enc = make_encoder("downsample")
    auc = {}
    for loss_kind in ("mse", "cosine"):
        cfg = TrainConfig(learning_rate=1e-4, batch_size=1024, epochs=50, seed=42, loss_kind=loss_kind)
        for level, ds in default_datasets.items():
            e = prepare_encoder(ds, enc)
            probe, _ = train_on_dataset(ds, e, cfg)
            auc[(loss_kind, level)] = evaluate_split(ds, probe, e, loss_kind).auc()
    elapsed = time.perf_counter() - t0
    tuples = min(len(ds.train) for ds in default_datasets.values())
    ok = all(auc[(k, 3)] > auc[(k, 1)] for k in ("mse", "cosine")) and elapsed < 1800 and tuples >= 200
    detail = "; ".join(
        f"{k} AUC L1={auc[(k, 1)]:.4g} L2={auc[(k, 2)]:.4g} L3={auc[(k, 3)]:.4g}" for k in ("mse", "cosine")
    )
    record(6, ok, f"{detail}; {tuples} tuples/level, {elapsed:.0f}s")
    assert ok, detail


def test_criterion_7_error_compounding():
    eps = 0.01
    scalar = compounding_sim(eps, 20, [np.array([[1.0]])], trials=10, noise="systematic")
    scalar_err = float(np.max(np.abs(scalar.mean - ((1 + eps) ** np.arange(1, 21) - 1))))
    so3 = compounding_sim(eps, 20, rotation_generators(), trials=10_000, seed=0)
    monotone = bool(np.all(np.diff(so3.mean) >= 0))
    bounded = bool(np.all(so3.mean <= 2 * so3.closed_form()))
    ok = scalar_err < 1e-9 and monotone and bounded
    record(7, ok, f"scalar error {scalar_err:.1e}, SO(3) mean drift at N=20 {so3.mean[-1]:.4f} "
                  f"vs bound {2 * so3.closed_form()[-1]:.4f}, monotone={monotone}")
    assert ok


def test_criterion_8_determinism(tmp_path, monkeypatch, capsys):
    config = tmp_path / "tiny.yaml"
    config.write_text(
        "object_seeds: [0, 1]\ntrain_trajectories: 12\ntest_trajectories: 3\n"
        "injectivity_pairs: 10\ntrain: {epochs: 5, batch_size: 8}\n"
    )
    roots = [tmp_path / "run_a", tmp_path / "run_b"]
    codes = []
    for root in roots:
        monkeypatch.setenv("LSA_OUT", str(root))
        codes.append(cli.run(["repro", "--config", str(config), "--seed", "42", "--workers", "1"]))
    capsys.readouterr()
    files = sorted(p.relative_to(roots[0]) for p in roots[0].rglob("*") if p.is_file())
    key = [f for f in files if f.name == "manifest.json" or f.name.startswith(("probe_", "report_"))]
    differing = [str(f) for f in files if (roots[0] / f).read_bytes() != (roots[1] / f).read_bytes()]
    ProbeParams.load(roots[0] / "level3" / "probe_mse.json")
    ok = codes == [0, 0] and len(key) == 3 * (1 + 2 * 3) and not differing
    record(8, ok, f"{len(files)} files compared ({len(key)} manifests/probes/reports), {len(differing)} differ")
    assert ok, differing[:5]


def test_criterion_9_gradients():
    rng = np.random.default_rng(9)
    worst = 0.0
    for _ in range(100):
        W, b, E, z, actions, target = random_gradient_case(rng)
        for kind in ("mse", "cosine"):
            _, grads, _ = batch_gradients(ProbeParams(W, b, E), z, actions, target, kind)
            num = numeric_gradients(W, b, E, z, actions, target, kind)
            worst = max(worst, *(relative_error(grads[k], num[k]) for k in grads))
    ok = worst < 1e-4
    record(9, ok, f"worst relative error {worst:.1e} over 100 configurations x 2 losses")
    assert ok
