"""Acceptance gate: one test per release criterion, at stated tolerances.

Run with ``pytest tests/test_acceptance.py -v`` to get one pass/fail line
per criterion. Every suite also asserts its own runtime budget.
"""

from __future__ import annotations

import time
from dataclasses import replace

import numpy as np

from ncdkit.calibration import (
    base_accuracy_under_ncd,
    build_for_curve,
    calibrate_alpha,
    ood_rates,
)
from ncdkit.harness import EpisodeSpec, EvalConfig, run_episode, run_evaluation, run_sweep
from ncdkit.prototypes import (
    BankKind,
    Classification,
    DecisionConfig,
    Metric,
    classify_ncd,
    classify_vanilla,
    compute_prototypes,
)
from ncdkit.store import EmbeddingSet, Split, split_view
from ncdkit.synth import SynthConfig, generate, tune_sigma

from oracles import (
    bank_as_list,
    naive_calibrate,
    naive_classify_ncd,
    naive_classify_vanilla,
    naive_curve,
    naive_episode,
    naive_mean,
    naive_min_dists_and_correct,
)

BUDGETS = (0.0, 0.02, 0.05, 0.10, 1.0)


def _random_config(rng: np.random.Generator, dims=(8, 32, 64), bases=(5, 20, 50)) -> SynthConfig:
    return SynthConfig(
        dim=int(rng.choice(dims)),
        n_base=int(rng.choice(bases)),
        n_novel_pool=int(rng.integers(2, 5)),
        train_per_class=int(rng.integers(3, 9)),
        test_per_class=int(rng.integers(4, 9)),
        pool_per_class=int(rng.integers(3, 7)),
        sigma=float(np.exp(rng.uniform(np.log(0.05), np.log(1.0)))),
        novel_offset=float(rng.uniform(0.0, 1.0)),
        seed=int(rng.integers(0, 2**63)),
    )


def _passed(name: str, t0: float) -> None:
    print(f"[acceptance] {name}: PASS ({time.monotonic() - t0:.1f}s)")


def test_c1_calibration_guarantee_suite():
    t0 = time.monotonic()
    rng = np.random.default_rng(2024)
    for _ in range(200):
        cfg = _random_config(rng)
        emb = generate(cfg)
        bank = compute_prototypes(emb, Split.BASE_TRAIN, BankKind.BASE)
        curve = build_for_curve(split_view(emb, Split.BASE_TEST), bank, Metric.COSINE)
        for budget in BUDGETS:
            result = calibrate_alpha(curve, budget)
            assert result.achieved_for <= budget, (cfg, budget)
            i = int(np.searchsorted(curve.thresholds, result.alpha_star))
            assert curve.thresholds[i] == result.alpha_star
            if i > 0:  # minimality: the next smaller candidate violates the budget
                assert curve.for_at[i - 1] > budget, (cfg, budget)
    elapsed = time.monotonic() - t0
    assert elapsed < 60.0, f"calibration suite took {elapsed:.1f}s"
    _passed("calibration guarantee (200 configs x 5 budgets)", t0)


def test_c2_monotonicity_suite():
    t0 = time.monotonic()
    rng = np.random.default_rng(77)
    grid = np.linspace(0.0, 2.0, 100)
    for _ in range(20):
        cfg = _random_config(rng, dims=(8, 32), bases=(5, 20))
        emb = generate(cfg)
        bank = compute_prototypes(emb, Split.BASE_TRAIN, BankKind.BASE)
        base = split_view(emb, Split.BASE_TEST)
        novel = split_view(emb, Split.NOVEL_POOL)
        curve = build_for_curve(base, bank, Metric.COSINE)

        accs = np.array(
            [base_accuracy_under_ncd(base, bank, float(a), Metric.COSINE) for a in grid]
        )
        fors = curve.bcr - accs
        rates = np.array(
            [ood_rates(base, novel, bank, float(a), Metric.COSINE) for a in grid]
        )
        assert (np.diff(fors) <= 0.0).all()
        assert (np.diff(rates[:, 0]) <= 0.0).all()  # fpr
        assert (np.diff(rates[:, 1]) <= 0.0).all()  # tpr, same antitone routing

        row = run_episode(
            emb, bank, EpisodeSpec(n_novel=1, shots=1, seed=cfg.seed),
            [float(a) for a in grid], Metric.COSINE,
        )
        ncr = np.array([row.ncr[float(a)] for a in grid])
        assert (np.diff(ncr) <= 0.0).all()
    elapsed = time.monotonic() - t0
    assert elapsed < 60.0, f"monotonicity suite took {elapsed:.1f}s"
    _passed("monotonicity of FOR/fpr/NCR over alpha grid (20 configs)", t0)


def test_c3_boundary_identities():
    t0 = time.monotonic()
    cfg = SynthConfig(
        dim=32, n_base=10, n_novel_pool=4, train_per_class=10, test_per_class=10,
        pool_per_class=5, sigma=0.4, novel_offset=0.3, seed=5,
    )
    emb = generate(cfg)
    bank = compute_prototypes(emb, Split.BASE_TRAIN, BankKind.BASE)
    base = split_view(emb, Split.BASE_TEST)
    novel = split_view(emb, Split.NOVEL_POOL)
    curve = build_for_curve(base, bank, Metric.COSINE)

    # precondition for the alpha=0 identity: nothing sits exactly on a prototype
    assert curve.thresholds[1] > 0.0 or curve.base_acc_at[0] == 0.0
    assert base_accuracy_under_ncd(base, bank, 0.0, Metric.COSINE) == 0.0
    assert curve.bcr - base_accuracy_under_ncd(base, bank, 0.0, Metric.COSINE) == curve.bcr
    fpr0, tpr0 = ood_rates(base, novel, bank, 0.0, Metric.COSINE)
    assert tpr0 == 1.0 and fpr0 == 1.0

    # alpha = 2 with cosine: the rule can never fire
    assert curve.bcr - base_accuracy_under_ncd(base, bank, 2.0, Metric.COSINE) == 0.0
    fpr2, tpr2 = ood_rates(base, novel, bank, 2.0, Metric.COSINE)
    assert (fpr2, tpr2) == (0.0, 0.0)
    for seed in range(5):
        row = run_episode(
            emb, bank, EpisodeSpec(n_novel=2, shots=1, seed=seed), [2.0], Metric.COSINE
        )
        assert row.ncr[2.0] == 0.0
    _passed("boundary identities at alpha=0 and alpha=2", t0)


def test_c4_oracle_equivalence():
    t0 = time.monotonic()
    cfg = SynthConfig(
        dim=8, n_base=50, n_novel_pool=10, train_per_class=10, test_per_class=20,
        pool_per_class=8, sigma=0.5, novel_offset=0.4, seed=17,
    )
    emb = generate(cfg)  # 1000 base-test samples, 50 base classes
    base_bank = compute_prototypes(emb, Split.BASE_TRAIN, BankKind.BASE)
    base = split_view(emb, Split.BASE_TEST)
    assert base.n == 1000

    # prototype means: engine vs naive summation, bit-exact
    naive_base = []
    for cid in range(cfg.n_base):
        rows = [
            emb.features[i]
            for i in range(emb.n_records)
            if int(emb.class_ids[i]) == cid and int(emb.splits[i]) == int(Split.BASE_TRAIN)
        ]
        naive_base.append((cid, naive_mean(rows)))
    for proto, (cid, vec) in zip(base_bank.prototypes, naive_base):
        assert proto.class_id == cid
        assert proto.vector.tolist() == vec

    # classification: engine vs naive loops on 300 mixed queries
    novel_bank = compute_prototypes(emb, Split.NOVEL_POOL, BankKind.NOVEL)
    naive_novel = bank_as_list(novel_bank)
    pool = split_view(emb, Split.NOVEL_POOL)
    queries = np.concatenate([base.features[:150], pool.features[:150]])
    cfg_mid = DecisionConfig(metric=Metric.COSINE, alpha=0.45)
    for q in queries:
        got_v: Classification = classify_vanilla(q, base_bank, novel_bank, cfg_mid)
        exp_cid, exp_routed = naive_classify_vanilla(q, naive_base, naive_novel, "cosine")
        assert (got_v.predicted_class, got_v.routed_novel) == (exp_cid, exp_routed)
        got_n = classify_ncd(q, base_bank, novel_bank, cfg_mid)
        exp_cid, exp_routed, exp_min = naive_classify_ncd(
            q, naive_base, naive_novel, 0.45, "cosine"
        )
        assert (got_n.predicted_class, got_n.routed_novel) == (exp_cid, exp_routed)
        assert got_n.min_base_dist == exp_min

    # forgetting curve and calibration on all 1000 samples
    dists, correct = naive_min_dists_and_correct(
        base.features, base.class_ids, naive_base, "cosine"
    )
    thresholds, acc, forr, route, bcr = naive_curve(dists, correct, "cosine")
    curve = build_for_curve(base, base_bank, Metric.COSINE)
    assert curve.thresholds.tolist() == thresholds
    assert curve.base_acc_at.tolist() == acc
    assert curve.for_at.tolist() == forr
    assert curve.novel_route_rate_at.tolist() == route
    assert curve.bcr == bcr
    for budget in BUDGETS:
        got = calibrate_alpha(curve, budget)
        alpha, achieved = naive_calibrate(thresholds, forr, budget)
        assert (got.alpha_star, got.achieved_for) == (alpha, achieved)

    # full episodes
    alphas = [0.0, 0.3, 0.6, 1.0, 2.0]
    for seed in (0, 1, 2):
        for n_novel, shots in [(1, 1), (5, 2)]:
            row = run_episode(
                emb, base_bank, EpisodeSpec(n_novel=n_novel, shots=shots, seed=seed),
                alphas, Metric.COSINE,
            )
            classes, v_ncr, ncr, rates = naive_episode(
                emb, naive_base, n_novel, shots, seed, alphas, "cosine"
            )
            assert row.class_ids == tuple(classes)
            assert row.v_ncr == v_ncr
            assert row.ncr == ncr
            assert row.novel_route_rate == rates
    elapsed = time.monotonic() - t0
    assert elapsed < 120.0, f"oracle suite took {elapsed:.1f}s"
    _passed("oracle equivalence (curve, calibration, inference, episodes)", t0)


def test_c5_tradeoff_trend():
    t0 = time.monotonic()
    cfg = SynthConfig(
        dim=64, n_base=50, n_novel_pool=20, train_per_class=20, test_per_class=10,
        pool_per_class=20, sigma=0.3, novel_offset=0.25, seed=7,
    )
    cfg = replace(cfg, sigma=tune_sigma(0.80, cfg))
    emb = generate(cfg)
    bank = compute_prototypes(emb, Split.BASE_TRAIN, BankKind.BASE)
    curve = build_for_curve(split_view(emb, Split.BASE_TEST), bank, Metric.COSINE)
    assert 0.75 <= curve.bcr <= 0.85, f"BCR {curve.bcr} outside the target regime"

    v_means, ncr5_means = [], []
    for master_seed in range(5):
        report = run_evaluation(
            emb,
            EvalConfig(episodes=25, n_novel=1, shots=1, budgets=(0.02, 0.05),
                       master_seed=master_seed),
        )
        n2 = report.ncr_at_budget[0.02].mean
        n5 = report.ncr_at_budget[0.05].mean
        assert n5 >= n2 >= 0.0  # exact, per seed
        v_means.append(report.v_ncr.mean)
        ncr5_means.append(n5)
    assert float(np.mean(ncr5_means)) > float(np.mean(v_means)), (
        f"NCR@5FOR {np.mean(ncr5_means):.3f} should beat V-NCR {np.mean(v_means):.3f} "
        "in the one-shot regime"
    )
    elapsed = time.monotonic() - t0
    assert elapsed < 300.0, f"trend suite took {elapsed:.1f}s"
    _passed("one-shot trade-off trend (25 episodes x 5 seeds)", t0)


def test_c6_shots_ablation_trend():
    t0 = time.monotonic()
    cfg = SynthConfig(
        dim=64, n_base=50, n_novel_pool=20, train_per_class=20, test_per_class=10,
        pool_per_class=20, sigma=0.3, novel_offset=0.25, seed=7,
    )
    cfg = replace(cfg, sigma=tune_sigma(0.80, cfg))
    emb = generate(cfg)
    shots_values = [1, 2, 3, 5]
    v_by_k = {k: [] for k in shots_values}
    gap_by_k = {k: [] for k in shots_values}
    for master_seed in range(20):
        results = run_sweep(
            emb, "K", shots_values,
            EvalConfig(episodes=25, n_novel=5, shots=1, budgets=(0.05,),
                       query_per_class=10, master_seed=master_seed),
        )
        for k, report in results:
            v_by_k[int(k)].append(report.v_ncr.mean)
            gap_by_k[int(k)].append(report.ncr_at_budget[0.05].mean - report.v_ncr.mean)
    v_means = [float(np.mean(v_by_k[k])) for k in shots_values]
    gap_means = [float(np.mean(gap_by_k[k])) for k in shots_values]
    assert all(a <= b for a, b in zip(v_means, v_means[1:])), v_means
    assert all(a >= b for a, b in zip(gap_means, gap_means[1:])), gap_means
    elapsed = time.monotonic() - t0
    assert elapsed < 600.0, f"shots ablation took {elapsed:.1f}s"
    _passed(f"shots ablation trend (V-NCR {v_means}, gap {gap_means})", t0)


def test_c7_format_and_determinism(tmp_path):
    t0 = time.monotonic()
    cfg = SynthConfig(
        dim=32, n_base=12, n_novel_pool=6, train_per_class=10, test_per_class=8,
        pool_per_class=8, sigma=0.4, novel_offset=0.3, seed=123,
    )
    emb = generate(cfg)
    data = emb.to_bytes()
    assert EmbeddingSet.from_bytes(data).to_bytes() == data  # bit-exact round trip
    path = tmp_path / "d.emb1"
    path.write_bytes(data)
    from ncdkit.store import load_emb1

    assert load_emb1(path) == emb

    config = EvalConfig(episodes=10, n_novel=2, shots=1, master_seed=99)
    texts = {
        run_evaluation(emb, config).to_json(),
        run_evaluation(emb, config).to_json(),
        run_evaluation(emb, replace(config, threads=4)).to_json(),
        run_evaluation(emb, replace(config, threads=7)).to_json(),
    }
    assert len(texts) == 1, "EvalReport must not depend on repetition or thread count"
    _passed("EMB1 round trip and thread-count determinism", t0)
