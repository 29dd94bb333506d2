"""Acceptance suite: one test per criterion, each printing a PASS line.

Run with `pytest tests/test_acceptance.py -v -s`. The heavy end-to-end
criteria (9, 10, 13) dominate the runtime (~10 minutes on a 2-core CPU);
criteria that pin the full default training protocol use it verbatim,
the remaining multi-seed studies use reduced epoch budgets noted inline.
"""

import json
import time

import numpy as np
import pytest
from fastapi.testclient import TestClient

from shear_oracle.cli import execute
from shear_oracle.data import (
    ScalerParams,
    split_train_test,
    transform_features,
    transform_target,
    inverse_transform,
)
from shear_oracle.explain import BackgroundSet, exact_shapley, global_summary, kernel_shap
from shear_oracle.mlp import (
    MlpConfig,
    MlpParams,
    backward,
    forward_train,
    init_params,
    sample_dropout_masks,
)
from shear_oracle.model_io import ModelFormatError, load_model, save_model
from shear_oracle.numeric import Rng, derive_seed
from shear_oracle.service import create_app
from shear_oracle.synth import default_generator_spec, generate
from shear_oracle.training import (
    TrainConfig,
    clip_gradients,
    cross_validate,
    gradient_global_norm,
    lr_at_epoch,
    run_ablation,
    train,
)

from util import (
    assert_json_close,
    build_service_models,
    showcase_request,
    fn_bundle,
    mlp_bundle,
    normalize_checksums,
)

GEN_SEED = 42  # documented seed for the synthetic end-to-end criterion


def _pass(n: int, msg: str) -> None:
    print(f"\nPASS criterion {n}: {msg}")


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    return tmp_path_factory.mktemp("acceptance")


@pytest.fixture(scope="module")
def synth_csv(workdir):
    path = workdir / "synth500.csv"
    assert execute(["gen-data", "--n", "500", "--seed", str(GEN_SEED), "--out", str(path)]) == 0
    return path


@pytest.fixture(scope="module")
def tiny17_bundle():
    """A quickly trained real 17-feature model for the attribution criteria."""
    dataset, _ = generate(default_generator_spec(), 200, Rng(1000))
    ds = dataset.for_target("friction")
    tr, te = split_train_test(ds, 0.1, Rng(7))
    config = TrainConfig(epochs=150, seed=11)
    bundle, _ = train(
        tr, te, MlpConfig(17, (16, 8), 0.1), config, background_size=3
    )
    return bundle


def test_01_gradient_correctness():
    t0 = time.monotonic()
    config = MlpConfig(input_size=8, hidden_sizes=(8, 6, 5, 4), dropout_p=0.2)
    params = init_params(config, Rng(31))
    x = Rng(32).uniform(-1.0, 1.0, (9, 8))
    y = Rng(33).uniform(0.0, 1.0, 9)
    masks = sample_dropout_masks(config, 9, Rng(34))
    trace = forward_train(params, x, config, dropout_masks=masks)
    grads, _ = backward(params, trace, y)

    def loss():
        t = forward_train(params, x, config, dropout_masks=masks)
        return float(np.mean((t.outputs - y) ** 2))

    h = 1e-5
    checked = 0
    worst = 0.0
    coord_rng = Rng(35)
    for layer in range(5):
        for kind in ("w", "b"):
            arr = params.weights[layer] if kind == "w" else params.biases[layer]
            analytic_arr = (grads.weights if kind == "w" else grads.biases)[layer]
            for flat in coord_rng.permutation(arr.size)[: min(arr.size, 20)]:
                ix = np.unravel_index(int(flat), arr.shape)
                keep = arr[ix]
                arr[ix] = keep + h
                up = loss()
                arr[ix] = keep - h
                down = loss()
                arr[ix] = keep
                fd = (up - down) / (2 * h)
                analytic = analytic_arr[ix]
                checked += 1
                if abs(fd) < 1e-12 and abs(analytic) < 1e-12:
                    continue
                rel = abs(analytic - fd) / max(abs(analytic), abs(fd))
                worst = max(worst, rel)
                assert rel <= 1e-4, f"layer {layer} {kind}{ix}: rel {rel}"
    elapsed = time.monotonic() - t0
    assert checked >= 100
    assert elapsed < 30.0
    _pass(1, f"{checked} coordinates across 5 layers, worst rel err {worst:.2e}, {elapsed:.1f}s")


def test_02_scheduler_exactness():
    config = TrainConfig()
    values = [lr_at_epoch(config, e) for e in (0, 299, 300, 900)]
    assert values[0] == 0.005
    assert values[1] == 0.005
    assert values[2] == 0.004
    assert values[3] == 0.00256
    _pass(2, "lr at epochs 0/299/300/900 == 0.005/0.005/0.004/0.00256 exactly")


def test_03_clipping():
    for seed in range(25):
        rng = Rng(seed)
        scale = 10.0 ** float(rng.uniform(-3, 3))
        grads = MlpParams(
            weights=[rng.uniform(-scale, scale, (30, 20)), rng.uniform(-scale, scale, (5, 30))],
            biases=[rng.uniform(-scale, scale, 30), rng.uniform(-scale, scale, 5)],
        )
        once = clip_gradients(grads, 1.0)
        assert gradient_global_norm(once) <= 1.0 + 1e-12
        twice = clip_gradients(once, 1.0)
        for a, b in zip(once.weights + once.biases, twice.weights + twice.biases):
            assert np.array_equal(a, b)
    _pass(3, "post-clip norm <= 1+1e-12 over 25 scales, re-clip bit-identical")


def test_04_scaler_round_trip():
    rng = Rng(404)
    params = ScalerParams(
        x_min=rng.uniform(-5, 0, 6), x_max=rng.uniform(1, 8, 6), y_min=-17.5, y_max=260.25
    )
    y = rng.uniform(-1e3, 1e3, 10_000)
    back = inverse_transform(params, transform_target(params, y))
    assert np.all(np.abs(back - y) <= 1e-12 * np.maximum(1.0, np.abs(y)))
    x = rng.uniform(-10, 10, (10_000, 6))
    scaled = transform_features(params, x)
    x_back = scaled * (params.x_max - params.x_min) + params.x_min
    assert np.all(np.abs(x_back - x) <= 1e-12 * np.maximum(1.0, np.abs(x)))
    assert np.array_equal(transform_features(params, params.x_min), np.zeros(6))
    assert np.array_equal(transform_features(params, params.x_max), np.ones(6))
    _pass(4, "10,000-vector round trip within 1e-12; endpoints map to 0/1 exactly")


def test_05_local_accuracy_trained_model(tiny17_bundle):
    t0 = time.monotonic()
    bundle = tiny17_bundle
    instances, _ = generate(default_generator_spec(), 100, Rng(1001))
    x = instances.feature_matrix()
    preds, _ = bundle.predict_native(x)
    worst = 0.0
    for i in range(100):
        exact = exact_shapley(bundle, x[i], exact_limit=17)
        kernel = kernel_shap(bundle, x[i], n_samples="full")
        for expl in (exact, kernel):
            residual = abs(expl.base_value + expl.phi.sum() - preds[i])
            tol = 1e-6 * max(1.0, abs(preds[i]))
            worst = max(worst, residual / tol)
            assert residual <= tol, f"instance {i} {expl.method}: residual {residual}"
    _pass(
        5,
        f"base+sum(phi) reconstructs f(x) on 100 instances, exact and kernel-full "
        f"(worst residual {worst:.1e} of tolerance, {time.monotonic() - t0:.0f}s)",
    )


def test_06_exact_kernel_equivalence():
    t0 = time.monotonic()
    worst = 0.0
    for m in range(2, 13):
        bundle = mlp_bundle(m, hidden=(6, 3), seed=m, background=Rng(m + 40).uniform(0, 1, (5, m)))
        x = Rng(m + 80).uniform(0, 1, m)
        exact = exact_shapley(bundle, x)
        kernel = kernel_shap(bundle, x, n_samples="full")
        delta = float(np.max(np.abs(exact.phi - kernel.phi)))
        worst = max(worst, delta)
        assert delta <= 1e-6, f"M={m}: max |delta phi| {delta}"
    elapsed = time.monotonic() - t0
    assert elapsed < 120.0
    _pass(6, f"M in 2..12 on 5-row backgrounds, worst |delta phi| {worst:.1e}, {elapsed:.1f}s")


def test_07_missingness_and_dummy():
    bundle = mlp_bundle(8, hidden=(6, 3), seed=70, background=Rng(71).uniform(0, 1, (1, 8)))
    x = bundle.background[0].copy()
    expl = exact_shapley(bundle, x)
    assert np.max(np.abs(expl.phi)) <= 1e-9

    dummy = mlp_bundle(8, hidden=(6, 3), seed=72)
    dummy.params.weights[0][:, 5] = 0.0
    x = Rng(73).uniform(0, 1, 8)
    expl = exact_shapley(dummy, x)
    assert abs(expl.phi[5]) <= 1e-9
    _pass(7, "phi = 0 within 1e-9 for baseline-equal instance and zero-weight feature")


def test_08_sampled_kernel_convergence():
    coefs = Rng(800).uniform(-3, 3, 17)
    bg_rows = Rng(801).uniform(0, 1, (10, 17))
    bundle = fn_bundle(lambda q: q @ coefs + 2.0, 17, background=bg_rows)
    x = Rng(802).uniform(0, 1, 17)
    analytic = coefs * (x - bg_rows.mean(axis=0))
    errors = np.zeros(17)
    for seed in range(5):
        expl = kernel_shap(bundle, x, n_samples=4096, seed=seed)
        errors += np.abs(expl.phi - analytic)
    errors /= 5
    bound = 0.05 * np.max(np.abs(analytic))
    assert np.max(errors) <= bound, f"max seed-avg error {np.max(errors)} > {bound}"
    _pass(
        8,
        f"M=17, n_samples=4096: seed-averaged per-coordinate error "
        f"{np.max(errors):.2e} <= 5% of max|phi| ({bound:.2e})",
    )


def test_09_synthetic_end_to_end(workdir, synth_csv):
    t0 = time.monotonic()
    model_path = workdir / "friction_default.model"
    report_path = workdir / "friction_default.report.json"
    code = execute(
        ["train", "--data", str(synth_csv), "--target", "friction", "--seed", str(GEN_SEED),
         "--out", str(model_path), "--report-out", str(report_path)]
    )
    assert code == 0
    elapsed = time.monotonic() - t0
    report = json.loads(report_path.read_text())
    r2 = report["holdout_metrics"]["r2"]
    mape = report["holdout_metrics"]["mape"]
    assert r2 >= 0.90, f"holdout R2 {r2}"
    assert mape <= 10.0, f"holdout MAPE {mape}"
    assert elapsed < 300.0
    _pass(9, f"gen-data(seed {GEN_SEED}) -> default train: R2={r2:.4f}, MAPE={mape:.2f}%, {elapsed:.0f}s")


def test_10_sign_recovery():
    # Reduced budget (350 epochs) per ledger; signs are measured against a
    # single-row lean baseline (the feature-wise training minimum): against
    # a distribution-matched background mean signed phi is ~0 by
    # construction, so the planted signs are only recoverable vs a baseline.
    t0 = time.monotonic()
    agree = 0
    details = []
    for s in range(5):
        ds, _ = generate(default_generator_spec(), 300, Rng(100 + s))
        ds = ds.for_target("friction")
        tr, te = split_train_test(ds, 0.1, Rng(derive_seed(s, 11)))
        bundle, _ = train(
            tr, te, MlpConfig(17, (64, 1000, 200, 8), 0.2), TrainConfig(epochs=350, seed=s)
        )
        baseline = BackgroundSet(np.zeros((1, 17)), provenance={"kind": "train-minimum"})
        summary = global_summary(
            bundle, ds.subset(range(40)), baseline, method="kernel", n_samples=256, seed=s
        )
        food = summary.mean_signed_phi[ds.schema.index("food_waste")]
        plastics = summary.mean_signed_phi[ds.schema.index("plastics")]
        ok = food < 0 and plastics > 0
        agree += bool(ok)
        details.append(f"seed{s}: food {food:+.3f} plastics {plastics:+.3f}")
    assert agree >= 4, f"{agree}/5 agreement: {details}"
    _pass(10, f"{agree}/5 seeds recover food<0, plastics>0 ({time.monotonic() - t0:.0f}s)")


def test_11_determinism(workdir, synth_csv, capsys):
    model_bytes, curve_bytes = [], []
    for tag in ("a", "b"):
        model = workdir / f"det_{tag}.model"
        curve = workdir / f"det_{tag}.curve.csv"
        code = execute(
            ["train", "--data", str(synth_csv), "--target", "friction", "--out", str(model),
             "--curve-out", str(curve), "--epochs", "40", "--layers", "16,8", "--seed", "5"]
        )
        assert code == 0
        model_bytes.append(model.read_bytes())
        curve_bytes.append(curve.read_bytes())
    assert model_bytes[0] == model_bytes[1]
    assert curve_bytes[0] == curve_bytes[1]

    cv_reports = []
    for tag in ("a", "b"):
        report = workdir / f"cv_{tag}.json"
        code = execute(
            ["cv", "--data", str(synth_csv), "--target", "friction", "--k", "10",
             "--epochs", "10", "--layers", "8", "--seed", "3", "--out", str(report)]
        )
        assert code == 0
        cv_reports.append(report.read_bytes())
    out = capsys.readouterr().out
    assert "±" in out  # the mean +/- sample-std line
    assert cv_reports[0] == cv_reports[1]
    _pass(11, "byte-identical model/curve across runs; 10-fold CV emits mean±std and reproduces")


def test_12_persistence(workdir):
    bundle = mlp_bundle(17, hidden=(8, 4), seed=120)
    path = workdir / "persist.model"
    save_model(bundle, path)
    loaded = load_model(path)
    x = Rng(121).uniform(0, 1, (100, 17))
    before = np.asarray(bundle.predict_scaled(x))
    after = np.asarray(loaded.predict_scaled(x))
    assert np.array_equal(before, after)  # 0 ulps

    corrupted = bytearray(path.read_bytes())
    corrupted[len(corrupted) // 3] ^= 0x01
    with pytest.raises(ModelFormatError, match="checksum"):
        load_model(bytes(corrupted))
    _pass(12, "save->load->predict identical to 0 ulps on 100 inputs; corruption rejected")


def test_13_ablation_harness():
    # 3x2 table on a reduced budget, then the directional check at the
    # criterion's n=500 over 5 seeds (reduced epochs per ledger).
    t0 = time.monotonic()
    table_ds, _ = generate(default_generator_spec(), 200, Rng(77))
    from shear_oracle.training import ABLATION_VARIANTS

    report = run_ablation(table_ds, list(ABLATION_VARIANTS), TrainConfig(epochs=40, seed=1), k=2)
    table = report.render_table()
    print("\n" + table)
    assert len(report.rows) == 3
    assert all(row.mape["friction"] is not None for row in report.rows)
    assert all(row.mape["cohesion"] is not None for row in report.rows)

    proposed_arch = (64, 1000, 200, 8)
    deepest_arch = (64, 5000, 1000, 200, 8)
    proposed_mapes, deepest_mapes = [], []
    for s in range(5):
        ds, _ = generate(default_generator_spec(), 500, Rng(200 + s))
        ds = ds.for_target("cohesion")
        cfg = TrainConfig(epochs=60, seed=s)
        proposed_mapes.append(cross_validate(ds, MlpConfig(17, proposed_arch, 0.2), cfg, 2).mean_mape)
        deepest_mapes.append(cross_validate(ds, MlpConfig(17, deepest_arch, 0.2), cfg, 2).mean_mape)
    mean_p, mean_d = float(np.mean(proposed_mapes)), float(np.mean(deepest_mapes))
    assert mean_p <= mean_d, f"proposed {mean_p:.3f}% vs deepest {mean_d:.3f}%"
    _pass(
        13,
        f"3x2 MAPE table emitted; proposed {mean_p:.2f}% <= oversized {mean_d:.2f}% "
        f"cohesion MAPE over 5 seeds ({time.monotonic() - t0:.0f}s)",
    )


def test_14_service_contract(workdir):
    import pathlib

    t0 = time.monotonic()
    svc_dir = workdir / "svc"
    svc_dir.mkdir(exist_ok=True)
    friction_path, cohesion_path, dataset = build_service_models(svc_dir)
    client = TestClient(create_app(friction_model=friction_path, cohesion_model=cohesion_path))
    golden_dir = pathlib.Path(__file__).parent / "golden"

    # golden-file JSON contracts
    doc = client.post("/api/v1/predict", json={"features": showcase_request()}).json()
    assert_json_close(
        normalize_checksums(doc), json.loads((golden_dir / "predict_single.json").read_text())
    )
    doc = client.post(
        "/api/v1/explain",
        json={"features": showcase_request(), "target": "friction",
              "method": "kernel", "n_samples": 64},
    ).json()
    assert_json_close(
        normalize_checksums(doc), json.loads((golden_dir / "explain_kernel.json").read_text())
    )

    # schema endpoint matches the loaded model's schema
    bundle = load_model(friction_path)
    schema_doc = client.get("/api/v1/schema").json()
    assert [f["name"] for f in schema_doc["features"]] == bundle.schema.names

    # explain responses satisfy criterion 5 verbatim on 100 random instances
    instances, _ = generate(default_generator_spec(), 100, Rng(1400))
    names = bundle.schema.names
    worst = 0.0
    for i, sample in enumerate(instances.samples):
        features = {n: float(v) for n, v in zip(names, sample.features)}
        for method, extra in (("exact", {}), ("kernel", {"n_samples": 2**17})):
            doc = client.post(
                "/api/v1/explain",
                json={"features": features, "target": "friction", "method": method, **extra},
            ).json()
            residual = abs(doc["base_value"] + sum(f["phi"] for f in doc["features"])
                           - doc["prediction"])
            tol = 1e-6 * max(1.0, abs(doc["prediction"]))
            worst = max(worst, residual / tol)
            assert residual <= tol, f"instance {i} {method}"
    _pass(
        14,
        f"golden files, schema match, API-level local accuracy on 100 instances "
        f"({time.monotonic() - t0:.0f}s)",
    )
