"""Acceptance gate: one test per criterion, run with ``pytest -s`` to see
the per-criterion PASS/FAIL lines and timings.

Fixtures are desk-scale (synthetic images, random-init backbones); criteria
that do not pin an input resolution run at 64 x 64 to stay inside their CPU
budgets, and the stated numeric tolerances are asserted exactly as given.
"""

import json
import time
from contextlib import contextmanager

import numpy as np
import torch
import torch.nn as nn
import yaml
from click.testing import CliRunner
from jsonschema import validate as validate_schema

from driverbench.augment import (
    AugmentationConfig,
    change_contrast,
    enhance_brightness,
    random_augment,
    resize,
)
from driverbench.benchmark import (
    BENCHMARK_JSON_SCHEMA,
    compare_results,
    evaluate_model,
    write_benchmark_csv,
    write_benchmark_json,
)
from driverbench.cli import main as cli_main
from driverbench.dataset import scan_dataset, select_test_subset
from driverbench.models import (
    ALL_VARIANTS,
    ModelSpec,
    Variant,
    build_model,
    load_checkpoint,
    predict_batch,
    save_checkpoint,
)
from driverbench.training import (
    EarlyStopState,
    TrainingConfig,
    compute_accuracy,
    compute_average_loss,
    early_stop_update,
    train,
)

from conftest import build_synthetic_dataset, intensity_to_class
from test_benchmark import REFERENCE_ROWS, always_c0, intensity_oracle, static_result
from test_training import reference_stop_epoch

SMALL = (64, 64)


@contextmanager
def criterion(num: int, name: str):
    t0 = time.perf_counter()
    try:
        yield
    except BaseException:
        print(f"\n[acceptance] criterion {num:2d} ({name}): FAIL "
              f"({time.perf_counter() - t0:.1f}s)")
        raise
    print(f"\n[acceptance] criterion {num:2d} ({name}): PASS "
          f"({time.perf_counter() - t0:.1f}s)")


def test_criterion_01_metric_oracles():
    with criterion(1, "metric oracles vs brute force"):
        rng = np.random.default_rng(0)
        for _ in range(1000):
            n = int(rng.integers(1, 20))
            losses = rng.uniform(0.0, 10.0, size=n)
            sizes = rng.integers(1, 64, size=n)
            got = compute_average_loss(list(zip(losses.tolist(), sizes.tolist())))
            expected = float(np.mean(np.repeat(losses, sizes)))
            assert abs(got - expected) <= 1e-9
        for _ in range(1000):
            n = int(rng.integers(1, 200))
            preds = rng.integers(0, 10, size=n)
            truths = rng.integers(0, 10, size=n)
            got = compute_accuracy(preds.tolist(), truths.tolist())
            expected = float(np.mean(preds == truths))
            assert abs(got - expected) <= 1e-9


def test_criterion_02_shapes_and_softmax_at_224():
    with criterion(2, "all variants map 2x224x224x3 -> 2x10"):
        batch = np.random.default_rng(1).random((2, 224, 224, 3), dtype=np.float32)
        for variant in ALL_VARIANTS:
            handle = build_model(ModelSpec(variant=variant, input_size=(224, 224)), seed=0)
            probs = predict_batch(handle, batch)
            assert probs.shape == (2, 10), variant.value
            assert np.abs(probs.sum(axis=1) - 1.0).max() <= 1e-5, variant.value
            del handle


def _steps(handle, steps=3):
    torch.manual_seed(0)
    h, w = handle.spec.input_size
    opt = torch.optim.SGD(handle.trainable_parameters(), lr=1e-2)
    handle.module.train()
    for _ in range(steps):
        x = torch.rand(2, 3, h, w)
        y = torch.randint(0, 10, (2,))
        opt.zero_grad()
        nn.functional.cross_entropy(handle.module(x), y).backward()
        opt.step()


def test_criterion_03_freeze_policies():
    with criterion(3, "freeze policies after 3 training steps"):
        for variant in (Variant.VGG16_SHALLOW, Variant.VGG19_SHALLOW):
            handle = build_model(ModelSpec(variant=variant, input_size=SMALL), seed=0)
            before = {n: p.detach().clone() for n, p in handle.module.named_parameters()}
            _steps(handle)
            for name, param in handle.module.named_parameters():
                if name.startswith("features."):
                    assert torch.equal(param, before[name]), f"{variant.value}:{name}"
            del handle

        for variant in (Variant.VGG16_FT_B, Variant.VGG19_FT_B):
            handle = build_model(ModelSpec(variant=variant, input_size=SMALL), seed=0)
            convs = [m for m in handle.module.features if isinstance(m, nn.Conv2d)]
            before = {n: p.detach().clone() for n, p in handle.module.named_parameters()}
            _steps(handle)
            after = dict(handle.module.named_parameters())
            trainable = [m for m in convs if m.weight.requires_grad]
            assert trainable == convs[-4:], variant.value
            for name in handle.frozen_parameter_names():
                assert torch.equal(after[name], before[name]), f"{variant.value}:{name}"
            tail_weight_names = [
                n for n, p in handle.module.named_parameters()
                if p.requires_grad and n.startswith("features.")
            ]
            assert any(not torch.equal(after[n], before[n]) for n in tail_weight_names), variant.value
            del handle

        for variant in (Variant.VGG16_FT_NB, Variant.VGG19_FT_NB):
            handle = build_model(ModelSpec(variant=variant, input_size=SMALL), seed=0)
            before = dict(handle.module.named_parameters())
            first = before["features.0.weight"].detach().clone()
            _steps(handle)
            assert handle.frozen_parameter_names() == set(), variant.value
            moved = dict(handle.module.named_parameters())["features.0.weight"]
            assert not torch.equal(moved, first), variant.value
            del handle


def test_criterion_04_early_stop_traces():
    with criterion(4, "early-stop trace equals hand reference"):
        rng = np.random.default_rng(4)
        for _ in range(100):
            n = int(rng.integers(1, 30))
            losses = rng.uniform(0.0, 5.0, size=n).tolist()
            patience = int(rng.integers(1, 6))
            state = EarlyStopState(patience=patience)
            got = None
            for i, v in enumerate(losses, start=1):
                state, stop = early_stop_update(state, v)
                if stop:
                    got = i
                    break
            assert got == reference_stop_epoch(losses, patience)

        def stop_epoch(losses, patience):
            state = EarlyStopState(patience=patience)
            for i, v in enumerate(losses, start=1):
                state, stop = early_stop_update(state, v)
                if stop:
                    return i
            return None

        # improvement for 15 epochs, then stalls: halts at 18 with budget 20
        eighteen = [1.0 - 0.01 * i for i in range(15)] + [2.0, 2.0, 2.0, 2.0, 2.0]
        assert stop_epoch(eighteen[:20], patience=3) == 18
        # quick plateau: halts at epoch 5
        five = [1.0, 0.5, 0.6, 0.6, 0.6]
        assert stop_epoch(five, patience=3) == 5


def test_criterion_05_overfit_sanity(overfit_dataset):
    with criterion(5, "small CNN memorizes 40-image set"):
        manifest = scan_dataset(overfit_dataset)
        assert manifest.total == 40
        handle = build_model(ModelSpec(variant=Variant.SIMPLE_CNN, input_size=SMALL), seed=0)
        cfg = TrainingConfig(
            epochs_max=50, patience=50, batch_size=8, learning_rate=1e-3, seed=0
        )
        history = train(handle, manifest, manifest, cfg)
        assert max(m.train_acc for m in history.epochs) >= 0.95
        assert history.final.train_acc >= 0.95


def test_criterion_06_gradient_check():
    with criterion(6, "analytic vs central-difference gradients"):
        torch.manual_seed(0)
        net = nn.Sequential(nn.Linear(8, 16), nn.ReLU(), nn.Linear(16, 10)).double()
        x = torch.randn(4, 8, dtype=torch.float64)
        y = torch.randint(0, 10, (4,))
        loss = nn.functional.cross_entropy(net(x), y)
        loss.backward()
        params = list(net.parameters())
        rng = np.random.default_rng(6)
        h = 1e-6
        for _ in range(10):
            p = params[rng.integers(len(params))]
            idx = tuple(rng.integers(s) for s in p.shape)
            analytic = p.grad[idx].item()
            with torch.no_grad():
                original = p[idx].item()
                p[idx] = original + h
                up = nn.functional.cross_entropy(net(x), y).item()
                p[idx] = original - h
                down = nn.functional.cross_entropy(net(x), y).item()
                p[idx] = original
            numeric = (up - down) / (2 * h)
            assert abs(analytic - numeric) <= 1e-3 * max(1.0, abs(numeric))


def test_criterion_07_preprocessing_suite():
    with criterion(7, "preprocessing identity, clipping, determinism"):
        rng = np.random.default_rng(7)

        # identity configs are pixel-exact passthroughs
        for _ in range(20):
            img = rng.integers(0, 256, size=(12, 12, 3)).astype(np.uint8)
            cfg = AugmentationConfig.identity(image_size=(12, 12))
            out = random_augment(img, cfg, np.random.default_rng(cfg.seed))
            assert np.array_equal(out, img)
            cfg = AugmentationConfig.identity(image_size=(10, 14))
            out = random_augment(img, cfg, np.random.default_rng(cfg.seed))
            assert np.array_equal(out, resize(img, (10, 14)))

        # clipping bounds hold over 1,000 random images and factors
        for _ in range(1000):
            img = rng.integers(0, 256, size=(12, 12, 3)).astype(np.uint8)
            bf = float(rng.uniform(0.1, 3.0))
            cf = float(rng.uniform(0.1, 3.0))
            bright = enhance_brightness(img, bf)
            contrast = change_contrast(img, cf)
            assert bright.dtype == np.uint8 and contrast.dtype == np.uint8
            expected = np.rint(
                np.clip((img.astype(np.float64) - 128.0) * cf + 128.0, 0, 255)
            ).astype(np.uint8)
            assert np.array_equal(contrast, expected)
            # brightness never exceeds the scaled-and-clipped value envelope
            v_in = img.max(axis=2).astype(np.float64)
            v_out = bright.max(axis=2).astype(np.float64)
            assert np.all(v_out <= np.ceil(np.clip(v_in * bf, 0, 255)) + 1)

        # seed determinism is bit-exact
        img = rng.integers(0, 256, size=(24, 24, 3)).astype(np.uint8)
        cfg = AugmentationConfig(seed=123, image_size=(24, 24))
        a = random_augment(img, cfg, np.random.default_rng(cfg.seed))
        b = random_augment(img, cfg, np.random.default_rng(cfg.seed))
        assert np.array_equal(a, b)


def test_criterion_08_benchmark_protocol(bench_dataset, tmp_path):
    with criterion(8, "benchmark protocol with stub predictors"):
        manifest = scan_dataset(bench_dataset)
        subset = select_test_subset(manifest, per_class=10, seed=0)
        assert subset.total == 100

        stub = evaluate_model("always_c0", always_c0, subset, 1, SMALL)
        assert stub.accuracy == 0.10
        oracle = evaluate_model("oracle", intensity_oracle, subset, 1, SMALL)
        assert oracle.accuracy == 1.0
        assert stub.elapsed_seconds > 0 and oracle.elapsed_seconds > 0

        ranked = compare_results([stub, oracle])
        json_path = tmp_path / "benchmark.json"
        csv_path = tmp_path / "benchmark.csv"
        write_benchmark_json(ranked, json_path)
        write_benchmark_csv(ranked, csv_path)
        validate_schema(instance=json.loads(json_path.read_text()),
                        schema=BENCHMARK_JSON_SCHEMA)
        rows = [l for l in csv_path.read_text().splitlines() if not l.startswith("#")]
        assert rows[0].split(",")[0] == "rank" and len(rows) == 3

        reference = compare_results([static_result(*row) for row in REFERENCE_ROWS])
        assert [r.result.variant for r in reference] == [
            "vgg19_ft_b", "hybrid_cnn_transformer", "vgg19_ft_nb", "vgg16_ft_b",
            "vgg16_ft_nb", "vgg16_deep", "vgg19_shallow", "vgg19_deep",
            "vgg16_shallow", "simple_cnn",
        ]


def test_criterion_09_checkpoint_round_trip(tmp_path):
    with criterion(9, "checkpoint round trip per variant"):
        batch = np.random.default_rng(9).random((2, *SMALL, 3), dtype=np.float32)
        for variant in ALL_VARIANTS:
            handle = build_model(ModelSpec(variant=variant, input_size=SMALL), seed=0)
            before = predict_batch(handle, batch)
            path = save_checkpoint(handle, tmp_path / f"{variant.value}_acc_best.ckpt")
            reloaded = load_checkpoint(path)
            after = predict_batch(reloaded, batch)
            assert np.array_equal(before, after), variant.value
            for (n1, p1), (n2, p2) in zip(
                handle.module.state_dict().items(), reloaded.module.state_dict().items()
            ):
                assert n1 == n2 and torch.equal(p1, p2), f"{variant.value}:{n1}"
            del handle, reloaded


def test_criterion_10_end_to_end_smoke(tmp_path):
    with criterion(10, "end-to-end analyze/train/benchmark/report"):
        data_root = build_synthetic_dataset(tmp_path / "data", per_class=10,
                                            size=SMALL, seed=10)
        out = tmp_path / "out"
        cfg_path = tmp_path / "run.yaml"
        cfg_path.write_text(yaml.safe_dump({
            "dataset_root": str(data_root),
            "output_dir": str(out),
            "seed": 0,
            "image_size": [64, 64],
            "split": {"train_fraction": 0.8},
            "training": {"epochs_max": 1, "batch_size": 8, "patience": 1},
            "augmentation": {"enabled": True},
            "benchmark": {"per_class": 2, "batch_size": 2},
        }))
        runner = CliRunner()

        result = runner.invoke(cli_main, ["analyze", "--config", str(cfg_path)])
        assert result.exit_code == 0, result.output

        for variant in ALL_VARIANTS:
            result = runner.invoke(
                cli_main,
                ["train", "--config", str(cfg_path), "--model", variant.value],
            )
            assert result.exit_code == 0, f"{variant.value}: {result.output}"

        result = runner.invoke(cli_main, ["benchmark", "--config", str(cfg_path)])
        assert result.exit_code == 0, result.output

        result = runner.invoke(cli_main, ["report", "--config", str(cfg_path)])
        assert result.exit_code == 0, result.output

        run_dirs = sorted(p for p in out.iterdir() if p.is_dir())
        kinds = [d.name for d in run_dirs]
        assert sum("train" in k for k in kinds) == 10
        assert any("analyze" in k for k in kinds)
        assert any("benchmark" in k for k in kinds)
        assert any(k.endswith("report") for k in kinds)

        bench_dir = [d for d in run_dirs if "benchmark" in d.name][0]
        doc = json.loads((bench_dir / "benchmark.json").read_text())
        assert len(doc["results"]) == 10
        assert all(not row["failed"] for row in doc["results"])

        report_dir = [d for d in run_dirs if d.name.endswith("report")][0]
        text = (report_dir / "report.md").read_text()
        for variant in ALL_VARIANTS:
            assert variant.value in text
