"""Acceptance gate: every criterion at its stated tolerance.

Each test prints one PASS/FAIL line in the terminal summary (see conftest).
The training criteria are direction checks on synthetic textured corpora;
tolerances and budgets are fixed here, nothing is calibrated at runtime.
"""

import functools
import json
import math
import time

import numpy as np
import pytest

import conftest
from graysr.image import Image, bicubic_resize
from graysr.metrics import mse, psnr, ssim
from graysr.models import (
    TrainPlan,
    build_model,
    surrogate_extractor,
    super_resolve,
    train,
    write_loss_csv,
)
from graysr.models.losses import (
    adversarial_gen_loss_grad,
    feature_loss_grad,
    mse_loss_grad,
)
from graysr.nn import Network, grad_check
from graysr.sparse import (
    SparseParams,
    backproject,
    sample_patch_pairs,
    sparse_code,
    super_resolve_sparse,
    train_dictionaries,
)
from lasso_reference import lasso_ista, objective


def criterion(name, budget_s):
    def deco(fn):
        @functools.wraps(fn)
        def wrapper(*args, **kwargs):
            start = time.monotonic()
            try:
                fn(*args, **kwargs)
            except BaseException:
                conftest.ACCEPTANCE_RESULTS.append(
                    (name, False, time.monotonic() - start)
                )
                raise
            elapsed = time.monotonic() - start
            conftest.ACCEPTANCE_RESULTS.append((name, True, elapsed))
            assert elapsed < budget_s, f"{name} exceeded its {budget_s}s budget"

        return wrapper

    return deco


def texture(seed, size=32):
    rng = np.random.default_rng(seed)
    x = np.arange(size)
    X, Y = np.meshgrid(x, x)
    img = np.zeros((size, size))
    for _ in range(6):
        fx, fy = rng.uniform(0.02, 0.18, size=2)
        img += rng.uniform(10, 45) * np.sin(2 * np.pi * (fx * X + fy * Y) + rng.uniform(0, 6.28))
    img -= img.min()
    return Image(img / max(img.max(), 1e-9) * 255.0)


@criterion("metric identities (PSNR/MSE/SSIM/MOS)", budget_s=10)
def test_metric_identities():
    rng = np.random.default_rng(0)
    x = Image(rng.uniform(0, 255, (16, 16)))
    assert ssim(x, x) == pytest.approx(1.0, abs=1e-9)
    base = rng.uniform(0, 200, (12, 12))
    for c in (1.0, 3.0, 17.0):
        assert mse(Image(base), Image(base + c)) == c * c
    unit = rng.uniform(0, 254, (10, 10))
    assert psnr(Image(unit), Image(unit + 1.0)) == pytest.approx(48.1308, abs=1e-3)
    assert psnr(x, x) == math.inf
    a, b = Image(rng.uniform(0, 255, (14, 14))), Image(rng.uniform(0, 255, (14, 14)))
    assert ssim(a, b) == pytest.approx(ssim(b, a), abs=1e-12)
    from graysr.metrics import mos

    assert mos([2, 3, 4]) == 3.0
    assert mos([5, 5, 5, 5, 5]) == 5.0


@criterion("gradient correctness: every layer kind < 1e-4", budget_s=60)
def test_gradients_layer_kinds():
    from test_nn import TestGradients

    for name, build, shape in TestGradients.LAYER_CASES:
        net = Network(build())
        x = np.random.default_rng(hash(name) % 2**32).normal(size=shape)
        err = grad_check(net, x, eps=1e-5)
        assert err < 1e-4, f"layer case {name}: {err}"


@criterion("gradient correctness: miniature SRCNN < 1e-4", budget_s=60)
def test_gradients_miniature_srcnn():
    # Central differences are only valid away from the rectifier kinks: the
    # seeds fix an evaluation point whose smallest |pre-activation| exceeds
    # the reach of an eps=1e-5 single-parameter perturbation by ~50x.
    net = build_model("srcnn", 4, width=6, seed=2)
    x = np.random.default_rng(9).uniform(-1, 1, size=(1, 1, 16, 16))
    acts, _ = net.forward(x, train=True)
    kink_margin = min(
        np.abs(acts[i]).min()
        for i, layer in enumerate(net.layers)
        if layer.kind == "relu"
    )
    assert kink_margin > 2e-4, "evaluation point too close to a rectifier kink"
    assert grad_check(net, x, eps=1e-5) < 1e-4


@criterion("gradient correctness: generator+perceptual composite < 1e-3", budget_s=90)
def test_gradients_perceptual_composite():
    # Seeded directional central differences through the full perceptual
    # loss with respect to the generator parameters.
    rng = np.random.default_rng(0)
    gen = build_model("srresnet_generator", 4, width=4, blocks=1, seed=1)
    disc = build_model("discriminator", 4, width=4, blocks=2, seed=2, input_size=16)
    phi = surrogate_extractor(seed=3)
    lr = rng.uniform(-1, 1, size=(2, 1, 4, 4))
    hr = rng.uniform(-1, 1, size=(2, 1, 16, 16))
    adv_weight = 1e-3

    def loss_and_grads():
        acts, caches = gen.forward(lr, train=True)
        sr = acts[-1]
        v_mse, g_mse = mse_loss_grad(sr, hr, 4)
        v_feat, g_feat = feature_loss_grad(sr, hr, phi)
        acts_d, caches_d = disc.forward(sr, train=True)
        v_gen, g_dout = adversarial_gen_loss_grad(acts_d[-1].ravel())
        _, g_adv = disc.backward(acts_d, caches_d, g_dout.reshape(acts_d[-1].shape))
        g_sr = g_mse + g_feat + adv_weight * g_adv
        grads, _ = gen.backward(acts, caches, g_sr)
        return v_mse + v_feat + adv_weight * v_gen, grads

    _, analytic = loss_and_grads()
    params = gen.parameters()
    flat_g = np.concatenate([g.ravel() for g in analytic])
    gnorm = np.linalg.norm(flat_g)
    dir_rng = np.random.default_rng(123)
    eps = 1e-5
    worst = 0.0
    for _ in range(150):
        v = dir_rng.normal(size=flat_g.size)
        v /= np.linalg.norm(v)

        def shift(delta):
            off = 0
            for p in params:
                p += delta * v[off : off + p.size].reshape(p.shape)
                off += p.size

        shift(+eps)
        hi = loss_and_grads()[0]
        shift(-2 * eps)
        lo = loss_and_grads()[0]
        shift(+eps)
        fd = (hi - lo) / (2 * eps)
        an = float(flat_g @ v)
        worst = max(worst, abs(fd - an) / max(abs(fd), abs(an), 1e-4 * gnorm))
    assert worst < 1e-3, f"composite directional error {worst}"


def toy_srgan_records(pretrain, adversarial, seed=0):
    corpus = [texture(100 + i, 32) for i in range(16)]
    phi = surrogate_extractor(seed=1)
    plan = TrainPlan(
        model="srgan",
        scale=4,
        pretrain_epochs=pretrain,
        adversarial_epochs=adversarial,
        batch=4,
        crop=16,
        width=4,
        blocks=1,
        disc_width=4,
        seed=seed,
    )
    return plan, train(plan, corpus, phi)


@criterion("loss-stack identities over a 100-step adversarial run (1e-9)", budget_s=300)
def test_loss_identities_toy_srgan():
    plan, result = toy_srgan_records(pretrain=5, adversarial=20)
    assert len(result.records) == 100
    for rec in result.records:
        r = rec.report
        assert abs(r.l_content - (r.l_mse + r.l_feat)) <= 1e-9
        assert abs(r.l_perceptual - (r.l_content + 1e-3 * r.l_gen)) <= 1e-9


@criterion("adversarial schedule: pretrain has no D updates, then strict D/G alternation", budget_s=120)
def test_srgan_schedule_from_csv(tmp_path):
    plan, result = toy_srgan_records(pretrain=3, adversarial=5)
    csv_path = tmp_path / "losses.csv"
    write_loss_csv(result.records, csv_path)

    lines = csv_path.read_text().splitlines()
    header = lines[0].split(",")
    assert header == ["step", "l_mse", "l_feat", "l_content", "l_gen", "l_perceptual", "l_disc"]
    steps_per_epoch = 4  # 16 images / batch 4
    rows = [line.split(",") for line in lines[1:]]
    assert len(rows) == 8 * steps_per_epoch
    for row in rows[: 3 * steps_per_epoch]:
        assert row[6] == "", f"discriminator update during pretrain at step {row[0]}"
    for row in rows[3 * steps_per_epoch :]:
        # exactly one D loss per generator step: strict D/G alternation
        assert row[6] != "", f"missing discriminator update at step {row[0]}"
        float(row[6])


@criterion("SRCNN direction check: held-out PSNR >= bicubic + 0.5 dB", budget_s=900)
def test_srcnn_training_progress():
    corpus = [texture(i) for i in range(200)]
    plan = TrainPlan(model="srcnn", scale=4, total_epochs=50, batch=8,
                     lr=1e-3, crop=32, width=6, seed=0)
    result = train(plan, corpus)

    mses = [r.report.l_mse for r in result.records]
    assert np.mean(mses[-10:]) < 0.5 * np.mean(mses[:10])

    gains = []
    for s in range(20):
        hr = texture(10_000 + s)
        lr = bicubic_resize(hr, 8, 8)
        sr = super_resolve(result.model, "srcnn", lr, 4)
        bic = bicubic_resize(lr, 32, 32)
        gains.append(psnr(sr, hr) - psnr(bic, hr))
    assert float(np.mean(gains)) >= 0.5, f"mean gain {np.mean(gains):+.3f} dB"


@criterion("sparse SR direction check: PSNR >= bicubic; backprojection monotone", budget_s=1200)
def test_sparse_direction_check():
    train_imgs = [texture(1000 + i, 64) for i in range(36)]
    params = SparseParams(lam=0.2, patch_size=5, atoms=256,
                          max_backprojection_iters=20)
    data = sample_patch_pairs(train_imgs, 1000, params, seed=0)
    assert len(data) == 36_000
    pair = train_dictionaries(data, params, iters=6, seed=0)

    gains = []
    for s in range(5):
        hr = texture(2000 + s, 64)
        lr = bicubic_resize(hr, 16, 16)
        sr = super_resolve_sparse(lr, pair, params, scale=4)
        bic = bicubic_resize(lr, 64, 64)
        gains.append(psnr(sr, hr) - psnr(bic, hr))
    assert float(np.mean(gains)) >= 0.0, f"mean gain {np.mean(gains):+.3f} dB"

    # residual trace over all 20 iterations from a deliberately inconsistent start
    rng = np.random.default_rng(3)
    lr = bicubic_resize(texture(2100, 64), 16, 16)
    start = Image(np.clip(bicubic_resize(lr, 64, 64).data
                          + rng.normal(0, 20, (64, 64)), 0, 255))
    norms = []
    backproject(start, lr, 4, 20, on_step=norms.append)
    initial = float(np.linalg.norm(bicubic_resize(start, 16, 16).data - lr.data))
    trace = [initial] + norms
    assert len(norms) >= 1
    assert all(a >= b for a, b in zip(trace, trace[1:])), trace


@criterion("lasso oracle equivalence: 100 problems, gap <= 1e-8, KKT <= 1e-5", budget_s=300)
def test_lasso_oracle_equivalence():
    rng = np.random.default_rng(0)
    lam = 0.2
    for _ in range(100):
        d = rng.normal(size=(10, 20))
        d /= np.linalg.norm(d, axis=0, keepdims=True)
        x = rng.normal(size=10)
        fast = sparse_code(x, d, lam)
        slow = lasso_ista(x, d, lam)
        gap = abs(objective(x, d, fast, lam) - objective(x, d, slow, lam))
        assert gap <= 1e-8, f"objective gap {gap}"
        g = d.T @ (x - d @ fast)
        zero = fast == 0.0
        assert np.all(np.abs(g[zero]) <= lam + 1e-5)
        if (~zero).any():
            assert np.abs(g[~zero] - lam * np.sign(fast[~zero])).max() <= 1e-5


@criterion("determinism: prepare-train-run-eval twice is byte-identical", budget_s=300)
def test_end_to_end_determinism(tmp_path):
    from graysr.cli import main
    from graysr.image import save_image

    src = tmp_path / "hr_src"
    src.mkdir()
    for i in range(6):
        save_image(texture(500 + i, 40), src / f"t{i}.png")

    artifacts = []
    for run in ("one", "two"):
        root = tmp_path / run
        corpus = root / "corpus"
        main(["prepare", "--hr-dir", str(src), "--out", str(corpus), "--scale", "4",
              "--seed", "9"])
        model_dir = root / "model"
        main(["train", "--model", "srcnn", "--hr-dir", str(corpus / "hr"),
              "--out", str(model_dir), "--scale", "4", "--epochs", "2",
              "--batch", "4", "--crop", "16", "--width", "6", "--seed", "11"])
        sr_dir = root / "sr"
        main(["run", "--method", "srcnn", "--lr-dir", str(corpus / "lr"),
              "--out", str(sr_dir), "--scale", "4",
              "--model", str(model_dir / "model.srnet")])
        report = root / "report"
        main(["eval", "--manifest", str(corpus / "manifest.json"),
              "--sr", f"srcnn={sr_dir}", "--out", str(report)])
        artifacts.append(
            (
                (corpus / "manifest.json").read_bytes(),
                (model_dir / "model.srnet").read_bytes(),
                (model_dir / "losses.csv").read_bytes(),
                (report / "report.json").read_bytes(),
                (report / "report.csv").read_bytes(),
            )
        )
    for a, b in zip(*artifacts):
        assert a == b


@criterion("geometry: every method produces exact 4x and 8x dimensions", budget_s=300)
def test_geometry_all_methods():
    lr = texture(7, 16)
    lr_small = texture(8, 8)

    for scale in (4, 8):
        up = bicubic_resize(lr, lr.width * scale, lr.height * scale)
        assert (up.width, up.height) == (16 * scale, 16 * scale)

    imgs = [texture(300 + i, 48) for i in range(3)]
    params = SparseParams(atoms=32, max_backprojection_iters=2)
    data = sample_patch_pairs(imgs, 60, params, seed=0)
    pair = train_dictionaries(data, params, iters=2, seed=0)
    for scale in (4, 8):
        sr = super_resolve_sparse(lr_small, pair, params, scale=scale)
        assert (sr.width, sr.height) == (8 * scale, 8 * scale)

    for scale in (4, 8):
        srcnn = build_model("srcnn", scale, width=6, seed=0)
        out = super_resolve(srcnn, "srcnn", lr_small, scale)
        assert (out.width, out.height) == (8 * scale, 8 * scale)
        gen = build_model("srresnet_generator", scale, width=4, blocks=1, seed=0)
        out = super_resolve(gen, "srresnet_generator", lr_small, scale)
        assert (out.width, out.height) == (8 * scale, 8 * scale)


@criterion("[SECONDARY] MOS end-to-end: scripted 5x7 session, Eq-consistent report, blinded", budget_s=120)
def test_mos_end_to_end(tmp_path):
    import re
    import threading
    import urllib.request

    from graysr.mos import mos_report
    from graysr.mos.service import RatingService, load_session_config, make_server
    from test_mos_service import build_config

    cfg = build_config(tmp_path)
    log = tmp_path / "ratings.csv"
    service = RatingService(load_session_config(cfg), log)
    httpd = make_server(service, "127.0.0.1", 0)
    threading.Thread(target=httpd.serve_forever, daemon=True).start()
    base = f"http://127.0.0.1:{httpd.server_address[1]}"
    scan = re.compile("bicubic|sparse|srcnn|srresnet|srgan", re.IGNORECASE)
    try:
        with urllib.request.urlopen(f"{base}/api/session") as resp:
            body = resp.read()
        assert not scan.search(body.decode())
        session = json.loads(body)
        items = [it for s in session["sets"] for it in s["items"]]
        assert len(session["sets"]) == 5 and len(items) == 35

        rng = np.random.default_rng(0)
        for it in items:
            with urllib.request.urlopen(f"{base}{it['image_url']}") as resp:
                assert resp.read()[:4] == b"\x89PNG"
            payload = json.dumps(
                {
                    "session_id": session["session_id"],
                    "item_id": it["item_id"],
                    "score": int(rng.integers(1, 6)),
                }
            ).encode()
            req = urllib.request.Request(
                f"{base}/api/rating", data=payload,
                headers={"Content-Type": "application/json"}, method="POST")
            with urllib.request.urlopen(req) as resp:
                assert resp.status == 204

        with urllib.request.urlopen(
            f"{base}/api/report?session_id={session['session_id']}"
        ) as resp:
            report = json.loads(resp.read())
        table, skipped = mos_report(log)
        assert skipped == 0
        by_method = {m: v for m, v, _ in table}
        assert sum(m["n"] for m in report["methods"]) == 35
        for row in report["methods"]:
            assert row["mos"] == by_method[row["method"]]
    finally:
        httpd.shutdown()
