"""
Acceptance suite: one test per criterion, each appending a pass/fail line to
``RESULTS`` (printed at the end of the pytest run).

Run directly with ``python3 tests/test_acceptance.py`` or through pytest.
"""
import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from oracles import lof_brute  # noqa: E402
from rffp import dataset_io as dio  # noqa: E402
from rffp import pipeline as pl  # noqa: E402
from rffp._kernels import METRICS  # noqa: E402
from rffp.anomaly import lof_fit, lof_scores  # noqa: E402
from rffp.catalog import BUILTIN, REFERENCE_UAS_EDGES, recognized_specs  # noqa: E402
from rffp.cli import main as cli_main  # noqa: E402
from rffp.compress import TrainConfig, init_sdae, mae_loss_and_grads, sdae_reconstruct, sdae_train  # noqa: E402
from rffp.features import assemble_hht_wpt  # noqa: E402
from rffp.hht import HHT_NAMES, emd, hht_features, hilbert_analytic  # noqa: E402
from rffp.hierarchy import LabelTree, hc_train, hier_metrics  # noqa: E402
from rffp.signal import synth_generate  # noqa: E402
from rffp.wavelet import cwt, haar_dwt, haar_idwt, wpt_two_level, wst, wst_avg_features  # noqa: E402

RESULTS = []


def report(cid, ok, detail):
    RESULTS.append(f"[{'PASS' if ok else 'FAIL'}] C{cid} {detail}")
    assert ok, f"C{cid}: {detail}"


def test_c1_transform_exactness():
    r = np.random.default_rng(1)
    worst_rt, worst_e = 0.0, 0.0
    for n in (2, 64, 1000, 4096):
        for _ in range(5):
            x = r.normal(size=n) * 10
            worst_rt = max(worst_rt, float(np.max(np.abs(haar_idwt(haar_dwt(x)) - x))))
            e = float(np.dot(x, x))
            dec = haar_dwt(x)
            worst_e = max(worst_e, abs(np.dot(dec.approx, dec.approx) + np.dot(dec.detail, dec.detail) - e) / e)
            if n >= 4:
                worst_e = max(worst_e, abs(wpt_two_level(x).energy() - e) / e)
    p = wpt_two_level([1, 2, 3, 4])
    packets = [p.aa[0], p.ad[0], p.da[0], p.dd[0]]
    ok = worst_rt <= 1e-12 and worst_e <= 1e-9 and np.allclose(packets, [5, -2, -1, 0], atol=1e-14)
    report(1, ok, f"haar round-trip max {worst_rt:.1e}, energy rel err {worst_e:.1e}, "
                  f"wpt[1,2,3,4]={[round(float(v), 12) for v in packets]}")


def test_c2_cwt_localization():
    offsets = []
    for f in (0.03, 0.1, 0.25):
        s = cwt(np.cos(2 * np.pi * f * np.arange(2048)))
        j = int(np.argmax(s.energy.mean(axis=1)))
        offsets.append(float(np.log2(s.frequencies[j] / f) * 12))
    report(2, all(abs(o) <= 1.0 for o in offsets),
           f"peak-scale offset in bins at f=0.03/0.1/0.25: {[round(o, 3) for o in offsets]}")


def test_c3_wst_properties():
    r = np.random.default_rng(3)
    shift_err, decay_ok, nonexp_ok = 0.0, True, True
    for _ in range(20):
        x = r.normal(size=1024) * r.uniform(0.2, 5)
        y = x + r.normal(size=1024) * 0.5
        rx = wst(x)
        a = wst_avg_features(rx).values
        b = wst_avg_features(wst(np.roll(x, rx.invariance_scale // 8))).values
        shift_err = max(shift_err, float(np.linalg.norm(a - b) / np.linalg.norm(a)))
        decay_ok &= rx.order_energy(2) < rx.order_energy(1)
        ry = wst(y)
        diff = sum(rx.step * float(np.sum((p.coefficients - q.coefficients) ** 2)) for p, q in zip(rx.paths, ry.paths))
        nonexp_ok &= rx.total_energy() <= np.dot(x, x) * (1 + 1e-9) and diff <= np.sum((x - y) ** 2) * (1 + 1e-9)
    report(3, shift_err <= 0.05 and decay_ok and nonexp_ok,
           f"shift rel change max {shift_err:.4f}, 2nd<1st order energy {decay_ok}, non-expansive {nonexp_ok}")


def test_c4_emd_hht():
    r = np.random.default_rng(4)
    rec = 0.0
    for n in (128, 512, 1024):
        for _ in range(3):
            x = r.normal(size=n)
            rec = max(rec, float(np.linalg.norm(emd(x).reconstruct() - x) / np.linalg.norm(x)))
    t = np.arange(1000) / 1000.0
    slow, fast = np.sin(2 * np.pi * 5 * t), np.sin(2 * np.pi * 50 * t)
    imf1 = emd(slow + fast).imfs[0]
    corr = float(np.corrcoef(imf1[100:900], fast[100:900])[0, 1])
    f0 = 0.05
    inst = hilbert_analytic(np.cos(2 * np.pi * f0 * np.arange(2048))).instantaneous_frequency()[205:1843]
    if_err = float(np.max(np.abs(inst - f0)) / f0)
    x = r.normal(size=1024)
    n26, n42 = len(hht_features(x)), len(assemble_hht_wpt(x))
    ok = rec <= 1e-8 and corr > 0.95 and if_err <= 0.01 and n26 == 26 and n42 == 42
    report(4, ok, f"reconstruction {rec:.1e}, IMF1 corr {corr:.4f}, IF err {if_err:.2%}, lengths {n26}/{n42}")


def test_c5_lof_oracle():
    from test_anomaly import random_instance
    worst, cases = 0.0, 0
    inf_ok = True
    for metric in METRICS:
        r = np.random.default_rng({"euclidean": 1, "manhattan": 2, "cosine": 3}[metric])
        for _ in range(50):
            pts, queries, k = random_instance(r, metric)
            got = lof_scores(lof_fit(pts, k, metric), queries)
            want, _ = lof_brute(pts.tolist(), queries.tolist(), k, metric)
            for g, w in zip(got, want):
                if np.isinf(w):
                    inf_ok &= bool(np.isinf(g))
                else:
                    worst = max(worst, abs(g - w) / max(1.0, abs(w)))
            cases += 1
    report(5, worst <= 1e-10 and inf_ok, f"{cases} instances, max rel deviation {worst:.1e}")


def _clean_slices(per_class, seed, length=1024):
    # the autoencoder is fitted to the recognized population, as in the detector
    out = []
    for ci, spec in enumerate(recognized_specs()):
        for i in range(per_class):
            lead = spec.ramp_length + 64
            out.append(synth_generate(spec, length + lead, seed * 100_000 + ci * 1000 + i).samples[lead:])
    return np.array(out)


def test_c6_sdae():
    # gradient check on a tiny net
    model = init_sdae((8, 4, 2, 4, 8), 3)
    r = np.random.default_rng(5)
    for b in model.biases:
        b += r.uniform(0.05, 0.2, b.shape)
    X, Y = r.uniform(0, 1, (3, 8)), r.uniform(0, 1, (3, 8))
    _, gW, gb = mae_loss_and_grads(model, X, Y)
    worst = 0.0
    for params, grads in ((model.weights, gW), (model.biases, gb)):
        for p, g in zip(params, grads):
            for idx in np.ndindex(p.shape):
                old = p[idx]
                p[idx] = old + 1e-6
                up = mae_loss_and_grads(model, X, Y)[0]
                p[idx] = old - 1e-6
                down = mae_loss_and_grads(model, X, Y)[0]
                p[idx] = old
                num = (up - down) / 2e-6
                worst = max(worst, abs(num - g[idx]) / max(abs(num), abs(g[idx]), 1e-8))

    train = _clean_slices(250, 1)
    held = _clean_slices(50, 2)
    cfg = TrainConfig(seed=6)
    sdae = sdae_train(train, cfg)
    curve = sdae.train_meta["train_loss"]
    ratio = curve[-1] / curve[0]
    held_mae = float(np.mean([sdae_reconstruct(sdae, x)[1] for x in held]))
    again = sdae_train(train, cfg)
    identical = all(a.tobytes() == b.tobytes() for a, b in zip(sdae.parameters(), again.parameters()))
    ok = worst <= 1e-4 and ratio < 0.2 and held_mae < 0.05 and identical
    report(6, ok, f"grad rel err {worst:.1e}, final/first-epoch MAE {ratio:.3f}, held-out MAE {held_mae:.4f}, "
                  f"bit-identical retrain {identical}")


def test_c7_hierarchical_metrics():
    t = LabelTree([("R", "UAV"), ("R", "Ctrl"), ("UAV", "PhantomLike"), ("UAV", "InspireLike"), ("Ctrl", "X")])
    ex = [hier_metrics([("UAV", "InspireLike")], [("UAV", "PhantomLike")], t),
          hier_metrics([("UAV", "PhantomLike")], [("UAV", "PhantomLike")], t),
          hier_metrics([("UAV",)], [("UAV", "PhantomLike")], t)]
    got = [(m["hP"], m["hR"], m["hF"]) for m in ex]
    want = [(0.5, 0.5, 0.5), (1.0, 1.0, 1.0), (1.0, 0.5, 2 / 3)]
    exact = all(g[0] == w[0] and g[1] == w[1] and abs(g[2] - w[2]) <= 1e-15 for g, w in zip(got, want))
    tree = LabelTree(REFERENCE_UAS_EDGES)
    leaves = tree.leaves()
    X = np.repeat(np.eye(len(leaves)), 3, axis=0)
    paths = [(tree.root,) + tuple(tree.path_to(l)) for l in leaves for _ in range(3)]
    n_clf = len(hc_train(tree, X, paths).node_classifiers)
    report(7, exact and n_clf == 6, f"path examples {[tuple(round(v, 4) for v in g) for g in got]}, "
                                    f"reference tree node classifiers {n_clf}")


def test_c8_end_to_end_trends(tmp_path):
    specs = BUILTIN["all"]()
    manifest = dio.build_corpus(specs, 80, 30.0, 11, str(tmp_path), slice_length=1024, slices_per_parent=4,
                                splits=(50 / 80, 5 / 80, 25 / 80))
    det = pl.train_detector(manifest, TrainConfig(seed=11), known_prefix=("Recognized",))
    acc = pl.detect(det, manifest).accuracy

    uas = manifest.filter(lambda e: e.label_path[0] == "UAS")
    t42 = pl.extract_features(uas, "hht-wpt")
    t26 = t42.select(HHT_NAMES)
    r42 = pl.identify(pl.train_hc(t42, root="UAS"), t42)
    r26 = pl.identify(pl.train_hc(t26, root="UAS"), t26)
    l1_42, leaf_42, l1_26 = r42.level_accuracy(1), r42.leaf_accuracy, r26.level_accuracy(1)

    sweep = {row["snr_db"]: row["accuracy"] for row in pl.snr_sweep(manifest, (30, 10, 0), detector=det)}
    checks = {"a": acc >= 0.85, "b": l1_42 > leaf_42, "c": l1_42 >= l1_26,
              "d": sweep[30.0] >= sweep[10.0] >= sweep[0.0]}
    report(8, all(checks.values()),
           f"(a) detection {acc:.4f} (b) level-1 {l1_42:.4f} > leaf {leaf_42:.4f} "
           f"(c) HHT-WPT42 level-1 {l1_42:.4f} >= HHT26 {l1_26:.4f} "
           f"(d) sweep 30/10/0 dB {sweep[30.0]:.4f}/{sweep[10.0]:.4f}/{sweep[0.0]:.4f} "
           + " ".join(f"{k}:{'ok' if v else 'FAIL'}" for k, v in checks.items()))


def _full_run(manifest, out, train_cfg):
    def run(*argv):
        assert cli_main([str(a) for a in argv]) == 0

    run("extract", "--manifest", manifest, "--out", out / "features.csv")
    run("extract", "--manifest", manifest, "--method", "cwt", "--out", out / "cwt.csv")
    run("train-detector", "--manifest", manifest, "--known", "Recognized", "--seed", 3, "--k", 5,
        "--config", train_cfg, "--out", out / "detector.json")
    run("detect", "--model", out / "detector.json", "--manifest", manifest, "--out", out / "detect")
    run("train-hc", "--features", out / "features.csv", "--root", "UAS", "--out", out / "hc.json")
    run("identify", "--model", out / "hc.json", "--features", out / "features.csv", "--out", out / "identify")
    run("snr-sweep", "--manifest", manifest, "--model", out / "detector.json", "--snrs", "30,0",
        "--out", out / "sweep.csv")


def _comparable(path, root):
    data = path.read_bytes()
    if path.name.endswith("run_log.json"):
        data = data.replace(str(root).encode(), b"<run>")
    if path.name == "sweep.csv":
        lines = data.decode().splitlines()
        header = lines[0].split(",")
        keep = [i for i, h in enumerate(header) if not h.endswith(pl.TIMING_SUFFIX)]
        data = "\n".join(",".join(row.split(",")[i] for i in keep) for row in lines).encode()
    return data


def test_c9_determinism(tmp_path):
    corpus = tmp_path / "corpus"
    specs = [s for s in BUILTIN["all"]() if s.class_path[-1] in ("WiFi-A", "CtrlA", "CtrlB", "ModelA-Hover")]
    dio.build_corpus(specs, 8, 30.0, 5, str(corpus), slices_per_parent=2)
    manifest = corpus / "manifest.jsonl"
    cfg = tmp_path / "train.json"
    cfg.write_text('{"train": {"epochs": 3, "batch_size": 8}}')
    runs = []
    for name in ("a", "b"):
        out = tmp_path / name
        out.mkdir()
        _full_run(manifest, out, cfg)
        runs.append(out)
    files = sorted(p.relative_to(runs[0]) for p in runs[0].rglob("*") if p.is_file())
    differing = [str(f) for f in files
                 if _comparable(runs[0] / f, runs[0]) != _comparable(runs[1] / f, runs[1])]
    report(9, len(files) > 10 and not differing,
           f"{len(files)} output files compared byte-for-byte (sweep timing columns excluded), "
           f"differing: {differing or 'none'}")


if __name__ == "__main__":
    code = pytest.main([os.path.abspath(__file__), "-q", "-p", "no:cacheprovider"])
    print("\n".join(RESULTS))
    sys.exit(code)
