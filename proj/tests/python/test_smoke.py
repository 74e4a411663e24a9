import math

import numpy as np
import pytest

import qkd


def test_param_counts():
    counts = qkd.param_counts()
    assert counts["cnn1d"] == 36001
    assert counts["resnet1d"] == 3849217
    assert counts["ae_vqc_circuit"] == 36
    assert counts["ae_vqc_encoder"] == 14534
    assert counts["ae_vqc_autoencoder"] == 29255


@pytest.mark.parametrize("wavelet", ["haar", "db4"])
def test_dwt_round_trip_and_energy(wavelet):
    x = np.random.default_rng(0).normal(size=256)
    c = qkd.dwt(x, wavelet, 3)
    assert c.wavelet == wavelet
    assert len(c.details) == 3
    back = np.asarray(qkd.idwt(c))
    assert np.max(np.abs(back - x)) < 1e-10
    if wavelet == "haar":
        energy = np.sum(np.square(c.approx)) + sum(np.sum(np.square(d)) for d in c.details)
        assert energy == pytest.approx(np.sum(x * x), rel=1e-12)


def test_haar_first_level_matches_pairwise_sums():
    x = np.arange(16, dtype=float)
    c = qkd.dwt(x, "haar", 1)
    expected = (x[0::2] + x[1::2]) / math.sqrt(2.0)
    assert np.allclose(c.approx, expected)
    assert np.allclose(np.abs(c.details[0]), np.abs(x[0::2] - x[1::2]) / math.sqrt(2.0))


def test_denoise_keeps_length_and_rejects_unknown_wavelet():
    x = np.sin(np.linspace(0, 8 * math.pi, 256))
    assert len(qkd.denoise(x)) == 256
    with pytest.raises(qkd.QkdError):
        qkd.denoise(x, "db9")


def test_kd_loss_limits_and_gradient():
    z = 0.7
    assert qkd.kd_loss(-3.0, z, 1, 1.0, 2.0) == pytest.approx(math.log1p(math.exp(-z)), rel=1e-12)
    for label in (0, 1):
        for alpha, t in ((0.3, 2.0), (0.7, 4.0)):
            h = 1e-6
            fd = (qkd.kd_loss(1.2, z + h, label, alpha, t) - qkd.kd_loss(1.2, z - h, label, alpha, t)) / (2 * h)
            assert qkd.kd_loss_grad(1.2, z, label, alpha, t) == pytest.approx(fd, abs=1e-7)
    with pytest.raises(qkd.QkdError):
        qkd.kd_loss(0.0, 0.0, 1, 1.5, 2.0)


def test_vqc_forward():
    assert qkd.N_QUBITS == 6
    assert qkd.N_THETA == 36
    # At x = pi every feature-map phase vanishes, the two Hadamard layers cancel
    # and zero angles leave |0...0>, so each <Z> is 1 and the logit is kappa.
    assert qkd.vqc_forward([math.pi] * 6, [0.0] * 36) == pytest.approx(4.0, abs=1e-12)
    rng = np.random.default_rng(1)
    x = rng.uniform(-1, 1, 6)
    theta = rng.uniform(-math.pi, math.pi, 36)
    exact = qkd.vqc_forward(x, theta)
    assert abs(exact) <= 4.0
    assert qkd.vqc_forward(x, theta, shots=256, seed=3) == qkd.vqc_forward(x, theta, shots=256, seed=3)
    assert qkd.vqc_forward(x, theta, shots=200000, seed=3) == pytest.approx(exact, abs=0.05)
    with pytest.raises(qkd.QkdError):
        qkd.vqc_forward(x, theta[:10])


def test_metrics_and_folds():
    pred = [1, 1, 0, 0, 1, 0]
    labels = [1, 0, 0, 1, 1, 0]
    m = qkd.binary_metrics(pred, labels)
    assert m.accuracy == pytest.approx(4 / 6)
    assert m.precision == pytest.approx(2 / 3)
    assert m.recall == pytest.approx(2 / 3)
    assert m.f1 == pytest.approx(2 / 3)

    labels = [i % 3 == 0 for i in range(60)]
    labels = [int(v) for v in labels]
    folds = qkd.stratified_kfold(labels, 5, 11)
    seen = sorted(i for f in folds for i in f.val_indices)
    assert seen == list(range(60))
    for f in folds:
        assert set(f.train_indices).isdisjoint(f.val_indices)
        assert sum(labels[i] for i in f.val_indices) == 4


def test_synthesize_is_seeded_and_balanced(tmp_path):
    a = qkd.synthesize(100, seed=5)
    b = qkd.synthesize(100, seed=5)
    assert [w.samples for w in a] == [w.samples for w in b]
    assert sum(w.label for w in a) == 50
    for w in a[:5]:
        s = np.asarray(w.samples)
        assert len(s) == 256
        assert abs(s.mean()) < 1e-9
        assert s.std() == pytest.approx(1.0, rel=1e-9)
    path = str(tmp_path / "w.csv")
    qkd.write_windows(path, a)
    assert [w.label for w in qkd.read_windows(path)] == [w.label for w in a]
    with pytest.raises(qkd.QkdError):
        qkd.synthesize(100, balance=1.5, seed=1)


def test_cli(tmp_path):
    code, out, _ = qkd.run_cli(["paramcount", "--student", "cnn1d"])
    assert code == 0
    assert out.strip() == "cnn1d 36001"
    path = str(tmp_path / "w.csv")
    code, _, _ = qkd.run_cli(["synth", "--out", path, "--n", "60", "--seed", "2"])
    assert code == 0
    assert len(qkd.read_windows(path)) == 60
    assert qkd.run_cli(["synth", "--out", path, "--n", "60"])[0] == 1
    assert qkd.run_cli(["frobnicate"])[0] == 1
