import numpy as np

from rentt.activations import FinalActivation, relu
from rentt.equivalence import verify_equivalence
from rentt.network import DenseLayer, Network, augment
from rentt.tree import transform


def net_and_data(seed=0, n=400, outputs=3):
    rng = np.random.default_rng(seed)
    net = Network([
        DenseLayer(augment(rng.normal(size=(6, 4)), rng.normal(size=6) * 0.3), relu()),
        DenseLayer(augment(rng.normal(size=(outputs, 6)), rng.normal(size=outputs))),
    ], FinalActivation("softmax"))
    X = np.hstack([np.ones((n, 1)), rng.normal(size=(n, 4))])
    return net, X


def test_identity_check():
    net, X = net_and_data()
    report = verify_equivalence(net, transform(net, X), X, 1e-9)
    assert report.ok
    assert report.mismatch_count == 0 and report.unseen_count == 0
    assert report.max_rel_diff <= 1e-9
    assert report.samples_checked == 400


def test_half_data_strict_counts_unseen():
    net, X = net_and_data(1)
    tree = transform(net, X[:200], mode="strict")
    report = verify_equivalence(net, tree, X[200:])
    _, pats = net.forward_batch(X)
    seen = {tuple(p) for p in pats[:200]}
    unseen = sum(tuple(p) not in seen for p in pats[200:])
    assert unseen > 0
    assert report.unseen_count == unseen
    assert report.mismatch_count == unseen
    assert not report.ok
    assert any("unseen" in line for line in report.lines())


def test_half_data_elastic_recovers():
    net, X = net_and_data(2)
    tree = transform(net, X[:200])
    assert verify_equivalence(net, tree, X[200:]).ok


def test_metrics_are_paired():
    net, X = net_and_data(3)
    labels = np.random.default_rng(3).integers(0, 3, size=400)
    report = verify_equivalence(net, transform(net, X), X, labels=labels)
    nn_acc, dt_acc = report.metrics["accuracy"]
    assert nn_acc == dt_acc
    reg, Xr = net_and_data(4, outputs=1)
    reg = Network(reg.layers)
    r = verify_equivalence(reg, transform(reg, Xr), Xr, labels=np.zeros(400))
    assert r.metrics["mse"][0] == r.metrics["mse"][1]


def test_zero_tolerance_is_allowed():
    # exact agreement is not promised at tolerance 0, but the report stays consistent
    net, X = net_and_data(5)
    report = verify_equivalence(net, transform(net, X), X, tolerance=0.0)
    assert (report.mismatch_count == 0) == (report.max_rel_diff == 0.0)
