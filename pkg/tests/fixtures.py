"""Small trained ReLU networks for the toy and tabular tasks.

Training happens in float64 with torch and is seeded, so every fixture is
reproducible; results are cached per process.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import torch
from sklearn.datasets import load_diabetes, load_iris
from sklearn.model_selection import train_test_split

from rentt.activations import FinalActivation, relu
from rentt.network import DenseLayer, Network, augment


@dataclass
class Fixture:
    name: str
    net: Network
    task: str
    X_train: np.ndarray  # dummy prepended
    y_train: np.ndarray
    X_test: np.ndarray
    y_test: np.ndarray

    @property
    def X(self):
        return np.vstack([self.X_train, self.X_test])

    @property
    def y(self):
        return np.concatenate([self.y_train, self.y_test])


def with_dummy(X):
    return np.hstack([np.ones((X.shape[0], 1)), X])


def to_network(model: torch.nn.Sequential, final: str | None = None) -> Network:
    linears = [m for m in model if isinstance(m, torch.nn.Linear)]
    layers = []
    for k, lin in enumerate(linears):
        w = lin.weight.detach().double().numpy()
        b = lin.bias.detach().double().numpy()
        layers.append(DenseLayer(augment(w, b), relu() if k < len(linears) - 1 else None))
    return Network(layers, FinalActivation(final) if final else None)


def mlp(n_in, hidden, n_out, seed):
    torch.manual_seed(seed)
    sizes = [n_in] + list(hidden)
    mods = []
    for a, b in zip(sizes, sizes[1:]):
        mods += [torch.nn.Linear(a, b), torch.nn.ReLU()]
    mods.append(torch.nn.Linear(sizes[-1], n_out))
    return torch.nn.Sequential(*mods).double()


def fit(model, X, y, loss_fn, adam_steps=2000, lbfgs_steps=300, lr=1e-2):
    X = torch.as_tensor(X, dtype=torch.float64)
    y = torch.as_tensor(y)
    opt = torch.optim.Adam(model.parameters(), lr=lr)
    for _ in range(adam_steps):
        opt.zero_grad()
        loss = loss_fn(model(X), y)
        loss.backward()
        opt.step()
    if lbfgs_steps:
        opt = torch.optim.LBFGS(model.parameters(), lr=1.0, max_iter=lbfgs_steps,
                                tolerance_grad=1e-14, tolerance_change=1e-16, line_search_fn="strong_wolfe")

        def closure():
            opt.zero_grad()
            loss = loss_fn(model(X), y)
            loss.backward()
            return loss

        opt.step(closure)
    with torch.no_grad():
        return float(loss_fn(model(X), y))


def _regression(name, X, y, hidden, seed, **kw):
    Xtr, Xte, ytr, yte = train_test_split(X, y, test_size=0.25, random_state=seed)
    model = mlp(X.shape[1], hidden, 1, seed)
    fit(model, Xtr, ytr.reshape(-1, 1), torch.nn.functional.mse_loss, **kw)
    return Fixture(name, to_network(model), "regression", with_dummy(Xtr), ytr, with_dummy(Xte), yte)


@lru_cache(maxsize=None)
def absolute(seed=2, n=200, hidden=(2,)):
    rng = np.random.default_rng(seed)
    X = rng.uniform(-1, 1, (n, 1))
    return _regression("absolute", X, np.abs(X[:, 0]), hidden, seed)


@lru_cache(maxsize=None)
def linear(seed=3, n=1000, hidden=(8, 4)):
    rng = np.random.default_rng(seed)
    X = rng.uniform(-1, 1, (n, 3))
    y = 4 * X[:, 0] + X[:, 1] + 0.001 * X[:, 2]
    return _regression("linear", X, y, hidden, seed)


@lru_cache(maxsize=None)
def diabetes(seed=0, hidden=(8, 4)):
    data = load_diabetes()
    X = (data.data - data.data.mean(0)) / data.data.std(0)
    y = (data.target - data.target.mean()) / data.target.std()
    return _regression("diabetes", X, y, hidden, seed, adam_steps=500, lbfgs_steps=0)


@lru_cache(maxsize=None)
def iris(seed=0, hidden=(8, 4)):
    data = load_iris()
    X = (data.data - data.data.mean(0)) / data.data.std(0)
    Xtr, Xte, ytr, yte = train_test_split(X, data.target, test_size=0.25, random_state=seed, stratify=data.target)
    model = mlp(4, hidden, 3, seed)
    fit(model, Xtr, torch.as_tensor(ytr), torch.nn.functional.cross_entropy, adam_steps=500, lbfgs_steps=0)
    return Fixture("iris", to_network(model, "softmax"), "classification",
                   with_dummy(Xtr), ytr.astype(float), with_dummy(Xte), yte.astype(float))


ALL = (absolute, linear, diabetes, iris)
