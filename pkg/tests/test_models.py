import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from wlheur import blocksworld
from wlheur.errors import (BundleError, BundleVersionError, ChecksumError, DimensionError,
                           FactorizationError, InputError, ParameterMismatchError)
from wlheur.features import FeatureConfig
from wlheur.ilg import build_state_ilg
from wlheur.models import (Bundle, Hyperparameters, LinearModel, bundle_bytes, bundle_from_bytes, fit,
                           load_model, predict, save_model, train_gpr, train_svr_kernel,
                           train_svr_linear, train_svr_rbf)
from wlheur.pddl import parse_domain, parse_problem
from wlheur.plans import build_dataset, optimal_plan


@pytest.fixture(scope="module")
def bw_data():
    dom = parse_domain(blocksworld.DOMAIN)
    pairs = []
    for k in range(8):
        task = parse_problem(blocksworld.generate_problem(3 + k % 2, k), dom)
        pairs.append((task, optimal_plan(task)))
    ds = build_dataset(pairs)
    cfg = FeatureConfig(iterations=2)
    graphs = [build_state_ilg(ls.task, ls.state) for ls in ds.states]
    table = cfg.collect(graphs)
    return cfg, table, cfg.featurize_many(graphs, table).astype(float), np.asarray(ds.labels)


# ---------------------------------------------------------------------------
# linear SVR


def test_svr_realizable():
    X = np.linspace(-3, 3, 25)[:, None]
    y = 2 * X[:, 0]
    model = train_svr_linear(X, y, C=10.0, epsilon=0.1)
    assert np.max(np.abs(model.predict(X) - y)) <= 0.1 + 1e-3


def test_svr_single_example():
    model = train_svr_linear([[1.0, 2.0]], [3.0], epsilon=0.1)
    assert abs(model.predict([[1.0, 2.0]])[0] - 3.0) <= 0.1 + 1e-6


def test_svr_beats_constant_on_blocksworld(bw_data):
    _, table, X, y = bw_data
    model = train_svr_linear(X, y)
    mse = np.mean((model.predict(X) - y) ** 2)
    assert mse <= np.var(y)
    assert model.n_parameters == len(table) + 1


def test_svr_deterministic():
    rng = np.random.default_rng(0)
    X, y = rng.normal(size=(30, 4)), rng.normal(size=30)
    a = train_svr_linear(X, y)
    b = train_svr_linear(X, y)
    assert np.array_equal(a.weights, b.weights) and a.bias == b.bias


def test_primal_dual_equivalence():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(20, 3))
    y = X @ [1.0, -1.0, 0.5] + rng.normal(scale=0.3, size=20)
    lin = train_svr_linear(X, y, C=1.0, epsilon=0.1, tol=1e-8, max_epochs=20000)
    ker = train_svr_kernel(X, y, C=1.0, epsilon=0.1, kernel="linear", tol=1e-8, max_epochs=20000)
    Z = rng.normal(size=(20, 3))
    assert np.max(np.abs(lin.predict(Z) - ker.predict(Z))) <= 1e-3


def test_svr_errors():
    with pytest.raises(DimensionError):
        train_svr_linear(np.ones((3, 2)), np.ones(4))
    with pytest.raises(InputError):
        train_svr_linear(np.ones((2, 2)), [1.0, np.nan])
    with pytest.raises(InputError):
        train_svr_linear(np.ones((2, 2)), [1.0, 2.0], epsilon=-0.1)
    with pytest.raises(InputError):
        Hyperparameters(C=0)


# ---------------------------------------------------------------------------
# RBF SVR


def test_rbf_single_point():
    model = train_svr_rbf([[0.5, 1.0]], [4.0], epsilon=0.1)
    assert abs(model.predict([[0.5, 1.0]])[0] - 4.0) <= 0.1 + 1e-6


def test_rbf_beats_linear_on_xor():
    X = np.array([[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]])
    y = np.array([0.0, 0.0, 1.0, 1.0])
    rbf = train_svr_rbf(X, y, C=100.0, epsilon=0.01, gamma=2.0)
    lin = train_svr_linear(X, y, C=100.0, epsilon=0.01)
    assert np.mean((rbf.predict(X) - y) ** 2) < np.mean((lin.predict(X) - y) ** 2)


def test_rbf_small_gamma_is_nearly_constant():
    rng = np.random.default_rng(2)
    X, y = rng.normal(size=(15, 2)), rng.normal(size=15)
    model = train_svr_rbf(X, y, gamma=1e-9)
    pred = model.predict(rng.normal(size=(10, 2)) * 5)
    assert np.ptp(pred) < 1e-6


def test_rbf_coefficients_bounded():
    rng = np.random.default_rng(3)
    X, y = rng.normal(size=(40, 3)), rng.normal(size=40) * 5
    model = train_svr_rbf(X, y, C=0.5)
    assert np.all(np.abs(model.coef) <= 0.5 + 1e-12)
    assert len(model.coef) == len(model.support)


# ---------------------------------------------------------------------------
# GPR


def test_gpr_single_point():
    model = train_gpr([[1.0]], [2.0], noise=1e-6, prior=1.0)
    mean, std = model.predict([[1.0]], return_std=True)
    assert abs(mean[0] - 2.0) <= 1e-3
    k = 2.0
    assert mean[0] == pytest.approx(k / (k + 1e-6) * 2.0, rel=1e-9)
    assert std[0] >= 0


def test_gpr_variance_grows_off_data():
    X = np.array([[1.0, 0.0, 0.0], [2.0, 0.0, 0.0]])
    model = train_gpr(X, [1.0, 2.0], noise=0.01)
    _, s_train = model.predict(X[:1], return_std=True)
    _, s_far = model.predict([[0.0, 5.0, 0.0]], return_std=True)
    assert s_far[0] >= s_train[0]


def test_gpr_singular_gram():
    X = np.array([[1.0, 2.0], [1.0, 2.0], [0.0, 1.0]])
    with pytest.raises(FactorizationError):
        train_gpr(X, [1.0, 1.0, 2.0], noise=0.0, form="dual")


@pytest.mark.parametrize("n,d", [(5, 12), (30, 4)])
def test_gpr_dual_and_primal_agree(n, d):
    rng = np.random.default_rng(n)
    X, y = rng.normal(size=(n, d)), rng.normal(size=n)
    dual = train_gpr(X, y, noise=0.1, form="dual")
    primal = train_gpr(X, y, noise=0.1, form="primal")
    Z = rng.normal(size=(10, d))
    m1, s1 = dual.predict(Z, return_std=True)
    m2, s2 = primal.predict(Z, return_std=True)
    assert np.max(np.abs(m1 - m2)) <= 1e-6
    assert np.max(np.abs(s1 - s2)) <= 1e-6


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, (6, 3), elements=st.floats(-5, 5)), st.floats(0.01, 2.0))
def test_gp_posterior_below_prior(X, noise):
    y = X.sum(1)
    model = train_gpr(X, y, noise=noise, prior=1.0)
    _, std = model.predict(X, return_std=True)
    prior_var = (X * X).sum(1) + 1.0 + noise
    assert np.all(std ** 2 <= prior_var * (1 + 1e-9) + 1e-9)
    assert np.all(std >= 0)


def test_predict_single_vector():
    lin = LinearModel(np.array([1.0, 2.0]), 0.5)
    assert predict(lin, np.zeros(2)) == 0.5
    gp = train_gpr([[1.0, 0.0], [0.0, 1.0]], [1.0, 2.0])
    mean, std = predict(gp, np.array([1.0, 0.0]))
    assert std >= 0 and np.isfinite(mean)
    with pytest.raises(DimensionError):
        predict(lin, np.zeros(3))
    with pytest.raises(DimensionError):
        predict(lin, np.zeros((1, 2)))


def test_fit_dispatch_and_unknown_kind(bw_data):
    _, _, X, y = bw_data
    assert fit("svr", X, y).name == "linear"
    assert fit("svr-rbf", X, y).name == "kernel"
    assert fit("gpr", X, y).name == "gp"
    with pytest.raises(InputError):
        fit("forest", X, y)


# ---------------------------------------------------------------------------
# bundles


def _bundle(bw_data, kind="gpr"):
    cfg, table, X, y = bw_data
    hp = Hyperparameters()
    return Bundle(kind, fit(kind, X, y, hp), table, cfg, hp)


def test_bundle_file_round_trip(bw_data, tmp_path):
    b = _bundle(bw_data, "svr")
    save_model(b, tmp_path / "m.wlh")
    loaded = load_model(tmp_path / "m.wlh")
    X = bw_data[2]
    assert np.array_equal(loaded.model.predict(X), b.model.predict(X))
    assert loaded.hyperparameters == b.hyperparameters and loaded.kind == "svr"
    assert (tmp_path / "m.wlh").read_bytes()[:4] == b"WLHB"


def test_bundle_truncated(bw_data):
    data = bundle_bytes(_bundle(bw_data))
    with pytest.raises(ChecksumError):
        bundle_from_bytes(data[: len(data) // 2])
    corrupt = bytearray(data)
    corrupt[20] ^= 0xFF
    with pytest.raises(ChecksumError):
        bundle_from_bytes(bytes(corrupt))


def test_bundle_version_and_magic(bw_data):
    data = bundle_bytes(_bundle(bw_data))
    with pytest.raises(BundleVersionError):
        bundle_from_bytes(data[:4] + (2).to_bytes(4, "little") + data[8:])
    with pytest.raises(BundleError):
        bundle_from_bytes(b"XXXX" + data[4:])


def test_bundle_parameter_mismatch(bw_data):
    data = bundle_bytes(_bundle(bw_data))
    assert bundle_from_bytes(data, iterations=2, algorithm="wl").features.iterations == 2
    with pytest.raises(ParameterMismatchError):
        bundle_from_bytes(data, iterations=4)
    with pytest.raises(ParameterMismatchError):
        bundle_from_bytes(data, algorithm="2lwl")
