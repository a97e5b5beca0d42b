"""Regressors from colour-count features to cost-to-go, and the model bundle file.

* Linear SVR: epsilon-insensitive loss with a free bias. The dual is solved
  by SMO and the primal weight vector is rebuilt from it.
* Kernel SVR: the same dual over a precomputed kernel matrix (RBF by default).
* GPR with the bias-augmented dot-product kernel ``prior * (x.x' + 1)``,
  solved in Gram form or as Bayesian linear regression, whichever is smaller.
"""

from __future__ import annotations

import hashlib
import io
import json
import struct
from dataclasses import asdict, dataclass, field
from typing import ClassVar

import numpy as np
from scipy.linalg import solve_triangular

from .errors import (
    BundleError,
    BundleVersionError,
    ChecksumError,
    DimensionError,
    FactorizationError,
    InputError,
    ParameterMismatchError,
)
from .features import FeatureConfig
from .wl import ColourTable

KINDS = ("svr", "svr-rbf", "gpr", "2lwl-svr")


@dataclass(frozen=True)
class Hyperparameters:
    C: float = 1.0
    epsilon: float = 0.1
    noise: float = 0.1  # GP noise variance
    prior: float = 1.0  # GP prior scale
    gamma: float | None = None  # RBF width; None means 1 / n_features
    tol: float = 1e-4
    max_epochs: int = 2000
    seed: int = 0  # recorded in bundles; both solvers are deterministic

    def __post_init__(self):
        if not self.C > 0:
            raise InputError(f"C must be > 0, got {self.C}")
        if not self.epsilon >= 0:
            raise InputError(f"epsilon must be >= 0, got {self.epsilon}")
        if not self.noise >= 0:
            raise InputError(f"noise variance must be >= 0, got {self.noise}")
        if not self.prior > 0:
            raise InputError(f"prior scale must be > 0, got {self.prior}")
        if self.gamma is not None and not self.gamma > 0:
            raise InputError(f"gamma must be > 0, got {self.gamma}")
        if not self.tol > 0 or self.max_epochs < 1:
            raise InputError("tol must be > 0 and max_epochs >= 1")


def _check_xy(X, y) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2:
        raise DimensionError(f"X must be 2-d, got shape {X.shape}")
    if y.ndim != 1 or len(y) != len(X):
        raise DimensionError(f"X has {len(X)} rows but y has shape {y.shape}")
    if len(y) == 0:
        raise DimensionError("need at least one training example")
    if not np.all(np.isfinite(y)):
        raise InputError("labels must be finite")
    if not np.all(np.isfinite(X)):
        raise InputError("features must be finite")
    return X, y


def _as_rows(model, X) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != model.n_features:
        raise DimensionError(f"model expects {model.n_features} features, got {X.shape[1]}")
    return X


def _augment(X: np.ndarray) -> np.ndarray:
    return np.hstack([X, np.ones((len(X), 1))])


TAU = 1e-12
GRAM_CACHE_ROWS = 4096


@dataclass
class _DualSolution:
    beta: np.ndarray  # alpha - alpha*
    bias: float
    converged: bool
    iterations: int


def _solve_svr_dual(column, diag: np.ndarray, y: np.ndarray, C: float, epsilon: float,
                    tol: float, max_iter: int) -> _DualSolution:
    """SMO for the epsilon-SVR dual with a free bias.

    Variables ``alpha, alpha*`` in ``[0, C]^n`` with ``sum(alpha - alpha*) = 0``.
    ``column(i)`` returns the kernel column of training point ``i``. The first
    working variable is the maximal violator, the second maximises the
    second-order gain; the pair update and the bias rule follow libsvm.
    ``r = y - K beta`` is the residual before the bias.
    """
    n = len(y)
    al = np.zeros(n)
    st = np.zeros(n)
    r = y.astype(np.float64).copy()
    up_a = np.ones(n, bool)    # alpha < C
    up_s = np.zeros(n, bool)   # alpha* > 0
    low_a = np.zeros(n, bool)  # alpha > 0
    low_s = np.ones(n, bool)   # alpha* < C
    neg_inf = -np.inf
    converged = False
    it = 0
    while it < max_iter:
        # i: maximal violator among variables that may move "up"
        ra = np.where(up_a, r, neg_inf)
        rs = np.where(up_s, r, neg_inf)
        ia, is_ = int(ra.argmax()), int(rs.argmax())
        if ra[ia] - epsilon >= rs[is_] + epsilon:
            i, i_star, m = ia, False, ra[ia] - epsilon
        else:
            i, i_star, m = is_, True, rs[is_] + epsilon
        # gaps b_t = m - score_t over variables that may move "down"
        ba = np.where(low_a, (m + epsilon) - r, neg_inf)
        bs = np.where(low_s, (m - epsilon) - r, neg_inf)
        if m == neg_inf or max(ba.max(), bs.max()) < tol:
            converged = True
            break
        Ki = column(i)
        quad = diag[i] + diag - 2.0 * Ki
        quad[quad <= 0] = TAU
        ga = np.where(ba > 0, -(ba * ba) / quad, np.inf)
        gs = np.where(bs > 0, -(bs * bs) / quad, np.inf)
        ja, js = int(ga.argmin()), int(gs.argmin())
        j, j_star = (ja, False) if ga[ja] <= gs[js] else (js, True)
        Kj = column(j)

        # libsvm pair update; z = +1 for alpha, -1 for alpha*
        zi = -1.0 if i_star else 1.0
        zj = -1.0 if j_star else 1.0
        ai = st[i] if i_star else al[i]
        aj = st[j] if j_star else al[j]
        Gi = -zi * (r[i] - zi * epsilon)
        Gj = -zj * (r[j] - zj * epsilon)
        Qij = zi * zj * Ki[j]
        old_i, old_j = ai, aj
        if zi != zj:
            q = diag[i] + diag[j] + 2.0 * Qij
            q = q if q > 0 else TAU
            delta = (-Gi - Gj) / q
            diff = ai - aj
            ai += delta
            aj += delta
            if diff > 0:
                if aj < 0:
                    aj, ai = 0.0, diff
            elif ai < 0:
                ai, aj = 0.0, -diff
            if diff > 0:
                if ai > C:
                    ai, aj = C, C - diff
            elif aj > C:
                aj, ai = C, C + diff
        else:
            q = diag[i] + diag[j] - 2.0 * Qij
            q = q if q > 0 else TAU
            delta = (Gi - Gj) / q
            total = ai + aj
            ai -= delta
            aj += delta
            if total > C:
                if ai > C:
                    ai, aj = C, total - C
                if aj > C:
                    aj, ai = C, total - C
            else:
                if aj < 0:
                    aj, ai = 0.0, total
                if ai < 0:
                    ai, aj = 0.0, total
        for idx, star, val in ((i, i_star, ai), (j, j_star, aj)):
            if star:
                st[idx] = val
                up_s[idx] = val > 0
                low_s[idx] = val < C
            else:
                al[idx] = val
                up_a[idx] = val < C
                low_a[idx] = val > 0
        r -= (zi * (ai - old_i)) * Ki + (zj * (aj - old_j)) * Kj
        it += 1

    # bias: average over free variables, else the midpoint of the feasible range
    free_a = (al > 0) & (al < C)
    free_s = (st > 0) & (st < C)
    if free_a.any() or free_s.any():
        # for a free alpha, b = r - eps; for a free alpha*, b = r + eps
        bias = float(np.concatenate([r[free_a] - epsilon, r[free_s] + epsilon]).mean())
    else:
        # alpha = 0 or alpha* = C bound b from below; alpha = C or alpha* = 0 from above
        lower = np.concatenate([r[al <= 0] - epsilon, r[st >= C] + epsilon])
        upper = np.concatenate([r[al >= C] - epsilon, r[st <= 0] + epsilon])
        lo = lower.max() if len(lower) else -np.inf
        hi = upper.min() if len(upper) else np.inf
        bias = float((lo + hi) / 2)
    return _DualSolution(al - st, bias, converged, it)


# ---------------------------------------------------------------------------
# models


@dataclass
class LinearModel:
    weights: np.ndarray
    bias: float
    n_support: int = 0
    converged: bool = True

    name: ClassVar[str] = "linear"

    @property
    def n_features(self) -> int:
        return len(self.weights)

    @property
    def n_parameters(self) -> int:
        return len(self.weights) + 1

    def predict(self, X) -> np.ndarray:
        return _as_rows(self, X) @ self.weights + self.bias

    def to_arrays(self) -> dict:
        return {"weights": self.weights, "bias": np.array([self.bias])}

    @classmethod
    def from_arrays(cls, arrays: dict, meta: dict) -> "LinearModel":
        return cls(arrays["weights"], float(arrays["bias"][0]), int(meta.get("n_support", 0)))


def rbf_kernel(A: np.ndarray, B: np.ndarray, gamma: float) -> np.ndarray:
    sq = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * (A @ B.T)
    return np.exp(-gamma * np.maximum(sq, 0.0))


def linear_kernel(A: np.ndarray, B: np.ndarray, gamma: float = 0.0) -> np.ndarray:
    return A @ B.T


_KERNELS = {"rbf": rbf_kernel, "linear": linear_kernel}


@dataclass
class KernelModel:
    support: np.ndarray  # support feature vectors, one per row
    coef: np.ndarray
    bias: float
    kernel: str = "rbf"
    gamma: float = 1.0
    converged: bool = True

    name: ClassVar[str] = "kernel"

    @property
    def n_features(self) -> int:
        return self.support.shape[1]

    @property
    def n_parameters(self) -> int:
        return self.support.size + len(self.coef) + 1

    def predict(self, X) -> np.ndarray:
        X = _as_rows(self, X)
        if len(self.coef) == 0:
            return np.full(len(X), self.bias)
        return _KERNELS[self.kernel](X, self.support, self.gamma) @ self.coef + self.bias

    def to_arrays(self) -> dict:
        return {"support": self.support, "coef": self.coef, "bias": np.array([self.bias]),
                "gamma": np.array([self.gamma])}

    @classmethod
    def from_arrays(cls, arrays: dict, meta: dict) -> "KernelModel":
        return cls(arrays["support"], arrays["coef"], float(arrays["bias"][0]),
                   meta["kernel"], float(arrays["gamma"][0]))


@dataclass
class GPModel:
    """GP posterior under ``k(x, x') = prior * (x.x' + 1)``.

    ``form == "dual"``: ``train`` holds the augmented training rows, ``alpha``
    the dual weights and ``factor`` the Cholesky factor of ``K + noise I``.
    ``form == "primal"``: ``alpha`` is the posterior mean weight vector in the
    augmented feature space and ``factor`` the Cholesky factor of
    ``prior X'X + noise I``.
    """

    form: str
    alpha: np.ndarray
    factor: np.ndarray
    noise: float
    prior: float
    train: np.ndarray | None = None
    n_features: int = 0

    name: ClassVar[str] = "gp"

    @property
    def n_parameters(self) -> int:
        return self.n_features + 1

    def predict(self, X, return_std: bool = False):
        X = _as_rows(self, X)
        Xa = _augment(X)
        if self.form == "dual":
            k = self.prior * (Xa @ self.train.T)
            mean = k @ self.alpha
            v = solve_triangular(self.factor, k.T, lower=True, check_finite=False)
            var = self.prior * (Xa * Xa).sum(1) + self.noise - (v * v).sum(0)
        else:
            phi = np.sqrt(self.prior) * Xa
            mean = phi @ self.alpha
            v = solve_triangular(self.factor, phi.T, lower=True, check_finite=False)
            var = self.noise * (v * v).sum(0) + self.noise
        if not return_std:
            return mean
        return mean, np.sqrt(np.maximum(var, 0.0))

    def to_arrays(self) -> dict:
        out = {"alpha": self.alpha, "factor": self.factor,
               "noise": np.array([self.noise]), "prior": np.array([self.prior])}
        if self.train is not None:
            out["train"] = self.train
        return out

    @classmethod
    def from_arrays(cls, arrays: dict, meta: dict) -> "GPModel":
        return cls(meta["form"], arrays["alpha"], arrays["factor"], float(arrays["noise"][0]),
                   float(arrays["prior"][0]), arrays.get("train"), int(meta["n_features"]))


_MODEL_CLASSES = {c.name: c for c in (LinearModel, KernelModel, GPModel)}


# ---------------------------------------------------------------------------
# training


def _max_iter(max_epochs: int, n: int) -> int:
    return max_epochs * max(n, 1)


def train_svr_linear(X, y, C: float = 1.0, epsilon: float = 0.1, tol: float = 1e-4,
                     max_epochs: int = 2000) -> LinearModel:
    """Linear epsilon-SVR; the dual is solved by SMO and ``w`` rebuilt from it."""
    Hyperparameters(C=C, epsilon=epsilon, tol=tol, max_epochs=max_epochs)
    X, y = _check_xy(X, y)
    n = len(y)
    if n <= GRAM_CACHE_ROWS:
        K = X @ X.T
        column = lambda i: K[i]  # noqa: E731
        diag = np.diag(K).copy()
    else:
        column = lambda i: X @ X[i]  # noqa: E731
        diag = np.einsum("ij,ij->i", X, X)
    sol = _solve_svr_dual(column, diag, y, C, epsilon, tol, _max_iter(max_epochs, n))
    w = X.T @ sol.beta
    return LinearModel(w, sol.bias, int(np.count_nonzero(sol.beta)), sol.converged)


def train_svr_kernel(X, y, C: float = 1.0, epsilon: float = 0.1, kernel: str = "rbf",
                     gamma: float | None = None, tol: float = 1e-4,
                     max_epochs: int = 2000) -> KernelModel:
    """Kernel epsilon-SVR by SMO over the precomputed kernel matrix."""
    X, y = _check_xy(X, y)
    if kernel not in _KERNELS:
        raise InputError(f"unknown kernel {kernel!r}")
    if gamma is None:
        gamma = 1.0 / max(X.shape[1], 1)
    Hyperparameters(C=C, epsilon=epsilon, gamma=gamma, tol=tol, max_epochs=max_epochs)
    K = _KERNELS[kernel](X, X, gamma)
    sol = _solve_svr_dual(lambda i: K[i], np.diag(K).copy(), y, C, epsilon, tol,
                          _max_iter(max_epochs, len(y)))
    nz = np.flatnonzero(sol.beta)
    return KernelModel(X[nz].copy(), sol.beta[nz].copy(), sol.bias, kernel, float(gamma), sol.converged)


def train_svr_rbf(X, y, C: float = 1.0, epsilon: float = 0.1, gamma: float | None = None,
                  tol: float = 1e-4, max_epochs: int = 2000) -> KernelModel:
    return train_svr_kernel(X, y, C, epsilon, "rbf", gamma, tol, max_epochs)


def _cholesky(A: np.ndarray) -> np.ndarray:
    try:
        L = np.linalg.cholesky(A)
    except np.linalg.LinAlgError as exc:
        raise FactorizationError("Gram matrix is not positive definite; increase the noise variance") from exc
    d = np.diag(L) ** 2
    if len(d) and d.min() <= 1e-12 * max(np.diag(A).max(), 1e-300):
        raise FactorizationError("Gram matrix is numerically singular; increase the noise variance")
    return L


def train_gpr(X, y, noise: float = 0.1, prior: float = 1.0, form: str = "auto") -> GPModel:
    """Exact GP regression with the bias-augmented dot-product kernel."""
    X, y = _check_xy(X, y)
    Hyperparameters(noise=noise, prior=prior)
    Xa = _augment(X)
    n, d = Xa.shape
    if form == "auto":
        form = "dual" if n < d else "primal"
    if form == "dual":
        K = prior * (Xa @ Xa.T)
        L = _cholesky(K + noise * np.eye(n))
        alpha = solve_triangular(L.T, solve_triangular(L, y, lower=True), lower=False)
        return GPModel("dual", alpha, L, noise, prior, Xa, X.shape[1])
    if form == "primal":
        phi = np.sqrt(prior) * Xa
        L = _cholesky(phi.T @ phi + noise * np.eye(d))
        w = solve_triangular(L.T, solve_triangular(L, phi.T @ y, lower=True), lower=False)
        return GPModel("primal", w, L, noise, prior, None, X.shape[1])
    raise InputError(f"unknown GP form {form!r}")


def fit(kind: str, X, y, hp: Hyperparameters = Hyperparameters()):
    if kind in ("svr", "2lwl-svr"):
        return train_svr_linear(X, y, hp.C, hp.epsilon, hp.tol, hp.max_epochs)
    if kind == "svr-rbf":
        return train_svr_rbf(X, y, hp.C, hp.epsilon, hp.gamma, hp.tol, hp.max_epochs)
    if kind == "gpr":
        return train_gpr(X, y, hp.noise, hp.prior)
    raise InputError(f"unknown model kind {kind!r} (choose from {', '.join(KINDS)})")


def predict(model, x):
    """Estimate for one feature vector; ``(mean, std)`` for GP models."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise DimensionError("predict takes a single feature vector")
    if isinstance(model, GPModel):
        mean, std = model.predict(x, return_std=True)
        return float(mean[0]), float(std[0])
    return float(model.predict(x)[0])


# ---------------------------------------------------------------------------
# bundle file

MAGIC = b"WLHB"
FORMAT_VERSION = 1
_DIGEST = 32


@dataclass
class Bundle:
    kind: str
    model: object
    table: ColourTable
    features: FeatureConfig
    hyperparameters: Hyperparameters = field(default_factory=Hyperparameters)
    extra: dict = field(default_factory=dict)

    def featurize(self, graph) -> np.ndarray:
        return self.features.featurize(graph, self.table)


def _write_array(buf: io.BytesIO, name: str, arr: np.ndarray) -> None:
    arr = np.ascontiguousarray(arr, dtype="<f8")
    raw = name.encode()
    buf.write(struct.pack("<H", len(raw)))
    buf.write(raw)
    buf.write(struct.pack("<B", arr.ndim))
    buf.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
    buf.write(arr.tobytes())


def _read_exact(buf: io.BytesIO, n: int) -> bytes:
    data = buf.read(n)
    if len(data) != n:
        raise ChecksumError("bundle is truncated")
    return data


def _read_array(buf: io.BytesIO) -> tuple[str, np.ndarray]:
    (nlen,) = struct.unpack("<H", _read_exact(buf, 2))
    name = _read_exact(buf, nlen).decode()
    (ndim,) = struct.unpack("<B", _read_exact(buf, 1))
    shape = struct.unpack(f"<{ndim}Q", _read_exact(buf, 8 * ndim))
    count = int(np.prod(shape)) if ndim else 1
    arr = np.frombuffer(_read_exact(buf, 8 * count), dtype="<f8").reshape(shape).astype(np.float64)
    return name, arr


def bundle_bytes(bundle: Bundle) -> bytes:
    model = bundle.model
    meta = {
        "kind": bundle.kind,
        "model": model.name,
        "features": bundle.features.to_dict(),
        "hyperparameters": asdict(bundle.hyperparameters),
        "table_checksum": bundle.table.checksum(),
        "n_features": model.n_features,
        "extra": bundle.extra,
    }
    if isinstance(model, KernelModel):
        meta["kernel"] = model.kernel
    if isinstance(model, GPModel):
        meta["form"] = model.form
    if isinstance(model, LinearModel):
        meta["n_support"] = model.n_support
    meta_raw = json.dumps(meta, sort_keys=True, separators=(",", ":")).encode()
    table_raw = bundle.table.to_json().encode()
    arrays = model.to_arrays()

    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<I", FORMAT_VERSION))
    buf.write(struct.pack("<I", len(meta_raw)))
    buf.write(meta_raw)
    buf.write(struct.pack("<I", len(table_raw)))
    buf.write(table_raw)
    buf.write(struct.pack("<I", len(arrays)))
    for name in sorted(arrays):
        _write_array(buf, name, arrays[name])
    body = buf.getvalue()
    return body + hashlib.sha256(body).digest()


def save_model(bundle: Bundle, path) -> None:
    with open(path, "wb") as fh:
        fh.write(bundle_bytes(bundle))


def bundle_from_bytes(data: bytes, iterations: int | None = None,
                      algorithm: str | None = None) -> Bundle:
    if len(data) < 8 or data[:4] != MAGIC:
        raise BundleError("not a model bundle (bad magic header)")
    (version,) = struct.unpack("<I", data[4:8])
    if version != FORMAT_VERSION:
        raise BundleVersionError(f"bundle format version {version}, this library reads {FORMAT_VERSION}")
    if len(data) < 8 + _DIGEST:
        raise ChecksumError("bundle is truncated")
    body, digest = data[:-_DIGEST], data[-_DIGEST:]
    if hashlib.sha256(body).digest() != digest:
        raise ChecksumError("bundle checksum mismatch (truncated or corrupted file)")

    buf = io.BytesIO(body[8:])
    (mlen,) = struct.unpack("<I", _read_exact(buf, 4))
    meta = json.loads(_read_exact(buf, mlen))
    (tlen,) = struct.unpack("<I", _read_exact(buf, 4))
    table = ColourTable.from_json(_read_exact(buf, tlen).decode())
    if table.checksum() != meta["table_checksum"]:
        raise ChecksumError("colour table checksum mismatch")
    (count,) = struct.unpack("<I", _read_exact(buf, 4))
    arrays = dict(_read_array(buf) for _ in range(count))

    features = FeatureConfig(**meta["features"])
    if iterations is not None and iterations != features.iterations:
        raise ParameterMismatchError(
            f"bundle was trained with {features.iterations} iterations, pipeline asks for {iterations}")
    if algorithm is not None and algorithm != features.algorithm:
        raise ParameterMismatchError(
            f"bundle uses {features.algorithm} features, pipeline asks for {algorithm}")
    model = _MODEL_CLASSES[meta["model"]].from_arrays(arrays, meta)
    return Bundle(meta["kind"], model, table, features, Hyperparameters(**meta["hyperparameters"]),
                  meta.get("extra", {}))


def load_model(path, iterations: int | None = None, algorithm: str | None = None) -> Bundle:
    with open(path, "rb") as fh:
        return bundle_from_bytes(fh.read(), iterations, algorithm)
