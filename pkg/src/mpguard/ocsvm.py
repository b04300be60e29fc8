"""nu-one-class SVM trained on its dual with two-variable (SMO) updates.

Dual problem, with K the kernel matrix and C = 1 / (nu * n):

    min_a  0.5 * a' K a    s.t.  0 <= a_i <= C,  sum(a) = 1

A point x is accepted when sum_i a_i k(x_i, x) - rho >= 0.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, TextIO

import numpy as np

from .core import InvalidArgument

FORMAT_TAG = "mpguard-ocsvm 1"


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(f"{message} (residual {residual:.3g} after {iterations} updates)")
        self.residual = residual
        self.iterations = iterations


@dataclass(frozen=True)
class KernelDescriptor:
    kind: str = "rbf"
    gamma: float = 1.0

    def __post_init__(self):
        if self.kind not in ("rbf", "linear"):
            raise InvalidArgument(f"unknown kernel kind {self.kind!r}")
        if self.kind == "rbf" and not self.gamma > 0:
            raise InvalidArgument(f"rbf gamma must be positive, got {self.gamma}")

    def matrix(self, A: np.ndarray, B: np.ndarray) -> np.ndarray:
        """Kernel values between every row of ``A`` and every row of ``B``."""
        if A.shape[1] != B.shape[1]:
            raise InvalidArgument(f"dimension mismatch: {A.shape[1]} vs {B.shape[1]}")
        if self.kind == "linear":
            return A @ B.T
        sq = (np.sum(A * A, axis=1)[:, None] + np.sum(B * B, axis=1)[None, :]
              - 2.0 * (A @ B.T))
        return np.exp(-self.gamma * np.maximum(sq, 0.0))


def kernel_eval(x, y, k: KernelDescriptor) -> float:
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if x.shape != y.shape:
        raise InvalidArgument(f"dimension mismatch: {x.shape[0]} vs {y.shape[0]}")
    if k.kind == "linear":
        return float(np.dot(x, y))
    diff = x - y
    return float(np.exp(-k.gamma * np.dot(diff, diff)))


def default_gamma(X: np.ndarray) -> float:
    """1 / (n_features * variance of all feature values); 1.0 for flat data."""
    var = float(np.var(X))
    return 1.0 / (X.shape[1] * var) if var > 0 else 1.0


@dataclass(frozen=True)
class SvmModel:
    support_vectors: np.ndarray
    alphas: np.ndarray
    rho: float
    nu: float
    kernel: KernelDescriptor
    iterations: int = 0

    def decision_function(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X.reshape(1, -1)
        if X.shape[1] != self.support_vectors.shape[1]:
            raise InvalidArgument(
                f"expected {self.support_vectors.shape[1]} features, got {X.shape[1]}")
        out = np.empty(X.shape[0])
        # bounded memory for large test sets
        for s in range(0, X.shape[0], 4096):
            K = self.kernel.matrix(X[s:s + 4096], self.support_vectors)
            out[s:s + 4096] = K @ self.alphas - self.rho
        return out

    def predict(self, X) -> np.ndarray:
        """+1 inside the learned region, -1 outside; a zero score counts as +1."""
        return np.where(self.decision_function(X) >= 0.0, 1, -1)


def train_ocsvm(data, nu: float = 0.1, kernel: Optional[KernelDescriptor] = None,
                tol: float = 1e-3, max_iter: Optional[int] = None) -> SvmModel:
    """Fit a nu-one-class SVM.

    The working pair is the maximal KKT violator: the coordinate with the
    smallest gradient that can still grow and the one with the largest
    gradient that can still shrink. Training stops once their gradient gap
    drops below ``tol``. The gap is measured with the coefficients rescaled
    to sum to ``nu * n`` (upper bound 1), the usual convention for this
    tolerance, so ``tol`` does not shrink in meaning as ``n`` grows. Kernel
    rows are computed on demand; only the two most recent are kept.

    Raises
    ------
    InvalidArgument
        If ``nu`` is not in (0, 1) or the data is empty.
    ConvergenceError
        If ``max_iter`` (default ``100 * n``) pair updates do not suffice.
    """
    X = np.asarray(data, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if X.ndim != 2 or X.shape[0] == 0:
        raise InvalidArgument("training data must be a non-empty 2-D matrix")
    if not 0.0 < nu < 1.0:
        raise InvalidArgument(f"nu must lie in (0, 1), got {nu}")
    if kernel is None:
        kernel = KernelDescriptor("rbf", default_gamma(X))
    n = X.shape[0]
    C = 1.0 / (nu * n)
    if max_iter is None:
        max_iter = 100 * n

    cache: dict[int, np.ndarray] = {}

    def row(i: int) -> np.ndarray:
        r = cache.get(i)
        if r is None:
            if len(cache) >= 2:
                cache.pop(next(iter(cache)))
            r = kernel.matrix(X[i:i + 1], X)[0]
            cache[i] = r
        return r

    if kernel.kind == "rbf":
        diag = np.ones(n)
    else:
        diag = np.einsum("ij,ij->i", X, X)

    alpha = np.full(n, min(1.0 / n, C))
    # gradient of the objective: K @ alpha
    grad = np.zeros(n)
    for s in range(0, n, 1024):
        grad += kernel.matrix(X, X[s:s + 1024]) @ alpha[s:s + 1024]

    it = 0
    gap = np.inf
    while True:
        up = alpha < C
        low = alpha > 0.0
        i = int(np.argmin(np.where(up, grad, np.inf)))
        j = int(np.argmax(np.where(low, grad, -np.inf)))
        gap = grad[j] - grad[i]
        if gap * nu * n < tol:
            break
        if it >= max_iter:
            raise ConvergenceError("one-class SVM did not converge", float(gap * nu * n), it)
        Ki, Kj = row(i), row(j)
        curvature = diag[i] + diag[j] - 2.0 * Ki[j]
        step = gap / curvature if curvature > 1e-12 else np.inf
        step = min(step, C - alpha[i], alpha[j])
        if step >= C - alpha[i]:
            step = C - alpha[i]
            alpha[i] = C
            alpha[j] -= step
        elif step >= alpha[j]:
            step = alpha[j]
            alpha[j] = 0.0
            alpha[i] += step
        else:
            alpha[i] += step
            alpha[j] -= step
        grad += step * (Ki - Kj)
        it += 1

    rho = _recover_rho(alpha, grad, C)
    keep = alpha > 0.0
    return SvmModel(support_vectors=X[keep].copy(), alphas=alpha[keep].copy(), rho=rho,
                    nu=nu, kernel=kernel, iterations=it)


def _recover_rho(alpha: np.ndarray, grad: np.ndarray, C: float) -> float:
    free = (alpha > 0.0) & (alpha < C)
    if free.any():
        return float(np.mean(grad[free]))
    # no margin vectors: rho lies between the bound and the zero-weight gradients
    at_bound = alpha >= C
    at_zero = alpha <= 0.0
    lo = np.max(grad[at_bound]) if at_bound.any() else np.min(grad)
    hi = np.min(grad[at_zero]) if at_zero.any() else np.max(grad)
    return float(0.5 * (lo + hi))


def decide(model: SvmModel, x) -> int:
    x = np.asarray(x, dtype=np.float64).reshape(1, -1)
    return int(model.predict(x)[0])


def save_svm(model: SvmModel, fh: TextIO) -> None:
    """Plain-text model: ``key value`` header, then one ``alpha f1 f2 ...`` line per support vector."""
    fh.write(FORMAT_TAG + "\n")
    fh.write(f"kernel {model.kernel.kind}\n")
    fh.write(f"gamma {model.kernel.gamma!r}\n")
    fh.write(f"nu {model.nu!r}\n")
    fh.write(f"rho {model.rho!r}\n")
    fh.write(f"iterations {model.iterations}\n")
    fh.write(f"support_vectors {model.support_vectors.shape[0]} {model.support_vectors.shape[1]}\n")
    for a, sv in zip(model.alphas, model.support_vectors):
        fh.write(" ".join([repr(float(a))] + [repr(float(v)) for v in sv]) + "\n")


def load_svm(fh: TextIO) -> SvmModel:
    lines = [ln for ln in fh.read().splitlines() if ln.strip()]
    if not lines or lines[0].strip() != FORMAT_TAG:
        raise InvalidArgument("not an mpguard one-class SVM file")
    header: dict[str, list[str]] = {}
    pos = 1
    while pos < len(lines):
        key, *rest = lines[pos].split()
        header[key] = rest
        pos += 1
        if key == "support_vectors":
            break
    count, dim = int(header["support_vectors"][0]), int(header["support_vectors"][1])
    body = np.array([[float(v) for v in ln.split()] for ln in lines[pos:pos + count]])
    body = body.reshape(count, dim + 1)
    return SvmModel(support_vectors=body[:, 1:], alphas=body[:, 0],
                    rho=float(header["rho"][0]), nu=float(header["nu"][0]),
                    kernel=KernelDescriptor(header["kernel"][0], float(header["gamma"][0])),
                    iterations=int(header["iterations"][0]))
