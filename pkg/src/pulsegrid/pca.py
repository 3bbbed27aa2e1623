"""Principal-component reduction keeping the smallest number of leading
eigenpairs whose eigenvalues hold a target share of the total variance."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DimensionMismatch, MalformedRecord, NumericalFailure, TooFewRows

DEFAULT_RETAIN = 0.98
JACOBI_TOL = 1e-12


@dataclass(eq=False)
class PcaModel:
    mean: np.ndarray
    components: np.ndarray  # k x L, rows orthonormal
    eigenvalues: np.ndarray  # all L eigenvalues, non-increasing
    k: int
    energy_fraction: float

    @property
    def dim(self) -> int:
        return self.mean.size

    def transform(self, x) -> np.ndarray:
        return pca_transform(self, x)

    def inverse_transform(self, y) -> np.ndarray:
        return self.mean + np.asarray(y) @ self.components


# ---------------------------------------------------------------------------
# eigensolvers


def _round_robin(m: int):
    """Yield m-1 rounds of m/2 disjoint index pairs covering every pair once (m even)."""
    players = list(range(m))
    for _ in range(m - 1):
        half = m // 2
        yield np.array(players[:half]), np.array(players[::-1][:half])
        players = [players[0], players[-1]] + players[1:-1]


def jacobi_eigh(a, tol: float = JACOBI_TOL, max_sweeps: int | None = None):
    """Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Each sweep visits all index pairs in round-robin order; the pairs of one
    round are disjoint, so their rotations commute and are applied together.
    Iteration stops once the off-diagonal Frobenius norm falls below
    ``tol`` times the matrix norm.

    Returns eigenvalues (ascending) and the matching eigenvectors as columns.
    """
    A = np.array(a, dtype=np.float64)
    n = A.shape[0]
    if A.shape != (n, n):
        raise ValueError("matrix must be square")
    if not np.allclose(A, A.T, rtol=0, atol=1e-12 * max(1.0, np.abs(A).max())):
        raise ValueError("matrix must be symmetric")
    A = 0.5 * (A + A.T)
    V = np.eye(n)
    if n == 1:
        return A.diagonal().copy(), V
    m = n + (n % 2)
    if m != n:
        # dummy row/column so every round pairs all indices
        A = np.pad(A, ((0, 1), (0, 1)))
        V = np.pad(V, ((0, 1), (0, 1)))
        V[-1, -1] = 1.0
    if max_sweeps is None:
        max_sweeps = 10 * n * n
    scale = np.linalg.norm(A)
    if scale == 0.0:
        return np.zeros(n), np.eye(n)
    rounds = list(_round_robin(m))

    mask = ~np.eye(m, dtype=bool)

    def off(M):
        return np.linalg.norm(M[mask])

    for _ in range(max_sweeps):
        if off(A) <= tol * scale:
            break
        for P, Q in rounds:
            apq = A[P, Q]
            app = A[P, P]
            aqq = A[Q, Q]
            active = np.abs(apq) > 1e-300
            if not active.any():
                continue
            P, Q, apq, app, aqq = P[active], Q[active], apq[active], app[active], aqq[active]
            tau = (aqq - app) / (2.0 * apq)
            # tan of the rotation angle, smaller root; hypot avoids overflow for huge tau
            t = np.where(tau >= 0, 1.0, -1.0) / (np.abs(tau) + np.hypot(1.0, tau))
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = t * c
            Ap, Aq = A[:, P].copy(), A[:, Q]
            A[:, P] = c * Ap - s * Aq
            A[:, Q] = s * Ap + c * Aq
            Ap, Aq = A[P, :].copy(), A[Q, :]
            A[P, :] = c[:, None] * Ap - s[:, None] * Aq
            A[Q, :] = s[:, None] * Ap + c[:, None] * Aq
            A[P, Q] = 0.0
            A[Q, P] = 0.0
            Vp, Vq = V[:, P].copy(), V[:, Q]
            V[:, P] = c * Vp - s * Vq
            V[:, Q] = s * Vp + c * Vq
    else:
        if off(A) > tol * scale:
            raise NumericalFailure(f"Jacobi did not converge in {max_sweeps} sweeps")
    w = np.diag(A)[:n].copy()
    V = V[:n, :n]
    order = np.argsort(w, kind="stable")
    return w[order], V[:, order]


def _eigh(cov: np.ndarray, solver: str):
    if solver == "jacobi":
        return jacobi_eigh(cov)
    if solver == "eigh":
        try:
            return np.linalg.eigh(cov)
        except np.linalg.LinAlgError as exc:
            raise NumericalFailure(str(exc)) from exc
    raise ValueError(f"unknown solver {solver!r}")


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    """Flip each row so its largest-magnitude entry is positive."""
    pivot = np.argmax(np.abs(vectors), axis=1)
    signs = np.sign(vectors[np.arange(vectors.shape[0]), pivot])
    signs[signs == 0] = 1.0
    return vectors * signs[:, None]


def retained_count(eigenvalues, retain: float) -> tuple[int, float]:
    """Smallest k whose leading eigenvalues reach ``retain`` of the total."""
    ev = np.clip(np.asarray(eigenvalues, dtype=np.float64), 0.0, None)
    total = ev.sum()
    if total == 0.0:
        return 1, 1.0
    frac = np.cumsum(ev) / total
    k = int(np.searchsorted(frac, retain - 1e-12, side="left")) + 1
    k = min(k, ev.size)
    return k, float(frac[k - 1])


def pca_fit(X, retain: float = DEFAULT_RETAIN, solver: str = "eigh") -> PcaModel:
    """Fit on the rows of ``X`` (sample covariance, divisor n-1)."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise TooFewRows("PCA needs at least two rows")
    if not np.isfinite(X).all():
        raise ValueError("non-finite entries in PCA input")
    if not (0.0 < retain <= 1.0):
        raise ValueError("retain must lie in (0, 1]")
    mean = X.mean(axis=0)
    Xc = X - mean
    cov = (Xc.T @ Xc) / (X.shape[0] - 1)
    w, V = _eigh(cov, solver)
    order = np.argsort(-w, kind="stable")
    w = np.clip(w[order], 0.0, None)
    V = V[:, order]
    k, frac = retained_count(w, retain)
    comps = _fix_signs(V[:, :k].T.copy())
    return PcaModel(mean, comps, w, k, frac)


def pca_transform(model: PcaModel, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != model.dim:
        raise DimensionMismatch(f"expected length {model.dim}, got {x.shape[-1]}")
    return (x - model.mean) @ model.components.T


# ---------------------------------------------------------------------------
# text serialisation: "L,k", mean row, k component rows, eigenvalue row


def format_model(model: PcaModel) -> str:
    def row(v):
        return ",".join(repr(float(a)) for a in v)

    lines = [f"{model.dim},{model.k}", row(model.mean)]
    lines += [row(c) for c in model.components]
    lines.append(row(model.eigenvalues))
    return "\n".join(lines) + "\n"


def parse_model(lines: list[str]) -> PcaModel:
    try:
        L, k = (int(v) for v in lines[0].split(","))
        mean = np.asarray(lines[1].split(","), dtype=np.float64)
        comps = np.asarray([ln.split(",") for ln in lines[2 : 2 + k]], dtype=np.float64).reshape(k, L)
        ev = np.asarray(lines[2 + k].split(","), dtype=np.float64)
    except (ValueError, IndexError) as exc:
        raise MalformedRecord(f"bad PCA model block: {exc}") from exc
    if mean.size != L:
        raise MalformedRecord("PCA mean length disagrees with header")
    total = ev.sum()
    frac = float(np.cumsum(ev)[k - 1] / total) if total > 0 else 1.0
    return PcaModel(mean, comps, ev, k, frac)


def save_model(model: PcaModel, path) -> None:
    Path(path).write_text(format_model(model))


def load_model(path) -> PcaModel:
    return parse_model(Path(path).read_text().splitlines())
