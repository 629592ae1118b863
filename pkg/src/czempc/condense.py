"""Condense a linear MPC problem into its multi-parametric QP.

The stacked-input QP ``min 0.5 u'Qt u + x0'Ht u s.t. A u <= b + E x0`` is
built by eliminating the predicted states. The same feasible domain is also
expressed as a constrained zonotope in the lifted generator space: the
decision variable ``xi`` ranges over a hypercube intersected with an affine
subspace parameterized by ``x0``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from czempc.sets import (
    ConstrainedZonotope,
    DimensionMismatch,
    Polytope,
    Zonotope,
    affine_map,
    intersect,
    generalized_intersect,
    support,
    zonotope_halfspaces,
)


class NotPositiveDefinite(ValueError):
    """A weight matrix fails its (semi)definiteness requirement."""


class NotStable(ValueError):
    """The closed-loop matrix of the terminal recurrence is not Schur stable."""


class NotInvertible(ValueError):
    """The closed-loop matrix of the terminal recurrence is singular."""


@dataclass(frozen=True)
class TerminalRecurrence:
    """Directive to build the terminal set from the invariant-set recurrence."""

    K: np.ndarray | str = "lqr"  # stabilizing gain or the string "lqr"
    max_iter: int = 50
    tol: float = 1e-8


@dataclass(frozen=True)
class MpcProblem:
    A_d: np.ndarray
    B_d: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    S: np.ndarray
    N: int
    X: Zonotope
    U: Zonotope
    T: ConstrainedZonotope | TerminalRecurrence

    def __post_init__(self):
        for name in ("A_d", "B_d", "Q", "R", "S"):
            object.__setattr__(self, name, np.atleast_2d(np.asarray(getattr(self, name), dtype=float)))
        n = self.A_d.shape[0]
        m = self.B_d.shape[1]
        if self.A_d.shape != (n, n) or self.B_d.shape[0] != n:
            raise DimensionMismatch("A_d must be square and match B_d rows")
        if self.Q.shape != (n, n) or self.S.shape != (n, n) or self.R.shape != (m, m):
            raise DimensionMismatch("weight matrices must match state/input dimensions")
        if self.N < 1:
            raise ValueError("horizon N must be >= 1")
        if self.X.dim != n or self.U.dim != m:
            raise DimensionMismatch("state/input sets must match system dimensions")
        _check_psd(self.Q, "Q", strict=False)
        _check_psd(self.R, "R", strict=True)
        _check_psd(self.S, "S", strict=True)

    @property
    def n(self) -> int:
        return self.A_d.shape[0]

    @property
    def m(self) -> int:
        return self.B_d.shape[1]


@dataclass(frozen=True)
class PredictionMatrices:
    """State predictions: x_[0:N-1] = Atilde_0N1 x0 + Btilde_0N1 u, x_N likewise."""

    Atilde_0N1: np.ndarray  # (N n) x n
    Atilde_N: np.ndarray  # n x n
    Btilde_0N1: np.ndarray  # (N n) x (N m), strictly block lower triangular
    Btilde_N: np.ndarray  # n x (N m)


@dataclass
class CondensedProblem:
    """All data of the condensed mpQP and its lifted CZ formulation."""

    n: int
    m: int
    N: int
    A_d: np.ndarray
    B_d: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    S: np.ndarray
    Qtilde: np.ndarray  # (N m) x (N m), PD
    Htilde: np.ndarray  # n x (N m)
    A_poly: np.ndarray  # q x (N m)
    b_poly: np.ndarray  # q
    E_poly: np.ndarray  # q x n
    poly_has_terminal: bool
    c_D: np.ndarray  # N m
    G_D: np.ndarray  # (N m) x Dbar
    F_D: np.ndarray  # nbar_c x Dbar
    theta1_D: np.ndarray  # nbar_c
    theta2_D: np.ndarray  # nbar_c x n
    Dbar: int
    nbar_c: int
    Y: np.ndarray  # 2 Dbar x Dbar, stacked [I; -I]
    terminal: ConstrainedZonotope
    # cached products used throughout the region solver
    GQG: np.ndarray = field(init=False)  # G_D' Qt G_D
    GQc: np.ndarray = field(init=False)  # G_D' Qt c_D
    GHt: np.ndarray = field(init=False)  # G_D' Ht'

    def __post_init__(self):
        self.GQG = self.G_D.T @ self.Qtilde @ self.G_D
        self.GQc = self.G_D.T @ (self.Qtilde @ self.c_D)
        self.GHt = self.G_D.T @ self.Htilde.T

    def objective(self, u: np.ndarray, x0: np.ndarray) -> float:
        """Condensed cost 0.5 u'Qt u + x0'Ht u (constant-in-x0 terms dropped)."""
        u = np.asarray(u, dtype=float).ravel()
        x0 = np.asarray(x0, dtype=float).ravel()
        return float(0.5 * u @ self.Qtilde @ u + x0 @ self.Htilde @ u)

    def objective_xi(self, xi: np.ndarray, x0: np.ndarray) -> float:
        """Lifted cost; agrees with :meth:`objective` at ``u = c_D + G_D xi``."""
        xi = np.asarray(xi, dtype=float).ravel()
        x0 = np.asarray(x0, dtype=float).ravel()
        return float(
            0.5 * xi @ self.GQG @ xi
            + self.GQc @ xi
            + x0 @ (self.GHt.T @ xi)
            + x0 @ self.Htilde @ self.c_D
            + 0.5 * self.c_D @ self.Qtilde @ self.c_D
        )


def _check_psd(M: np.ndarray, name: str, strict: bool, tol: float = 1e-10) -> None:
    if not np.allclose(M, M.T, atol=1e-12):
        raise NotPositiveDefinite(f"{name} must be symmetric")
    eig = np.linalg.eigvalsh(M)
    if strict and eig.min() <= tol:
        raise NotPositiveDefinite(f"{name} must be positive definite (min eig {eig.min():.3e})")
    if not strict and eig.min() < -tol:
        raise NotPositiveDefinite(f"{name} must be positive semidefinite (min eig {eig.min():.3e})")


def build_prediction_matrices(A_d, B_d, N: int) -> PredictionMatrices:
    A_d = np.atleast_2d(np.asarray(A_d, dtype=float))
    B_d = np.atleast_2d(np.asarray(B_d, dtype=float))
    n, m = B_d.shape
    if N < 1:
        raise ValueError("horizon N must be >= 1")
    powers = [np.eye(n)]
    for _ in range(N):
        powers.append(A_d @ powers[-1])
    Atilde = np.vstack(powers[:N])
    Btilde = np.zeros((N * n, N * m))
    for i in range(1, N):  # block row i depends on inputs 0..i-1
        for j in range(i):
            Btilde[i * n : (i + 1) * n, j * m : (j + 1) * m] = powers[i - j - 1] @ B_d
    Btilde_N = np.hstack([powers[N - 1 - j] @ B_d for j in range(N)])
    return PredictionMatrices(Atilde, powers[N], Btilde, Btilde_N)


def lqr_gain(A_d, B_d, Q, R, tol: float = 1e-10, max_iter: int = 10_000) -> np.ndarray:
    """Infinite-horizon LQR gain ``K`` (u = K x) from the Riccati fixed point."""
    A_d = np.atleast_2d(np.asarray(A_d, dtype=float))
    B_d = np.atleast_2d(np.asarray(B_d, dtype=float))
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    P = Q.copy()
    for _ in range(max_iter):
        BtP = B_d.T @ P
        K = -np.linalg.solve(R + BtP @ B_d, BtP @ A_d)
        P_next = Q + A_d.T @ P @ (A_d + B_d @ K)
        if np.max(np.abs(P_next - P)) < tol:
            P = P_next
            break
        P = P_next
    BtP = B_d.T @ P
    return -np.linalg.solve(R + BtP @ B_d, BtP @ A_d)


def build_terminal_set(A_d, B_d, K, X: Zonotope, U: Zonotope, max_iter: int = 50, tol: float = 1e-8) -> ConstrainedZonotope:
    """Invariant terminal set from ``Omega_{k+1} = (A+BK)^{-1} Omega_k  ∩  Omega_0``.

    ``Omega_0 = {x in X : K x in U}`` couples the state box with the input box
    through the gain. Iteration stops once the support values along the 2n
    axis directions settle within ``tol`` or at ``max_iter``.
    """
    A_d = np.atleast_2d(np.asarray(A_d, dtype=float))
    B_d = np.atleast_2d(np.asarray(B_d, dtype=float))
    K = np.atleast_2d(np.asarray(K, dtype=float))
    n = A_d.shape[0]
    M = A_d + B_d @ K
    if abs(np.linalg.det(M)) < 1e-12:
        raise NotInvertible("A_d + B_d K is singular")
    if np.max(np.abs(np.linalg.eigvals(M))) >= 1.0:
        raise NotStable("A_d + B_d K is not Schur stable")
    Minv = np.linalg.inv(M)
    omega0 = generalized_intersect(X.to_cz(), K, U.to_cz())
    dirs = np.vstack([np.eye(n), -np.eye(n)])
    omega = omega0
    sup = np.array([support(omega, d) for d in dirs])
    for _ in range(max_iter):
        candidate = intersect(affine_map(np.zeros(n), Minv, omega), omega0)
        sup_next = np.array([support(candidate, d) for d in dirs])
        omega = candidate
        if np.max(np.abs(sup_next - sup)) < tol:
            break
        sup = sup_next
    return omega


def resolve_terminal_set(p: MpcProblem) -> ConstrainedZonotope:
    if isinstance(p.T, TerminalRecurrence):
        K = p.T.K
        if isinstance(K, str):
            if K != "lqr":
                raise ValueError(f"unknown gain directive {K!r}")
            K = lqr_gain(p.A_d, p.B_d, p.Q, p.R)
        return build_terminal_set(p.A_d, p.B_d, K, p.X, p.U, p.T.max_iter, p.T.tol)
    if isinstance(p.T, Zonotope):
        return p.T.to_cz()
    return p.T


def build_condensed_qp(p: MpcProblem) -> CondensedProblem:
    n, m, N = p.n, p.m, p.N
    T = resolve_terminal_set(p)
    if T.dim != n:
        raise DimensionMismatch("terminal set must live in the state space")
    pred = build_prediction_matrices(p.A_d, p.B_d, N)
    Qbar = np.kron(np.eye(N), p.Q)
    Rbar = np.kron(np.eye(N), p.R)

    Qt = 2.0 * (pred.Btilde_0N1.T @ Qbar @ pred.Btilde_0N1 + Rbar + pred.Btilde_N.T @ p.S @ pred.Btilde_N)
    Ht = 2.0 * (pred.Atilde_0N1.T @ Qbar @ pred.Btilde_0N1 + pred.Atilde_N.T @ p.S @ pred.Btilde_N)
    if np.linalg.eigvalsh(0.5 * (Qt + Qt.T)).min() <= 0:
        raise NotPositiveDefinite("condensed Hessian is not positive definite")

    gX, gU, gT = p.X.num_generators, p.U.num_generators, T.num_generators
    cT = T.num_constraints
    Dbar = N * (gX + gU) + gT
    nbar_c = (N + 1) * n + cT

    IGU = np.kron(np.eye(N), p.U.G)
    c_D = np.kron(np.ones(N), p.U.c)
    G_D = np.hstack([IGU, np.zeros((N * m, N * gX + gT))])

    F_D = np.block(
        [
            [pred.Btilde_0N1 @ IGU, -np.kron(np.eye(N), p.X.G), np.zeros((N * n, gT))],
            [pred.Btilde_N @ IGU, np.zeros((n, N * gX)), -T.G],
            [np.zeros((cT, N * gU)), np.zeros((cT, N * gX)), T.F],
        ]
    )
    Btilde_full = np.vstack([pred.Btilde_0N1, pred.Btilde_N])
    Atilde_full = np.vstack([pred.Atilde_0N1, pred.Atilde_N])
    theta1 = np.concatenate([np.kron(np.ones(N), p.X.c), T.c, T.theta])
    theta1 -= np.vstack([Btilde_full, np.zeros((cT, N * m))]) @ c_D
    theta2 = -np.vstack([Atilde_full, np.zeros((cT, n))])

    A_poly, b_poly, E_poly, has_terminal = _build_polyhedral(p, T, pred)

    Y = np.vstack([np.eye(Dbar), -np.eye(Dbar)])
    return CondensedProblem(
        n=n,
        m=m,
        N=N,
        A_d=p.A_d,
        B_d=p.B_d,
        Q=p.Q,
        R=p.R,
        S=p.S,
        Qtilde=Qt,
        Htilde=Ht,
        A_poly=A_poly,
        b_poly=b_poly,
        E_poly=E_poly,
        poly_has_terminal=has_terminal,
        c_D=c_D,
        G_D=G_D,
        F_D=F_D,
        theta1_D=theta1,
        theta2_D=theta2,
        Dbar=Dbar,
        nbar_c=nbar_c,
        Y=Y,
        terminal=T,
    )


def _build_polyhedral(p: MpcProblem, T: ConstrainedZonotope, pred: PredictionMatrices):
    """Stacked H-rep ``A u <= b + E x0`` of the feasible domain.

    Row order: state constraints for stages 0..N-1, input constraints for
    stages 0..N-1, then terminal rows. Terminal rows require a zonotopic
    terminal set (facet enumeration of a general CZ is out of scope); when the
    terminal set carries equality constraints the terminal block is omitted
    and the returned flag is False.
    """
    n, m, N = p.n, p.m, p.N
    HX = zonotope_halfspaces(p.X)
    HU = zonotope_halfspaces(p.U)
    powers = [np.eye(n)]
    for _ in range(N):
        powers.append(p.A_d @ powers[-1])

    A_rows, b_rows, E_rows = [], [], []
    for i in range(N):
        Bblock = pred.Btilde_0N1[i * n : (i + 1) * n, :]
        A_rows.append(HX.A @ Bblock)
        b_rows.append(HX.b)
        E_rows.append(-HX.A @ powers[i])
    for i in range(N):
        sel = np.zeros((m, N * m))
        sel[:, i * m : (i + 1) * m] = np.eye(m)
        A_rows.append(HU.A @ sel)
        b_rows.append(HU.b)
        E_rows.append(np.zeros((HU.A.shape[0], n)))
    has_terminal = T.num_constraints == 0
    if has_terminal:
        HT = zonotope_halfspaces(Zonotope(T.c, T.G))
        A_rows.append(HT.A @ pred.Btilde_N)
        b_rows.append(HT.b)
        E_rows.append(-HT.A @ powers[N])
    return np.vstack(A_rows), np.concatenate(b_rows), np.vstack(E_rows), has_terminal


def feasible_polytope(cp: CondensedProblem, x0: np.ndarray) -> Polytope:
    """Polyhedral feasible set in u-space at a fixed parameter ``x0``."""
    x0 = np.asarray(x0, dtype=float).ravel()
    return Polytope(cp.A_poly, cp.b_poly + cp.E_poly @ x0)
