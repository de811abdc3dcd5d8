"""
SDR Beamformer Service.
Solves the lifted beamforming subproblems with a conic solver and recovers
rank-one beamformers from the lifted solutions.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import cvxpy as cp
import numpy as np

from utils.channel_metrics import Beamformer, sinr_all, steering_vector

logger = logging.getLogger(__name__)

ACCEPTED_STATUSES = (cp.OPTIMAL, cp.OPTIMAL_INACCURATE)
INFEASIBLE_STATUSES = (cp.INFEASIBLE, cp.INFEASIBLE_INACCURATE)
FALLBACK_SOLVER = "SCS"


class SolverError(RuntimeError):
    """Conic solve did not produce a usable solution."""

    def __init__(self, message: str, solver: str = "", status: str = ""):
        super().__init__(message)
        self.solver = solver
        self.status = status


class InfeasibleSdpError(SolverError):
    """The lifted SINR system has no solution at the given positions and power."""


@dataclass
class InnerSdpSolution:
    """Optimum of the inner (W, Q) block at fixed positions."""
    lifted: np.ndarray
    Q: np.ndarray
    objective: float
    status: str
    rank_ratios: List[float] = field(default_factory=list)
    certificate_ok: bool = True
    W_D: Optional[np.ndarray] = None


def hermitize(X: np.ndarray) -> np.ndarray:
    return (X + X.conj().T) / 2


def clean_psd(X: np.ndarray) -> np.ndarray:
    """Hermitian part with negative eigenvalues (solver round-off) removed."""
    vals, vecs = np.linalg.eigh(hermitize(np.asarray(X, dtype=complex)))
    vals = np.clip(vals, 0.0, None)
    return (vecs * vals) @ vecs.conj().T


def extract_rank_one(W: np.ndarray, tol: float = 1e-6) -> Tuple[np.ndarray, float, bool]:
    """
    Recover w with w w^H ~= W from a PSD matrix.

    Args:
        W: Hermitian PSD matrix
        tol: Largest accepted lambda_2 / lambda_1

    Returns:
        (w, rank_ratio, certificate_ok). The principal component is returned even
        when the certificate fails; a zero matrix gives a zero vector and a failed
        certificate.
    """
    vals, vecs = np.linalg.eigh(hermitize(np.asarray(W, dtype=complex)))
    lam1 = vals[-1]
    if not lam1 > 0:
        return np.zeros(W.shape[0], dtype=complex), float("inf"), False
    ratio = float(max(vals[-2], 0.0) / lam1) if vals.size > 1 else 0.0
    w = np.sqrt(lam1) * vecs[:, -1]
    return w, ratio, ratio <= tol


def _solver_options(solver: str, tol: float) -> Dict:
    if solver == "CLARABEL":
        return {"tol_gap_abs": tol, "tol_gap_rel": tol, "tol_feas": tol, "max_iter": 500}
    if solver == "SCS":
        scs_tol = max(tol, 1e-9)
        return {"eps_abs": scs_tol, "eps_rel": scs_tol, "max_iters": 200000}
    return {}


class SdrBeamformerService:
    """Service for the lifted (SDR) beamforming problems."""

    def __init__(self, solver: str = "CLARABEL", tol: float = 1e-8, rank_one_tol: float = 1e-6):
        self.solver = solver.upper()
        self.tol = tol
        self.rank_one_tol = rank_one_tol

    @classmethod
    def from_config(cls, config) -> "SdrBeamformerService":
        return cls(solver=config.sdp_solver, tol=config.sdp_tol, rank_one_tol=config.rank_one_tol)

    def _solve(self, problem: cp.Problem, label: str) -> str:
        """Solve with the configured solver, falling back to SCS. Returns the final status."""
        solvers = [self.solver] + ([FALLBACK_SOLVER] if self.solver != FALLBACK_SOLVER else [])
        last_error = None
        for solver in solvers:
            try:
                problem.solve(solver=solver, verbose=False, **_solver_options(solver, self.tol))
            except (cp.SolverError, ValueError) as e:
                last_error = e
                logger.warning(f"{label}: solver {solver} failed ({str(e)[:120]}), trying next")
                continue
            if problem.status in ACCEPTED_STATUSES or problem.status in INFEASIBLE_STATUSES:
                if problem.status == cp.OPTIMAL_INACCURATE:
                    logger.warning(f"{label}: solver {solver} returned an inaccurate optimum")
                return problem.status
            logger.warning(f"{label}: solver {solver} status {problem.status}, trying next")
            last_error = SolverError(f"status {problem.status}", solver, problem.status)
        raise SolverError(f"{label}: no solver converged ({str(last_error)[:200]})",
                          solver=self.solver, status=getattr(problem, "status", "") or "")

    @staticmethod
    def _lifted_variables(num_antennas: int, num_users: int):
        return [cp.Variable((num_antennas, num_antennas), hermitian=True) for _ in range(num_users)]

    @staticmethod
    def _coupling_expression(h_all: np.ndarray, W_vars) -> cp.Expression:
        """V with V[k, i] = Re tr(H_k W_i), built column by column."""
        n = h_all.shape[1]
        # tr(H W) = vec_F(H^T) . vec_F(W)
        M = np.vstack([np.outer(h, h.conj()).T.flatten(order="F") for h in h_all])
        columns = [cp.real(M @ cp.reshape(W, (n * n,), order="F")) for W in W_vars]
        return cp.vstack(columns).T

    def _recover(self, lifted: np.ndarray) -> Tuple[np.ndarray, List[float], bool]:
        ws, ratios, ok = [], [], True
        for k, W in enumerate(lifted):
            w, ratio, passed = extract_rank_one(W, self.rank_one_tol)
            ws.append(w)
            ratios.append(ratio)
            if not passed:
                ok = False
                logger.warning(f"rank-one certificate failed for user {k}: lambda2/lambda1={ratio:.3e}")
        return np.column_stack(ws), ratios, ok

    def solve_inner_sdp(self, t, xi: np.ndarray, rho: float, h_all: np.ndarray,
                        sinr_targets: Sequence[float], noise_power: float, transmit_power: float,
                        theta_s: float, wavelength: float) -> InnerSdpSolution:
        """
        Minimize F over lifted W_k and Q at fixed positions.

        F = -a^H (sum_k W_k) a + 1/(2 rho) ||Q - V(W) + rho xi||_F^2 subject to the
        power budget, W_k PSD and the per-user linear constraint on the rows of Q.
        The quadratic penalty enters through an epigraph variable.

        Raises:
            SolverError: No solver converged, or the (always feasible) problem was
                reported infeasible
        """
        h_all = np.asarray(h_all, dtype=complex)
        K, N = h_all.shape
        gamma = np.asarray(sinr_targets, dtype=float)
        a = steering_vector(theta_s, t, wavelength)
        A = np.outer(a, a.conj())

        W_vars = self._lifted_variables(N, K)
        Q = cp.Variable((K, K))
        s = cp.Variable(nonneg=True)
        V = self._coupling_expression(h_all, W_vars)

        beam = cp.real(cp.trace(A @ sum(W_vars)))
        constraints = [W >> 0 for W in W_vars]
        constraints.append(sum(cp.real(cp.trace(W)) for W in W_vars) <= transmit_power)
        off_diag = cp.sum(Q, axis=1) - cp.diag(Q)
        constraints.append(cp.diag(Q) - cp.multiply(gamma, off_diag) >= noise_power * gamma)
        constraints.append(cp.sum_squares(Q - V + rho * np.asarray(xi, dtype=float)) <= s)

        problem = cp.Problem(cp.Minimize(-beam + s / (2.0 * rho)), constraints)
        status = self._solve(problem, "inner SDP")
        if status in INFEASIBLE_STATUSES:
            raise SolverError("inner SDP reported infeasible; the model is always feasible",
                              solver=self.solver, status=status)

        lifted = np.stack([clean_psd(W.value) for W in W_vars])
        W_D, ratios, ok = self._recover(lifted)
        return InnerSdpSolution(
            lifted=lifted,
            Q=np.asarray(Q.value, dtype=float),
            objective=float(problem.value),
            status=status,
            rank_ratios=ratios,
            certificate_ok=ok,
            W_D=W_D,
        )

    def solve_fixed_position_sdp(self, t, h_all: np.ndarray, sinr_targets: Sequence[float],
                                 noise_power: float, transmit_power: float, theta_s: float,
                                 wavelength: float) -> Beamformer:
        """
        Maximize a^H (sum_k W_k) a with lifted SINR and power constraints at fixed t.

        Raises:
            InfeasibleSdpError: SINR targets unachievable at these positions and power
            SolverError: Solver failure
        """
        h_all = np.asarray(h_all, dtype=complex)
        K, N = h_all.shape
        gamma = np.asarray(sinr_targets, dtype=float)
        a = steering_vector(theta_s, t, wavelength)
        A = np.outer(a, a.conj())

        W_vars = self._lifted_variables(N, K)
        V = self._coupling_expression(h_all, W_vars)
        beam = cp.real(cp.trace(A @ sum(W_vars)))

        constraints = [W >> 0 for W in W_vars]
        constraints.append(sum(cp.real(cp.trace(W)) for W in W_vars) <= transmit_power)
        signal = cp.diag(V)
        interference = cp.sum(V, axis=1) - signal
        constraints.append(signal >= cp.multiply(gamma, interference + noise_power))

        problem = cp.Problem(cp.Maximize(beam), constraints)
        status = self._solve(problem, "fixed-position SDP")
        if status in INFEASIBLE_STATUSES:
            raise InfeasibleSdpError("SINR targets unachievable at these positions", solver=self.solver,
                                     status=status)

        lifted = np.stack([clean_psd(W.value) for W in W_vars])
        W_D, ratios, ok = self._recover(lifted)
        if not ok:
            W_D = self._best_recovery(W_D, lifted, h_all, gamma, noise_power, a)
        return Beamformer(W_D=W_D, lifted=lifted, rank_ratios=ratios, certificate_ok=ok, status=status)

    @staticmethod
    def _best_recovery(principal: np.ndarray, lifted: np.ndarray, h_all: np.ndarray,
                       gamma: np.ndarray, noise_power: float, a: np.ndarray) -> np.ndarray:
        """Pick between principal components and the SINR-preserving channel-matched vectors."""
        matched = []
        for k, W in enumerate(lifted):
            Wh = W @ h_all[k]
            power = float(np.real(h_all[k].conj() @ Wh))
            matched.append(Wh / np.sqrt(power) if power > 0 else np.zeros_like(Wh))
        matched = np.column_stack(matched)

        def score(W_D):
            slack_ok = np.all(sinr_all(h_all, W_D, noise_power) >= gamma * (1 - 1e-6))
            return (bool(slack_ok), float(np.sum(np.abs(a.conj() @ W_D) ** 2)))

        return max((principal, matched), key=score)
