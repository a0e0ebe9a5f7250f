"""Symmetrizer construction and certification.

A symmetrizer for ``v' = G(x) v + f`` is a Hermitian field ``S(x)`` with
``|S(x)| <= C0`` and the coercivity bound

    2 Re(S(x) G(x)) + S'(x) >= 2 theta I,   theta > 0,

which yields the energy estimate ``theta |u|^2 <= (C0^2/theta) |f|^2`` for
decaying solutions.  Two constructions are provided:

* from an exponential dichotomy, via quadratic forms solving the
  one-sided matrix Lyapunov equations along the diagonal blocks and the
  conjugation ``S = T^{-*} diag(-Q_plus, Q_minus) T^{-1}``;
* for frozen high-frequency constant states, ``S = R^{-*} R^{-1}`` from the
  eigenbasis ``R`` of the frozen symbol, certified in the ``S``-weighted
  norm.

Certificates report the measured coercivity ``theta`` (half the worst
eigenvalue of the certified form), the sup bound ``C0`` and the worst
energy-inequality ratio over randomized forcings.
"""

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import eigh, solve_continuous_lyapunov

from .errors import CertificateError, FrameConditioningError, StabilityError

__all__ = [
    "LyapunovForms",
    "SymmetrizerField",
    "Certificate",
    "lyapunov_Q",
    "assemble_symmetrizer",
    "constant_symmetrizer",
    "verify_symmetrizer",
    "energy_estimate_check",
]


@dataclass(eq=False)
class LyapunovForms:
    """Positive quadratic forms contracting along the diagonal blocks."""

    grid: np.ndarray
    Q_plus: np.ndarray       # (m, j, j) Hermitian positive
    Q_minus: np.ndarray      # (m, k, k)


@dataclass(eq=False)
class SymmetrizerField:
    """Hermitian matrix field with its certificate constants."""

    grid: np.ndarray         # (m,) or a single node for constant fields
    S: np.ndarray            # (m, n, n)
    C0: float
    theta: float             # predicted/certified coercivity constant
    provenance: str = "user"

    @property
    def constant(self):
        return self.grid.size == 1

    def on_grid(self, grid):
        """Samples aligned with ``grid`` (broadcast when constant)."""
        if self.constant:
            return np.broadcast_to(self.S[0], (len(grid),) + self.S[0].shape)
        if self.grid.shape != np.shape(grid) or not np.allclose(self.grid, grid):
            raise ValueError("symmetrizer sampled on a different grid")
        return self.S


def _interp_blocks(grid, blocks):
    from scipy.interpolate import PchipInterpolator
    re = PchipInterpolator(grid, blocks.real, axis=0)
    im = PchipInterpolator(grid, blocks.imag, axis=0)
    return lambda x: re(x) + 1j * im(x)


def _lyapunov_ode(grid, blocks, forward, sign):
    """Integrate ``Q' = sign*I - Lam* Q - Q Lam`` from the endstate seed.

    ``forward=False`` integrates from the right end backward.  The seed is
    the algebraic Lyapunov solution at the corresponding endstate block.
    """
    p = blocks.shape[1]
    lam_at = _interp_blocks(grid, blocks)
    end = blocks[0] if forward else blocks[-1]
    seed = solve_continuous_lyapunov(end.conj().T, sign * np.eye(p))
    seed = 0.5 * (seed + seed.conj().T)

    def rhs(x, qflat):
        Q = qflat.reshape(p, p)
        Lam = lam_at(x)
        return (sign * np.eye(p) - Lam.conj().T @ Q - Q @ Lam).reshape(-1)

    span = (grid[0], grid[-1]) if forward else (grid[-1], grid[0])
    sol = solve_ivp(rhs, span, seed.astype(complex).reshape(-1),
                    method="DOP853", rtol=1e-11, atol=1e-13,
                    dense_output=True)
    if not sol.success:
        raise StabilityError(f"Lyapunov integration failed: {sol.message}")
    Q = np.empty((grid.size, p, p), dtype=complex)
    for i, x in enumerate(grid):
        Qi = sol.sol(x).reshape(p, p)
        Q[i] = 0.5 * (Qi + Qi.conj().T)
    return Q


def lyapunov_Q(grid, lambda_plus, lambda_minus):
    """Quadratic forms for the decoupled diagonal blocks.

    ``Q_plus`` solves ``Q' + Lam_plus^* Q + Q Lam_plus = -I`` backward from
    the algebraic solution at the right endstate (equivalent to the
    propagator integral, without evaluating propagators); ``Q_minus``
    mirrors it with ``+I`` forward from the left endstate.  Requires
    ``Lam_plus`` uniformly forward-stable and ``Lam_minus`` backward-stable.
    """
    grid = np.asarray(grid, dtype=float)
    worst_p = max(float(np.max(np.linalg.eigvals(b).real)) for b in lambda_plus)
    if worst_p >= 0:
        raise StabilityError("lambda_plus block is not uniformly "
                             f"forward-stable (worst Re = {worst_p:.3g})")
    worst_m = min(float(np.min(np.linalg.eigvals(b).real)) for b in lambda_minus)
    if worst_m <= 0:
        raise StabilityError("lambda_minus block is not uniformly "
                             f"backward-stable (worst Re = {worst_m:.3g})")
    Q_plus = _lyapunov_ode(grid, lambda_plus, forward=False, sign=-1)
    Q_minus = _lyapunov_ode(grid, lambda_minus, forward=True, sign=1)
    for tag, Q in (("Q_plus", Q_plus), ("Q_minus", Q_minus)):
        worst = min(float(np.min(np.linalg.eigvalsh(Qi))) for Qi in Q)
        if worst <= 0:
            raise StabilityError(f"{tag} lost positivity (min eig {worst:.3g})")
    return LyapunovForms(grid=grid, Q_plus=Q_plus, Q_minus=Q_minus)


def assemble_symmetrizer(frame, forms):
    """Conjugate the block forms back to physical coordinates.

    ``S(x) = T(x)^{-*} diag(-Q_plus, Q_minus) T(x)^{-1}`` (conjugate
    transpose of the inverse; for real frames this is the plain transpose).
    The predicted coercivity ``1/(2 max|T|^2)`` is stored as ``theta``.
    """
    frame = np.asarray(frame)
    m, n, _ = frame.shape
    j = forms.Q_plus.shape[1]
    S = np.empty((m, n, n), dtype=complex)
    tmax = 0.0
    for i in range(m):
        B = np.zeros((n, n), dtype=complex)
        B[:j, :j] = -forms.Q_plus[i]
        B[j:, j:] = forms.Q_minus[i]
        Tinv = np.linalg.inv(frame[i])
        Si = Tinv.conj().T @ B @ Tinv
        S[i] = 0.5 * (Si + Si.conj().T)
        tmax = max(tmax, np.linalg.norm(frame[i], 2))
    C0 = max(float(np.linalg.norm(S[i], 2)) for i in range(m))
    return SymmetrizerField(grid=forms.grid, S=S, C0=C0,
                            theta=1.0 / (2.0 * tmax ** 2),
                            provenance="lyapunov")


def constant_symmetrizer(sys, w0, eta, v0=None, cond_cap=1e8):
    """High-frequency symmetrizer for a frozen (possibly perturbed) state.

    Diagonalizes the frozen generator ``N = -i T(w0+v0, eta) - E(w0)`` by its
    eigenbasis ``R`` and returns ``S = R^{-*} R^{-1}`` together with the
    decay rate certified in the ``S``-norm: the smallest eigenvalue of the
    pencil ``(Re(S (-N)), S)``, which equals ``min(-Re sigma(N))`` up to
    roundoff.  Near eigenvector coalescence the construction fails with a
    conditioning error.
    """
    w0 = np.asarray(w0, dtype=float)
    eta = np.atleast_1d(np.asarray(eta, dtype=float))
    ws = w0 + (np.asarray(v0, dtype=float) if v0 is not None else 0.0)
    A = sys.flux_jacs(ws)
    T = np.tensordot(eta, A, axes=(0, 0))
    E = -sys.relax_jacobian(w0)
    N = -1j * T - E
    mu, R = np.linalg.eig(N)
    if np.linalg.cond(R) > cond_cap:
        raise FrameConditioningError(
            "frozen symbol eigenbasis is near-defective (geometric "
            f"regularity fails near eta = {eta})")
    Rinv = np.linalg.inv(R)
    S = Rinv.conj().T @ Rinv
    S = 0.5 * (S + S.conj().T)
    Ham = 0.5 * (S @ (-N) + (-N).conj().T @ S)
    theta = float(eigh(Ham, S, eigvals_only=True)[0])
    return SymmetrizerField(grid=np.zeros(1), S=S[None, :, :],
                            C0=float(np.linalg.norm(S, 2)), theta=theta,
                            provenance="constant-frame")


@dataclass(frozen=True)
class Certificate:
    """Measured symmetrizer certificate."""

    theta_measured: float     # half the worst eigenvalue of 2Re(SG) + S'
    c0_measured: float
    energy_check: float       # worst energy-inequality ratio (0 if not run)
    passed: bool
    theta_req: float
    worst_node: float         # x where the coercivity minimum is attained
    hermitian_defect: float
    provenance: str = "user"

    def to_dict(self):
        return {
            "theta_measured": self.theta_measured,
            "c0_measured": self.c0_measured,
            "energy_check": self.energy_check,
            "passed": self.passed,
            "theta_req": self.theta_req,
            "worst_node": self.worst_node,
            "hermitian_defect": self.hermitian_defect,
            "provenance": self.provenance,
        }


def verify_symmetrizer(S, field, theta_req, energy_trials=0, seed=0,
                       hermitian_tol=1e-10):
    """Certify a symmetrizer against a coefficient field.

    Measures ``min eig(2 Re(S G) + S')`` over the grid (with ``S'`` by
    spectral differencing, the same scheme used for frame derivatives) and
    the sup bound; optionally runs the randomized energy-inequality check.
    """
    geom = field.geom
    Sg = np.asarray(S.on_grid(geom.x), dtype=complex)
    defect = max(float(np.linalg.norm(Si - Si.conj().T, 2)) for Si in Sg)
    if defect > hermitian_tol * max(1.0, S.C0):
        raise CertificateError(
            f"symmetrizer is not Hermitian (defect {defect:.3e})")
    Sp = (np.zeros_like(Sg) if S.constant
          else np.tensordot(geom.D, Sg, axes=(1, 0)))
    worst = np.inf
    worst_x = geom.x[0]
    for i in range(geom.n_nodes):
        H = Sg[i] @ field.G_nodes[i]
        form = H + H.conj().T + Sp[i]
        lam_min = float(np.linalg.eigvalsh(0.5 * (form + form.conj().T))[0])
        if lam_min < worst:
            worst, worst_x = lam_min, float(geom.x[i])
    theta_measured = 0.5 * worst
    c0 = max(float(np.linalg.norm(Si, 2)) for Si in Sg)
    energy = 0.0
    if energy_trials > 0:
        energy = energy_estimate_check(S, field, trials=energy_trials,
                                       theta=theta_measured, C0=c0, seed=seed)
    passed = (theta_measured >= theta_req) and energy <= 1.0
    return Certificate(theta_measured=theta_measured, c0_measured=c0,
                       energy_check=energy, passed=passed,
                       theta_req=theta_req, worst_node=worst_x,
                       hermitian_defect=defect, provenance=S.provenance)


def field_to_csv(S, path):
    """Dump the symmetrizer samples as CSV (for plotting)."""
    import csv as _csv
    m, n, _ = S.S.shape
    header = ["x"] + [f"S_{i + 1}{j + 1}_{part}" for i in range(n)
                      for j in range(n) for part in ("re", "im")]
    with open(path, "w", newline="") as fh:
        writer = _csv.writer(fh)
        writer.writerow(header)
        for k in range(m):
            row = [repr(float(S.grid[k]))]
            for i in range(n):
                for j in range(n):
                    row += [repr(float(S.S[k, i, j].real)),
                            repr(float(S.S[k, i, j].imag))]
            writer.writerow(row)


def energy_estimate_check(S, field, trials=100, theta=None, C0=None, seed=0,
                          decay_tol=1e-2):
    """Worst ratio in ``theta |u|^2 <= (C0^2/theta) |f|^2`` over random forcings.

    Solves ``u' = G u + f`` with spectral-projection boundary conditions for
    exponentially localized random ``f`` and returns
    ``max theta^2 |u|^2 / (C0^2 |f|^2)``; decay of ``u`` at the domain ends
    is checked a posteriori.
    """
    from .resolvent import _random_forcing
    theta = S.theta if theta is None else theta
    C0 = S.C0 if C0 is None else C0
    if theta <= 0:
        raise CertificateError("energy check requires a positive theta")
    geom = field.geom
    op = field.bvp()
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        f = _random_forcing(geom, field.n, rng)
        u = op.solve(f, apply_a1inv=False)
        edge = max(np.max(np.abs(u[0])), np.max(np.abs(u[-1])))
        if edge > decay_tol * max(np.max(np.abs(u)), 1e-300):
            warnings.warn("solution does not decay at the truncated ends; "
                          "enlarge the domain", stacklevel=2)
        ratio = (theta ** 2 * geom.l2_norm(u) ** 2) / (
            C0 ** 2 * geom.l2_norm(f) ** 2)
        worst = max(worst, ratio)
    return worst
