"""Alternating transceiver design: weighted-MMSE combiner/weights, the
power- and CRB-constrained precoder with nested multiplier bisection, the
majorization-minimization phase-profile solver, and the outer loop tying
them together."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .channels import ChannelSet
from .crb import UnobservableError, aoa_crb
from .geometry import Scene
from .steering import PathCoefficients, build_sensing_context

LN2 = math.log(2.0)
UNIT_MODULUS_TOL = 1e-12

RIS_OBJECTIVE_JCAS = "jcas"
RIS_OBJECTIVE_RATE = "rate"


class CrbInfeasibleError(RuntimeError):
    """The angle-accuracy constraint cannot be met at the power budget."""

    def __init__(self, achieved: float, threshold: float, context: str = ""):
        self.achieved = achieved
        self.threshold = threshold
        prefix = f"{context}: " if context else ""
        super().__init__(
            f"{prefix}CRB constraint infeasible: achieved {achieved:.6g} rad^2 "
            f"against threshold {threshold:.6g} rad^2 at full power"
        )


@dataclass(frozen=True)
class RisPhase:
    """Unit-modulus reflection profile of the surface."""

    vector: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "vector", np.asarray(self.vector, dtype=complex))
        if self.vector.ndim != 1:
            raise ValueError("phase profile must be one-dimensional")
        if np.max(np.abs(np.abs(self.vector) - 1.0)) > UNIT_MODULUS_TOL:
            raise ValueError("phase profile entries must have unit modulus")

    @property
    def matrix(self) -> np.ndarray:
        return np.diag(self.vector)

    @classmethod
    def random(cls, n_elements: int, seed) -> "RisPhase":
        rng = np.random.default_rng(seed)
        return cls(np.exp(2j * np.pi * rng.random(n_elements)))


@dataclass(frozen=True)
class BeamformerState:
    """Digital beamforming state after an update round."""

    precoder: np.ndarray
    combiner: np.ndarray
    weight: np.ndarray
    lambda0: float
    mu: float
    priority: float = 1.0


@dataclass
class IterationTrace:
    """Per-iteration convergence diagnostics of the outer loop.

    ``objective`` is the interference power plus the rate-equivalent value
    of the weighted MSE term (interference minus the weighted rate); its
    raw weighted-MSE snapshot equals the constant ``n_streams/ln 2`` at the
    tight weight, so only the rate-equivalent form is comparable across
    weight updates.
    """

    iteration: list = field(default_factory=list)
    objective: list = field(default_factory=list)
    rate_bps_hz: list = field(default_factory=list)
    si_power: list = field(default_factory=list)
    crb: list = field(default_factory=list)
    lambda0: list = field(default_factory=list)
    mu_k: list = field(default_factory=list)

    def append(self, iteration, objective, rate, si_power, crb, lambda0, mu):
        self.iteration.append(int(iteration))
        self.objective.append(float(objective))
        self.rate_bps_hz.append(float(rate))
        self.si_power.append(float(si_power))
        self.crb.append(float(crb))
        self.lambda0.append(float(lambda0))
        self.mu_k.append(float(mu))

    def __len__(self) -> int:
        return len(self.iteration)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["iter", "objective", "rate_bps_hz", "si_power", "crb", "lambda0", "mu_k"]
            )
            for row in zip(
                self.iteration,
                self.objective,
                self.rate_bps_hz,
                self.si_power,
                self.crb,
                self.lambda0,
                self.mu_k,
            ):
                writer.writerow(
                    [row[0]] + ["" if isinstance(x, float) and math.isnan(x) else repr(x) for x in row[1:]]
                )


@dataclass(frozen=True)
class JcasConfig:
    """Algorithm options for one optimization run.

    ``si_enabled`` keeps the self-interference power in the objective (the
    full-duplex case); switching it off gives the half-duplex rate-only
    benchmark.  ``ris_objective`` selects the phase-step objective:
    ``"jcas"`` is the interference-plus-signal quadratic form of the joint
    design, ``"rate"`` the weighted-MSE restriction used by the
    communications-only benchmark.  A non-finite ``crb_threshold``
    disables the sensing constraint while ``sensing_enabled`` still
    controls whether the bound is tracked at all.
    """

    power_budget: float = 1.0
    crb_threshold: float = math.inf
    n_streams: int = 2
    priority: float = 1.0
    outer_tol: float = 1e-4
    max_outer: int = 100
    ris_tol: float = 1e-5
    max_ris_iter: int = 500
    bisect_tol: float = 1e-6
    max_bisect: int = 200
    mu_max: float = 1e12
    ris_enabled: bool = True
    si_enabled: bool = True
    sensing_enabled: bool = True
    ris_objective: str = RIS_OBJECTIVE_JCAS
    seed: int = 0

    def __post_init__(self):
        if self.ris_objective not in (RIS_OBJECTIVE_JCAS, RIS_OBJECTIVE_RATE):
            raise ValueError(f"unknown ris_objective {self.ris_objective!r}")
        if self.power_budget <= 0.0:
            raise ValueError("power_budget must be positive")


@dataclass(frozen=True)
class JcasResult:
    precoder: np.ndarray
    ris_phase: np.ndarray
    trace: IterationTrace
    state: BeamformerState


def _herm(mat):
    return 0.5 * (mat + mat.conj().T)


def effective_channel(channels: ChannelSet, phi) -> np.ndarray:
    """Downlink channel combining the direct link and the reflected path."""
    phi = np.asarray(phi)
    return channels.bs_to_user + channels.ris_to_user @ (phi[:, None] * channels.bs_to_ris)


def si_channel(channels: ChannelSet, phi) -> np.ndarray:
    """Deterministic self-interference channel seen by the radar receiver.

    Only the line-of-sight leakage and the reflected path enter the design
    objective; the stochastic residual is simulation-only.
    """
    phi = np.asarray(phi)
    return channels.si_los + channels.ris_to_bs @ (phi[:, None] * channels.bs_to_ris)


def mmse_combiner(h_eff, precoder, noise_user: float) -> np.ndarray:
    """MSE-optimal linear receive filter for the downlink streams."""
    hv = h_eff @ precoder
    rx_cov = _herm(hv @ hv.conj().T) + noise_user * np.eye(h_eff.shape[0])
    return np.linalg.solve(rx_cov, hv).conj().T


def mse_matrix(h_eff, precoder, noise_user: float) -> np.ndarray:
    """Stream error covariance under the MSE-optimal combiner.

    Hermitian with eigenvalues in (0, 1].
    """
    hv = h_eff @ precoder
    d = precoder.shape[1]
    core = np.eye(d) + hv.conj().T @ hv / noise_user
    return _herm(np.linalg.inv(_herm(core)))


def weight_matrix(mse, priority: float = 1.0) -> np.ndarray:
    """Stream weighting that ties MSE minimization to the rate objective."""
    return _herm((priority / LN2) * np.linalg.inv(mse))


def si_matrix(precoder, phi, channels: ChannelSet) -> np.ndarray:
    """Covariance of the residual self-interference hitting the radar array."""
    leak = si_channel(channels, phi) @ precoder
    return _herm(leak @ leak.conj().T)


def dl_rate(h_eff, precoder, noise_user: float) -> float:
    """Achievable downlink rate in bits/s/Hz."""
    hv = h_eff @ precoder
    gram = _herm(np.eye(h_eff.shape[0]) + hv @ hv.conj().T / noise_user)
    _, logdet = np.linalg.slogdet(gram)
    return float(logdet / LN2)


def _solve_power_constrained(core, rhs, power_budget, tol, max_steps):
    """Minimizer of the quadratic surrogate under the transmit power cap.

    Returns (precoder, lambda0).  The multiplier stays exactly zero when
    the unconstrained (min-norm) solution already fits the budget
    (complementary slackness); otherwise it is bisected until the power
    matches the budget to the relative tolerance.  The normal equations
    are diagonalized once so each multiplier probe is closed-form.
    """
    evals, evecs = np.linalg.eigh(_herm(core))
    rotated = evecs.conj().T @ rhs
    row_power = np.sum(np.abs(rotated) ** 2, axis=1)

    def precoder_at(lam):
        return evecs @ (rotated / (evals + lam)[:, None])

    def power_at(lam):
        return float(np.sum(row_power / (evals + lam) ** 2))

    total = float(np.sum(row_power))
    if total == 0.0:
        return np.zeros(rhs.shape, dtype=complex), 0.0
    cutoff = max(float(evals[-1]), 1.0) * 1e-12
    mask = evals > cutoff
    null_power = float(np.sum(row_power[~mask]))
    if null_power <= 1e-16 * total:
        safe = np.where(mask, evals, 1.0)
        v0 = evecs @ (np.where(mask, 1.0, 0.0)[:, None] * rotated / safe[:, None])
        p0 = float(np.sum(np.abs(v0) ** 2))
        if p0 <= power_budget:
            return v0, 0.0
    lo, hi = 0.0, 1.0
    guard = 0
    while power_at(hi) >= power_budget and guard < 200:
        hi *= 2.0
        guard += 1
    lam = hi
    precoder = precoder_at(lam)
    for _ in range(max_steps):
        lam = 0.5 * (lo + hi)
        power = power_at(lam)
        if abs(power - power_budget) < tol * power_budget:
            precoder = precoder_at(lam)
            break
        if power > power_budget:
            lo = lam
        else:
            hi = lam
    else:
        lam = hi
        precoder = precoder_at(lam)
    return precoder, lam


def precoder_update(
    combiner,
    weight,
    channels: ChannelSet,
    phi,
    power_budget: float,
    crb_threshold: float = math.inf,
    path_response_deriv=None,
    noise_cov=None,
    include_si: bool = True,
    bisect_tol: float = 1e-6,
    max_bisect: int = 200,
    mu_max: float = 1e12,
):
    """Precoder minimizing the weighted-MSE-plus-interference surrogate
    under the power budget and, when finite, the angle-accuracy bound.

    The stationary solution is a regularized normal-equations solve whose
    power multiplier is found by bisection (zero when slack).  When the
    CRB threshold is finite and violated at zero sensing multiplier, the
    multiplier is grown geometrically and bisected toward the smallest
    feasible value; if no multiplier up to ``mu_max`` satisfies the bound,
    CrbInfeasibleError reports the best bound achieved.

    Returns (precoder, lambda0, mu).
    """
    phi = np.asarray(phi)
    h_eff = effective_channel(channels, phi)
    rhs = h_eff.conj().T @ combiner.conj().T @ weight
    fh = combiner @ h_eff
    gram = fh.conj().T @ weight @ fh
    if include_si:
        leak = si_channel(channels, phi)
        gram = gram + leak.conj().T @ leak
    gram = _herm(gram)

    constrain = math.isfinite(crb_threshold)
    if constrain:
        if path_response_deriv is None or noise_cov is None:
            raise ValueError("CRB constraint requires the response derivative and noise covariance")
        whitened = np.linalg.solve(np.asarray(noise_cov), np.asarray(path_response_deriv))
        fisher_core = _herm(np.asarray(path_response_deriv).conj().T @ whitened)

        def crb_of(v):
            fisher = float(2.0 * np.sum(np.real(np.conj(v) * (fisher_core @ v))))
            if not np.isfinite(fisher) or fisher <= 0.0:
                return math.inf
            return 1.0 / fisher

    def solve_at(mu):
        core = gram if mu == 0.0 else gram + (2.0 * mu) * fisher_core
        return _solve_power_constrained(core, rhs, power_budget, bisect_tol, max_bisect)

    precoder, lam = solve_at(0.0)
    if not constrain:
        return precoder, lam, 0.0
    achieved = crb_of(precoder)
    if achieved <= crb_threshold:
        return precoder, lam, 0.0

    best = achieved
    mu_lo, mu_hi = 0.0, 1.0
    feasible = None
    while mu_hi <= mu_max:
        cand, cand_lam = solve_at(mu_hi)
        cand_crb = crb_of(cand)
        best = min(best, cand_crb)
        if cand_crb <= crb_threshold:
            feasible = (cand, cand_lam, mu_hi, cand_crb)
            break
        mu_lo = mu_hi
        mu_hi *= 2.0
    if feasible is None:
        raise CrbInfeasibleError(best, crb_threshold)
    for _ in range(max_bisect):
        if abs(feasible[3] - crb_threshold) <= bisect_tol * crb_threshold:
            break
        mid = 0.5 * (mu_lo + mu_hi)
        cand, cand_lam = solve_at(mid)
        cand_crb = crb_of(cand)
        if cand_crb <= crb_threshold:
            mu_hi = mid
            feasible = (cand, cand_lam, mid, cand_crb)
        else:
            mu_lo = mid
        if (mu_hi - mu_lo) <= bisect_tol * max(mu_hi, 1.0):
            break
    precoder, lam, mu, _ = feasible
    return precoder, lam, mu


def ris_quadratics(precoder, combiner, weight, channels: ChannelSet, objective: str = RIS_OBJECTIVE_JCAS):
    """Quadratic form (matrix, linear vector) of the phase-profile objective.

    For the joint design the restriction of the interference power plus the
    weighted through-combiner signal power to the phase vector p reads
    p^H M p + 2 Re(d^T p) + const; M sums the interference and user Gram
    pairings (each a Hadamard product with the precoder-weighted surface
    Gram) and d collects the cross terms against the direct links.  The
    ``"rate"`` variant drops the interference pieces and adds the
    combiner-signal linear term so the form equals the weighted-MSE
    restriction used by the communications-only benchmark.
    """
    if objective not in (RIS_OBJECTIVE_JCAS, RIS_OBJECTIVE_RATE):
        raise ValueError(f"unknown ris objective {objective!r}")
    u = channels.bs_to_ris @ precoder
    surface_gram = u @ u.conj().T
    fj = combiner @ channels.ris_to_user
    quad = fj.conj().T @ weight @ fj
    right_user = (
        precoder.conj().T
        @ channels.bs_to_user.conj().T
        @ combiner.conj().T
        @ weight
        @ fj
    )
    lin = np.einsum("ij,ji->i", u, right_user)
    if objective == RIS_OBJECTIVE_JCAS:
        quad = quad + channels.ris_to_bs.conj().T @ channels.ris_to_bs
        right_si = precoder.conj().T @ channels.si_los.conj().T @ channels.ris_to_bs
        lin = lin + np.einsum("ij,ji->i", u, right_si)
    else:
        lin = lin - np.einsum("ij,ji->i", u, weight @ fj)
    return quad * surface_gram.T, lin


def ris_objective_value(phi, quad_matrix, linear) -> float:
    """Value of the phase objective p^H M p + 2 Re(d^T p)."""
    phi = np.asarray(phi)
    return float(
        np.real(np.vdot(phi, quad_matrix @ phi)) + 2.0 * np.real(linear @ phi)
    )


def mm_step(phi, quad_matrix, linear, lam_max: float | None = None) -> np.ndarray:
    """One majorization-minimization step on the unit-modulus constraint set.

    Elements whose update direction is exactly zero keep their previous
    phase (tie break).
    """
    phi = np.asarray(phi, dtype=complex)
    if lam_max is None:
        lam_max = float(np.linalg.eigvalsh(_herm(quad_matrix))[-1])
    q = lam_max * phi - quad_matrix @ phi - np.conj(linear)
    mag = np.abs(q)
    out = phi.copy()
    nonzero = mag > 0.0
    out[nonzero] = q[nonzero] / mag[nonzero]
    return out


def ris_optimize(phi0, quad_matrix, linear, tol: float = 1e-5, max_iter: int = 500):
    """Iterate :func:`mm_step` until the objective change is small.

    Returns (phase profile, array of objective values including the start).
    The stopping rule is relative; it falls back to an absolute comparison
    when the current value is exactly zero.
    """
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    phi = np.asarray(phi0, dtype=complex)
    lam_max = float(np.linalg.eigvalsh(_herm(quad_matrix))[-1])
    values = [ris_objective_value(phi, quad_matrix, linear)]
    for _ in range(max_iter):
        phi = mm_step(phi, quad_matrix, linear, lam_max)
        values.append(ris_objective_value(phi, quad_matrix, linear))
        delta = abs(values[-1] - values[-2])
        scale = abs(values[-1])
        if (delta <= tol * scale) if scale > 0.0 else (delta <= tol):
            break
    return phi, np.asarray(values)


def dominant_precoder(h_eff, n_streams: int, power_budget: float) -> np.ndarray:
    """Power-normalized dominant eigenvectors of the channel covariance;
    the initialization point of the alternating design."""
    cov = _herm(h_eff.conj().T @ h_eff)
    _, evecs = np.linalg.eigh(cov)
    top = evecs[:, -n_streams:][:, ::-1]
    return np.sqrt(power_budget / n_streams) * top


def jcas_optimize(
    scene: Scene,
    channels: ChannelSet,
    config: JcasConfig,
    coeffs: PathCoefficients | None = None,
    initial_phase=None,
) -> JcasResult:
    """Run the alternating design until the objective stalls.

    Each outer iteration updates the combiner, the stream weights, the
    precoder (with its multiplier searches), and finally the phase profile,
    after which the radar response derivative is refreshed since it depends
    on the profile.  A phase proposal from the inner solver is kept only
    when it does not increase the recorded objective: the phase quadratics
    penalize through-combiner signal power alongside the interference, so
    an unguarded step can undo precoder progress once the interference is
    small.  The trace records the end-of-iteration objective, rate,
    interference power, bound value and multipliers; row zero is the
    initialized state.  Infeasibility of the sensing constraint propagates
    with the iteration index attached.
    """
    if initial_phase is None:
        phi = RisPhase.random(channels.n_ris, [config.seed, 0]).vector
    else:
        phi = np.asarray(initial_phase, dtype=complex)
    if config.sensing_enabled and coeffs is None:
        coeffs = PathCoefficients.random([config.seed, 1])

    noise_user = channels.noise_user
    h_eff = effective_channel(channels, phi)
    precoder = dominant_precoder(h_eff, config.n_streams, config.power_budget)
    ctx = (
        build_sensing_context(scene, phi, coeffs, channels.noise_radar)
        if config.sensing_enabled
        else None
    )

    trace = IterationTrace()
    combiner = mmse_combiner(h_eff, precoder, noise_user)
    weight = weight_matrix(mse_matrix(h_eff, precoder, noise_user), config.priority)
    lam0 = mu = 0.0
    previous = _record(trace, 0, precoder, phi, ctx, channels, config, lam0, mu)

    for it in range(1, config.max_outer + 1):
        combiner = mmse_combiner(h_eff, precoder, noise_user)
        weight = weight_matrix(mse_matrix(h_eff, precoder, noise_user), config.priority)
        threshold = config.crb_threshold if config.sensing_enabled else math.inf
        try:
            precoder, lam0, mu = precoder_update(
                combiner,
                weight,
                channels,
                phi,
                config.power_budget,
                crb_threshold=threshold,
                path_response_deriv=ctx.path_response_deriv if ctx is not None else None,
                noise_cov=ctx.noise_cov if ctx is not None else None,
                include_si=config.si_enabled,
                bisect_tol=config.bisect_tol,
                max_bisect=config.max_bisect,
                mu_max=config.mu_max,
            )
        except CrbInfeasibleError as err:
            raise CrbInfeasibleError(
                err.achieved, err.threshold, context=f"outer iteration {it}"
            ) from err
        if config.ris_enabled:
            quad, lin = ris_quadratics(
                precoder, combiner, weight, channels, objective=config.ris_objective
            )
            candidate, _ = ris_optimize(phi, quad, lin, config.ris_tol, config.max_ris_iter)
            if _merit(precoder, candidate, channels, config) <= _merit(
                precoder, phi, channels, config
            ):
                phi = candidate
                h_eff = effective_channel(channels, phi)
                if config.sensing_enabled:
                    ctx = build_sensing_context(scene, phi, coeffs, channels.noise_radar)
        current = _record(trace, it, precoder, phi, ctx, channels, config, lam0, mu)
        if abs(current - previous) <= config.outer_tol * max(abs(previous), 1e-300):
            break
        previous = current

    state = BeamformerState(
        precoder=precoder,
        combiner=combiner,
        weight=weight,
        lambda0=lam0,
        mu=mu,
        priority=config.priority,
    )
    return JcasResult(precoder=precoder, ris_phase=phi, trace=trace, state=state)


def _merit(precoder, phi, channels, config) -> float:
    """Recorded objective: interference power minus the weighted rate.

    This is the rate-equivalent value of the weighted-MSE surrogate at the
    tight combiner/weight pair, the quantity the alternating updates
    provably do not increase.
    """
    rate = dl_rate(effective_channel(channels, phi), precoder, channels.noise_user)
    value = -config.priority * rate
    if config.si_enabled:
        value += float(np.real(np.trace(si_matrix(precoder, phi, channels))))
    return value


def _record(trace, iteration, precoder, phi, ctx, channels, config, lam0, mu):
    objective = _merit(precoder, phi, channels, config)
    si_power = math.nan
    if config.si_enabled:
        si_power = float(np.real(np.trace(si_matrix(precoder, phi, channels))))
    rate = dl_rate(effective_channel(channels, phi), precoder, channels.noise_user)
    crb_value = math.nan
    if ctx is not None:
        try:
            crb_value = aoa_crb(precoder, ctx.path_response_deriv, ctx.noise_cov)
        except UnobservableError:
            crb_value = math.nan
    trace.append(iteration, objective, rate, si_power, crb_value, lam0, mu)
    return objective
