"""Statistical tests that probe a box and rule on its quantum consistency.

Every detector reduces its evidence to a TestVerdict: a scalar statistic, a
threshold, a standard error and the three-way decision

* ``post-quantum`` when the statistic exceeds the threshold by at least 3
  standard errors,
* ``quantum-consistent`` when it falls below by at least 3 standard errors,
* ``inconclusive`` otherwise (including whenever the error is undefined).

Exact thresholds (the discrimination bound, the transmission-fidelity
ceiling) are computed in closed form; tomography-based detectors calibrate
their thresholds empirically as the 99th percentile of the identity box's
null statistic at the identical shot budget (50 replications, fixed
calibration seed, cached per budget).
"""

from __future__ import annotations

import math
import threading
import zlib
from dataclasses import dataclass

import numpy as np

from .boxes import BoxModel, BoxPair, ClassicalParams, LinearBox, NO_PARAMS, qrac_round
from .channels import QuantumChannel, random_channel
from .linalg import (
    InvalidInputError,
    eig_hermitian,
    hermitian_basis,
    kron,
    nearest_density_matrix,
    partial_trace,
    trace_distance,
    trace_norm,
    uhlmann_fidelity,
)
from .rng import RngStream
from .states import (
    DensityMatrix,
    Ensemble,
    PureState,
    as_state,
    ket,
    minus_state,
    plus_state,
)
from .tomography import (
    TomographyRun,
    canonical_probe_basis,
    pauli_measurement_set,
    process_tomography_ancilla,
    process_tomography_direct,
)

__all__ = [
    "VERDICT_QUANTUM",
    "VERDICT_POST_QUANTUM",
    "VERDICT_INCONCLUSIVE",
    "CALIBRATION_SEED",
    "NULL_REPLICATIONS",
    "TestVerdict",
    "decide",
    "HelstromSetup",
    "helstrom_bound",
    "helstrom_test",
    "canonical_ensemble_pair",
    "ensemble_signalling_test",
    "basis_invariance_test",
    "ancilla_consistency_test",
    "QracResult",
    "qrac_fidelity_estimate",
    "qrac_verdict",
    "QRAC_FIDELITY_CEILING",
    "NsqResult",
    "nsq_signalling_measure",
    "nsq_random_survey",
]

VERDICT_QUANTUM = "quantum-consistent"
VERDICT_POST_QUANTUM = "post-quantum"
VERDICT_INCONCLUSIVE = "inconclusive"

# Null-threshold calibration: identity box, fixed seed, 99th percentile.
CALIBRATION_SEED = 0xD1CE5EED
NULL_REPLICATIONS = 50
NULL_QUANTILE = 0.99

QRAC_FIDELITY_CEILING = 5.0 / 6.0


def _verdict_for(statistic: float, threshold: float, std_error: float) -> str:
    if not np.isfinite(std_error):
        return VERDICT_INCONCLUSIVE
    diff = statistic - threshold
    if diff > 0 and diff >= 3.0 * std_error:
        return VERDICT_POST_QUANTUM
    if diff < 0 and -diff >= 3.0 * std_error:
        return VERDICT_QUANTUM
    return VERDICT_INCONCLUSIVE


@dataclass(frozen=True)
class TestVerdict:
    """Quantified outcome of one detector run.

    The verdict field is derived from the other fields by the 3-standard-
    error rule and is re-checked at construction, so a TestVerdict can never
    carry an inconsistent ruling.
    """

    statistic: float
    threshold: float
    std_error: float
    n_trials: int
    verdict: str
    extras: dict | None = None

    def __post_init__(self) -> None:
        expected = _verdict_for(self.statistic, self.threshold, self.std_error)
        if self.verdict != expected:
            raise InvalidInputError(
                f"verdict {self.verdict!r} contradicts the decision rule ({expected!r})"
            )


def decide(
    statistic: float,
    threshold: float,
    std_error: float,
    n_trials: int,
    extras: dict | None = None,
) -> TestVerdict:
    """Apply the 3-standard-error decision rule and package the verdict."""
    statistic, threshold, std_error = (
        float(statistic),
        float(threshold),
        float(std_error),
    )
    return TestVerdict(
        statistic=statistic,
        threshold=threshold,
        std_error=std_error,
        n_trials=int(n_trials),
        verdict=_verdict_for(statistic, threshold, std_error),
        extras=extras,
    )


# ---------------------------------------------------------------------------
# two-state discrimination


@dataclass(frozen=True)
class HelstromSetup:
    """Discrimination instance: two pure hypotheses with prior weights.

    The optimal success bound is recomputed on demand so it can never go
    stale against the states.
    """

    priors: tuple
    states: tuple

    def __post_init__(self) -> None:
        p = tuple(float(x) for x in self.priors)
        s = tuple(as_state(x) for x in self.states)
        if len(p) != 2 or len(s) != 2:
            raise InvalidInputError("discrimination setup needs exactly two hypotheses")
        if min(p) < 0 or abs(sum(p) - 1.0) > 1e-12:
            raise InvalidInputError("priors must form a probability pair")
        if s[0].dim != s[1].dim:
            raise InvalidInputError("hypothesis states have different dimensions")
        object.__setattr__(self, "priors", p)
        object.__setattr__(self, "states", s)

    @property
    def bound(self) -> float:
        p1, p2 = self.priors
        s1, s2 = self.states
        delta = p1 * s1.projector() - p2 * s2.projector()
        return 0.5 * (1.0 + trace_norm(delta))


def helstrom_bound(setup: HelstromSetup) -> float:
    """Optimal success probability for the setup's input states."""
    return setup.bound


def _optimal_projectors(rho1: DensityMatrix, rho2: DensityMatrix, priors) -> tuple:
    """Projectors of the optimal two-outcome measurement for the given pair.

    Null directions of the difference operator do not affect the success
    probability; they are assigned to the hypothesis with the larger prior.
    """
    delta = priors[0] * rho1.matrix - priors[1] * rho2.matrix
    eigvals, eigvecs = eig_hermitian(delta)
    to_first = eigvals > 1e-12
    if priors[0] >= priors[1]:
        to_first |= np.abs(eigvals) <= 1e-12
    pi1 = (eigvecs[:, to_first] @ eigvecs[:, to_first].conj().T) if to_first.any() else np.zeros_like(delta)
    pi2 = np.eye(delta.shape[0]) - pi1
    return pi1, pi2


def helstrom_test(
    box: BoxModel,
    setup: HelstromSetup,
    params: ClassicalParams = NO_PARAMS,
    trials: int = 10_000,
    rng: RngStream | None = None,
) -> TestVerdict:
    """Check whether the box lets a receiver beat the input-state bound.

    Each trial draws a hypothesis by its prior, pushes the state through the
    box, and applies the measurement that is optimal for the exact pair of
    output densities.  Trials are drawn as binomial blocks, which has
    exactly the per-trial distribution.  Beating the bound by 3 standard
    errors is a post-quantum flag; trace-distance monotonicity makes that
    impossible for any CPTP box.
    """
    if rng is None:
        raise InvalidInputError("helstrom_test requires an rng")
    if trials < 1:
        raise InvalidInputError("trials must be positive")
    p1, p2 = setup.priors
    out1 = box.ensemble_output_density(setup.states[0], params)
    out2 = box.ensemble_output_density(setup.states[1], params)
    pi1, pi2 = _optimal_projectors(out1, out2, setup.priors)
    q1 = float(np.clip(np.real(np.trace(pi1 @ out1.matrix)), 0.0, 1.0))
    q2 = float(np.clip(np.real(np.trace(pi2 @ out2.matrix)), 0.0, 1.0))
    gen = rng.generator
    n1 = int(gen.binomial(trials, p1))
    successes = int(gen.binomial(n1, q1)) + int(gen.binomial(trials - n1, q2))
    p_hat = successes / trials
    std_error = math.sqrt(p_hat * (1.0 - p_hat) / trials)
    return decide(
        p_hat,
        setup.bound,
        std_error,
        trials,
        extras={"exact_success": p1 * q1 + p2 * q2},
    )


# ---------------------------------------------------------------------------
# equal-density ensemble pairs


def canonical_ensemble_pair() -> tuple:
    """The z-basis and x-basis halves of the maximally mixed qubit."""
    e1 = Ensemble((0.5, 0.5), (ket(0), ket(1)))
    e2 = Ensemble((0.5, 0.5), (plus_state(), minus_state()))
    return e1, e2


def ensemble_signalling_test(
    box: BoxModel,
    e1: Ensemble,
    e2: Ensemble,
    params: ClassicalParams = NO_PARAMS,
) -> TestVerdict:
    """Feed two decompositions of the same density and compare the outputs.

    The inputs must have exactly equal density matrices; anything else is
    rejected loudly, because with unequal inputs a nonzero statistic proves
    nothing.  The computation is exact, so the threshold is a pure
    numerical-noise floor.
    """
    if trace_distance(e1.density(), e2.density()) > 1e-10:
        raise InvalidInputError("the two ensembles must have equal density matrices")
    out1 = box.ensemble_output_density(e1, params)
    out2 = box.ensemble_output_density(e2, params)
    statistic = trace_distance(out1, out2)
    return decide(statistic, 1e-6, 0.0, 0)


# ---------------------------------------------------------------------------
# null-threshold calibration for tomography-based detectors

_calibration_lock = threading.Lock()
_calibration_cache: dict = {}


def _calibrated_null(key: str, statistic_fn) -> tuple:
    """99th-percentile threshold and spread of the identity box's statistic.

    statistic_fn(identity_box, stream) -> float is evaluated over
    NULL_REPLICATIONS independent streams derived from the fixed calibration
    seed, so thresholds depend only on the budget key.
    """
    with _calibration_lock:
        if key in _calibration_cache:
            return _calibration_cache[key]
    identity_box = LinearBox(QuantumChannel.identity(2))
    root = RngStream(CALIBRATION_SEED, zlib.crc32(key.encode()))
    stats = np.array(
        [statistic_fn(identity_box, root.child(rep)) for rep in range(NULL_REPLICATIONS)]
    )
    result = (
        float(np.quantile(stats, NULL_QUANTILE)),
        float(np.std(stats, ddof=1)),
    )
    with _calibration_lock:
        _calibration_cache[key] = result
    return result


def _projected_normal_choi(process) -> np.ndarray:
    return nearest_density_matrix(process.normalized_choi())


def _basis_invariance_statistic(box, params, deltas, run, rng) -> tuple:
    chois = []
    residuals = []
    for k, delta in enumerate(deltas):
        basis = canonical_probe_basis(box.dim_in, delta)
        rec = process_tomography_direct(box, params, basis, run, rng.child(k))
        chois.append(_projected_normal_choi(rec))
        residuals.append(rec.cptp_residual)
    worst = 1.0
    for i in range(len(chois)):
        for j in range(i + 1, len(chois)):
            worst = min(worst, uhlmann_fidelity(chois[i], chois[j]))
    return 1.0 - worst, residuals


def basis_invariance_test(
    box: BoxModel,
    params: ClassicalParams = NO_PARAMS,
    deltas: tuple = (0.0, math.pi / 5, math.pi / 3),
    run: TomographyRun | None = None,
    rng: RngStream | None = None,
) -> TestVerdict:
    """Reconstruct the box in several rotated probe bases and compare.

    A linear box has one Choi matrix no matter which basis probes it; any
    dependence on the rotation angle is a post-quantum fingerprint.  The
    statistic is one minus the worst pairwise fidelity of the reconstructed
    (normalized, projected) Choi matrices; its null threshold and standard
    error come from the identity-box calibration at the same budget.
    """
    if rng is None:
        raise InvalidInputError("basis_invariance_test requires an rng")
    deltas = tuple(float(d) for d in deltas)
    if not deltas:
        raise InvalidInputError("at least one probe rotation is required")
    if run is None:
        run = TomographyRun(10_000, pauli_measurement_set(1))
    key = "basis|{}|{}|{}".format(
        ",".join(f"{d:.12g}" for d in deltas), run.shots_per_setting, box.dim_in
    )
    threshold, sigma = _calibrated_null(
        key,
        lambda null_box, stream: _basis_invariance_statistic(
            null_box, NO_PARAMS, deltas, run, stream
        )[0],
    )
    statistic, residuals = _basis_invariance_statistic(box, params, deltas, run, rng)
    return decide(
        statistic,
        threshold,
        sigma,
        len(deltas) * run.shots_per_setting,
        extras={"cptp_residuals": tuple(residuals)},
    )


def _ancilla_statistic(box, params, run, joint_run, rng) -> tuple:
    direct = process_tomography_direct(
        box, params, canonical_probe_basis(2, 0.0), run, rng.child(0)
    )
    ancilla = process_tomography_ancilla(box, params, joint_run, rng.child(1))
    fid = uhlmann_fidelity(
        _projected_normal_choi(direct), _projected_normal_choi(ancilla)
    )
    return 1.0 - fid, direct.cptp_residual, ancilla.cptp_residual


def ancilla_consistency_test(
    box: BoxModel,
    params: ClassicalParams = NO_PARAMS,
    run: TomographyRun | None = None,
    rng: RngStream | None = None,
) -> TestVerdict:
    """Compare the probe-state scheme against the entangled-reference scheme.

    For any CPTP box the two reconstructions estimate the same Choi matrix.
    The run describes the per-setting budget and single-qubit measurement
    set of the direct scheme; the joint stage uses the two-qubit Pauli set
    at the same budget.  Threshold and standard error are calibrated on the
    identity box.
    """
    if rng is None:
        raise InvalidInputError("ancilla_consistency_test requires an rng")
    if box.dim_in != 2 or box.dim_out != 2:
        raise InvalidInputError("the consistency test is implemented for qubit boxes")
    if run is None:
        run = TomographyRun(10_000, pauli_measurement_set(1))
    if run.dim != 2:
        raise InvalidInputError("pass a single-qubit run; the joint set is derived")
    joint_run = TomographyRun(
        run.shots_per_setting, pauli_measurement_set(2), run.estimator
    )
    key = f"ancilla|{run.shots_per_setting}"
    threshold, sigma = _calibrated_null(
        key,
        lambda null_box, stream: _ancilla_statistic(
            null_box, NO_PARAMS, run, joint_run, stream
        )[0],
    )
    statistic, direct_res, ancilla_res = _ancilla_statistic(
        box, params, run, joint_run, rng
    )
    return decide(
        statistic,
        threshold,
        sigma,
        run.shots_per_setting,
        extras={"direct_residual": direct_res, "ancilla_residual": ancilla_res},
    )


# ---------------------------------------------------------------------------
# random-access game


@dataclass(frozen=True)
class QracResult:
    """Post-selected transmission-fidelity estimate from played rounds."""

    f_hat: float
    ci_halfwidth: float
    kept_rounds: int
    total_rounds: int

    def __post_init__(self) -> None:
        if not 0.0 <= self.f_hat <= 1.0:
            raise InvalidInputError("fidelity estimate must lie in [0, 1]")
        if self.kept_rounds > self.total_rounds:
            raise InvalidInputError("kept rounds exceed total rounds")


def qrac_fidelity_estimate(
    pair: BoxPair, rounds: int, rng: RngStream
) -> QracResult:
    """Monte Carlo transmission fidelity of the a = b post-selected rounds.

    Every round draws two Haar-random target qubits and a uniform choice
    bit; among kept rounds the overlap of Bob's output with the chosen
    target is averaged exactly from the round's output density.  The
    confidence halfwidth is the 95% normal interval.
    """
    if rounds < 1:
        raise InvalidInputError("at least one round is required")
    fidelities = []
    for r in range(rounds):
        # one stream per round; draws inside the round are sequential
        stream = rng.child(r)
        psi0 = PureState.haar(2, stream)
        psi1 = PureState.haar(2, stream)
        x = int(stream.generator.integers(2))
        outcome = qrac_round(pair, psi0, psi1, x, stream)
        if outcome.kept:
            target = psi0 if x == 0 else psi1
            fid = np.real(
                target.vector.conj() @ outcome.rho_out.matrix @ target.vector
            )
            fidelities.append(float(fid))
    if not fidelities:
        raise InvalidInputError("no rounds survived post-selection")
    sample = np.array(fidelities)
    f_hat = float(sample.mean())
    spread = float(sample.std(ddof=1)) if sample.size > 1 else float("nan")
    ci = 1.96 * spread / math.sqrt(sample.size) if sample.size > 1 else float("nan")
    return QracResult(
        f_hat=f_hat,
        ci_halfwidth=float(ci),
        kept_rounds=int(sample.size),
        total_rounds=int(rounds),
    )


def qrac_verdict(result: QracResult) -> TestVerdict:
    """Rule on a fidelity estimate against the quantum ceiling of 5/6."""
    if result.kept_rounds > 1:
        sigma = result.ci_halfwidth / 1.96
    else:
        sigma = float("nan")
    return decide(
        result.f_hat,
        QRAC_FIDELITY_CEILING,
        sigma,
        result.kept_rounds,
        extras={"kept_fraction": result.kept_rounds / result.total_rounds},
    )


# ---------------------------------------------------------------------------
# bipartite no-signalling structure


@dataclass(frozen=True)
class NsqResult:
    """Exact and sampled signalling diagnostics of one bipartite channel."""

    signalling_measure: float
    per_direction: tuple
    sampled_violations: float
    marginal_drift: float = 0.0

    def __post_init__(self) -> None:
        if abs(self.signalling_measure - max(self.per_direction)) > 1e-12:
            raise InvalidInputError("measure must be the maximum over directions")


def _apply_raw(choi4: np.ndarray, operand: np.ndarray) -> np.ndarray:
    return np.einsum("ij,iajb->ab", operand, choi4)


def _kernel_direction(choi4, dims, sender: int) -> float:
    """Largest normalized marginal response on the receiver side.

    Scans Hermitian basis elements traceless on the sender tensored with
    arbitrary basis elements on the receiver; for each, the receiver
    marginal of the output is compared with the input's size in trace norm.
    The swap channel attains 1.
    """
    da, db = dims
    basis_a = hermitian_basis(da)
    basis_b = hermitian_basis(db)
    if sender == 0:
        pairs = ((a, b) for a in basis_a[1:] for b in basis_b)
        keep = {1}
    else:
        pairs = ((a, b) for a in basis_a for b in basis_b[1:])
        keep = {0}
    worst = 0.0
    for a, b in pairs:
        operand = kron(a, b)
        marginal = partial_trace(_apply_raw(choi4, operand), [da, db], keep)
        worst = max(worst, trace_norm(marginal) / trace_norm(operand))
    return worst


def _random_density(dim: int, rng: RngStream) -> DensityMatrix:
    gen = rng.generator
    g = gen.standard_normal((dim, dim)) + 1j * gen.standard_normal((dim, dim))
    rho = g @ g.conj().T
    return DensityMatrix(rho / np.trace(rho))


def nsq_signalling_measure(
    lambda_ab: QuantumChannel,
    local_dims: tuple,
    sampled_pairs: int = 100,
    rng: RngStream | None = None,
) -> NsqResult:
    """Quantify signalling through a bipartite channel, exactly and sampled.

    The kernel test is exact linear algebra on basis elements and catches
    any dependence of one side's output marginal on the other side's input.
    The sampled test mirrors the operational family: random joint states
    with random local operations on the opposite side, flagging marginal
    changes above 1e-9.  With rng omitted the sampled arm uses a fixed
    internal stream, keeping the result deterministic.
    """
    da, db = (int(d) for d in local_dims)
    if lambda_ab.dim_in != da * db or lambda_ab.dim_out != da * db:
        raise InvalidInputError("channel dimensions do not factor over the local dims")
    choi4 = lambda_ab.choi4
    a_to_b = _kernel_direction(choi4, (da, db), sender=0)
    b_to_a = _kernel_direction(choi4, (da, db), sender=1)

    violations = 0
    drift = 0.0
    if sampled_pairs > 0:
        if rng is None:
            rng = RngStream(CALIBRATION_SEED, zlib.crc32(b"nsq-sampled"))
        ident_b = QuantumChannel.identity(db)
        for k in range(sampled_pairs):
            stream = rng.child(k)
            rho = _random_density(da * db, stream.child(0))
            gamma_a = random_channel(da, da, stream.child(1))
            moved = gamma_a.tensor(ident_b).apply(rho)
            out_base = lambda_ab.apply(rho)
            out_moved = lambda_ab.apply(moved)
            bob_base = out_base.reduce([da, db], keep={1})
            bob_moved = out_moved.reduce([da, db], keep={1})
            if trace_distance(bob_base, bob_moved) > 1e-9:
                violations += 1
            drift = max(drift, trace_distance(bob_base, rho.reduce([da, db], keep={1})))
    fraction = violations / sampled_pairs if sampled_pairs > 0 else 0.0
    return NsqResult(
        signalling_measure=max(a_to_b, b_to_a),
        per_direction=(a_to_b, b_to_a),
        sampled_violations=fraction,
        marginal_drift=drift,
    )


def nsq_random_survey(
    n_samples: int,
    local_dims: tuple = (2, 2),
    rng: RngStream | None = None,
    env_dim: int | None = None,
    product_channels: bool = False,
) -> TestVerdict:
    """Survey random bipartite dynamics for no-signalling structure.

    Generic interacting dynamics signal in at least one direction, so the
    expected signalling fraction is 1; a significant fraction of samples
    compatible with no-communication is the anomaly this detector flags.
    The verdict statistic is therefore the compatible fraction against a
    1% threshold, with the raw signalling fraction reported alongside.
    With product_channels=True the survey draws local products only, a
    control arm that must come out fully compatible.
    """
    if n_samples < 1:
        raise InvalidInputError("n_samples must be at least 1")
    if rng is None:
        raise InvalidInputError("nsq_random_survey requires an rng")
    da, db = (int(d) for d in local_dims)
    compatible = 0
    for k in range(n_samples):
        stream = rng.child(k)
        if product_channels:
            channel = random_channel(da, da, stream.child(0)).tensor(
                random_channel(db, db, stream.child(1))
            )
        else:
            channel = random_channel(da * db, da * db, stream, env_dim)
        result = nsq_signalling_measure(channel, (da, db), sampled_pairs=0)
        if result.signalling_measure <= 1e-8:
            compatible += 1
    compatible_fraction = compatible / n_samples
    signalling_fraction = 1.0 - compatible_fraction
    if n_samples > 1:
        sigma = math.sqrt(
            compatible_fraction * (1.0 - compatible_fraction) / (n_samples - 1)
        )
    else:
        sigma = float("nan")
    return decide(
        compatible_fraction,
        0.01,
        sigma,
        n_samples,
        extras={
            "signalling_fraction": signalling_fraction,
            "compatible_fraction": compatible_fraction,
        },
    )
