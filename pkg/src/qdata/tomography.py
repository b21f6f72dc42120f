"""Finite-shot state and process tomography.

State estimates use linear inversion over a tomographically complete
measurement set (the Pauli bases by default), optionally projected to the
nearest density matrix.  Process estimates are assembled from per-probe
state reconstructions by recovering the channel's action on the operator
units |i><j|.  A reconstructed Choi matrix is never projected onto the CPTP
set: deviations from it are exactly the signals the detectors feed on, so
the distance is recorded in ``cptp_residual`` instead.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .linalg import (
    InvalidInputError,
    InvalidShapeError,
    hermitian_basis,
    kron,
    nearest_density_matrix,
    partial_trace,
    rotation_y,
)
from .rng import RngStream
from .states import (
    DensityMatrix,
    Povm,
    PureState,
    as_density,
    born_probabilities,
    ket,
    max_entangled,
    minus_i_state,
    minus_state,
    plus_i_state,
    plus_state,
)

__all__ = [
    "TomographyRun",
    "ProbeBasis",
    "ReconstructedProcess",
    "pauli_measurement_set",
    "state_tomography",
    "canonical_probe_basis",
    "process_tomography_direct",
    "process_tomography_ancilla",
    "cptp_parameter_count",
]

ESTIMATORS = ("linear-inversion-then-project", "direct-inversion-diagnostic")


def pauli_measurement_set(n_qubits: int) -> tuple:
    """Projective measurements in every product of single-qubit Pauli bases.

    One qubit gives 3 settings of 2 outcomes; two qubits give 9 settings of
    4 outcomes.
    """
    if n_qubits not in (1, 2):
        raise InvalidInputError("only one- and two-qubit sets are provided")
    single = []
    for pair in (
        (plus_state(), minus_state()),
        (plus_i_state(), minus_i_state()),
        (ket(0), ket(1)),
    ):
        single.append(tuple(s.projector() for s in pair))
    if n_qubits == 1:
        return tuple(Povm(effects) for effects in single)
    povms = []
    for first in single:
        for second in single:
            effects = tuple(kron(e, f) for e in first for f in second)
            povms.append(Povm(effects))
    return tuple(povms)


def _design_matrix(effects: list, dim: int) -> np.ndarray:
    basis = hermitian_basis(dim)
    return np.array(
        [[np.real(np.trace(e @ b)) for b in basis] for e in effects]
    )


@dataclass(frozen=True)
class TomographyRun:
    """Budget and estimator for one tomography experiment.

    shots_per_setting is the number of repetitions of each measurement
    setting; the measurement set must span the operator space (design rank
    dim^2, checked here).
    """

    shots_per_setting: int
    measurement_set: tuple
    estimator: str = "linear-inversion-then-project"

    def __post_init__(self) -> None:
        if self.shots_per_setting < 1:
            raise InvalidInputError("shots_per_setting must be at least 1")
        povms = tuple(self.measurement_set)
        if not povms or len({p.dim for p in povms}) != 1:
            raise InvalidShapeError("measurement set must be nonempty with one dimension")
        if self.estimator not in ESTIMATORS:
            raise InvalidInputError(f"unknown estimator {self.estimator!r}")
        dim = povms[0].dim
        effects = [e for p in povms for e in p.effects]
        if np.linalg.matrix_rank(_design_matrix(effects, dim)) != dim * dim:
            raise InvalidInputError("measurement set is not tomographically complete")
        object.__setattr__(self, "measurement_set", povms)

    @property
    def dim(self) -> int:
        return self.measurement_set[0].dim


def _setting_counts(source, povm: Povm, shots: int, rng: RngStream) -> np.ndarray:
    """Outcome counts for one setting.

    A DensityMatrix (or anything convertible) is sampled from its exact Born
    distribution; a callable source is invoked as source(povm, shots, rng)
    and must return the counts vector itself.
    """
    if callable(source):
        counts = np.asarray(source(povm, shots, rng))
        if counts.shape != (len(povm),) or int(counts.sum()) != shots:
            raise InvalidInputError("source returned an invalid counts vector")
        return counts
    probs = born_probabilities(as_density(source), povm)
    return rng.generator.multinomial(shots, probs)


def _linear_inversion(frequencies: np.ndarray, povms: tuple, dim: int) -> np.ndarray:
    effects = [e for p in povms for e in p.effects]
    design = _design_matrix(effects, dim)
    coeffs, *_ = np.linalg.lstsq(design, frequencies, rcond=None)
    basis = hermitian_basis(dim)
    estimate = sum(c * b for c, b in zip(coeffs, basis))
    return (estimate + estimate.conj().T) / 2


def state_tomography(
    source, run: TomographyRun, rng: RngStream, records: list | None = None
):
    """Reconstruct a state from finite measurement statistics.

    Returns a DensityMatrix under the default estimator; the diagnostic
    estimator returns the raw (possibly non-positive) linear-inversion
    matrix unprojected.  Pass a list as ``records`` to collect the flat
    (setting, outcome, count) table.
    """
    freqs = []
    for i, povm in enumerate(run.measurement_set):
        counts = _setting_counts(source, povm, run.shots_per_setting, rng.child(i))
        if records is not None:
            records.extend((i, j, int(c)) for j, c in enumerate(counts))
        freqs.extend(counts / run.shots_per_setting)
    raw = _linear_inversion(np.array(freqs), run.measurement_set, run.dim)
    if run.estimator == "direct-inversion-diagnostic":
        return raw
    return DensityMatrix(nearest_density_matrix(raw))


@dataclass(frozen=True)
class ProbeBasis:
    """m^2 pure probe states whose projectors span the operator space."""

    states: tuple
    delta: float = 0.0

    def __post_init__(self) -> None:
        states = tuple(self.states)
        if not states:
            raise InvalidInputError("probe basis is empty")
        dim = states[0].dim
        if len(states) != dim * dim or any(s.dim != dim for s in states):
            raise InvalidShapeError("a probe basis needs exactly dim^2 states of one dimension")
        if np.linalg.matrix_rank(self.design_matrix()) != dim * dim:
            raise InvalidInputError("probe projectors are linearly dependent")
        object.__setattr__(self, "states", states)

    @property
    def dim(self) -> int:
        return self.states[0].dim

    def design_matrix(self) -> np.ndarray:
        return _design_matrix([s.projector() for s in self.states], self.states[0].dim)

    def condition_number(self) -> float:
        return float(np.linalg.cond(self.design_matrix()))


def canonical_probe_basis(m: int, delta: float = 0.0) -> ProbeBasis:
    """The rotated canonical probe set.

    The qubit set {|0>, |1>, |+>, |+i>} is rotated elementwise by
    U_delta = exp(-i delta sigma_y / 2); the two-qubit set is the tensor
    product of two rotated qubit sets.
    """
    if m not in (2, 4):
        raise InvalidInputError("canonical probe bases exist for m = 2 and m = 4")
    u = rotation_y(delta)
    qubit = [
        PureState(u @ s.vector)
        for s in (ket(0), ket(1), plus_state(), plus_i_state())
    ]
    if m == 2:
        return ProbeBasis(tuple(qubit), float(delta))
    states = tuple(a.tensor(b) for a in qubit for b in qubit)
    return ProbeBasis(states, float(delta))


@dataclass(frozen=True)
class ReconstructedProcess:
    """Raw Choi estimate plus how far it sits from the CPTP set.

    cptp_residual adds the total negativity of the Choi spectrum and the
    largest trace-preservation deviation; it is recorded as measured, never
    zeroed by projection.
    """

    choi: np.ndarray
    dim_in: int
    dim_out: int
    shots: int
    cptp_residual: float
    records: tuple = ()

    def normalized_choi(self) -> np.ndarray:
        return self.choi / self.dim_in


def _unit_recovery_coefficients(basis: ProbeBasis) -> np.ndarray:
    """Coefficients expressing each operator unit |i><j| over the probe projectors.

    Column k of the solved system is vec of probe projector k; the result
    has shape (m, m, m^2) indexed by (i, j, probe).  For the canonical
    delta = 0 qubit basis, row (0, 1) reproduces the standard combination
    E(|0><1|) = E(P_+) + i E(P_+i) - (1+i)/2 (E(P_0) + E(P_1)).
    """
    m = basis.dim
    columns = np.column_stack([s.projector().reshape(-1) for s in basis.states])
    units = np.zeros((m * m, m * m), dtype=complex)
    for i in range(m):
        for j in range(m):
            unit = np.zeros((m, m), dtype=complex)
            unit[i, j] = 1.0
            units[:, i * m + j] = unit.reshape(-1)
    coeffs = np.linalg.solve(columns, units)
    return coeffs.T.reshape(m, m, m * m)


def _cptp_residual(choi: np.ndarray, dim_in: int, dim_out: int) -> float:
    eigvals = np.linalg.eigvalsh((choi + choi.conj().T) / 2)
    negativity = float(-eigvals[eigvals < 0].sum())
    marginal = partial_trace(choi, [dim_in, dim_out], keep={0})
    tp_deviation = float(np.max(np.abs(marginal - np.eye(dim_in))))
    return negativity + tp_deviation


def process_tomography_direct(
    box,
    params,
    basis: ProbeBasis,
    run: TomographyRun,
    rng: RngStream,
    records: list | None = None,
) -> ReconstructedProcess:
    """Probe the box with the basis states and invert for the Choi matrix.

    Each probe's output is reconstructed by raw linear inversion (the
    projected estimator would erase exactly the deviations of interest),
    then the action on operator units is solved from the probe projectors.
    """
    if basis.dim != box.dim_in or len(basis.states) != box.dim_in**2:
        raise InvalidShapeError("probe basis does not match the box input dimension")
    raw_run = dataclasses.replace(run, estimator="direct-inversion-diagnostic")
    outputs = []
    all_records: list = []
    for k, probe in enumerate(basis.states):
        probe_records: list = [] if records is not None else None
        exact = box.ensemble_output_density(probe, params)
        outputs.append(
            state_tomography(exact, raw_run, rng.child(k), records=probe_records)
        )
        if records is not None:
            all_records.extend((k, s, o, c) for s, o, c in probe_records)
    m, n = box.dim_in, box.dim_out
    coeffs = _unit_recovery_coefficients(basis)
    choi4 = np.zeros((m, n, m, n), dtype=complex)
    for i in range(m):
        for j in range(m):
            unit_image = sum(c * r for c, r in zip(coeffs[i, j], outputs))
            choi4[i, :, j, :] = unit_image
    choi = choi4.reshape(m * n, m * n)
    if records is not None:
        records.extend(all_records)
    return ReconstructedProcess(
        choi=choi,
        dim_in=m,
        dim_out=n,
        shots=run.shots_per_setting,
        cptp_residual=_cptp_residual(choi, m, n),
        records=tuple(all_records),
    )


def process_tomography_ancilla(
    box, params, run: TomographyRun, rng: RngStream
) -> ReconstructedProcess:
    """Single-input scheme: entangle with a reference, tomograph the joint output.

    The maximally entangled probe is pushed through the box side, the joint
    two-qubit output is reconstructed raw, and the Choi estimate is the
    rescaled reordering of that estimate.
    """
    if box.dim_in != 2 or box.dim_out != 2:
        raise InvalidInputError("the ancilla scheme is implemented for qubit boxes")
    if run.dim != 4:
        raise InvalidInputError("ancilla tomography needs a two-qubit measurement set")
    raw_run = dataclasses.replace(run, estimator="direct-inversion-diagnostic")
    joint_out = box.probe_with_reference(max_entangled(2), params)
    estimate = state_tomography(joint_out, raw_run, rng)
    choi = 2.0 * estimate.reshape(2, 2, 2, 2).transpose(1, 0, 3, 2).reshape(4, 4)
    return ReconstructedProcess(
        choi=choi,
        dim_in=2,
        dim_out=2,
        shots=run.shots_per_setting,
        cptp_residual=_cptp_residual(choi, 2, 2),
    )


def cptp_parameter_count(dim_in: int, dim_out: int) -> int:
    """Free real parameters of a trace-preserving Hermitian Choi matrix.

    Counted as the Hermitian degrees of freedom minus the rank of the
    trace-preservation constraint system; equals dim_in^2 (dim_out^2 - 1).
    """
    m, n = int(dim_in), int(dim_out)
    choi_basis = hermitian_basis(m * n)
    out_basis = hermitian_basis(m)
    constraint = np.zeros((m * m, len(choi_basis)))
    for col, b in enumerate(choi_basis):
        marginal = partial_trace(b, [m, n], keep={0})
        for row, a in enumerate(out_basis):
            constraint[row, col] = np.real(np.trace(a @ marginal))
    return len(choi_basis) - int(np.linalg.matrix_rank(constraint))
