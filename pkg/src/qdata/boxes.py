"""Behavioral models of the black boxes under test.

A box consumes quantum states and emits quantum states.  Three families are
implemented:

* ``LinearBox`` wraps an ordinary CPTP channel (optionally parametrized by
  classical knobs), the honest quantum case.
* ``NonlinearBloch`` deterministically warps the polar angle of a qubit's
  Bloch vector, a minimal model of density-matrix-nonlinear dynamics.
* ``CollapseNonlinear`` first performs a projective collapse in a fixed
  basis and only then applies the Bloch warp, which restores linearity at
  the density-matrix level branch by branch.

Every box exposes its behavior through exact branch enumerations, so
detectors can compute infinite-shot oracles as well as draw finite samples.
Correlated box pairs for the two-bit random-access game and for bipartite
no-signalling analysis live here as well.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .linalg import InvalidInputError, InvalidShapeError, kron
from .channels import QuantumChannel
from .rng import RngStream
from .states import (
    DensityMatrix,
    Ensemble,
    Povm,
    PureState,
    as_state,
    ket,
    sample_outcome,
)

__all__ = [
    "BRANCH_CUTOFF",
    "ClassicalParams",
    "warp_polar_angle",
    "BoxModel",
    "LinearBox",
    "NonlinearBloch",
    "CollapseNonlinear",
    "ComposedBox",
    "compose_boxes",
    "concatenate_tests",
    "QracRound",
    "BoxPair",
    "QracOracle",
    "QracQuantum",
    "NsqChannelPair",
    "measure_prepare_strategy",
    "qrac_round",
]

# Branches below this weight are dropped from enumerations.
BRANCH_CUTOFF = 1e-12


@dataclass(frozen=True)
class ClassicalParams:
    """Ordered, named classical knobs attached to a box evaluation.

    Values may be real numbers, integers, or string labels.  Names must be
    unique; order is preserved because grid cells are enumerated in
    declaration order.
    """

    entries: tuple = ()

    def __post_init__(self) -> None:
        pairs = tuple((str(k), v) for k, v in self.entries)
        names = [k for k, _ in pairs]
        if len(set(names)) != len(names):
            raise InvalidInputError("duplicate parameter name")
        for _, v in pairs:
            if not isinstance(v, (int, float, str)):
                raise InvalidInputError("parameter values must be numbers or labels")
        object.__setattr__(self, "entries", pairs)

    @classmethod
    def from_dict(cls, mapping: dict) -> "ClassicalParams":
        return cls(tuple(mapping.items()))

    def get(self, name: str, default=None):
        for k, v in self.entries:
            if k == name:
                return v
        return default

    def as_dict(self) -> dict:
        return dict(self.entries)


NO_PARAMS = ClassicalParams()


def warp_polar_angle(theta: float, kappa: float) -> float:
    """Monotone warp of the Bloch polar angle with exponent kappa.

    Fixed points at 0, pi/2 and pi for every kappa > 0; kappa = 1 is the
    identity.  The two hemispheres use different exponents (kappa above,
    (kappa + 2)/3 below): a warp acting with the same exponent on both
    hemispheres commutes with the antipodal map, so every balanced ensemble
    of orthogonal pure states would still average to I/2 and no
    equal-density ensemble pair could ever be split apart.
    """
    if kappa <= 0:
        raise InvalidInputError("warp exponent must be positive")
    th = min(max(float(theta), 0.0), math.pi)
    if th == 0.0 or th == math.pi:
        return th
    expo = kappa if th <= math.pi / 2 else (kappa + 2.0) / 3.0
    scaled = expo * math.log(math.tan(th / 2.0))
    if scaled > 700.0:
        return math.pi
    return 2.0 * math.atan(math.exp(scaled))


def _as_unitary(u, dim: int) -> np.ndarray:
    if u is None:
        return np.eye(dim, dtype=complex)
    m = np.asarray(u, dtype=complex)
    if m.shape != (dim, dim):
        raise InvalidShapeError(f"unitary must be {dim}x{dim}")
    if np.max(np.abs(m @ m.conj().T - np.eye(dim))) > 1e-9:
        raise InvalidInputError("matrix is not unitary")
    return m


class BoxModel(ABC):
    """A black box mapping input quantum states to output quantum states.

    Subclasses describe their action as an exact branch enumeration: a list
    of (weight, pure state) outcomes.  Sampling, exact ensemble outputs and
    entangled-probe behavior all derive from that single description.
    """

    dim_in: int
    dim_out: int

    @abstractmethod
    def branch_distribution(
        self, psi: PureState, params: ClassicalParams = NO_PARAMS
    ) -> list:
        """Exact list of (probability, PureState) outcomes for a pure input."""

    @abstractmethod
    def joint_branches(
        self, joint: PureState, ref_dim: int, params: ClassicalParams = NO_PARAMS
    ) -> list:
        """Branch enumeration when the box acts on the first factor of a joint pure state."""

    def _check_input(self, psi: PureState) -> PureState:
        psi = as_state(psi)
        if psi.dim != self.dim_in:
            raise InvalidShapeError(
                f"box expects dimension {self.dim_in}, got {psi.dim}"
            )
        return psi

    def probe_pure(
        self, psi: PureState, params: ClassicalParams = NO_PARAMS, rng: RngStream | None = None
    ) -> PureState:
        """Draw one pure output sample for a pure input."""
        branches = self.branch_distribution(self._check_input(psi), params)
        if len(branches) == 1:
            return branches[0][1]
        if rng is None:
            raise InvalidInputError("sampling from a branching box requires an rng")
        probs = np.array([p for p, _ in branches])
        idx = rng.generator.choice(len(branches), p=probs / probs.sum())
        return branches[idx][1]

    def ensemble_output_density(
        self, ensemble, params: ClassicalParams = NO_PARAMS
    ) -> DensityMatrix:
        """Exact infinite-shot output state for an input ensemble.

        Accepts an Ensemble, a PureState, or a DensityMatrix (converted via
        its eigen-ensemble).  Note that for nonlinear boxes the result
        genuinely depends on the decomposition, not just on the density.
        """
        if isinstance(ensemble, DensityMatrix):
            ensemble = ensemble.eigen_ensemble()
        elif not isinstance(ensemble, Ensemble):
            ensemble = Ensemble((1.0,), (as_state(ensemble),))
        out = np.zeros((self.dim_out, self.dim_out), dtype=complex)
        for weight, member in zip(ensemble.weights, ensemble.states):
            for p, phi in self.branch_distribution(self._check_input(member), params):
                out += weight * p * phi.projector()
        return DensityMatrix(out)

    def probe_with_reference(
        self, joint: PureState, params: ClassicalParams = NO_PARAMS, rng: RngStream | None = None
    ) -> DensityMatrix:
        """Exact joint output when the box acts on one half of an entangled probe.

        The box side is always the first tensor factor.  The reference-side
        marginal is preserved for every box kind.
        """
        joint = as_state(joint)
        if joint.dim % self.dim_in != 0:
            raise InvalidShapeError("joint state does not factor over the box input")
        ref_dim = joint.dim // self.dim_in
        out = np.zeros((self.dim_out * ref_dim,) * 2, dtype=complex)
        for p, phi in self.joint_branches(joint, ref_dim, params):
            out += p * phi.projector()
        return DensityMatrix(out)


class LinearBox(BoxModel):
    """Honest quantum box: a CPTP channel, optionally a family over params.

    When constructed from a single channel the classical parameters are
    ignored.  A family is any callable from ClassicalParams to a
    QuantumChannel with fixed input/output dimensions.
    """

    def __init__(
        self,
        channel: QuantumChannel | Callable[[ClassicalParams], QuantumChannel],
        dim_in: int | None = None,
        dim_out: int | None = None,
    ):
        if isinstance(channel, QuantumChannel):
            self._family = None
            self._fixed = channel
            self.dim_in = channel.dim_in
            self.dim_out = channel.dim_out
        else:
            if dim_in is None or dim_out is None:
                raise InvalidInputError("a channel family needs explicit dimensions")
            self._family = channel
            self._fixed = None
            self.dim_in = int(dim_in)
            self.dim_out = int(dim_out)

    def channel(self, params: ClassicalParams = NO_PARAMS) -> QuantumChannel:
        if self._fixed is not None:
            return self._fixed
        c = self._family(params)
        if (c.dim_in, c.dim_out) != (self.dim_in, self.dim_out):
            raise InvalidShapeError("channel family returned mismatched dimensions")
        return c

    def branch_distribution(self, psi, params=NO_PARAMS):
        psi = self._check_input(psi)
        branches = []
        for k in self.channel(params).kraus_operators():
            vec = k @ psi.vector
            p = float(np.real(np.vdot(vec, vec)))
            if p > BRANCH_CUTOFF:
                branches.append((p, PureState(vec / math.sqrt(p))))
        return branches

    def joint_branches(self, joint, ref_dim, params=NO_PARAMS):
        joint = as_state(joint)
        branches = []
        for k in self.channel(params).kraus_operators():
            vec = kron(k, np.eye(ref_dim)) @ joint.vector
            p = float(np.real(np.vdot(vec, vec)))
            if p > BRANCH_CUTOFF:
                branches.append((p, PureState(vec / math.sqrt(p))))
        return branches

    def ensemble_output_density(self, ensemble, params=NO_PARAMS):
        # linearity: only the ensemble's density matters
        if isinstance(ensemble, DensityMatrix):
            rho = ensemble
        elif isinstance(ensemble, Ensemble):
            rho = ensemble.density()
        else:
            rho = as_state(ensemble).density()
        return self.channel(params).apply(rho)

    def probe_with_reference(self, joint, params=NO_PARAMS, rng=None):
        joint = as_state(joint)
        if joint.dim % self.dim_in != 0:
            raise InvalidShapeError("joint state does not factor over the box input")
        ref_dim = joint.dim // self.dim_in
        extended = self.channel(params).tensor(QuantumChannel.identity(ref_dim))
        return extended.apply(joint.density())


class NonlinearBloch(BoxModel):
    """Deterministic nonlinear qubit box: pre-rotate, warp the polar angle, post-rotate.

    kappa = 1 with no rotations is the identity box.  On one half of an
    entangled probe the box first collapses its side in the computational
    basis (destroying the entanglement) and then warps each branch, so the
    far marginal is never disturbed.
    """

    def __init__(self, kappa: float, pre_unitary=None, post_unitary=None):
        if kappa <= 0:
            raise InvalidInputError("warp exponent must be positive")
        self.kappa = float(kappa)
        self.pre_unitary = _as_unitary(pre_unitary, 2)
        self.post_unitary = _as_unitary(post_unitary, 2)
        self.dim_in = 2
        self.dim_out = 2

    def _warp_pure(self, psi: PureState) -> PureState:
        rotated = PureState(self.pre_unitary @ psi.vector)
        theta, phi = rotated.bloch_angles()
        warped = PureState.from_bloch(warp_polar_angle(theta, self.kappa), phi)
        return PureState(self.post_unitary @ warped.vector)

    def branch_distribution(self, psi, params=NO_PARAMS):
        return [(1.0, self._warp_pure(self._check_input(psi)))]

    def joint_branches(self, joint, ref_dim, params=NO_PARAMS):
        return _collapse_joint_branches(
            as_state(joint), ref_dim, [ket(0), ket(1)], self._warp_pure
        )


class CollapseNonlinear(BoxModel):
    """Collapse in a fixed basis, then act nonlinearly on the collapsed state.

    The projective collapse happens for every input, so the box is linear at
    the density-matrix level even though each branch is warped.  For
    non-qubit bases the warp is unavailable and kappa must be 1 with no
    rotations (a pure dephasing box).
    """

    def __init__(self, basis: Sequence[PureState], kappa: float = 1.0,
                 pre_unitary=None, post_unitary=None):
        states = tuple(as_state(b) for b in basis)
        if not states:
            raise InvalidInputError("collapse basis is empty")
        dim = states[0].dim
        gram = np.array([[a.overlap(b) for b in states] for a in states])
        if len(states) != dim or np.max(np.abs(gram - np.eye(dim))) > 1e-10:
            raise InvalidInputError("collapse basis must be complete and orthonormal")
        if kappa <= 0:
            raise InvalidInputError("warp exponent must be positive")
        if dim != 2 and (kappa != 1.0 or pre_unitary is not None or post_unitary is not None):
            raise InvalidInputError("the Bloch warp is only defined for qubit bases")
        self.basis = states
        self.kappa = float(kappa)
        self.pre_unitary = _as_unitary(pre_unitary, dim) if dim == 2 else np.eye(dim, dtype=complex)
        self.post_unitary = _as_unitary(post_unitary, dim) if dim == 2 else np.eye(dim, dtype=complex)
        self.dim_in = dim
        self.dim_out = dim

    def _warp_pure(self, psi: PureState) -> PureState:
        if psi.dim != 2:
            return psi
        rotated = PureState(self.pre_unitary @ psi.vector)
        theta, phi = rotated.bloch_angles()
        warped = PureState.from_bloch(warp_polar_angle(theta, self.kappa), phi)
        return PureState(self.post_unitary @ warped.vector)

    def branch_distribution(self, psi, params=NO_PARAMS):
        psi = self._check_input(psi)
        branches = []
        for b in self.basis:
            p = float(abs(b.overlap(psi)) ** 2)
            if p > BRANCH_CUTOFF:
                branches.append((p, self._warp_pure(b)))
        return branches

    def joint_branches(self, joint, ref_dim, params=NO_PARAMS):
        return _collapse_joint_branches(as_state(joint), ref_dim, self.basis, self._warp_pure)


def _collapse_joint_branches(joint, ref_dim, basis, action):
    """Collapse the box side of a joint pure state, then act branch-wise.

    Branch k projects the box side onto basis state k; the reference factor
    is the (normalized) conditional state, so the far marginal is untouched.
    """
    dim = joint.dim // ref_dim
    table = joint.vector.reshape(dim, ref_dim)
    branches = []
    for b in basis:
        ref_vec = b.vector.conj() @ table
        p = float(np.real(np.vdot(ref_vec, ref_vec)))
        if p > BRANCH_CUTOFF:
            out = action(b).tensor(PureState(ref_vec / math.sqrt(p)))
            branches.append((p, out))
    return branches


class ComposedBox(BoxModel):
    """Sample-wise concatenation of boxes (first box applied first).

    Branches flow through: the composite's branch enumeration is the chained
    enumeration, preserving correlations between the stages.
    """

    def __init__(self, boxes: Sequence[BoxModel]):
        boxes = tuple(boxes)
        if len(boxes) < 2:
            raise InvalidInputError("composition needs at least two boxes")
        for a, b in zip(boxes, boxes[1:]):
            if a.dim_out != b.dim_in:
                raise InvalidShapeError("composed boxes have mismatched dimensions")
        self.boxes = boxes
        self.dim_in = boxes[0].dim_in
        self.dim_out = boxes[-1].dim_out

    def branch_distribution(self, psi, params=NO_PARAMS):
        current = [(1.0, self._check_input(psi))]
        for box in self.boxes:
            nxt = []
            for p, phi in current:
                for q, chi in box.branch_distribution(phi, params):
                    w = p * q
                    if w > BRANCH_CUTOFF:
                        nxt.append((w, chi))
            current = nxt
        return current

    def joint_branches(self, joint, ref_dim, params=NO_PARAMS):
        current = [(1.0, as_state(joint))]
        for box in self.boxes:
            nxt = []
            for p, phi in current:
                for q, chi in box.joint_branches(phi, ref_dim, params):
                    w = p * q
                    if w > BRANCH_CUTOFF:
                        nxt.append((w, chi))
            current = nxt
        return current


def compose_boxes(b1: BoxModel, b2: BoxModel) -> BoxModel:
    """Concatenate two boxes into one (b1 first).

    Two linear boxes compose at the channel level; any nonlinear member
    forces the sample-wise composite.
    """
    if b1.dim_out != b2.dim_in:
        raise InvalidShapeError("composed boxes have mismatched dimensions")
    if isinstance(b1, LinearBox) and isinstance(b2, LinearBox):
        if b1._fixed is not None and b2._fixed is not None:
            return LinearBox(b2._fixed.compose(b1._fixed))
        return LinearBox(
            lambda p: b2.channel(p).compose(b1.channel(p)), b1.dim_in, b2.dim_out
        )
    parts = []
    for b in (b1, b2):
        parts.extend(b.boxes if isinstance(b, ComposedBox) else [b])
    return ComposedBox(parts)


def concatenate_tests(
    b1: BoxModel,
    b2: BoxModel,
    psi: PureState,
    params: ClassicalParams = NO_PARAMS,
    shots: int = 10_000,
    rng: RngStream | None = None,
) -> DensityMatrix:
    """Chain two *tests* rather than two boxes.

    The first box's output is tomographically reconstructed, re-prepared as
    an uncorrelated input via its eigen-ensemble, and fed to the second box,
    whose output is reconstructed again.  Branch correlations between the
    stages are deliberately destroyed; the gap to compose_boxes witnesses
    that concatenating tests is not a test of the concatenation.

    ``shots`` is the per-setting budget of each tomography stage.
    """
    from .tomography import TomographyRun, pauli_measurement_set, state_tomography

    if rng is None:
        raise InvalidInputError("concatenate_tests requires an rng")
    psi = as_state(psi)
    run = TomographyRun(
        shots_per_setting=shots, measurement_set=pauli_measurement_set(1)
    )
    first = b1.ensemble_output_density(psi, params)
    first_hat = state_tomography(first, run, rng.child(0))
    second = b2.ensemble_output_density(first_hat.eigen_ensemble(), params)
    return state_tomography(second, run, rng.child(1))


@dataclass(frozen=True)
class QracRound:
    """Outcome of one random-access round: Alice's bits, Bob's bits, Bob's state."""

    a: int
    b: int
    rho_out: DensityMatrix
    kept: bool


class BoxPair(ABC):
    """Two correlated boxes played against each other in a single round.

    Hidden state (the oracle's stored qubits) lives only within one round;
    rounds are independent and may run in parallel on separate streams.
    """

    @abstractmethod
    def play_round(
        self, psi0: PureState, psi1: PureState, x: int, rng: RngStream
    ) -> QracRound:
        """Run one round of the two-bit random-access game."""


class QracOracle(BoxPair):
    """Idealized post-quantum pair: kept rounds hand Bob the exact target qubit.

    Alice's bits are uniform; Bob's bits are uniform and independent, so a
    quarter of rounds survive the a = b post-selection.  Dropped rounds
    output the maximally mixed state.
    """

    def play_round(self, psi0, psi1, x, rng):
        psi0, psi1, x = _check_round_inputs(psi0, psi1, x)
        gen = rng.generator
        a = int(gen.integers(4))
        b = int(gen.integers(4))
        kept = a == b
        target = psi0 if x == 0 else psi1
        rho = target.density() if kept else DensityMatrix(np.eye(2) / 2)
        return QracRound(a, b, rho, kept)


class QracQuantum(BoxPair):
    """Quantum strategy pair: Alice measures both qubits, Bob re-prepares.

    alice_povm has exactly four effects on the two-qubit space (outcome a);
    bob_channels maps each two-bit label b to the channel Bob applies to his
    choice state |x>.
    """

    def __init__(self, alice_povm: Povm, bob_channels: Sequence[QuantumChannel]):
        if alice_povm.dim != 4 or len(alice_povm) != 4:
            raise InvalidInputError("Alice needs a four-effect POVM on two qubits")
        channels = tuple(bob_channels)
        if len(channels) != 4 or any(
            (c.dim_in, c.dim_out) != (2, 2) for c in channels
        ):
            raise InvalidInputError("Bob needs four qubit channels")
        self.alice_povm = alice_povm
        self.bob_channels = channels

    def play_round(self, psi0, psi1, x, rng):
        psi0, psi1, x = _check_round_inputs(psi0, psi1, x)
        a = sample_outcome(psi0.tensor(psi1), self.alice_povm, rng)
        b = int(rng.generator.integers(4))
        rho = self.bob_channels[b].apply(ket(x).density())
        return QracRound(a, b, rho, a == b)


class NsqChannelPair(BoxPair):
    """Correlated pair expressed as one bipartite channel on Alice x Bob."""

    def __init__(self, lambda_ab: QuantumChannel, local_dims: tuple):
        da, db = (int(d) for d in local_dims)
        if lambda_ab.dim_in != da * db or lambda_ab.dim_out != da * db:
            raise InvalidShapeError("channel dimensions do not factor over the local dims")
        self.lambda_ab = lambda_ab
        self.local_dims = (da, db)

    def play_round(self, psi0, psi1, x, rng):
        raise InvalidInputError("a bipartite-channel pair does not play the random-access game")


def _check_round_inputs(psi0, psi1, x):
    psi0, psi1 = as_state(psi0), as_state(psi1)
    if psi0.dim != 2 or psi1.dim != 2:
        raise InvalidInputError("the random-access game encodes qubits")
    if x not in (0, 1):
        raise InvalidInputError("choice bit must be 0 or 1")
    return psi0, psi1, int(x)


def measure_prepare_strategy() -> QracQuantum:
    """Product measurement in the computational basis, then re-preparation.

    Alice reads a = 2*a0 + a1 from measuring each qubit separately; Bob,
    holding label b = (b0, b1), prepares |b_x> for choice bit x.  Averaged
    over Haar-random inputs the kept-round fidelity is 2/3.
    """
    effects = [kron(ket(i).projector(), ket(j).projector()) for i in range(2) for j in range(2)]
    povm = Povm(tuple(effects))
    channels = []
    for b in range(4):
        bits = (b >> 1, b & 1)
        kraus = [np.outer(ket(bits[x]).vector, ket(x).vector.conj()) for x in range(2)]
        channels.append(QuantumChannel.from_kraus(kraus, 2, 2))
    return QracQuantum(povm, channels)


def qrac_round(
    pair: BoxPair, psi0: PureState, psi1: PureState, x: int, rng: RngStream
) -> QracRound:
    """Play one round of the two-bit random-access game with post-selection a = b."""
    return pair.play_round(psi0, psi1, x, rng)
