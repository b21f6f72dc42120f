"""Box models: pure-state branching, ensemble response, composition, game pairs."""

import math

import numpy as np
import pytest

from qdata import (
    ClassicalParams,
    CollapseNonlinear,
    ComposedBox,
    DensityMatrix,
    Ensemble,
    InvalidInputError,
    LinearBox,
    NO_PARAMS,
    NonlinearBloch,
    NsqChannelPair,
    PureState,
    QracOracle,
    QracQuantum,
    QuantumChannel,
    RngStream,
    channel_distance,
    compose_boxes,
    concatenate_tests,
    ket,
    kraus_from_choi,
    max_entangled,
    measure_prepare_strategy,
    minus_state,
    plus_state,
    qrac_round,
    random_channel,
    rotation_y,
    singlet,
    trace_distance,
    uhlmann_fidelity,
    warp_polar_angle,
)

RY45 = rotation_y(math.pi / 4)


def equal_density_pair():
    e1 = Ensemble((0.5, 0.5), (ket(0), ket(1)))
    e2 = Ensemble((0.5, 0.5), (plus_state(), minus_state()))
    return e1, e2


# ---------------------------------------------------------------- warp map


def test_warp_fixed_points():
    for kappa in (0.5, 1.0, 2.0, 4.0, 7.5):
        assert warp_polar_angle(0.0, kappa) == 0.0
        assert abs(warp_polar_angle(math.pi / 2, kappa) - math.pi / 2) < 1e-12
        assert abs(warp_polar_angle(math.pi, kappa) - math.pi) < 1e-12


def test_warp_identity_at_unit_exponent():
    for theta in np.linspace(0.01, math.pi - 0.01, 41):
        assert abs(warp_polar_angle(float(theta), 1.0) - theta) < 1e-12


def test_warp_monotone_and_onto():
    thetas = np.linspace(0.0, math.pi, 201)
    for kappa in (0.5, 2.0, 4.0):
        gs = [warp_polar_angle(float(t), kappa) for t in thetas]
        assert all(b - a > -1e-12 for a, b in zip(gs, gs[1:]))
        assert gs[0] == 0.0
        assert abs(gs[-1] - math.pi) < 1e-12
        assert all(-1e-12 <= g <= math.pi + 1e-12 for g in gs)


def test_warp_frozen_values_at_kappa_four():
    g = warp_polar_angle(math.pi / 4, 4.0)
    assert abs(g - 0.05885750594708123) < 1e-14
    # exact closed form: sin g = 1/17, cos g = 12*sqrt(2)/17
    assert abs(math.sin(g) - 1 / 17) < 1e-14
    assert abs(math.cos(g) - 12 * math.sqrt(2) / 17) < 1e-14
    south = warp_polar_angle(3 * math.pi / 4, 4.0)
    assert abs(math.sin(south) - 1 / 3) < 1e-14
    assert south > math.pi / 2


def test_warp_hemispheres_use_different_exponents():
    # a mirror-symmetric warp would keep antipodal pairs antipodal
    theta = math.pi / 4
    gap = abs(warp_polar_angle(math.pi - theta, 4.0) - (math.pi - warp_polar_angle(theta, 4.0)))
    assert gap > 0.25


def test_warp_rejects_bad_exponent():
    with pytest.raises(InvalidInputError):
        warp_polar_angle(1.0, 0.0)
    with pytest.raises(InvalidInputError):
        warp_polar_angle(1.0, -2.0)


# ---------------------------------------------------------------- parameters


def test_classical_params_round_trip():
    p = ClassicalParams.from_dict({"kappa": 4.0, "label": "x", "n": 3})
    assert p.get("kappa") == 4.0
    assert p.get("missing", 7) == 7
    assert p.as_dict() == {"kappa": 4.0, "label": "x", "n": 3}


def test_classical_params_rejects_duplicates():
    with pytest.raises(InvalidInputError):
        ClassicalParams((("a", 1), ("a", 2)))


# ---------------------------------------------------------------- linear boxes


def test_linear_box_is_ensemble_independent():
    e1, e2 = equal_density_pair()
    for ch in (
        QuantumChannel.identity(2),
        QuantumChannel.amplitude_damping(0.5),
        QuantumChannel.depolarizing(0.3),
        random_channel(2, 2, RngStream(30, 0)),
    ):
        box = LinearBox(ch)
        out1 = box.ensemble_output_density(e1)
        out2 = box.ensemble_output_density(e2)
        assert trace_distance(out1, out2) < 1e-10


def test_linear_box_matches_channel_action():
    ch = QuantumChannel.amplitude_damping(0.4)
    box = LinearBox(ch)
    rho = ket(1).density()
    assert np.allclose(box.ensemble_output_density(rho).matrix, ch.apply(rho).matrix, atol=1e-12)


def test_linear_box_family_reads_params():
    box = LinearBox(lambda p: QuantumChannel.amplitude_damping(p.get("gamma")), 2, 2)
    out = box.ensemble_output_density(ket(1), ClassicalParams.from_dict({"gamma": 0.3}))
    assert np.allclose(out.matrix, np.diag([0.3, 0.7]), atol=1e-12)


def test_linear_box_single_branch_needs_no_rng():
    box = LinearBox(QuantumChannel.from_unitary(RY45))
    out = box.probe_pure(ket(0))
    assert abs(abs(out.overlap(PureState(RY45[:, 0]))) - 1) < 1e-12


# ---------------------------------------------------------------- nonlinear boxes


def test_nonlinear_bloch_identity_when_unwarped():
    box = NonlinearBloch(1.0)
    psi = PureState.haar(2, RngStream(30, 1))
    out = box.probe_pure(psi)
    assert abs(abs(out.overlap(psi)) - 1) < 1e-12


def test_nonlinear_bloch_warps_polar_angle():
    box = NonlinearBloch(4.0)
    theta, phi = math.pi / 4, 0.9
    out = box.probe_pure(PureState.from_bloch(theta, phi))
    t2, p2 = out.bloch_angles()
    assert abs(t2 - 0.05885750594708123) < 1e-12
    assert abs(p2 - phi) < 1e-10


def test_nonlinear_bloch_sees_ensemble_difference():
    box = NonlinearBloch(4.0, pre_unitary=RY45)
    e1, e2 = equal_density_pair()
    gap = trace_distance(box.ensemble_output_density(e1), box.ensemble_output_density(e2))
    assert abs(gap - 7 / 51) < 1e-15
    assert gap > 0.1


def test_nonlinear_bloch_unitary_sandwich():
    u = rotation_y(0.6)
    box = NonlinearBloch(1.0, pre_unitary=u, post_unitary=u.conj().T)
    psi = PureState.haar(2, RngStream(30, 2))
    out = box.probe_pure(psi)
    assert abs(abs(out.overlap(psi)) - 1) < 1e-12


def test_nonlinear_bloch_entangled_probe_collapses_branches():
    box = NonlinearBloch(1.0)
    out = box.probe_with_reference(singlet())
    expected = 0.5 * (
        np.kron(ket(0).projector(), ket(1).projector())
        + np.kron(ket(1).projector(), ket(0).projector())
    )
    assert np.allclose(out.matrix, expected, atol=1e-12)


def test_nonlinear_bloch_preserves_reference_marginal():
    for box in (NonlinearBloch(4.0, pre_unitary=RY45), NonlinearBloch(2.0), CollapseNonlinear((plus_state(), minus_state()), kappa=3.0)):
        joint = PureState.haar(4, RngStream(30, 3))
        out = box.probe_with_reference(joint)
        ref_in = DensityMatrix(joint.projector()).reduce((2, 2), (1,))
        ref_out = out.reduce((2, 2), (1,))
        assert trace_distance(ref_in, ref_out) < 1e-10


def test_branching_probe_requires_rng():
    box = CollapseNonlinear((ket(0), ket(1)))
    with pytest.raises(InvalidInputError):
        box.probe_pure(plus_state())
    out = box.probe_pure(plus_state(), rng=RngStream(30, 4))
    assert out.dim == 2


def test_branch_sampling_is_deterministic():
    box = CollapseNonlinear((ket(0), ket(1)))
    a = [box.probe_pure(plus_state(), rng=RngStream(30, 5).child(i)).vector[0] for i in range(32)]
    b = [box.probe_pure(plus_state(), rng=RngStream(30, 5).child(i)).vector[0] for i in range(32)]
    assert a == b
    assert 0 < sum(abs(x) > 0.5 for x in a) < 32  # both branches appear


# ---------------------------------------------------------------- collapse boxes


def test_collapse_computational_basis_dephases():
    box = CollapseNonlinear((ket(0), ket(1)), kappa=4.0, pre_unitary=RY45)
    e1, e2 = equal_density_pair()
    gap = trace_distance(box.ensemble_output_density(e1), box.ensemble_output_density(e2))
    assert gap < 1e-10


def test_collapse_branch_distribution_follows_born_rule():
    box = CollapseNonlinear((plus_state(), minus_state()))
    branches = box.branch_distribution(ket(0))
    weights = sorted(w for w, _ in branches)
    assert np.allclose(weights, [0.5, 0.5], atol=1e-12)
    out = box.ensemble_output_density(ket(0))
    assert np.allclose(out.matrix, np.eye(2) / 2, atol=1e-12)


def test_collapse_basis_must_be_orthonormal():
    with pytest.raises(InvalidInputError):
        CollapseNonlinear((ket(0), plus_state()))
    with pytest.raises(InvalidInputError):
        CollapseNonlinear((ket(0),))


def test_collapse_beyond_qubits_requires_trivial_warp():
    basis3 = tuple(ket(i, dim=3) for i in range(3))
    CollapseNonlinear(basis3)  # kappa = 1 accepted
    with pytest.raises(InvalidInputError):
        CollapseNonlinear(basis3, kappa=2.0)


def test_collapse_warps_branch_states():
    box = CollapseNonlinear((ket(0), ket(1)), kappa=4.0)
    # collapse of |+> onto the poles leaves the fixed points unwarped
    out = box.ensemble_output_density(plus_state())
    assert np.allclose(out.matrix, np.eye(2) / 2, atol=1e-12)
    tilted = CollapseNonlinear((plus_state(), minus_state()), kappa=4.0)
    rho = tilted.ensemble_output_density(ket(0))
    # equatorial basis states warp away from the equator symmetrically
    assert abs(rho.matrix[0, 0] - 0.5) < 1e-12
    assert abs(rho.matrix[0, 1]) < 1e-12


# ---------------------------------------------------------------- composition


def test_compose_linear_boxes_composes_channels():
    a = QuantumChannel.amplitude_damping(0.4)
    b = QuantumChannel.dephasing(0.6)
    box = compose_boxes(LinearBox(a), LinearBox(b))
    assert isinstance(box, LinearBox)
    assert channel_distance(box.channel(), b.compose(a)) < 1e-10


def test_compose_identity_is_neutral():
    target = NonlinearBloch(4.0, pre_unitary=RY45)
    box = compose_boxes(LinearBox(QuantumChannel.identity(2)), target)
    root = RngStream(31, 0)
    for k in range(20):
        psi = PureState.haar(2, root.child(k))
        assert trace_distance(
            box.ensemble_output_density(psi), target.ensemble_output_density(psi)
        ) < 1e-10


def test_composed_box_flattens_stages():
    b1 = LinearBox(QuantumChannel.amplitude_damping(0.2))
    b2 = NonlinearBloch(2.0)
    b3 = CollapseNonlinear((ket(0), ket(1)))
    box = compose_boxes(b1, compose_boxes(b2, b3))
    assert isinstance(box, ComposedBox)
    assert len(box.boxes) == 3


def test_two_stage_collapse_grinds_to_mixed():
    b1 = CollapseNonlinear((plus_state(), minus_state()))
    b2 = CollapseNonlinear((ket(0), ket(1)))
    out = compose_boxes(b1, b2).ensemble_output_density(ket(0))
    assert np.allclose(out.matrix, np.eye(2) / 2, atol=1e-12)


def test_concatenate_tests_matches_composed_channel():
    b1 = LinearBox(QuantumChannel.amplitude_damping(0.4))
    b2 = LinearBox(QuantumChannel.dephasing(0.3))
    psi = PureState.from_bloch(2.0, 0.4)
    est = concatenate_tests(b1, b2, psi, shots=40_000, rng=RngStream(31, 1))
    exact = compose_boxes(b1, b2).ensemble_output_density(psi)
    assert trace_distance(est, exact) < 0.05


def test_concatenate_tests_requires_rng():
    b = LinearBox(QuantumChannel.identity(2))
    with pytest.raises(InvalidInputError):
        concatenate_tests(b, b, ket(0))


# ---------------------------------------------------------------- game pairs


def test_oracle_round_mechanics():
    oracle = QracOracle()
    psi0 = PureState.from_bloch(1.1, 0.3)
    psi1 = PureState.from_bloch(2.2, 4.0)
    root = RngStream(32, 0)
    kept = dropped = 0
    for i in range(400):
        r = qrac_round(oracle, psi0, psi1, i % 2, root.child(i))
        assert r.kept == (r.a == r.b)
        if r.kept:
            kept += 1
            target = psi0 if i % 2 == 0 else psi1
            assert abs(uhlmann_fidelity(r.rho_out, target.density()) - 1) < 1e-12
        else:
            dropped += 1
            assert np.allclose(r.rho_out.matrix, np.eye(2) / 2, atol=1e-12)
    assert kept > 0 and dropped > 0


def test_measure_prepare_round_on_basis_states():
    pair = measure_prepare_strategy()
    root = RngStream(32, 1)
    for i in range(200):
        r = qrac_round(pair, ket(0), ket(1), i % 2, root.child(i))
        assert r.a == 1  # product measurement reads the bits exactly
        if r.kept:
            want = ket(0) if i % 2 == 0 else ket(1)
            assert abs(uhlmann_fidelity(r.rho_out, want.density()) - 1) < 1e-12


def test_round_input_validation():
    oracle = QracOracle()
    with pytest.raises(InvalidInputError):
        qrac_round(oracle, ket(0, dim=3), ket(0), 0, RngStream(32, 2))
    with pytest.raises(InvalidInputError):
        qrac_round(oracle, ket(0), ket(1), 2, RngStream(32, 2))


def test_qrac_quantum_validation():
    povm_effects = tuple(np.eye(4, dtype=complex) / 4 for _ in range(4))
    from qdata import Povm

    good_povm = Povm(povm_effects)
    with pytest.raises(InvalidInputError):
        QracQuantum(good_povm, [QuantumChannel.identity(2)] * 3)
    with pytest.raises(InvalidInputError):
        QracQuantum(Povm((np.eye(2, dtype=complex) / 2,) * 2), [QuantumChannel.identity(2)] * 4)


def test_nsq_pair_checks_dims_and_refuses_game():
    swap = np.zeros((4, 4), dtype=complex)
    for i in range(2):
        for j in range(2):
            swap[2 * j + i, 2 * i + j] = 1.0
    pair = NsqChannelPair(QuantumChannel.from_unitary(swap), (2, 2))
    with pytest.raises(InvalidInputError):
        pair.play_round(ket(0), ket(1), 0, RngStream(32, 3))
    with pytest.raises(Exception):
        NsqChannelPair(QuantumChannel.identity(4), (2, 3))
