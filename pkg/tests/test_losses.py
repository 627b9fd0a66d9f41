import math

import numpy as np
import pytest

from agent.losses import (
    Hyperparams, LossBreakdown, LossTerms, compute_loss_terms, dynamics_loss, infonce_loss,
    policy_loss, reconstruction_loss, similarity, similarity_matrix, total_loss,
)
from agent.nets import encode, encode_sequence, policy_act, predict_dynamics, predict_reward
from autodiff import Tensor, backward
from utils.errors import ContractError, DomainError, NonFiniteError, ShapeError


def scalar_infonce(anchors, positives, tau, kind, W=None):
    """Double loop over anchors and candidates."""
    n = len(anchors)
    total = 0.0
    for i in range(n):
        logits = []
        for j in range(n):
            if kind == 'cosine':
                sim = float(np.dot(anchors[i], positives[j])
                            / (np.linalg.norm(anchors[i]) * np.linalg.norm(positives[j])))
            else:
                sim = float(anchors[i] @ W @ positives[j])
            logits.append(sim / tau)
        peak = max(logits)
        log_norm = peak + math.log(sum(math.exp(l - peak) for l in logits))
        total += -(logits[i] - log_norm)
    return total / n


# ── Similarity ───────────────────────────────────────────────────

def test_cosine_similarity_range(rng):
    for _ in range(100):
        u, v = rng.standard_normal(6), rng.standard_normal(6)
        assert -1.0 - 1e-12 <= similarity(Tensor(u), Tensor(v)).item() <= 1.0 + 1e-12


def test_cosine_of_zero_vector():
    with pytest.raises(DomainError):
        similarity(Tensor(np.zeros(3)), Tensor(np.ones(3)))


def test_bilinear_needs_w(rng):
    u = Tensor(rng.standard_normal(3))
    with pytest.raises(ContractError):
        similarity(u, u, 'bilinear')
    with pytest.raises(ShapeError):
        similarity(u, u, 'bilinear', Tensor(np.eye(4)))
    assert similarity(u, u, 'bilinear', Tensor(np.eye(3))).item() == pytest.approx(float(u.data @ u.data))


def test_similarity_matrix_matches_pairs(rng):
    a, p = rng.standard_normal((4, 5)), rng.standard_normal((4, 5))
    W = rng.standard_normal((5, 5))
    for kind in ('cosine', 'bilinear'):
        matrix = similarity_matrix(Tensor(a), Tensor(p), kind, Tensor(W)).data
        for i in range(4):
            for j in range(4):
                pair = similarity(Tensor(a[i]), Tensor(p[j]), kind, Tensor(W)).item()
                assert matrix[i, j] == pytest.approx(pair, abs=1e-12)


# ── InfoNCE ──────────────────────────────────────────────────────

@pytest.mark.parametrize('kind', ['cosine', 'bilinear'])
@pytest.mark.parametrize('n', [1, 2, 4, 8, 16])
@pytest.mark.parametrize('d', [2, 8, 32])
def test_infonce_matches_double_loop(kind, n, d):
    rng = np.random.default_rng(n * 100 + d)
    anchors, positives = rng.standard_normal((n, d)), rng.standard_normal((n, d))
    W = rng.standard_normal((d, d)) / math.sqrt(d)
    hyper = Hyperparams(tau=0.1, sim_kind=kind)
    value = infonce_loss(Tensor(anchors), Tensor(positives), hyper, W=Tensor(W)).item()
    assert value == pytest.approx(scalar_infonce(anchors, positives, 0.1, kind, W), abs=1e-10)


@pytest.mark.parametrize('n', [1, 2, 4, 8, 16])
def test_infonce_equal_similarities_is_log_n(n):
    latents = np.tile(np.array([0.3, -1.2, 0.5]), (n, 1))
    value = infonce_loss(Tensor(latents), Tensor(latents), Hyperparams(tau=0.1)).item()
    assert abs(value - math.log(n)) < 1e-12


def test_infonce_non_negative(rng):
    for i in range(1000):
        n, d = int(rng.integers(1, 9)), int(rng.integers(2, 9))
        kind = 'cosine' if i % 2 == 0 else 'bilinear'
        hyper = Hyperparams(tau=float(rng.uniform(0.1, 2.0)), sim_kind=kind)
        value = infonce_loss(Tensor(rng.standard_normal((n, d))), Tensor(rng.standard_normal((n, d))),
                             hyper, W=Tensor(rng.standard_normal((d, d)) / d)).item()
        assert value >= 0.0


def test_infonce_positives_receive_no_gradient(rng):
    anchors = Tensor(rng.standard_normal((4, 3)), requires_grad=True)
    positives = Tensor(rng.standard_normal((4, 3)), requires_grad=True)
    grads = backward(infonce_loss(anchors, positives, Hyperparams()))
    assert anchors in grads
    assert positives not in grads


def test_infonce_temperature_must_be_positive():
    with pytest.raises(ContractError):
        Hyperparams(tau=0.0)


def test_infonce_large_logits_stay_finite():
    anchors = Tensor(np.array([[10.0, 0.0], [0.0, 10.0]]), requires_grad=True)
    positives = Tensor(np.array([[0.0, 10.0], [10.0, 0.0]]))
    W = Tensor(np.eye(2), requires_grad=True)
    loss = infonce_loss(anchors, positives, Hyperparams(tau=0.1, sim_kind='bilinear'), W=W)
    assert loss.item() == pytest.approx(1000.0 + math.log1p(math.exp(-1000.0)))
    grads = backward(loss)
    assert np.all(np.isfinite(grads.array_for(anchors)))
    assert np.all(np.isfinite(grads.array_for(W)))


def test_infonce_small_temperature_matches_double_loop(rng):
    anchors = rng.standard_normal((5, 3))
    positives = rng.standard_normal((5, 3))
    anchor_tensor = Tensor(anchors, requires_grad=True)
    loss = infonce_loss(anchor_tensor, Tensor(positives), Hyperparams(tau=0.001))
    assert math.isfinite(loss.item())
    assert loss.item() == pytest.approx(scalar_infonce(anchors, positives, 0.001, 'cosine'), rel=1e-9)
    assert np.all(np.isfinite(backward(loss).array_for(anchor_tensor)))


# ── World model ──────────────────────────────────────────────────

def test_dynamics_loss_matches_per_element_sum(small_params, rng):
    steps, batch = 2, 3
    latents = encode_sequence(small_params.encoder, rng.uniform(size=(steps + 1, batch, 16)))
    actions = rng.uniform(-1, 1, size=(steps, batch, 2))
    rewards = rng.uniform(size=(steps, batch))
    value = dynamics_loss(latents, actions, rewards, small_params.dynamics, small_params.reward).item()

    expected = 0.0
    for t in range(steps):
        for b in range(batch):
            z = Tensor(latents.data[t, b])
            z_next_hat = predict_dynamics(small_params.dynamics, z, actions[t, b]).data
            r_hat = predict_reward(small_params.reward, z, actions[t, b]).data[0]
            expected += np.sum((z_next_hat - latents.data[t + 1, b]) ** 2) + (r_hat - rewards[t, b]) ** 2
    assert value == pytest.approx(expected / (steps * batch), rel=1e-12)


def test_dynamics_loss_length_mismatch(small_params, rng):
    latents = Tensor(rng.standard_normal((3, 2, 4)))
    with pytest.raises(ContractError):
        dynamics_loss(latents, np.zeros((3, 2, 2)), np.zeros((3, 2)),
                      small_params.dynamics, small_params.reward)


def test_reconstruction_loss_value(rng):
    targets = rng.uniform(size=(4, 5))
    recon = rng.uniform(size=(4, 5))
    value = reconstruction_loss(targets, Tensor(recon)).item()
    assert value == pytest.approx(np.mean(np.sum((recon - targets) ** 2, axis=-1)), rel=1e-12)
    with pytest.raises(ContractError):
        reconstruction_loss(targets, Tensor(recon[:, :4]))


def test_perfect_reconstruction_is_zero(rng):
    targets = rng.uniform(size=(3, 4))
    assert reconstruction_loss(targets, Tensor(targets)).item() == 0.0


# ── Policy ───────────────────────────────────────────────────────

def test_policy_loss_matches_manual_unroll(small_params, rng):
    hyper = Hyperparams(horizon=3, gamma=0.9)
    z0 = encode(small_params.encoder, rng.uniform(size=(2, 16)))
    value = policy_loss(z0, small_params.policy, small_params.dynamics, small_params.reward,
                        hyper, np.random.default_rng(4)).item()

    noise_rng = np.random.default_rng(4)
    z = Tensor(z0.data)
    discounted = np.zeros(2)
    for t in range(1, 4):
        action = policy_act(small_params.policy, z, 'stochastic', noise=noise_rng.standard_normal((2, 2)))
        discounted += (0.9 ** t) * predict_reward(small_params.reward, z, action).data[:, 0]
        z = predict_dynamics(small_params.dynamics, z, action)
    assert value == pytest.approx(-np.mean(discounted), rel=1e-12)


def test_policy_loss_only_reaches_policy(small_params, rng):
    z0 = encode(small_params.encoder, rng.uniform(size=(2, 16)))
    grads = backward(policy_loss(z0, small_params.policy, small_params.dynamics, small_params.reward,
                                 Hyperparams(horizon=3), rng))
    assert any(np.any(grads.array_for(t) != 0) for _, t in small_params.policy.parameters())
    for net in (small_params.encoder, small_params.dynamics, small_params.reward):
        for _, tensor in net.parameters():
            assert tensor not in grads


def test_policy_loss_non_finite_reward(small_params, rng):
    z0 = Tensor(np.full((2, 4), np.inf))
    with pytest.raises(NonFiniteError) as info:
        policy_loss(z0, small_params.policy, small_params.dynamics, small_params.reward,
                    Hyperparams(horizon=2), rng)
    assert info.value.diagnostics['imagination_step'] == 1


# ── Combination ──────────────────────────────────────────────────

def test_total_loss_recombines_exactly(rng):
    hyper = Hyperparams(lambda1=0.3, lambda2=1.7, lambda3=0.01)
    for _ in range(50):
        parts = LossTerms(*(Tensor(v) for v in rng.standard_normal(4)))
        breakdown = total_loss(parts, hyper)
        assert breakdown.total == breakdown.recombined(hyper)


def test_total_loss_echoes_components():
    parts = LossTerms(Tensor(1.0), Tensor(2.0), Tensor(3.0), Tensor(4.0))
    breakdown = total_loss(parts, Hyperparams(lambda1=0.5, lambda2=0.0, lambda3=2.0))
    assert breakdown == LossBreakdown(policy=1.0, dynamics=2.0, infonce=3.0, reconstruction=4.0, total=10.0)


def test_total_loss_rejects_nan():
    parts = LossTerms(Tensor(1.0), Tensor(np.nan), Tensor(0.0), Tensor(0.0))
    with pytest.raises(NonFiniteError) as info:
        total_loss(parts, Hyperparams())
    assert info.value.diagnostics['component'] == 'dynamics'


@pytest.mark.parametrize('field,value', [('lambda1', -1.0), ('gamma', 1.5), ('horizon', 0),
                                         ('momentum', -0.1), ('sim_kind', 'dot')])
def test_hyperparams_validation(field, value):
    with pytest.raises(ContractError):
        Hyperparams(**{field: value})


@pytest.mark.parametrize('kind', ['cosine', 'bilinear'])
def test_compute_loss_terms(small_params, small_spec, small_batch, kind):
    observations, actions, rewards = small_batch
    hyper = Hyperparams(horizon=3, sim_kind=kind)
    terms = compute_loss_terms(small_params, observations, actions, rewards, small_spec, hyper,
                               np.random.default_rng(0))
    breakdown = total_loss(terms, hyper)
    for name in ('policy', 'dynamics', 'infonce', 'reconstruction', 'total'):
        assert math.isfinite(getattr(breakdown, name))
    assert breakdown.infonce >= 0.0
    grads = backward(terms.infonce)
    assert (small_params.W in grads) == (kind == 'bilinear')
    for _, tensor in small_params.target_encoder.parameters():
        assert tensor not in grads


def test_compute_loss_terms_is_seeded(small_params, small_spec, small_batch):
    observations, actions, rewards = small_batch
    hyper = Hyperparams(horizon=3)
    a = total_loss(compute_loss_terms(small_params, observations, actions, rewards, small_spec, hyper,
                                      np.random.default_rng(1)), hyper)
    b = total_loss(compute_loss_terms(small_params, observations, actions, rewards, small_spec, hyper,
                                      np.random.default_rng(1)), hyper)
    assert a == b


def test_components_add_up():
    parts = LossTerms(Tensor(2.0), Tensor(3.0), Tensor(5.0), Tensor(7.0))
    assert total_loss(parts, Hyperparams()).total == 17.0
    without_infonce = Hyperparams(lambda2=0.0)
    a = total_loss(parts, without_infonce).total
    b = total_loss(LossTerms(Tensor(2.0), Tensor(3.0), Tensor(500.0), Tensor(7.0)), without_infonce).total
    assert a == b == 12.0


def constant_reward(net, value):
    last = f"b{len(net.weights) - 1}"
    return net.with_arrays([np.full(t.shape, value) if name == last else np.zeros(t.shape)
                            for name, t in net.parameters()])


@pytest.mark.parametrize('gamma,expected', [(0.99, -2.940499), (0.0, 0.0)])
def test_policy_loss_with_constant_reward(small_params, rng, gamma, expected):
    z0 = encode(small_params.encoder, rng.uniform(size=(4, 16)))
    value = policy_loss(z0, small_params.policy, small_params.dynamics,
                        constant_reward(small_params.reward, 1.0),
                        Hyperparams(horizon=3, gamma=gamma), rng).item()
    assert value == pytest.approx(expected, abs=1e-12)


def test_cosine_infonce_scale_invariant(rng):
    anchors, positives = rng.standard_normal((6, 5)), rng.standard_normal((6, 5))
    base = infonce_loss(Tensor(anchors), Tensor(positives), Hyperparams()).item()
    for scale in rng.uniform(0.1, 10.0, size=10):
        scaled = infonce_loss(Tensor(anchors * scale), Tensor(positives), Hyperparams()).item()
        assert scaled == pytest.approx(base, rel=1e-10)


def test_gradient_routing_is_additive(small_params, small_spec, small_batch):
    observations, actions, rewards = small_batch
    with_infonce = Hyperparams(horizon=3)
    without_infonce = Hyperparams(horizon=3, lambda2=0.0)
    terms = compute_loss_terms(small_params, observations, actions, rewards, small_spec, with_infonce,
                               np.random.default_rng(5))
    full = terms.total(with_infonce).backward()
    ablated = terms.total(without_infonce).backward()
    contrastive = terms.infonce.backward()
    reconstruction = terms.reconstruction.backward()
    policy = terms.policy.backward()

    for _, tensor in small_params.encoder.parameters():
        np.testing.assert_allclose(full.array_for(tensor) - ablated.array_for(tensor),
                                   contrastive.array_for(tensor), atol=1e-12)
    for _, tensor in small_params.decoder.parameters():
        np.testing.assert_allclose(full.array_for(tensor), reconstruction.array_for(tensor), atol=1e-12)
    for _, tensor in small_params.policy.parameters():
        np.testing.assert_allclose(full.array_for(tensor), policy.array_for(tensor), atol=1e-12)
