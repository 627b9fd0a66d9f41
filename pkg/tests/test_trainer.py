import math

import numpy as np
import pytest

import training.trainer as trainer_module
from conftest import tiny_train_config
from training.checkpoint import build_model, target_encoder_digest
from training.config import TrainConfig
from training.optimizer import init_optimizer
from training.replay import ReplayBuffer, buffer_add, buffer_sample_sequences
from training.trainer import check_target_digest, collect_experience, train, train_step
from utils.errors import ContractError, NonFiniteError
from utils.metrics import METRICS_COLUMNS, read_metrics


def prepare(config, seed=0):
    """Model, optimizer and one sampled batch from warmup experience."""
    rng = np.random.default_rng(seed)
    params = build_model(config, rng)
    opt = init_optimizer([t.data for _, t in params.trainable()])
    buffer = ReplayBuffer(config.buffer_capacity)
    for episode in collect_experience(config.env_name, None, 200, rng, 'warmup'):
        buffer_add(buffer, episode)
    batch = buffer_sample_sequences(buffer, config.batch_size, config.sequence_length, rng)
    return params, opt, batch


# ── Experience ───────────────────────────────────────────────────

def test_warmup_rounds_up_to_whole_episodes():
    episodes = collect_experience('pixel-pointmass', None, 400, np.random.default_rng(0), 'warmup')
    assert len(episodes) == 2
    for episode in episodes:
        assert len(episode) == 200
        assert episode.observations.shape == (201, 40, 40)
        assert np.all(np.abs(episode.actions) <= 1.0)
    assert len(collect_experience('pixel-pendulum', None, 201, np.random.default_rng(0), 'warmup')) == 2


def test_collection_is_seeded():
    a = collect_experience('pixel-pendulum', None, 1, np.random.default_rng(4), 'warmup')[0]
    b = collect_experience('pixel-pendulum', None, 1, np.random.default_rng(4), 'warmup')[0]
    assert a.seed == b.seed
    np.testing.assert_array_equal(a.actions, b.actions)
    np.testing.assert_array_equal(a.observations, b.observations)


def test_policy_collection(tiny_config):
    params = build_model(tiny_config, np.random.default_rng(0))
    episodes = collect_experience(tiny_config.env_name, params, 5, np.random.default_rng(1),
                                  'policy', tiny_config.crop_spec())
    assert len(episodes) == 1
    assert episodes[0].actions.shape == (200, 2)
    assert np.all(np.abs(episodes[0].actions) <= 1.0)


def test_collection_argument_errors(tiny_config):
    rng = np.random.default_rng(0)
    with pytest.raises(ContractError):
        collect_experience('pixel-pointmass', None, 0, rng, 'warmup')
    with pytest.raises(ContractError):
        collect_experience('pixel-pointmass', None, 10, rng, 'policy')
    with pytest.raises(ContractError):
        collect_experience('pixel-pointmass', None, 10, rng, 'expert')


# ── Gradient step ────────────────────────────────────────────────

def test_train_step_is_deterministic(tiny_config):
    params, opt, batch = prepare(tiny_config)
    spec = tiny_config.crop_spec()
    first = train_step(batch, params, opt, tiny_config.hyper, np.random.default_rng(2), spec, 1e-3)
    second = train_step(batch, params, opt, tiny_config.hyper, np.random.default_rng(2), spec, 1e-3)
    assert first[2] == second[2]
    for (name, a), (_, b) in zip(first[0].named_parameters(), second[0].named_parameters()):
        np.testing.assert_array_equal(a.data, b.data, err_msg=name)
    assert first[1].step == 1


def test_train_step_updates_every_trainable_set(tiny_config):
    params, opt, batch = prepare(tiny_config)
    new_params, _, _, _ = train_step(batch, params, opt, tiny_config.hyper, np.random.default_rng(2),
                                     tiny_config.crop_spec(), 1e-3)
    for net in ('encoder', 'decoder', 'dynamics', 'reward', 'policy'):
        before = getattr(params, net).weights[0].data
        after = getattr(new_params, net).weights[0].data
        assert np.any(before != after), net


def test_telemetry_with_zero_contrastive_weight(tmp_path):
    config = tiny_train_config(tmp_path, hyper={'lambda2': 0.0})
    params, opt, batch = prepare(config)
    _, _, _, gnorms = train_step(batch, params, opt, config.hyper, np.random.default_rng(2),
                                 config.crop_spec(), 1e-3, telemetry=True)
    assert set(gnorms) == {'dynamics', 'infonce', 'reconstruction'}
    assert gnorms['infonce'] == 0.0
    assert gnorms['dynamics'] > 0.0
    assert gnorms['reconstruction'] > 0.0


def test_no_telemetry_by_default(tiny_config):
    params, opt, batch = prepare(tiny_config)
    *_, gnorms = train_step(batch, params, opt, tiny_config.hyper, np.random.default_rng(2),
                            tiny_config.crop_spec(), 1e-3)
    assert gnorms is None


@pytest.mark.parametrize('momentum', [0.0, 0.95, 1.0])
def test_target_moves_only_by_ema(tmp_path, momentum):
    config = tiny_train_config(tmp_path, hyper={'momentum': momentum})
    params, opt, batch = prepare(config)
    new_params, _, _, _ = train_step(batch, params, opt, config.hyper, np.random.default_rng(2),
                                     config.crop_spec(), 1e-3, audit=True)
    for (_, old_t), (_, new_e), (_, new_t) in zip(params.target_encoder.parameters(),
                                                  new_params.encoder.parameters(),
                                                  new_params.target_encoder.parameters()):
        np.testing.assert_array_equal(new_t.data, momentum * old_t.data + (1.0 - momentum) * new_e.data)


def test_overfit_one_batch():
    config = TrainConfig(seed=0)
    params, opt, batch = prepare(config)
    spec = config.crop_spec()
    breakdowns = []
    for _ in range(201):
        params, opt, breakdown, _ = train_step(batch, params, opt, config.hyper, np.random.default_rng(0),
                                               spec, config.learning_rate)
        breakdowns.append(breakdown)
    initial, final = breakdowns[0], breakdowns[-1]
    assert final.reconstruction <= 0.5 * initial.reconstruction
    assert final.dynamics <= 0.7 * initial.dynamics


# ── Full run ─────────────────────────────────────────────────────

def test_zero_step_run_writes_header_and_checkpoint(tmp_path):
    config = tiny_train_config(tmp_path, total_env_steps=0)
    result = train(config)
    assert result.records == []
    assert result.env_steps == 0
    with open(result.paths['metrics']) as f:
        assert f.read() == ','.join(METRICS_COLUMNS) + '\n'
    assert (tmp_path / 'run' / 'checkpoint.json').exists()
    assert 'plot' not in result.paths


def test_tiny_run_schedule(tiny_config):
    result = train(tiny_config)
    records = read_metrics(result.paths['metrics'])
    steps = [r for r in records if r['loss_total'] is not None]
    evals = [r for r in records if r['eval_return'] is not None]
    assert len(steps) == 20
    assert [r['step'] for r in steps] == list(range(1, 21))
    assert [r['env_steps'] for r in evals] == [400, 600]
    assert result.env_steps == 600
    # telemetry on every second gradient step
    assert sum(r['gnorm_infonce'] is not None for r in steps) == 10
    assert result.paths['plot'].endswith('returns.svg')
    for r in evals:
        assert 0.0 <= r['eval_return'] <= 200.0


def test_run_is_byte_identical(tiny_config):
    first = train(tiny_config)
    with open(first.paths['metrics'], 'rb') as f:
        metrics = f.read()
    with open(first.paths['checkpoint'], 'rb') as f:
        checkpoint = f.read()
    second = train(tiny_config)
    with open(second.paths['metrics'], 'rb') as f:
        assert f.read() == metrics
    with open(second.paths['checkpoint'], 'rb') as f:
        assert f.read() == checkpoint


def test_composition_identity_over_500_steps(tmp_path):
    config = tiny_train_config(tmp_path, total_env_steps=2200, train_every=4, eval_interval=100_000,
                               hyper={'lambda1': 0.7, 'lambda2': 1.3, 'lambda3': 0.1})
    result = train(config)
    assert len(result.breakdowns) == 500
    for breakdown in result.breakdowns:
        assert breakdown.total == breakdown.recombined(config.hyper)
    for record, breakdown in zip(read_metrics(result.paths['metrics']), result.breakdowns):
        assert record['loss_total'] == float(format(breakdown.total, '.9g'))


@pytest.mark.parametrize('weight,column', [('lambda2', 'gnorm_infonce'), ('lambda3', 'gnorm_recon')])
def test_ablation_routes_no_gradient(tmp_path, weight, column):
    config = tiny_train_config(tmp_path, hyper={weight: 0.0})
    records = read_metrics(train(config).paths['metrics'])
    measured = [r[column] for r in records if r['gnorm_dynamics'] is not None]
    assert len(measured) == 10
    assert all(value == 0.0 for value in measured)


def test_non_finite_loss_reports_step(tiny_config, monkeypatch):
    real_total_loss = trainer_module.total_loss
    calls = {'n': 0}

    def failing_total_loss(parts, hyper):
        calls['n'] += 1
        if calls['n'] == 3:
            raise NonFiniteError("non-finite loss component", diagnostics={'component': 'dynamics'})
        return real_total_loss(parts, hyper)

    monkeypatch.setattr(trainer_module, 'total_loss', failing_total_loss)
    with pytest.raises(NonFiniteError) as info:
        train(tiny_config)
    assert info.value.diagnostics['step'] == 3
    assert info.value.diagnostics['component'] == 'dynamics'


def test_debug_checks_run(tmp_path):
    config = tiny_train_config(tmp_path, debug_checks=True, total_env_steps=400)
    result = train(config)
    assert len(result.breakdowns) == 10
    assert all(math.isfinite(b.total) for b in result.breakdowns)


def test_check_target_digest(tiny_config):
    params = build_model(tiny_config, np.random.default_rng(0))
    digest = target_encoder_digest(params)
    check_target_digest(params, digest)
    params.target_encoder.weights[0].data[0, 0] += 1e-6
    with pytest.raises(ContractError, match="between steps"):
        check_target_digest(params, digest)


def test_debug_checks_catch_target_change_between_steps(tmp_path, monkeypatch):
    collect = trainer_module.collect_experience

    def collect_and_nudge_target(env_name, params, *args, **kwargs):
        episodes = collect(env_name, params, *args, **kwargs)
        if params is not None:
            params.target_encoder.weights[0].data[0, 0] += 1.0
        return episodes

    monkeypatch.setattr(trainer_module, 'collect_experience', collect_and_nudge_target)
    with pytest.raises(ContractError, match="between steps"):
        train(tiny_train_config(tmp_path, debug_checks=True))
    train(tiny_train_config(tmp_path / 'unchecked', debug_checks=False))
