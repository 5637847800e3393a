"""
Tests for the balance objective, transition densities, training and evaluation
"""

import math
import os
import tempfile
import unittest
from unittest.mock import patch

import numpy as np

from src.core import Tape, Tensor
from src.data import build_tuples
from src.envs import GridWorld, GridWorldExpert, generate_demonstrations, make_env, make_expert
from src.flows import DensityFitConfig
from src.mbil import (
    CHAIN,
    KERNEL,
    FlowDensity,
    FlowSettings,
    MbilConfig,
    OracleDensity,
    PolicyTrainer,
    PrecomputedDensity,
    TabularDensity,
    TrainReport,
    TransitionDensity,
    balance_residual,
    build_density,
    dynamics_loss,
    evaluate_expert,
    evaluate_policy,
    evaluate_random,
    fit_transition_densities,
    mbil_objective,
    normalized_score,
    objective_terms,
    run_episodes,
    train,
    train_bc,
)
from src.policies import CategoricalPolicy, GaussianPolicy, build_policy, load_policy, policy_loss_sum
from src.utils.errors import DatasetError, EnvError, NumericalError, TrainingDivergedError
from src.utils.validation import ValidationError
from tests.gradcheck import module_gradient, module_numerical_gradient, relative_error


class FixedDensity(TransitionDensity):
    """Returns preset log-densities indexed by buffer tuple."""

    def __init__(self, descriptor, target, values):
        super().__init__(descriptor, target)
        self.values = np.asarray(values, dtype=np.float64)

    def log_prob_encoded(self, x, c):
        raise NotImplementedError

    def batch_log_prob(self, batch):
        return self.values[batch.tuple_indices]


def grid_setup(size=5, n_trajectories=3, seed=0):
    env = GridWorld(width=size, height=size, p_slip=0.1)
    expert = GridWorldExpert(env, epsilon=0.1)
    dataset = generate_demonstrations(env, expert, n_trajectories, seed=seed)
    return env, expert, dataset


def small_config(**overrides):
    settings = dict(iterations=20, batch_size=16, hidden_width=8, eval_every=0,
                    log_every=5, density_kind='oracle')
    settings.update(overrides)
    return MbilConfig(**settings)


class TestBalanceResidual(unittest.TestCase):
    """Test the squared log-balance residual"""

    def test_exact_balance(self):
        """Test balanced log-densities give zero"""
        self.assertAlmostEqual(float(balance_residual(-2.0, -1.2, -0.8)), 0.0, places=12)

    def test_arithmetic(self):
        """Test (p - pi - t)^2"""
        self.assertEqual(float(balance_residual(-1.0, -1.0, -1.0)), 1.0)

    def test_tensor_input_is_differentiable(self):
        """Test d/d(pi) of the residual is -2 (p - pi - t)"""
        pi = Tensor(np.array([-0.5, -1.5]), requires_grad=True)
        with Tape() as tape:
            out = balance_residual(np.array([-1.0, -2.0]), pi, np.array([-0.25, -1.0])).sum()
        tape.backward(out)
        np.testing.assert_allclose(pi.grad, [0.5, -1.0])

    def test_oracle_residual_vanishes(self):
        """Test exact densities balance on every demonstrated tuple"""
        env, expert, dataset = grid_setup(size=3, n_trajectories=10)
        buffer = build_tuples(dataset)
        p = OracleDensity(env, expert, CHAIN)
        t = OracleDensity(env, None, KERNEL)
        p_log = p.log_prob(buffer.states, buffer.actions, buffer.next_states, buffer.next_actions)
        t_log = t.log_prob(buffer.states, buffer.actions, buffer.next_states)
        pi_log = np.array([expert.log_prob(s, a) for s, a in zip(buffer.next_states, buffer.next_actions)])
        residual = balance_residual(p_log, pi_log, t_log)
        self.assertLess(float(np.max(residual)), 1e-20)

    def test_expert_minimises_tabular_dynamics_loss(self):
        """Test the expert table is the zero of the enumerated dynamics loss on a 3x3 grid"""
        env = GridWorld(width=3, height=3, p_slip=0.2)
        expert = GridWorldExpert(env, epsilon=0.2)
        chain = env.chain_table(expert)

        def loss(table):
            total = 0.0
            for (s, a), row in chain.items():
                for (s_next, a_next), p in row.items():
                    t = float(env.transition_fractions()[s][a][s_next])
                    total += float(balance_residual(math.log(p), math.log(table[s_next, a_next]), math.log(t)))
            return total

        self.assertLess(loss(expert.probabilities), 1e-20)
        perturbed = expert.probabilities.copy()
        perturbed[0] = [0.4, 0.3, 0.2, 0.1]
        self.assertGreater(loss(perturbed), 0.0)


class TestDensities(unittest.TestCase):
    """Test the density wrappers"""

    def setUp(self):
        self.env, self.expert, self.dataset = grid_setup()
        self.buffer = build_tuples(self.dataset)

    def test_tabular_frequencies(self):
        """Test tabular densities are conditional frequencies"""
        density = TabularDensity.fit(self.buffer, KERNEL)
        values = density.log_prob(self.buffer.states, self.buffer.actions, self.buffer.next_states)
        self.assertTrue(np.all(values <= 0.0))
        unseen = density.log_prob(np.array([[0.0, 0.0]]), np.array([0]), np.array([[4.0, 4.0]]))
        self.assertEqual(unseen[0], -math.inf)

    def test_tabular_needs_discrete_env(self):
        """Test continuous buffers are rejected"""
        env = make_env('point_mass', horizon=5)
        buffer = build_tuples(generate_demonstrations(env, make_expert(env), 2))
        with self.assertRaises(EnvError):
            TabularDensity.fit(buffer, CHAIN)

    def test_oracle_chain_needs_expert(self):
        """Test the chain oracle requires the demonstration policy"""
        with self.assertRaises(ValueError):
            OracleDensity(self.env, None, CHAIN)

    def test_oracle_encoded_matches_raw(self):
        """Test the oracle scores encoded rows like the raw tuples they came from"""
        for target, (x, c) in ((CHAIN, self.buffer.chain_data()), (KERNEL, self.buffer.kernel_data())):
            with self.subTest(target=target):
                oracle = OracleDensity(self.env, self.expert, target)
                np.testing.assert_allclose(oracle.log_prob_encoded(x, c), oracle.batch_log_prob(
                    self.buffer.batch(np.arange(self.buffer.n_tuples), np.arange(1))))
        env = make_env('point_mass', horizon=5)
        expert = make_expert(env)
        buffer = build_tuples(generate_demonstrations(env, expert, 2))
        oracle = OracleDensity(env, expert, CHAIN)
        x, c = buffer.chain_data()
        expected = oracle.log_prob(buffer.states, buffer.actions, buffer.next_states, buffer.next_actions)
        np.testing.assert_allclose(oracle.log_prob_encoded(x, c), expected)

    def test_precomputed_lookup(self):
        """Test precomputed values match direct evaluation"""
        oracle = OracleDensity(self.env, self.expert, CHAIN)
        cached = PrecomputedDensity(oracle, self.buffer)
        batch = self.buffer.batch(np.array([3, 0, 3]), np.array([0]))
        np.testing.assert_array_equal(cached.batch_log_prob(batch), oracle.batch_log_prob(batch))

    def test_flow_density_round_trip(self):
        """Test a fitted flow density saves and reloads"""
        fit = DensityFitConfig(steps=3, batch_size=8)
        density, result = build_density('flow', KERNEL, self.buffer, fit, FlowSettings(n_blocks=1, hidden_width=4))
        self.assertTrue(density.frozen)
        self.assertEqual(len(result.history), 3)
        with tempfile.TemporaryDirectory() as tmpdir:
            path = density.save(os.path.join(tmpdir, 'kernel.npz'))
            loaded = FlowDensity.load(path, self.buffer.descriptor, KERNEL)
        batch = self.buffer.batch(np.arange(5), np.arange(1))
        np.testing.assert_allclose(loaded.batch_log_prob(batch), density.batch_log_prob(batch))

    def test_unknown_kind(self):
        """Test unknown density kinds"""
        with self.assertRaises(ValueError):
            build_density('histogram', CHAIN, self.buffer)


class TestObjective(unittest.TestCase):
    """Test the weighted objective"""

    def setUp(self):
        self.env, self.expert, self.dataset = grid_setup()
        self.buffer = build_tuples(self.dataset)
        self.policy = CategoricalPolicy(2, 4, hidden_width=8, seed=1)
        self.batch = self.buffer.batch(np.arange(self.buffer.n_tuples), np.arange(self.buffer.n_pairs))
        self.p_hat = OracleDensity(self.env, self.expert, CHAIN)
        self.t_hat = OracleDensity(self.env, None, KERNEL)

    def test_config_validation(self):
        """Test loss weights and selection modes"""
        with self.assertRaises(ValidationError):
            MbilConfig(alpha=0.0, beta=0.0)
        with self.assertRaises(ValidationError):
            MbilConfig(alpha=-1.0)
        with self.assertRaises(ValidationError):
            MbilConfig(select='median')
        with self.assertRaises(ValidationError):
            MbilConfig(density_kind='histogram')

    def test_zero_alpha_is_behavior_cloning(self):
        """Test alpha = 0 leaves beta times the BC sum and never touches densities"""
        config = small_config(alpha=0.0, beta=2.0)
        terms = objective_terms(self.batch, self.policy, None, None, config)
        expected = 2.0 * policy_loss_sum(self.policy, self.batch.bc_states, self.batch.bc_actions).item()
        self.assertEqual(terms.total.item(), expected)
        self.assertIsNone(terms.dynamics)
        self.assertEqual(terms.dyn_loss, 0.0)

    def test_perfect_balance_gives_zero(self):
        """Test beta = 0 with densities matching the policy"""
        t_values = np.full(self.buffer.n_tuples, -0.7)
        pi_log = self.policy.log_prob(self.buffer.next_states, self.buffer.next_actions).values
        p_hat = FixedDensity(self.buffer.descriptor, CHAIN, pi_log + t_values)
        t_hat = FixedDensity(self.buffer.descriptor, KERNEL, t_values)
        config = small_config(alpha=1.0, beta=0.0)
        value = mbil_objective(self.batch, self.policy, p_hat, t_hat, config).item()
        self.assertAlmostEqual(value, 0.0, places=20)

    def test_dynamics_loss_is_non_negative(self):
        """Test the dynamics term is a sum of squares"""
        self.assertGreaterEqual(dynamics_loss(self.batch, self.policy, self.p_hat, self.t_hat).item(), 0.0)

    def test_gradient_matches_finite_differences(self):
        """Test the full objective gradient with both weights positive"""
        config = small_config(alpha=0.5, beta=1.0)
        loss = lambda: mbil_objective(self.batch, self.policy, self.p_hat, self.t_hat, config)
        analytic = module_gradient(self.policy, loss)
        numeric = module_numerical_gradient(self.policy, loss)
        self.assertLess(relative_error(analytic, numeric), 1e-4)

    def test_non_finite_density_names_tuple(self):
        """Test an infinite log-density reports the buffer tuple index"""
        values = np.zeros(self.buffer.n_tuples)
        values[7] = -math.inf
        p_hat = FixedDensity(self.buffer.descriptor, CHAIN, values)
        t_hat = FixedDensity(self.buffer.descriptor, KERNEL, np.zeros(self.buffer.n_tuples))
        batch = self.buffer.batch(np.array([5, 6, 7]), np.array([0]))
        with self.assertRaises(NumericalError) as ctx:
            dynamics_loss(batch, self.policy, p_hat, t_hat)
        self.assertIn('tuple 7', str(ctx.exception))

    def test_unfrozen_density_rejected(self):
        """Test densities must be frozen before policy training"""
        fit = DensityFitConfig(steps=1, batch_size=4)
        density, _ = FlowDensity.fit(self.buffer, KERNEL, fit, FlowSettings(n_blocks=1, hidden_width=4))
        density.model.frozen = False
        with self.assertRaises(ValueError):
            dynamics_loss(self.batch, self.policy, self.p_hat, density)


class TestTraining(unittest.TestCase):
    """Test the training loop"""

    def setUp(self):
        self.env, self.expert, self.dataset = grid_setup()
        self.descriptor = self.env.descriptor

    def test_zero_alpha_matches_behavior_cloning(self):
        """Test alpha = 0, beta = 1 reproduces standalone BC bit for bit"""
        mbil_policy, _ = train(self.dataset, self.descriptor, small_config(alpha=0.0, beta=1.0))
        bc_policy, _ = train_bc(self.dataset, self.descriptor, small_config(alpha=0.3, beta=0.5))
        np.testing.assert_array_equal(mbil_policy.parameter_vector(), bc_policy.parameter_vector())

    def test_record_per_iteration(self):
        """Test one record per iteration and a saved checkpoint"""
        with tempfile.TemporaryDirectory() as tmpdir:
            policy, report = train(self.dataset, self.descriptor, small_config(),
                                   env=self.env, expert=self.expert,
                                   checkpoint_path=os.path.join(tmpdir, 'policy.npz'))
            self.assertEqual(len(report), 20)
            self.assertEqual([r.iteration for r in report.records], list(range(1, 21)))
            loaded = load_policy(report.checkpoint)
        np.testing.assert_array_equal(loaded.parameter_vector(), policy.parameter_vector())
        self.assertTrue(all(r.dyn_loss >= 0.0 for r in report.records))

    def test_given_report_is_filled_in_place(self):
        """Test an empty report passed in is the one returned and holds every record"""
        buffer = build_tuples(self.dataset)
        policy = CategoricalPolicy(2, 4, hidden_width=8)
        report = TrainReport()
        returned = PolicyTrainer(small_config(alpha=0.0, iterations=7)).optimize(policy, buffer, report=report)
        self.assertIs(returned, report)
        self.assertEqual(len(report), 7)
        self.assertEqual(report.selected_iteration, 7)

    def test_bc_report_has_records(self):
        """Test behavior cloning returns a report with one record per iteration"""
        _, report = train_bc(self.dataset, self.descriptor, small_config(iterations=6))
        self.assertEqual(len(report), 6)
        self.assertTrue(all(r.dyn_loss == 0.0 for r in report.records))

    def test_training_is_reproducible(self):
        """Test identical settings give identical parameters"""
        first, _ = train(self.dataset, self.descriptor, small_config(), env=self.env, expert=self.expert)
        second, _ = train(self.dataset, self.descriptor, small_config(), env=self.env, expert=self.expert)
        np.testing.assert_array_equal(first.parameter_vector(), second.parameter_vector())

    def test_objective_decreases(self):
        """Test the loss falls over the first hundred iterations"""
        _, report = train(self.dataset, self.descriptor,
                          small_config(iterations=100, batch_size=32, learning_rate=3e-3),
                          env=self.env, expert=self.expert)
        totals = [r.total for r in report.records]
        self.assertLess(np.mean(totals[-10:]), np.mean(totals[:10]))

    def test_evaluation_schedule(self):
        """Test evaluations run every eval_every iterations and at the end"""
        config = small_config(iterations=12, eval_every=5, eval_episodes=2)
        _, report = train(self.dataset, self.descriptor, config, env=self.env, expert=self.expert)
        self.assertEqual(sorted(report.evaluations), [5, 10, 12])
        rows = report.rows()
        self.assertIsNone(rows[0]['eval_return_mean'])
        self.assertIsNotNone(rows[4]['eval_return_mean'])
        self.assertEqual(report.selected_iteration, 12)

    def test_best_selection(self):
        """Test select='best' restores the best evaluated iterate"""
        config = small_config(iterations=12, eval_every=4, eval_episodes=2, select='best')
        _, report = train(self.dataset, self.descriptor, config, env=self.env, expert=self.expert)
        best = max(report.evaluations, key=lambda i: report.evaluations[i].mean)
        self.assertEqual(report.selected_iteration, best)
        self.assertIs(report.selected_evaluation, report.evaluations[best])

    def test_flow_densities_stay_frozen(self):
        """Test policy training leaves density parameters bit-identical"""
        env = make_env('point_mass', horizon=10)
        dataset = generate_demonstrations(env, make_expert(env), 2, seed=0)
        buffer = build_tuples(dataset)
        fit = DensityFitConfig(steps=5, batch_size=8)
        config = small_config(density_kind='flow', policy_loss='mse', chain_fit=fit, kernel_fit=fit,
                              flow=FlowSettings(n_blocks=1, hidden_width=4), iterations=10)
        p_hat, t_hat, fits = fit_transition_densities(buffer, config)
        self.assertEqual(set(fits), {CHAIN, KERNEL})
        before = [p_hat.model.parameter_vector(), t_hat.model.parameter_vector()]
        policy = build_policy(2, env.descriptor.action_space, hidden_width=8)
        PolicyTrainer(config).optimize(policy, buffer, p_hat, t_hat)
        np.testing.assert_array_equal(p_hat.model.parameter_vector(), before[0])
        np.testing.assert_array_equal(t_hat.model.parameter_vector(), before[1])

    def test_divergence_raises_with_report(self):
        """Test a non-finite loss aborts with the partial report"""
        buffer = build_tuples(self.dataset)
        values = np.full(buffer.n_tuples, np.nan)
        p_hat = FixedDensity(buffer.descriptor, CHAIN, values)
        t_hat = FixedDensity(buffer.descriptor, KERNEL, values)
        policy = CategoricalPolicy(2, 4, hidden_width=8)
        trainer = PolicyTrainer(small_config())
        with patch('src.mbil.trainer.PrecomputedDensity', side_effect=lambda density, _: density):
            with self.assertRaises(TrainingDivergedError) as ctx:
                trainer.optimize(policy, buffer, p_hat, t_hat)
        self.assertEqual(ctx.exception.iteration, 1)
        self.assertEqual(len(ctx.exception.report), 0)

    def test_interrupt_returns_partial_report(self):
        """Test Ctrl-C stops the loop and marks the report"""
        buffer = build_tuples(self.dataset)
        policy = CategoricalPolicy(2, 4, hidden_width=8)
        trainer = PolicyTrainer(small_config(alpha=0.0))
        with patch('src.mbil.trainer.objective_terms', side_effect=KeyboardInterrupt):
            report = trainer.optimize(policy, buffer)
        self.assertTrue(report.interrupted)
        self.assertEqual(len(report), 0)

    def test_dimension_mismatch(self):
        """Test datasets must match the environment descriptor"""
        with self.assertRaises(DatasetError):
            train(self.dataset, make_env('point_mass').descriptor, small_config())


class TestEvaluation(unittest.TestCase):
    """Test rollout-based evaluation"""

    def setUp(self):
        self.env = GridWorld(width=5, height=5, p_slip=0.1)
        self.expert = GridWorldExpert(self.env, epsilon=0.05)

    def test_episode_streams_are_independent(self):
        """Test the first episodes do not depend on the episode count"""
        short = evaluate_expert(self.expert, self.env, 3, seed=4)
        long = evaluate_expert(self.expert, self.env, 6, seed=4)
        self.assertEqual(short.returns, long.returns[:3])

    def test_expert_matches_exact_return(self):
        """Test Monte Carlo expert returns agree with policy evaluation"""
        result = evaluate_expert(self.expert, self.env, 300, seed=0)
        self.assertAlmostEqual(result.mean, self.expert.expected_return(), delta=1.0)

    def test_policy_evaluation_is_seeded(self):
        """Test identical seeds reproduce policy returns"""
        policy = CategoricalPolicy(2, 4, hidden_width=8)
        first = evaluate_policy(policy, self.env, 4, seed=(0, 1), deterministic=False)
        second = evaluate_policy(policy, self.env, 4, seed=(0, 1), deterministic=False)
        self.assertEqual(first.returns, second.returns)
        self.assertEqual(first.to_dict()['episodes'], 4)

    def test_random_is_worse_than_expert(self):
        """Test the random baseline sits below the expert"""
        expert = evaluate_expert(self.expert, self.env, 50, seed=1)
        random = evaluate_random(self.env, 50, seed=1)
        self.assertLess(random.mean, expert.mean)

    def test_continuous_actions_are_clipped(self):
        """Test out-of-range policy outputs are projected before stepping"""
        env = make_env('point_mass', horizon=5)
        policy = GaussianPolicy(2, 2, hidden_width=4)
        policy.mean_head.bias.values[:] = 10.0
        result = evaluate_policy(policy, env, 2, seed=0)
        self.assertEqual(result.n_episodes, 2)

    def test_normalized_score(self):
        """Test the expert maps to 1 and random to 0"""
        self.assertEqual(normalized_score(-10.0, -10.0, -50.0), 1.0)
        self.assertEqual(normalized_score(-50.0, -10.0, -50.0), 0.0)
        self.assertAlmostEqual(normalized_score(-14.0, -10.0, -50.0), 0.9)
        with self.assertRaises(ValueError):
            normalized_score(1.0, 2.0, 2.0)

    def test_episode_count_validated(self):
        """Test zero episodes are rejected"""
        with self.assertRaises(ValidationError):
            run_episodes(self.env, self.expert.act, 0, seed=0)


if __name__ == '__main__':
    unittest.main()
