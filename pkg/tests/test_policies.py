"""
Tests for categorical and Gaussian policies
"""

import math
import os
import tempfile
import unittest

import numpy as np
from scipy.integrate import trapezoid

from src.core import Tensor
from src.policies import (
    CategoricalPolicy,
    GaussianPolicy,
    LOG_STD_MAX,
    LOG_STD_MIN,
    PolicyLossKind,
    bc_loss,
    build_policy,
    load_policy,
    policy_loss_sum,
    policy_sample,
    raw_log_std_for,
    save_policy,
    squash_log_std,
)
from src.utils.errors import CheckpointError, EnvError, ShapeError
from tests.gradcheck import module_gradient, module_numerical_gradient, relative_error


class TestCategoricalPolicy(unittest.TestCase):
    """Test the softmax policy"""

    def setUp(self):
        self.policy = CategoricalPolicy(2, 4, hidden_width=8, seed=0)
        self.states = np.random.default_rng(1).uniform(0, 1, size=(6, 2))
        self.actions = np.array([0, 1, 2, 3, 1, 0])

    def test_probabilities_normalised(self):
        """Test each row is a distribution"""
        probs = self.policy.probabilities(self.states)
        np.testing.assert_allclose(probs.sum(axis=1), np.ones(6))

    def test_log_prob_matches_probabilities(self):
        """Test log_prob picks the log-probability of the taken action"""
        probs = self.policy.probabilities(self.states)
        expected = np.log(probs[np.arange(6), self.actions])
        np.testing.assert_allclose(self.policy.log_prob(self.states, self.actions).values, expected)

    def test_nll_gradient(self):
        """Test the summed NLL gradient against finite differences"""
        loss = lambda: policy_loss_sum(self.policy, self.states, self.actions)
        analytic = module_gradient(self.policy, loss)
        numeric = module_numerical_gradient(self.policy, loss)
        self.assertLess(relative_error(analytic, numeric), 1e-5)

    def test_mean_and_sum_losses(self):
        """Test bc_loss is the mean of the summed policy term"""
        total = policy_loss_sum(self.policy, self.states, self.actions).item()
        self.assertAlmostEqual(bc_loss(self.policy, self.states, self.actions).item(), total / 6)

    def test_mse_is_rejected(self):
        """Test squared error is undefined for categorical actions"""
        with self.assertRaises(ValueError):
            bc_loss(self.policy, self.states, self.actions, PolicyLossKind.MSE)

    def test_action_range_checked(self):
        """Test out-of-range and fractional actions"""
        with self.assertRaises(EnvError):
            self.policy.log_prob(self.states[:1], [4])
        with self.assertRaises(EnvError):
            self.policy.log_prob(self.states[:1], [0.5])
        with self.assertRaises(ShapeError):
            self.policy.log_prob(self.states, [0, 1])

    def test_empty_batch(self):
        """Test an empty batch is rejected"""
        with self.assertRaises(ValueError):
            bc_loss(self.policy, np.zeros((0, 2)), [])

    def test_act(self):
        """Test deterministic acting returns the mode and sampling is seeded"""
        state = self.states[0]
        mode = int(np.argmax(self.policy.probabilities(state)[0]))
        self.assertEqual(self.policy.act(state), mode)
        self.assertEqual(policy_sample(self.policy, state, seed=5),
                         policy_sample(self.policy, state, seed=5))
        self.assertIn(self.policy.act(state, np.random.default_rng(0), deterministic=False), range(4))

    def test_uniform_policy_sampling_frequencies(self):
        """Test a zeroed output layer samples each action a quarter of the time"""
        output = self.policy.net.layers[-1]
        output.weight.values[:] = 0.0
        output.bias.values[:] = 0.0
        state = self.states[0]
        np.testing.assert_allclose(self.policy.probabilities(state)[0], np.full(4, 0.25))
        rng = np.random.default_rng(0)
        draws = np.array([self.policy.sample(state, rng) for _ in range(100000)])
        frequencies = np.bincount(draws, minlength=4) / len(draws)
        np.testing.assert_allclose(frequencies, np.full(4, 0.25), atol=0.01)


class TestGaussianPolicy(unittest.TestCase):
    """Test the diagonal Gaussian policy"""

    def setUp(self):
        self.policy = GaussianPolicy(2, 2, hidden_width=8, seed=0)
        rng = np.random.default_rng(2)
        self.states = rng.normal(size=(5, 2))
        self.actions = rng.uniform(-1, 1, size=(5, 2))

    def test_log_std_squashing(self):
        """Test the log standard deviation stays inside its bounds"""
        out = squash_log_std(Tensor(np.array([-50.0, 0.0, 50.0]))).values
        self.assertTrue(np.all(out >= LOG_STD_MIN) and np.all(out <= LOG_STD_MAX))
        self.assertAlmostEqual(squash_log_std(Tensor(raw_log_std_for(0.3))).item(), 0.3)
        with self.assertRaises(ValueError):
            raw_log_std_for(LOG_STD_MAX)

    def test_log_prob_matches_closed_form(self):
        """Test log_prob against the diagonal normal density"""
        mean, log_std = self.policy.distribution(self.states)
        mu, sigma = mean.values, np.exp(log_std.values)
        expected = np.sum(-0.5 * ((self.actions - mu) / sigma) ** 2 - np.log(sigma)
                          - 0.5 * math.log(2 * math.pi), axis=1)
        np.testing.assert_allclose(self.policy.log_prob(self.states, self.actions).values, expected)

    def test_initial_log_std(self):
        """Test the log-std head starts near the requested value"""
        policy = GaussianPolicy(2, 2, hidden_width=8, seed=0, initial_log_std=-1.0)
        policy.log_std_head.weight.values[:] = 0.0
        _, log_std = policy.distribution(self.states)
        np.testing.assert_allclose(log_std.values, -1.0)

    def test_nll_and_mse_gradients(self):
        """Test both loss kinds against finite differences"""
        for kind in (PolicyLossKind.NLL, PolicyLossKind.MSE):
            with self.subTest(kind=kind):
                loss = lambda: policy_loss_sum(self.policy, self.states, self.actions, kind)
                analytic = module_gradient(self.policy, loss)
                numeric = module_numerical_gradient(self.policy, loss)
                self.assertLess(relative_error(analytic, numeric), 1e-5)

    def test_mse_value(self):
        """Test the squared error averages over action dimensions"""
        mean, _ = self.policy.distribution(self.states)
        expected = np.mean(np.sum((mean.values - self.actions) ** 2, axis=1) / 2)
        self.assertAlmostEqual(bc_loss(self.policy, self.states, self.actions, 'mse').item(), expected)

    def test_action_shape_checked(self):
        """Test actions of the wrong width"""
        with self.assertRaises(ShapeError):
            self.policy.log_prob(self.states, np.zeros((5, 3)))

    def test_mode_is_mean(self):
        """Test deterministic acting returns the mean"""
        mean, _ = self.policy.distribution(self.states[0])
        np.testing.assert_allclose(self.policy.act(self.states[0]), mean.values[0])

    def test_density_integrates_to_one(self):
        """Test a one-dimensional policy density integrates to one over eight standard deviations"""
        policy = GaussianPolicy(2, 1, hidden_width=8, seed=4, initial_log_std=-0.5)
        for state in self.states:
            with self.subTest(state=state.tolist()):
                mean, log_std = policy.distribution(state)
                mu, sigma = mean.values[0, 0], math.exp(log_std.values[0, 0])
                grid = np.linspace(mu - 8.0 * sigma, mu + 8.0 * sigma, 4001)
                states = np.tile(state, (len(grid), 1))
                density = np.exp(policy.log_prob(states, grid.reshape(-1, 1)).values)
                self.assertAlmostEqual(float(trapezoid(density, grid)), 1.0, delta=0.02)

    def test_mse_ignores_log_std(self):
        """Test the squared-error loss does not depend on the log-std head"""
        before = bc_loss(self.policy, self.states, self.actions, PolicyLossKind.MSE).item()
        nll_before = bc_loss(self.policy, self.states, self.actions, PolicyLossKind.NLL).item()
        rng = np.random.default_rng(9)
        self.policy.log_std_head.weight.values[:] = rng.normal(size=self.policy.log_std_head.weight.shape)
        self.policy.log_std_head.bias.values[:] = rng.normal(size=self.policy.log_std_head.bias.shape)
        after = bc_loss(self.policy, self.states, self.actions, PolicyLossKind.MSE).item()
        self.assertEqual(before, after)
        self.assertNotEqual(bc_loss(self.policy, self.states, self.actions, PolicyLossKind.NLL).item(), nll_before)


class TestPolicyFiles(unittest.TestCase):
    """Test building, saving and loading policies"""

    def test_build_from_action_space(self):
        """Test the family follows the action type"""
        self.assertIsInstance(build_policy(2, {'type': 'discrete', 'n': 4}), CategoricalPolicy)
        self.assertIsInstance(build_policy(2, {'type': 'continuous', 'dim': 2}), GaussianPolicy)
        with self.assertRaises(ValueError):
            build_policy(2, {'type': 'hybrid'})

    def test_save_and_load(self):
        """Test a saved policy reloads frozen with identical outputs"""
        policy = build_policy(2, {'type': 'continuous', 'dim': 2}, hidden_width=8, seed=3)
        states = np.random.default_rng(0).normal(size=(3, 2))
        with tempfile.TemporaryDirectory() as tmpdir:
            path = save_policy(policy, os.path.join(tmpdir, 'policy'))
            self.assertTrue(str(path).endswith('.npz'))
            loaded = load_policy(path)
        self.assertTrue(loaded.frozen)
        self.assertEqual(loaded.kind, 'gaussian')
        np.testing.assert_allclose(loaded.distribution(states)[0].values,
                                   policy.distribution(states)[0].values)

    def test_load_rejects_flow_checkpoint(self):
        """Test a flow checkpoint is not accepted as a policy"""
        from src.flows import FlowModel, save_flow
        with tempfile.TemporaryDirectory() as tmpdir:
            path = save_flow(FlowModel(1, 1, n_blocks=1, hidden_width=4), os.path.join(tmpdir, 'f.npz'))
            with self.assertRaises(CheckpointError):
                load_policy(path)


if __name__ == '__main__':
    unittest.main()
