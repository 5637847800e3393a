"""
Tests for experiment configuration, multi-run helpers and the command line
"""

import contextlib
import io
import json
import os
import tempfile
import unittest
from pathlib import Path

from main import EXIT_RUNTIME, EXIT_SUCCESS, EXIT_USAGE, main
from src.experiments import ExperimentRunner, load_config, resolve_config
from src.experiments.config import RESOLVED_NAME, apply_override, default_config, parse_override
from src.experiments.sweep import RunOutcome, RunSpec, run_parallel, summarize
from src.utils import read_csv
from src.utils.validation import ValidationError

# Small enough for a full train / evaluate / density-check cycle in seconds
TINY = [
    'env.gridworld.width=4', 'env.gridworld.height=4', 'env.gridworld.horizon=30',
    'dataset.pool_size=5', 'dataset.n_trajectories=3',
    'mbil.iterations=5', 'mbil.batch_size=8', 'mbil.hidden_width=4', 'mbil.log_every=1',
    'density.steps=2', 'density.batch_size=8', 'density.n_blocks=1', 'density.hidden_width=4',
    'evaluation.every=5', 'evaluation.episodes=3', 'evaluation.check_tuples=20',
    'run.seeds=[0]',
]


def run_main(argv):
    """Run the entry point, returning the exit code and the parsed JSON output."""
    stdout = io.StringIO()
    with contextlib.redirect_stdout(stdout):
        code = main(argv)
    return code, json.loads(stdout.getvalue())


def overrides(*extra):
    args = []
    for text in list(TINY) + list(extra):
        args.extend(['--set', text])
    return args


class TestLoadConfig(unittest.TestCase):
    """Test defaults, user files and overrides"""

    def test_defaults(self):
        """Test the schema defaults"""
        tree = load_config()
        self.assertEqual(tree['env']['name'], 'gridworld')
        self.assertEqual(tree['mbil']['alpha'], 0.001)
        self.assertEqual(tree['density']['hidden_width'], 64)
        self.assertIsNone(tree['evaluation']['episodes'])
        self.assertEqual(tree, default_config())

    def test_overrides(self):
        """Test dotted overrides parse their values as YAML"""
        tree = load_config(overrides=['mbil.alpha=0.5', 'run.seeds=[3, 4]', 'env.name=point_mass'])
        self.assertEqual(tree['mbil']['alpha'], 0.5)
        self.assertEqual(tree['run']['seeds'], [3, 4])
        self.assertEqual(tree['env']['name'], 'point_mass')
        self.assertEqual(parse_override('dataset.path='), (['dataset', 'path'], None))

    def test_bad_overrides(self):
        """Test malformed, unknown and out-of-range overrides"""
        for text in ('mbil.alpha', '=1', 'mbil.gamma=1', 'nothing.alpha=1',
                     'mbil.alpha=-1', 'mbil.select=worst', 'mbil.iterations=1.5'):
            with self.subTest(text=text):
                with self.assertRaises(ValidationError):
                    load_config(overrides=[text])

    def test_weights_cannot_both_be_zero(self):
        """Test the cross-field weight rule"""
        with self.assertRaises(ValidationError):
            load_config(overrides=['mbil.alpha=0', 'mbil.beta=0'])

    def test_apply_override_copies(self):
        """Test overrides leave the original tree untouched"""
        tree = default_config()
        updated = apply_override(tree, 'mbil.beta=2.0')
        self.assertEqual(tree['mbil']['beta'], 1.0)
        self.assertEqual(updated['mbil']['beta'], 2.0)

    def test_user_file(self):
        """Test a YAML file merges over the defaults and overrides win"""
        with tempfile.TemporaryDirectory() as tmpdir:
            path = os.path.join(tmpdir, 'experiment.yaml')
            with open(path, 'w') as f:
                f.write('mbil:\n  alpha: 0.25\n  iterations: 10\nenv:\n  gridworld:\n    p_slip: 0.2\n')
            tree = load_config(path, overrides=['mbil.iterations=7'])
        self.assertEqual(tree['mbil']['alpha'], 0.25)
        self.assertEqual(tree['mbil']['iterations'], 7)
        self.assertEqual(tree['env']['gridworld']['p_slip'], 0.2)
        self.assertEqual(tree['env']['gridworld']['width'], 5)

    def test_bad_user_files(self):
        """Test missing files, unknown keys and non-mapping documents"""
        with tempfile.TemporaryDirectory() as tmpdir:
            with self.assertRaises(ValidationError):
                load_config(os.path.join(tmpdir, 'absent.yaml'))
            for name, text in (('unknown.yaml', 'mbil:\n  gamma: 1\n'), ('list.yaml', '- 1\n- 2\n')):
                path = os.path.join(tmpdir, name)
                with open(path, 'w') as f:
                    f.write(text)
                with self.subTest(name=name):
                    with self.assertRaises(ValidationError):
                        load_config(path)


class TestResolveConfig(unittest.TestCase):
    """Test environment-dependent defaults"""

    def test_discrete_defaults(self):
        """Test grid world auto values"""
        config = resolve_config(load_config())
        self.assertEqual(config.evaluation.episodes, 300)
        self.assertEqual(config.run.seeds, tuple(range(10)))
        self.assertEqual(config.mbil.policy_loss, 'nll')
        self.assertEqual(config.dataset.horizon, 100)
        self.assertEqual(config.dataset.pool_size, 1000)
        self.assertEqual(config.ablation_grid[0], (1.0, 0.0))

    def test_continuous_defaults(self):
        """Test point mass auto values"""
        config = resolve_config(load_config(overrides=['env.name=point_mass', 'run.seed=4']))
        self.assertEqual(config.evaluation.episodes, 10)
        self.assertEqual(config.run.seeds, (4, 5, 6, 7, 8))
        self.assertEqual(config.mbil.policy_loss, 'mse')
        self.assertEqual(config.env.descriptor.action_type, 'continuous')

    def test_explicit_values_kept(self):
        """Test user values are not replaced by auto values"""
        config = resolve_config(load_config(overrides=['evaluation.episodes=7', 'run.n_seeds=2',
                                                       'dataset.horizon=12']))
        self.assertEqual(config.evaluation.episodes, 7)
        self.assertEqual(config.run.seeds, (0, 1))
        self.assertEqual(config.dataset.horizon, 12)

    def test_inconsistent_settings(self):
        """Test combinations that cannot run"""
        cases = [
            ['mbil.policy_loss=mse'],
            ['env.name=point_mass', 'density.kind=tabular'],
            ['run.seeds=[1, 1]'],
            ['ablation.grid=[[1.0]]'],
        ]
        for case in cases:
            with self.subTest(case=case):
                with self.assertRaises(ValidationError):
                    resolve_config(load_config(overrides=case))

    def test_library_settings(self):
        """Test the per-seed MbilConfig and the weight override"""
        config = resolve_config(load_config(overrides=['evaluation.every=0']))
        mbil = config.mbil_config(3)
        self.assertEqual(mbil.seed, 3)
        self.assertEqual(mbil.chain_fit.seed, 6)
        self.assertEqual(mbil.kernel_fit.seed, 7)
        self.assertEqual(mbil.eval_every, 0)
        self.assertEqual(mbil.flow.hidden_width, 64)
        weighted = config.with_weights(1.0, 0.0)
        self.assertEqual((weighted.mbil.alpha, weighted.mbil.beta), (1.0, 0.0))
        self.assertEqual(weighted.to_dict()['mbil']['alpha'], 1.0)
        self.assertEqual(config.mbil.alpha, 0.001)


class TestSweepHelpers(unittest.TestCase):
    """Test run identifiers, parallel execution and summaries"""

    def setUp(self):
        self.config = resolve_config(load_config())

    def spec(self, seed=0, n=1):
        return RunSpec('train', self.config, seed, n, 'pool.jsonl', 'runs', 'train')

    def test_run_id_is_stable(self):
        """Test identical settings give identical directory names"""
        self.assertEqual(self.spec().run_id, self.spec().run_id)
        self.assertNotEqual(self.spec().run_id, self.spec(seed=1).run_id)
        self.assertTrue(self.spec(n=3).run_id.startswith('train-gridworld-a0.001-b1-n3-s0-'))

    def test_run_parallel_keeps_order(self):
        """Test results come back in input order with and without workers"""
        self.assertEqual(run_parallel(abs, [-3, 1, -2]), [3, 1, 2])
        self.assertEqual(run_parallel(abs, [-3, 1, -2], workers=2), [3, 1, 2])
        self.assertEqual(run_parallel(abs, []), [])

    def test_summarize(self):
        """Test per-group statistics and groups without evaluations"""
        outcomes = [
            RunOutcome('a', 'n=1', 0, 1, 0.001, 1.0, 'runs/a', -10.0, 1.0),
            RunOutcome('b', 'n=1', 1, 1, 0.001, 1.0, 'runs/b', -14.0, 1.0),
            RunOutcome('c', 'n=1', 2, 1, 0.001, 1.0, 'runs/c', -12.0, 1.0),
            RunOutcome('d', 'n=3', 0, 3, 0.001, 1.0, 'runs/d', None, None),
        ]
        rows = summarize(outcomes)
        self.assertEqual([r['group'] for r in rows], ['n=1', 'n=3'])
        self.assertEqual(rows[0]['n_runs'], 3)
        self.assertAlmostEqual(rows[0]['return_mean'], -12.0)
        self.assertEqual(rows[0]['return_median'], -12.0)
        self.assertAlmostEqual(rows[0]['return_std'], (8 / 3) ** 0.5)
        self.assertIsNone(rows[1]['return_mean'])

    def test_unknown_command(self):
        """Test the runner rejects commands it does not know"""
        with tempfile.TemporaryDirectory() as tmpdir:
            with self.assertRaises(ValidationError):
                ExperimentRunner(self.config, tmpdir).run('plot')


class TestCommandLine(unittest.TestCase):
    """Test exit codes and the JSON output envelope"""

    def test_usage_errors(self):
        """Test missing commands and arguments exit with the usage code"""
        for argv in ([], ['fly'], ['evaluate'], ['train', '--seed', 'x']):
            with self.subTest(argv=argv):
                code, output = run_main(argv)
                self.assertEqual(code, EXIT_USAGE)
                self.assertEqual(output['status'], 'error')

    def test_invalid_configuration(self):
        """Test bad settings exit with the usage code and name the command"""
        code, output = run_main(['train', '--set', 'mbil.gamma=1'])
        self.assertEqual(code, EXIT_USAGE)
        self.assertIn('mbil.gamma', output['message'])
        self.assertEqual(output['context']['command'], 'train')

    def test_sweep_larger_than_pool(self):
        """Test sweep sizes beyond the pool are rejected before any work"""
        with tempfile.TemporaryDirectory() as tmpdir:
            code, _ = run_main(['sweep', '--out', tmpdir, '--set', 'dataset.sizes=[2000]'])
            self.assertEqual(code, EXIT_USAGE)
            self.assertEqual(os.listdir(tmpdir), [])

    def test_runtime_failure(self):
        """Test a missing checkpoint exits with the runtime code"""
        with tempfile.TemporaryDirectory() as tmpdir:
            code, output = run_main(['evaluate', '--checkpoint', os.path.join(tmpdir, 'none.npz'),
                                     '--out', tmpdir] + overrides())
        self.assertEqual(code, EXIT_RUNTIME)
        self.assertIn('evaluate failed', output['message'])


class TestEndToEnd(unittest.TestCase):
    """Run the commands on a tiny grid world"""

    @classmethod
    def setUpClass(cls):
        cls.tmpdir = tempfile.TemporaryDirectory()
        cls.out = Path(cls.tmpdir.name)
        cls.code, cls.output = run_main(['train', '--out', str(cls.out)] + overrides())

    @classmethod
    def tearDownClass(cls):
        cls.tmpdir.cleanup()

    def run_dir(self):
        return Path(self.output['data']['runs'][0]['run_dir'])

    def test_train_outputs(self):
        """Test train writes the pool, run directory and aggregate files"""
        self.assertEqual(self.code, EXIT_SUCCESS, self.output)
        runs = self.output['data']['runs']
        self.assertEqual(len(runs), 1)
        self.assertIsNotNone(runs[0]['return_mean'])
        self.assertEqual(len(list(self.out.glob('expert_gridworld_*.jsonl'))), 1)
        for name in (RESOLVED_NAME, 'metrics.csv', 'summary.csv'):
            self.assertTrue((self.out / name).exists(), name)
        for name in ('policy.npz', 'report.csv', 'metrics.csv', RESOLVED_NAME,
                     'chain_flow.npz', 'kernel_flow.npz'):
            self.assertTrue((self.run_dir() / name).exists(), name)

    def test_report_rows(self):
        """Test one report row per iteration with the evaluation on the last"""
        rows = read_csv(self.run_dir() / 'report.csv')
        self.assertEqual([int(r['iteration']) for r in rows], [1, 2, 3, 4, 5])
        self.assertEqual(rows[0]['eval_return_mean'], '')
        self.assertNotEqual(rows[-1]['eval_return_mean'], '')
        summary = read_csv(self.out / 'summary.csv')
        self.assertEqual(summary[0]['n_runs'], '1')

    def test_resolved_run_config(self):
        """Test the run directory records the seed and dataset it used"""
        config = resolve_config(load_config(self.run_dir() / RESOLVED_NAME))
        self.assertEqual(config.run.seeds, (0,))
        self.assertEqual(config.dataset.n_trajectories, 3)
        self.assertTrue(config.dataset.path.endswith('.jsonl'))

    def test_evaluate(self):
        """Test a trained checkpoint scores against the expert and random baselines"""
        code, output = run_main(['evaluate', '--checkpoint', str(self.run_dir() / 'policy.npz'),
                                 '--episodes', '4', '--out', str(self.out)] + overrides())
        self.assertEqual(code, EXIT_SUCCESS, output)
        self.assertEqual(output['data']['policy']['episodes'], 4)
        self.assertIn('normalized_score', output['data'])

    def test_evaluate_rejects_other_environment(self):
        """Test a grid world policy cannot be evaluated on the point mass"""
        code, output = run_main(['evaluate', '--checkpoint', str(self.run_dir() / 'policy.npz'),
                                 '--set', 'env.name=point_mass'])
        self.assertEqual(code, EXIT_RUNTIME)
        self.assertIn('trained for', output['message'])

    def test_density_check(self):
        """Test fitted flows are compared with the exact densities"""
        code, output = run_main(['density-check', '--run-dir', str(self.run_dir())])
        self.assertEqual(code, EXIT_SUCCESS, output)
        report = output['data']
        self.assertEqual(report['n_tuples'], 20)
        for target in ('chain', 'kernel'):
            self.assertGreaterEqual(report[target]['mean_abs_log_error'], 0.0)
        self.assertIn('balance_residual_mean', report)

    def test_density_check_needs_flows(self):
        """Test a directory without fitted flows"""
        code, _ = run_main(['density-check', '--run-dir', str(self.out / 'missing')])
        self.assertEqual(code, EXIT_RUNTIME)

    def test_ablate_reuses_pool(self):
        """Test ablate writes one CSV per weight pair from the existing pool"""
        code, output = run_main(['ablate', '--out', str(self.out)]
                                + overrides('ablation.grid=[[1.0, 0.0], [0.0, 1.0]]'))
        self.assertEqual(code, EXIT_SUCCESS, output)
        names = sorted(Path(p).name for p in output['data']['files'])
        self.assertEqual(names, ['ablation_alpha0_beta1.csv', 'ablation_alpha1_beta0.csv'])
        self.assertEqual(len(list(self.out.glob('expert_gridworld_*.jsonl'))), 1)
        self.assertEqual([row['group'] for row in output['data']['summary']],
                         ['alpha=1,beta=0', 'alpha=0,beta=1'])


if __name__ == '__main__':
    unittest.main()
