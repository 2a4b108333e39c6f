import io

from twisted.logger import LogLevel
from twisted.python import usage

from partyeval import cli

from .dummymotion import embeddingLines
from .helpers import ExtendedTestCase


class TestLogLevel(ExtendedTestCase):

    def test_default(self):
        self.assertEqual(cli.logLevelFromEnv({}), (LogLevel.warn, None))

    def test_caseInsensitive(self):
        self.assertEqual(cli.logLevelFromEnv({cli.LOG_ENV: ' DEBUG '}),
                         (LogLevel.debug, None))

    def test_unknown(self):
        self.assertEqual(cli.logLevelFromEnv({cli.LOG_ENV: 'loud'}),
                         (LogLevel.warn, 'loud'))


class TestOptions(ExtendedTestCase):

    def parse(self, argv):
        options = cli.Options()
        options.parseOptions(argv)
        return cli.configFromOptions(options)

    def test_coherence(self):
        config = self.parse(['coherence', '--input', 'motions', '--stats',
                             's.json', '--strict', '-j', '2', '--reps', '10'])
        self.assertEqual((config.command, config.inputs, config.stats),
                         ('coherence', ('motions',), 's.json'))
        self.assertEqual((config.strict, config.jobs, config.reps, config.seed),
                         (True, 2, 10, 42))

    def test_coherenceNeedsStats(self):
        self.assertRaises(usage.UsageError, self.parse,
                          ['coherence', '--input', 'motions'])

    def test_paramsOrPreset(self):
        self.assertRaises(usage.UsageError, self.parse,
                          ['coherence', '-i', 'm', '--stats', 's', '--params',
                           'p.json', '--preset', 'kitml'])

    def test_unknownSkeleton(self):
        self.assertRaises(usage.UsageError, self.parse,
                          ['build-stats', '--corpus', 'c', '-s', 'smpl24'])

    def test_unknownSkeletonWithPartition(self):
        config = self.parse(['build-stats', '--corpus', 'c', '-s', 'smpl24',
                             '--partition', 'p.json'])
        self.assertEqual((config.skeleton, config.partition), ('smpl24', 'p.json'))

    def test_featuresMetricFirst(self):
        config = self.parse(['features', 'mmdist', '--gen', 'g.jsonl', '-j', '1'])
        self.assertEqual((config.metric, config.inputs, config.jobs),
                         ('mmdist', ('g.jsonl',), 1))

    def test_featuresMetricLast(self):
        config = self.parse(['features', '--gen', 'g.jsonl', 'diversity'])
        self.assertEqual(config.metric, 'diversity')

    def test_unknownMetric(self):
        self.assertRaises(usage.UsageError, self.parse,
                          ['features', 'bleu', '--gen', 'g.jsonl'])

    def test_badSeed(self):
        self.assertRaises(usage.UsageError, self.parse,
                          ['features', 'fid', '--gen', 'g', '--ref', 'r',
                           '--seed', '-3'])

    def test_badJobs(self):
        self.assertRaises(usage.UsageError, self.parse,
                          ['build-stats', '--corpus', 'c', '-j', '0'])

    def test_selftest(self):
        config = self.parse(['kernels', 'selftest', '--seed', '7'])
        self.assertEqual((config.command, config.seed), ('kernels-selftest', 7))

    def test_kernelsNeedsSubcommand(self):
        self.assertRaises(usage.UsageError, self.parse, ['kernels'])

    def test_help(self):
        self.patch(cli.sys, 'stdout', io.StringIO())
        self.assertRaises(SystemExit, self.parse, ['--help'])


class TestMain(ExtendedTestCase):

    def main(self, argv):
        self.stdout, self.stderr = io.StringIO(), io.StringIO()
        return cli.main(None, argv, self.stdout, self.stderr)

    def test_missingCommand(self):
        self.assertEqual(self.successResultOf(self.main([])), 1)
        self.assertIn('Missing command', self.stderr.getvalue())

    def test_unknownFlag(self):
        d = self.main(['coherence', '--bogus'])
        self.assertEqual(self.successResultOf(d), 1)
        self.assertIn('bogus', self.stderr.getvalue())

    def test_invalidConfig(self):
        d = self.main(['features', 'fid', '--gen', 'g.jsonl'])
        self.assertEqual(self.successResultOf(d), 1)
        self.assertIn('--ref', self.stderr.getvalue())

    def test_features(self):
        gen = self.workspace().child('gen.jsonl')
        records = [{'id': str(i), 'text_vec': [float(i), 0.0],
                    'motion_vec': [float(i), 1.0]} for i in range(4)]
        gen.setContent(embeddingLines(records).encode('utf-8'))

        def check(code):
            self.assertEqual(code, 0)
            self.assert_json_values(self.stdout.getvalue(), metric='mmdist',
                                    mean=1.0, ci95=0.0)
        d = self.main(['features', 'mmdist', '--gen', gen.path, '--reps', '2',
                       '-j', '1'])
        return d.addCallback(check)

    def test_missingInput(self):
        d = self.main(['features', 'mmdist', '--gen',
                       self.workspace().child('none.jsonl').path, '-j', '1'])
        return d.addCallback(self.assertEqual, 2)

    def test_selftestOutput(self):
        def check(code):
            self.assertEqual(code, 0)
            lines = self.stdout.getvalue().splitlines()
            self.assertTrue(lines[-1].endswith(' passed, 0 failed'))
        return self.main(['kernels', 'selftest']).addCallback(check)

    def test_exit(self):
        cli._exit(0)
        e = self.assertRaises(SystemExit, cli._exit, 2)
        self.assertEqual(e.code, 2)


class TestHelpText(ExtendedTestCase):

    def test_commandsListed(self):
        text = str(cli.Options())
        for command in ('coherence', 'build-stats', 'features', 'kernels'):
            self.assertIn(command, text)
