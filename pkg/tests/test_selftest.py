"""
PYTEST_DONT_REWRITE
"""

import numpy as np

from partyeval import kernels, selftest
from partyeval.selftest import KernelSelfTest, PropertyResult, runSelfTest

from .helpers import ExtendedTestCase


class BrokenSelfTest(KernelSelfTest):

    def property_always_fails(self, rng):
        assert False, 'broken on purpose'

    def property_raises(self, rng):
        raise ValueError('bad value')


class TestKernelSelfTest(ExtendedTestCase):

    def test_allPass(self):
        results = runSelfTest(seed=0, cases=5)
        self.assertEqual([r.line() for r in results if not r.passed], [])
        self.assertEqual(len(results), len(KernelSelfTest().names()))

    def test_otherSeed(self):
        self.assertTrue(all(r.passed for r in runSelfTest(seed=2 ** 40, cases=3)))

    def test_names(self):
        names = KernelSelfTest().names()
        self.assertEqual(names, sorted(names))
        for name in ('lte_oracle', 'gate_oracle', 'hpf_oracle',
                     'hpf_part_symmetry', 'cycle_schedule',
                     'diversity_identical', 'vq_exhaustive'):
            self.assertIn(name, names)

    def test_selected(self):
        results = runSelfTest(cases=2, names=['nll_uniform', 'vq_exhaustive'])
        self.assertEqual([r.name for r in results], ['nll_uniform', 'vq_exhaustive'])

    def test_unknownName(self):
        (result,) = runSelfTest(names=['no_such_thing'])
        self.assertFalse(result.passed)
        self.assertEqual(result.line(), 'FAIL no_such_thing: no such property')

    def test_failuresAreReported(self):
        results = BrokenSelfTest(cases=1).run(['always_fails', 'raises'])
        self.assertEqual([r.line() for r in results],
                         ['FAIL always_fails: broken on purpose',
                          'FAIL raises: ValueError: bad value'])

    def test_sameStreamPerProperty(self):
        a = KernelSelfTest(seed=3)._rng('lte_oracle').integers(1000, size=4)
        b = KernelSelfTest(seed=3)._rng('lte_oracle').integers(1000, size=4)
        c = KernelSelfTest(seed=3)._rng('gte_oracle').integers(1000, size=4)
        self.assertEqual(a.tolist(), b.tolist())
        self.assertNotEqual(a.tolist(), c.tolist())

    def test_passLine(self):
        self.assertEqual(PropertyResult('x', True).line(), 'PASS x')

    def test_defaults(self):
        self.assertEqual(selftest.CASES, 100)

    def test_gateOracleCatchesUniformGate(self):
        def uniformGate(embeddings, gate):
            weights = np.full(len(embeddings), 1.0 / len(embeddings))
            return weights @ embeddings, weights
        self.patch(kernels, 'partGate', uniformGate)
        (result,) = runSelfTest(cases=20, names=['gate_oracle'])
        self.assertFalse(result.passed)

    def test_hpfOracleRunsEveryCase(self):
        calls = []
        hpf = kernels.hpf

        def countingHPF(*args):
            calls.append(1)
            return hpf(*args)
        self.patch(kernels, 'hpf', countingHPF)
        (result,) = runSelfTest(cases=12, names=['hpf_oracle'])
        self.assertTrue(result.passed, result.line())
        self.assertEqual(len(calls), 12)
