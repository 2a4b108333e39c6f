import numpy as np
from hypothesis import given, settings, strategies as st

from partyeval import codec, weights
from partyeval.weights import (AttentionParams, Codebook, DenseLayer,
                               DenseStack, HPFParams, SplitMix64, dumpWeights,
                               loadWeights, seededAttention, seededDenseStack,
                               seededHPF, seededUniform)

from .helpers import ExtendedTestCase


def _splitmix(seed, count):
    """
    splitmix64 on Python integers.
    """
    mask = (1 << 64) - 1
    state = seed & mask
    result = []
    for _ in range(count):
        state = (state + 0x9E3779B97F4A7C15) & mask
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & mask
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & mask
        result.append(z ^ (z >> 31))
    return result


class TestSplitMix64(ExtendedTestCase):

    def test_firstDrawOfZero(self):
        self.assertEqual(int(SplitMix64(0).integers(1)[0]), 0xE220A8397B1DCDAF)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(min_value=0, max_value=2 ** 64 - 1))
    def test_matchesIntegerArithmetic(self, seed):
        drawn = [int(z) for z in SplitMix64(seed).integers(8)]
        self.assertEqual(drawn, _splitmix(seed, 8))

    def test_continues(self):
        stream = SplitMix64(42)
        first = stream.integers(3).tolist()
        second = stream.integers(3).tolist()
        self.assertEqual(first + second, SplitMix64(42).integers(6).tolist())

    def test_negativeSeed(self):
        self.assertEqual(SplitMix64(-1).seed, weights.MASK)

    def test_uniformRange(self):
        values = seededUniform(7, (50, 40))
        self.assertEqual(values.shape, (50, 40))
        self.assertTrue(values.min() >= -0.1 and values.max() < 0.1)

    def test_uniformFormula(self):
        z = _splitmix(9, 1)[0]
        expected = -0.1 + 0.2 * (z >> 11) / 2.0 ** 53
        self.assertEqual(float(seededUniform(9, 1)[0]), expected)

    def test_reproducible(self):
        self.assertTrue(np.array_equal(seededUniform(3, (4, 5)),
                                       seededUniform(3, (4, 5))))
        self.assertFalse(np.array_equal(seededUniform(3, (4, 5)),
                                        seededUniform(4, (4, 5))))


class TestActivations(ExtendedTestCase):

    def test_gelu(self):
        self.assert_close(weights.gelu(np.array([0.0, 1.0, -1.0])),
                          [0.0, 0.8413447460685429, -0.15865525393145707],
                          atol=1e-15)

    def test_geluTails(self):
        self.assert_close(weights.gelu(np.array([40.0, -40.0])), [40.0, 0.0])

    def test_relu(self):
        self.assert_close(weights.relu(np.array([-2.0, 3.0])), [0.0, 3.0])


class TestContainers(ExtendedTestCase):

    def test_denseLayer(self):
        layer = DenseLayer([[1.0, -1.0], [2.0, 0.0]], [0.5, 0.5], 'relu')
        self.assert_close(layer(np.array([1.0, 1.0])), [3.5, 0.0])

    def test_biasMismatch(self):
        self.assertRaises(codec.EvalError, DenseLayer, np.eye(2), np.zeros(3))

    def test_unknownActivation(self):
        self.assertRaises(codec.EvalError, DenseLayer, np.eye(2), np.zeros(2),
                          'tanh')

    def test_nonFinite(self):
        self.assertRaises(codec.EvalError, DenseLayer, [[np.nan]], [0.0])

    def test_stackChain(self):
        self.assertRaises(codec.EvalError, DenseStack,
                          (DenseLayer(np.eye(2), np.zeros(2)),
                           DenseLayer(np.eye(3), np.zeros(3))))

    def test_emptyStack(self):
        self.assertRaises(codec.EvalError, DenseStack, ())

    def test_stackInputDimension(self):
        stack = DenseStack.identity(3)
        self.assert_eval_error(codec.VALIDATION_ERROR, stack, np.ones(4))

    def test_identity(self):
        x = np.array([[-1.0, 2.0], [3.0, -4.0]])
        self.assert_close(DenseStack.identity(2)(x), x)

    def test_attentionWidth(self):
        self.assertRaises(codec.EvalError, AttentionParams, np.ones((4, 10)),
                          heads=2, head_dim=4)

    def test_attentionPartsMustMatch(self):
        self.assertRaises(codec.EvalError, AttentionParams, np.ones((4, 8)),
                          heads=2, head_dim=4, part_keys={'arms': np.ones((4, 8))})

    def test_keyValue(self):
        params = seededAttention(1, 4, heads=2, head_dim=3, parts=('arms', 'legs'))
        self.assertIsNone(params.wk)
        self.assertEqual(params.keyValue('legs')[0].shape, (4, 6))
        self.assert_eval_error(codec.VALIDATION_ERROR, params.keyValue)
        self.assert_eval_error(codec.LOOKUP_ERROR, params.keyValue, 'head')

    def test_swappedParts(self):
        params = seededAttention(1, 4, heads=2, head_dim=3, parts=('arms', 'legs'))
        swapped = params.swappedParts('arms', 'legs')
        self.assertTrue(np.array_equal(swapped.part_keys['arms'],
                                       params.part_keys['legs']))
        self.assertTrue(np.array_equal(swapped.part_values['legs'],
                                       params.part_values['arms']))
        self.assertTrue(np.array_equal(swapped.wq, params.wq))

    def test_hpfSplitTokens(self):
        self_attn = seededAttention(1, 4, heads=1, head_dim=4, d_out=4)
        cross = seededAttention(2, 4, heads=1, head_dim=4, d_out=4,
                                parts=('arms', 'legs'))
        self.assertRaises(codec.EvalError, HPFParams, self_attn, cross,
                          np.zeros((3, 4)))
        self.assertRaises(codec.EvalError, HPFParams, self_attn, cross,
                          np.zeros((2, 5)))


class TestSeeded(ExtendedTestCase):

    def test_denseStackOrder(self):
        stack = seededDenseStack(5, (4, 8, 2))
        stream = SplitMix64(5)
        self.assertTrue(np.array_equal(stack.layers[0].weight, stream.uniform((4, 8))))
        self.assertTrue(np.array_equal(stack.layers[0].bias, stream.uniform(8)))
        self.assertTrue(np.array_equal(stack.layers[1].weight, stream.uniform((8, 2))))
        self.assertEqual([l.activation for l in stack.layers], ['relu', 'none'])

    def test_sharedStream(self):
        stream = SplitMix64(5)
        a = seededDenseStack(stream, (3, 3))
        b = seededDenseStack(stream, (3, 3))
        self.assertFalse(np.array_equal(a.layers[0].weight, b.layers[0].weight))
        self.assertEqual(stream.drawn, 24)

    def test_codebookDefaults(self):
        codebook = weights.seededCodebook(0)
        self.assertEqual((codebook.size, codebook.dim), (256, 128))
        part = weights.seededPartCodebook(0)
        self.assertEqual((part.size, part.dim), (128, 128))

    def test_gteDefaults(self):
        ws = weights.seededGTE(0, 16)
        self.assertEqual([w.shape for w in ws], [(16, 128), (128, 128), (128, 128)])
        self.assert_eval_error(codec.VALIDATION_ERROR, weights.seededGTE, 0, 16,
                               layers=0)

    def test_ptgDraws(self):
        stream = SplitMix64(9)
        mlps = weights.seededPTG(stream, dim=4, count=2)
        self.assertEqual(stream.drawn, 2 * 3 * (4 * 4 + 4))
        self.assert_eval_error(codec.VALIDATION_ERROR, weights.seededPTG, 0,
                               count=0)
        self.assertEqual(mlps[1].inputDim, 4)

    def test_hpfShapes(self):
        params = seededHPF(0, dim=8, heads=2, head_dim=4)
        self.assertEqual(params.split_tokens.shape, (2, 8))
        self.assertEqual(params.self_attn.wo.shape, (8, 8))
        self.assertEqual(sorted(params.cross_attn.part_keys), ['arms', 'legs'])


class TestWeightFiles(ExtendedTestCase):

    def test_denseStackRoundTrip(self):
        stack = seededDenseStack(1, (3, 4, 2), activation='gelu')
        again = loadWeights(dumpWeights(stack))
        self.assertEqual(dumpWeights(again), dumpWeights(stack))
        x = np.linspace(-1, 1, 3)
        self.assertTrue(np.array_equal(again(x), stack(x)))

    def test_codebookRoundTrip(self):
        codebook = weights.seededCodebook(2, size=5, dim=3)
        again = weights.loadCodebook(dumpWeights(codebook))
        self.assertTrue(np.array_equal(again.entries, codebook.entries))

    def test_attentionRoundTrip(self):
        params = seededAttention(3, 4, heads=2, head_dim=2, d_out=4,
                                 parts=('arms', 'legs'))
        again = weights.loadAttention(dumpWeights(params))
        self.assertTrue(np.array_equal(again.part_values['legs'],
                                       params.part_values['legs']))
        self.assertEqual((again.heads, again.head_dim), (2, 2))

    def test_defaultActivation(self):
        stack = loadWeights('{"kind": "dense_stack", '
                            '"layers": [{"w": [[1, 0]], "b": [0, 0]}]}')
        self.assertEqual(stack.layers[0].activation, 'relu')

    def test_unknownKind(self):
        self.assert_eval_error(codec.LOOKUP_ERROR, loadWeights,
                               '{"kind": "lstm"}')

    def test_malformedLayer(self):
        e = self.assert_eval_error(codec.VALIDATION_ERROR, loadWeights,
                                   '{"kind": "dense_stack", "layers": [{"w": []}]}',
                                   'w.json')
        self.assertEqual(e.source, 'w.json')

    def test_wrongKind(self):
        codebook = Codebook(np.eye(2))
        self.assert_eval_error(codec.VALIDATION_ERROR, weights.loadDenseStack,
                               dumpWeights(codebook))

    def test_syntaxError(self):
        self.assert_eval_error(codec.PARSE_ERROR, loadWeights, '{"kind": ')
