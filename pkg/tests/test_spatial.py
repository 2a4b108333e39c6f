import math

import numpy as np
from hypothesis import given, settings, strategies as st

from partyeval import codec, spatial
from partyeval.motion import MotionSequence, PartitionMap, defaultPartition
from partyeval.spatial import (RefStats, buildReferenceStats, consistencyScore,
                               interPartDistance, partTorsoAngle,
                               spatialCoherence)
from partyeval.temporal import CoherenceParams

from .dummymotion import (jitteredMotion, randomMotion, randomRigid,
                          staticMotion)
from .helpers import ExtendedTestCase

# torso from joint 0 up to joint 1, a two joint arm sticking out along x
_TORSO_AND_ARM = PartitionMap({'torso': (0, 1), 'arm': (2, 3)},
                              {'torso': 1, 'arm': 3}, ('arm',), 0, 1,
                              skeleton_id='custom')
_UPRIGHT = [[0, 0, 0], [0, 1, 0], [1, 0, 0], [2, 0, 0]]


def _custom(frames, name='custom'):
    return MotionSequence('custom', 20.0, np.array(frames, dtype=float), name)


def _staticStats(seq, partition, offset, std):
    """
    Stats whose means sit `offset` below the values of frame 0 of seq.
    """
    pairs = {'%s|%s' % tuple(sorted((g, h))):
             (interPartDistance(seq, partition, g, h, 0) - offset, std)
             for g, h in partition.pairs()}
    angles = {g: (partTorsoAngle(seq, partition, g, 0) - offset, std)
              for g in partition.angle_parts}
    return RefStats(seq.skeleton_id, pairs, angles, seq.frameCount, 'x')


class TestGeometry(ExtendedTestCase):

    def test_distance(self):
        seq = _custom([[[0, 0, 0], [0, 1, 0], [3, 4, 0], [3, 4, 0]]] * 2)
        self.assert_close(interPartDistance(seq, _TORSO_AND_ARM, 'torso', 'arm', 1),
                          math.hypot(3, 3.5))

    def test_distanceSamePart(self):
        seq = _custom([_UPRIGHT] * 2)
        self.assert_eval_error(codec.VALIDATION_ERROR, interPartDistance, seq,
                               _TORSO_AND_ARM, 'arm', 'arm', 0)

    def test_distanceUnknownPart(self):
        seq = _custom([_UPRIGHT] * 2)
        self.assert_eval_error(codec.LOOKUP_ERROR, interPartDistance, seq,
                               _TORSO_AND_ARM, 'arm', 'leg', 0)

    def test_rightAngle(self):
        seq = _custom([_UPRIGHT] * 2)
        self.assert_close(partTorsoAngle(seq, _TORSO_AND_ARM, 'arm', 0),
                          math.pi / 2, atol=1e-15)

    def test_parallel(self):
        seq = _custom([[[0, 0, 0], [0, 1, 0], [1, 0, 0], [1, 1, 0]]] * 2)
        self.assert_close(partTorsoAngle(seq, _TORSO_AND_ARM, 'arm', 0), 0.0,
                          atol=1e-7)

    def test_degenerate(self):
        seq = _custom([[[0, 0, 0], [0, 1, 0], [1, 0, 0], [1, 0, 0]]] * 2)
        e = self.assert_eval_error(codec.DEGENERATE_GEOMETRY, partTorsoAngle,
                                   seq, _TORSO_AND_ARM, 'arm', 1)
        self.assertEqual(e.data, {'part': 'arm', 'frame': 1})

    def test_notAnAnglePart(self):
        seq = _custom([_UPRIGHT] * 2)
        self.assert_eval_error(codec.LOOKUP_ERROR, partTorsoAngle, seq,
                               _TORSO_AND_ARM, 'torso', 0)

    def test_frameOutOfRange(self):
        seq = _custom([_UPRIGHT] * 2)
        self.assert_eval_error(codec.LOOKUP_ERROR, partTorsoAngle, seq,
                               _TORSO_AND_ARM, 'arm', 5)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(min_value=0, max_value=2 ** 32 - 1))
    def test_rigidInvariance(self, seed):
        rng = np.random.default_rng(seed)
        seq = randomMotion(rng, frames=3)
        partition = defaultPartition('humanml3d22')
        rotation, translation = randomRigid(rng)
        moved = seq.transformed(rotation, translation)
        self.assert_close(
            interPartDistance(moved, partition, 'left_arm', 'right_leg', 1),
            interPartDistance(seq, partition, 'left_arm', 'right_leg', 1),
            atol=1e-9)
        self.assert_close(partTorsoAngle(moved, partition, 'left_leg', 2),
                          partTorsoAngle(seq, partition, 'left_leg', 2),
                          atol=1e-6)


class TestConsistencyScore(ExtendedTestCase):

    def test_zero(self):
        self.assertEqual(consistencyScore(0.0, 1.5), 1.0)

    def test_atBandwidth(self):
        self.assert_close(consistencyScore(1.5, 1.5), math.exp(-1.0))

    def test_symmetric(self):
        self.assertEqual(consistencyScore(-2.0, 1.5), consistencyScore(2.0, 1.5))

    def test_array(self):
        self.assert_close(consistencyScore(np.array([0.0, 3.0]), 3.0),
                          [1.0, math.exp(-1.0)])

    def test_badBandwidth(self):
        self.assertRaises(codec.EvalError, consistencyScore, 1.0, 0.0)


class TestReferenceStats(ExtendedTestCase):

    def setUp(self):
        self.partition = defaultPartition('humanml3d22')
        rng = np.random.default_rng(21)
        self.corpus = [randomMotion(rng, frames=12, name='m%d' % i)
                       for i in range(4)]

    def test_build(self):
        stats = buildReferenceStats(self.corpus, self.partition)
        self.assertEqual(stats.sample_count, 48)
        self.assertEqual(len(stats.pairs), 10)
        self.assertEqual(sorted(stats.angles), sorted(self.partition.angle_parts))
        values = np.concatenate([spatial.interPartDistances(
            s, self.partition, 'left_arm', 'right_arm') for s in self.corpus])
        mean, std = stats.pairs['left_arm|right_arm']
        self.assert_close(mean, values.mean(), atol=1e-12)
        self.assert_close(std, values.std(), atol=1e-12)

    def test_orderIndependent(self):
        forward = buildReferenceStats(self.corpus, self.partition)
        backward = buildReferenceStats(self.corpus[::-1], self.partition)
        self.assertEqual(codec.jdumps(forward.toJSON()),
                         codec.jdumps(backward.toJSON()))

    def test_empty(self):
        self.assertRaises(codec.EvalError, buildReferenceStats, [], self.partition)

    def test_mixedSkeletons(self):
        other = MotionSequence('custom', 20.0, np.zeros((3, 22, 3)), 'x')
        self.assertRaises(codec.EvalError, buildReferenceStats,
                          self.corpus + [other], self.partition)

    def test_allDegenerate(self):
        flat = _custom([[[0, 0, 0], [0, 1, 0], [1, 0, 0], [1, 0, 0]]] * 3)
        stats = buildReferenceStats([flat], _TORSO_AND_ARM)
        self.assertEqual(stats.angles['arm'], (0.0, spatial.EPSILON))
        self.assertEqual(stats.warnings, ('degenerate_angle:arm',))

    def test_jsonRoundTrip(self):
        stats = buildReferenceStats(self.corpus, self.partition)
        again = RefStats.fromJSON(codec.jloads(codec.jdumps(stats.toJSON())))
        self.assertEqual(again, stats)

    def test_fromJSONMissingKey(self):
        self.assert_eval_error(codec.VALIDATION_ERROR, RefStats.fromJSON,
                               {'skeleton': 'custom', 'count': 3}, 's.json')

    def test_tooFewSamples(self):
        self.assertRaises(codec.EvalError, RefStats, 'custom', {}, {}, 1, 'x')

    def test_negativeStd(self):
        self.assertRaises(codec.EvalError, RefStats, 'custom',
                          {'a|b': (1.0, -0.5)}, {}, 3, 'x')


class TestSpatialCoherence(ExtendedTestCase):

    def setUp(self):
        self.partition = defaultPartition('humanml3d22')

    def test_referencePose(self):
        seq = staticMotion(6)
        stats = buildReferenceStats([seq], self.partition)
        report = spatialCoherence(seq, self.partition, stats)
        self.assert_close(report.per_frame, np.ones(6), atol=1e-12)
        self.assert_close(report.score, 1.0, atol=1e-12)

    def test_oneBandwidthAway(self):
        seq = staticMotion(4)
        stats = _staticStats(seq, self.partition, 1.5, 1.0 - 1e-8)
        report = spatialCoherence(seq, self.partition, stats)
        self.assert_close(report.score, math.exp(-1.0), atol=1e-10)
        for terms in report.pair_terms.values():
            self.assert_close(terms, np.full(4, math.exp(-1.0)), atol=1e-10)

    def test_unitInterval(self):
        rng = np.random.default_rng(2)
        stats = buildReferenceStats([randomMotion(rng, 20, name='r')],
                                    self.partition)
        report = spatialCoherence(randomMotion(rng, 20, step=0.05),
                                  self.partition, stats)
        self.assertTrue(0.0 < report.score <= 1.0)
        self.assertTrue(np.all((report.per_frame > 0) & (report.per_frame <= 1)))

    def test_rigidInvariance(self):
        rng = np.random.default_rng(3)
        stats = buildReferenceStats([randomMotion(rng, 20, name='r')],
                                    self.partition)
        seq = randomMotion(rng, 20, step=0.03)
        rotation, translation = randomRigid(rng)
        self.assert_close(
            spatialCoherence(seq.transformed(rotation, translation),
                             self.partition, stats).score,
            spatialCoherence(seq, self.partition, stats).score, atol=1e-8)

    def test_degenerateFrameDropped(self):
        seq = _custom([_UPRIGHT, [[0, 0, 0], [0, 1, 0], [1, 0, 0], [1, 0, 0]]])
        stats = RefStats('custom', {'arm|torso': (2.0, 0.5)},
                         {'arm': (math.pi / 2, 0.1)}, 10, 'x')
        report = spatialCoherence(seq, _TORSO_AND_ARM, stats,
                                  CoherenceParams(beta_d=1.0))
        self.assertEqual(dict(report.degenerate_frames), {'arm': (1,)})
        self.assertTrue(np.isnan(report.angle_terms['arm'][1]))
        self.assert_close(report.per_frame[1], report.pair_terms['arm|torso'][1])
        self.assert_close(report.per_frame[0],
                          (report.pair_terms['arm|torso'][0] + 1.0) / 2)
        self.assert_json_values(report.toJSON('c'), id='c', sc=float,
                                degenerate={'arm': [1]})

    def test_corpusDistribution(self):
        rng = np.random.default_rng(21)
        corpus = [jitteredMotion(rng, name='ref%02d' % i) for i in range(40)]
        stats = buildReferenceStats(corpus, self.partition)
        scores = []
        for _ in range(20):
            report = spatialCoherence(jitteredMotion(rng), self.partition, stats)
            self.assertTrue(np.all((report.per_frame > 0) & (report.per_frame <= 1)))
            scores.append(report.score)
        # every term is exp(-z^2 / beta^2) of a roughly standard normal z
        expected = 1.0 / math.sqrt(1.0 + 2.0 / 1.5 ** 2)
        self.assert_close(np.mean(scores), expected, atol=0.04)

    @settings(max_examples=10, deadline=None)
    @given(st.integers(min_value=0, max_value=2 ** 32 - 1),
           st.sampled_from([0.5, 2.0]))
    def test_scaleChangesScore(self, seed, scale):
        rng = np.random.default_rng(seed)
        corpus = [jitteredMotion(rng, name='ref%02d' % i) for i in range(10)]
        stats = buildReferenceStats(corpus, self.partition)
        seq = jitteredMotion(rng)
        original = spatialCoherence(seq, self.partition, stats)
        scaled = spatialCoherence(seq.transformed(np.eye(3), scale=scale),
                                  self.partition, stats)
        self.assertTrue(scaled.score < original.score - 0.3,
                        (scaled.score, original.score))
        for part, terms in original.angle_terms.items():
            self.assert_close(scaled.angle_terms[part], terms, atol=1e-9)

    def test_skeletonMismatch(self):
        stats = buildReferenceStats([staticMotion(3)], self.partition)
        seq = MotionSequence('custom', 20.0, np.zeros((3, 22, 3)))
        self.assert_eval_error(codec.VALIDATION_ERROR, spatialCoherence, seq,
                               self.partition, stats)

    def test_statsMissingPair(self):
        seq = staticMotion(3)
        stats = _staticStats(seq, self.partition, 0.0, 1.0)
        trimmed = RefStats(stats.skeleton_id,
                           {k: v for k, v in stats.pairs.items()
                            if k != 'left_leg|right_leg'},
                           stats.angles, stats.sample_count, 'x')
        e = self.assert_eval_error(codec.VALIDATION_ERROR, spatialCoherence,
                                   seq, self.partition, trimmed)
        self.assertIn('left_leg|right_leg', str(e))
