"""
Copyright 2026 The partyeval Authors

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.


=================
Spatial coherence
=================

Per frame plausibility of the body's layout: distances between part
centroids and the angle between every limb and the torso axis are turned into
z-scores against corpus reference statistics, then into Gaussian consistency
terms. The sequence score is the frame mean of the per frame term average.
"""

import typing as t

import hashlib
from dataclasses import dataclass, field

import numpy as np
from twisted.logger import Logger

from partyeval import codec
from partyeval.codec import EvalError
from partyeval.motion import (MotionSequence, PartitionMap, checkPartition,
                              pairKey, partCentroids)
from partyeval.temporal import CoherenceParams, EPSILON

log = Logger()


@dataclass(frozen=True)
class RefStats:
    """
    Corpus means and population standard deviations of every pair distance
    and every limb angle.
    """
    skeleton_id: str
    pairs: t.Mapping[str, t.Tuple[float, float]]
    angles: t.Mapping[str, t.Tuple[float, float]]
    sample_count: int
    corpus_digest: str
    warnings: t.Tuple[str, ...] = ()

    def __post_init__(self):
        if self.sample_count < 2:
            raise EvalError('Reference statistics need 2 samples, got %d'
                            % self.sample_count)
        for kind, table in (('pair', self.pairs), ('angle', self.angles)):
            for key, (mean, std) in table.items():
                if not (np.isfinite(mean) and np.isfinite(std) and std >= 0):
                    raise EvalError('Bad %s statistics for %s: %r, %r'
                                    % (kind, key, mean, std))

    def covers(self, partition: PartitionMap):
        """
        @raise EvalError: VALIDATION_ERROR naming keys missing from the stats
        """
        missing = [pairKey(g, h) for g, h in partition.pairs()
                   if pairKey(g, h) not in self.pairs]
        missing += [g for g in partition.angle_parts if g not in self.angles]
        if missing:
            raise EvalError('Reference statistics lack %s' % ', '.join(missing))

    def toJSON(self) -> dict:
        document = {
            'skeleton': self.skeleton_id,
            'count': self.sample_count,
            'digest': self.corpus_digest,
            'pairs': {key: {'mean': mean, 'std': std}
                      for key, (mean, std) in self.pairs.items()},
            'angles': {key: {'mean': mean, 'std': std}
                       for key, (mean, std) in self.angles.items()},
        }
        if self.warnings:
            document['warnings'] = list(self.warnings)
        return document

    @classmethod
    def fromJSON(cls, document, source=None) -> 'RefStats':
        codec.requireKeys(document, ['skeleton', 'count', 'digest', 'pairs',
                                     'angles'], 'Stats', source)

        def table(name):
            entries = document[name]
            if not isinstance(entries, dict):
                raise EvalError('Stats %s must be an object' % name,
                                source=source)
            result = {}
            for key, entry in entries.items():
                codec.requireKeys(entry, ['mean', 'std'], 'Stats entry %s' % key,
                                  source)
                result[key] = (float(entry['mean']), float(entry['std']))
            return result

        try:
            return cls(document['skeleton'], table('pairs'), table('angles'),
                       int(document['count']), str(document['digest']),
                       tuple(document.get('warnings', ())))
        except EvalError as e:
            e.source = source
            raise


@dataclass(frozen=True)
class SpatialReport:
    score: float
    per_frame: np.ndarray
    pair_terms: t.Mapping[str, np.ndarray]
    angle_terms: t.Mapping[str, np.ndarray]
    degenerate_frames: t.Mapping[str, t.Tuple[int, ...]] = field(default_factory=dict)

    def toJSON(self, id_: str) -> dict:
        def terms(table):
            return {key: [None if np.isnan(v) else float(v) for v in values]
                    for key, values in table.items()}

        return {'id': id_,
                'sc': self.score,
                'frames': self.per_frame.tolist(),
                'pairs': terms(self.pair_terms),
                'angles': terms(self.angle_terms),
                'degenerate': {k: list(v) for k, v in self.degenerate_frames.items()}}


def interPartDistances(seq: MotionSequence, partition: PartitionMap,
                       g: str, h: str) -> np.ndarray:
    if g == h:
        raise EvalError('Distance needs two different parts, got %s twice' % g)
    delta = partCentroids(seq, partition, g) - partCentroids(seq, partition, h)
    return np.linalg.norm(delta, axis=1)


def interPartDistance(seq: MotionSequence, partition: PartitionMap,
                      g: str, h: str, t: int) -> float:
    """
    Euclidean distance between the centroids of parts g and h at frame t.

    @raise EvalError: VALIDATION_ERROR when g == h, LOOKUP_ERROR for unknown
        parts or frames
    """
    if not 0 <= t < seq.frameCount:
        raise EvalError('Frame %d out of range' % t, codec.LOOKUP_ERROR)
    return float(interPartDistances(seq, partition, g, h)[t])


def partTorsoAngles(seq: MotionSequence, partition: PartitionMap, g: str,
                    epsilon: float = EPSILON) -> np.ndarray:
    """
    Angle between the part direction (centroid to end joint) and the torso
    axis (torso origin to tip) for every frame, NaN where either direction is
    shorter than epsilon.
    """
    if g not in partition.angle_parts:
        raise EvalError('%s is not an angle part' % g, codec.LOOKUP_ERROR)
    end = seq.positions[:, partition.end_joint[g], :]
    direction = end - partCentroids(seq, partition, g)
    torso = (seq.positions[:, partition.torso_tip, :] -
             seq.positions[:, partition.torso_origin, :])

    direction_norm = np.linalg.norm(direction, axis=1)
    torso_norm = np.linalg.norm(torso, axis=1)
    valid = (direction_norm > epsilon) & (torso_norm > epsilon)

    angles = np.full(seq.frameCount, np.nan)
    u_g = direction[valid] / direction_norm[valid, None]
    u_tr = torso[valid] / torso_norm[valid, None]
    cosine = np.clip(np.einsum('ij,ij->i', u_g, u_tr), -1.0, 1.0)
    angles[valid] = np.arccos(cosine)
    return angles


def partTorsoAngle(seq: MotionSequence, partition: PartitionMap, g: str,
                   t: int, epsilon: float = EPSILON) -> float:
    """
    Articulation angle of part g at frame t, radians in [0, pi].

    @raise EvalError: DEGENERATE_GEOMETRY if the end joint sits on the
        centroid or the torso axis has no length
    """
    if not 0 <= t < seq.frameCount:
        raise EvalError('Frame %d out of range' % t, codec.LOOKUP_ERROR)
    angle = partTorsoAngles(seq, partition, g, epsilon)[t]
    if np.isnan(angle):
        raise EvalError('Degenerate direction for %s at frame %d' % (g, t),
                        codec.DEGENERATE_GEOMETRY,
                        data={'part': g, 'frame': t}, source=seq.name or None)
    return float(angle)


def consistencyScore(z, beta: float):
    """
    Gaussian kernel exp(-z^2 / beta^2).
    """
    if beta <= 0:
        raise EvalError('Bandwidth must be positive, got %r' % beta)
    z = np.asarray(z, dtype=np.float64)
    result = np.exp(-(z * z) / (beta * beta))
    return float(result) if result.ndim == 0 else result


def _corpusDigest(sequences) -> str:
    digest = hashlib.sha256()
    for seq in sequences:
        digest.update(seq.name.encode('utf-8'))
        digest.update(seq.contentDigest().encode('ascii'))
    return digest.hexdigest()


def buildReferenceStats(corpus: t.Iterable[MotionSequence],
                        partition: PartitionMap,
                        epsilon: float = EPSILON) -> RefStats:
    """
    Pool every frame of every sequence and take the population mean and std
    of each pair distance and limb angle. Sequences are reduced in (name,
    content) order, so the result does not depend on the order of the
    corpus.

    @type corpus: iterable of MotionSequence
    @param corpus: Motions of one skeleton

    @rtype: RefStats

    @raise EvalError: VALIDATION_ERROR for an empty corpus or mixed skeletons
    """
    sequences = sorted(corpus, key=lambda s: (s.name, s.contentDigest()))
    if not sequences:
        raise EvalError('Reference corpus is empty')
    skeletons = sorted({s.skeleton_id for s in sequences})
    if len(skeletons) > 1:
        raise EvalError('Reference corpus mixes skeletons %s' % skeletons)

    for seq in sequences:
        checkPartition(seq, partition)

    pairs = {}
    for g, h in partition.pairs():
        values = np.concatenate([interPartDistances(s, partition, g, h)
                                 for s in sequences])
        pairs[pairKey(g, h)] = (float(values.mean()), float(values.std()))

    angles = {}
    warnings = []
    for g in partition.angle_parts:
        values = np.concatenate([partTorsoAngles(s, partition, g, epsilon)
                                 for s in sequences])
        values = values[~np.isnan(values)]
        if len(values) == 0:
            log.warn('Every frame is degenerate for {part}; std set to epsilon',
                     part=g)
            angles[g] = (0.0, epsilon)
            warnings.append('degenerate_angle:%s' % g)
        else:
            angles[g] = (float(values.mean()), float(values.std()))

    count = sum(s.frameCount for s in sequences)
    stats = RefStats(skeletons[0], pairs, angles, count,
                     _corpusDigest(sequences), tuple(warnings))
    log.info('Reference statistics over {n} sequences, {count} frames',
             n=len(sequences), count=count)
    return stats


def spatialCoherence(seq: MotionSequence, partition: PartitionMap,
                     stats: RefStats,
                     params: t.Optional[CoherenceParams] = None) -> SpatialReport:
    """
    Spatial coherence of one motion against reference statistics.

    Frames where a limb direction is degenerate drop that limb's angle term
    and average over the remaining terms.

    @rtype: SpatialReport
    @return: Score in (0, 1], per frame values and every term series

    @raise EvalError: VALIDATION_ERROR if the stats belong to another
        skeleton or lack a key of the partition
    """
    params = params or CoherenceParams()
    if stats.skeleton_id != seq.skeleton_id:
        raise EvalError('Statistics are for %s, motion is %s'
                        % (stats.skeleton_id, seq.skeleton_id),
                        source=seq.name or None)
    checkPartition(seq, partition)
    stats.covers(partition)
    epsilon = params.epsilon

    pair_terms = {}
    for g, h in partition.pairs():
        key = pairKey(g, h)
        mean, std = stats.pairs[key]
        z = (interPartDistances(seq, partition, g, h) - mean) / (std + epsilon)
        pair_terms[key] = consistencyScore(z, params.beta_d)

    angle_terms = {}
    degenerate = {}
    for g in partition.angle_parts:
        mean, std = stats.angles[g]
        angles = partTorsoAngles(seq, partition, g, epsilon)
        terms = np.full(seq.frameCount, np.nan)
        valid = ~np.isnan(angles)
        terms[valid] = consistencyScore((angles[valid] - mean) / (std + epsilon),
                                        params.beta_theta)
        angle_terms[g] = terms
        if not valid.all():
            degenerate[g] = tuple(int(i) for i in np.flatnonzero(~valid))
            log.info('{name}: {count} degenerate frames for {part}',
                     name=seq.name, count=len(degenerate[g]), part=g)

    total = np.zeros(seq.frameCount)
    count = np.zeros(seq.frameCount)
    for terms in pair_terms.values():
        total += terms
        count += 1
    for terms in angle_terms.values():
        valid = ~np.isnan(terms)
        total[valid] += terms[valid]
        count += valid
    per_frame = total / count

    return SpatialReport(float(per_frame.mean()), per_frame, pair_terms,
                         angle_terms, degenerate)
