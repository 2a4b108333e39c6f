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


====================
Distribution metrics
====================

Feature space metrics over embedding dumps: FID, R-Precision, MM-Dist,
Diversity and MultiModality, and repeated runs with 95% confidence intervals.
The same functions serve holistic and part level evaluation; only the
encoder that produced the dump differs.

Records are always consumed in id order, so seeded sampling does not depend on
the order of the input file.
"""

import typing as t

from dataclasses import dataclass

import numpy as np
import scipy.linalg
from twisted.logger import Logger

from partyeval.codec import EvalError
from partyeval.motion import EmbeddingSet

log = Logger()

POOL_SIZE = 32
DIVERSITY_PAIRS = 300
MULTIMODALITY_PAIRS = 10
REPS = 20
CI_Z = 1.96

SYMMETRY_TOLERANCE = 1e-10
EIGEN_FLOOR = -1e-8
REGULARIZE_BELOW = 1e-10
REGULARIZATION = 1e-6


@dataclass(frozen=True)
class GaussianSummary:
    mean: np.ndarray
    cov: np.ndarray
    n: int

    def __post_init__(self):
        if self.n < 2:
            raise EvalError('A Gaussian summary needs 2 samples, got %d' % self.n)
        if not np.allclose(self.cov, self.cov.T, rtol=0, atol=1e-12 * max(
                1.0, float(np.abs(self.cov).max(initial=0.0)))):
            raise EvalError('Covariance is not symmetric')


@dataclass(frozen=True)
class MetricRun:
    metric: str
    values: t.Tuple[float, ...]
    mean: float
    ci95: float

    def toJSON(self, config: t.Optional[dict] = None) -> dict:
        return {'metric': self.metric, 'mean': self.mean, 'ci95': self.ci95,
                'values': list(self.values), 'config': config or {}}


def gaussianSummary(feats) -> GaussianSummary:
    """
    Mean and unbiased covariance of an N x D feature matrix.
    """
    matrix = feats.matrix('vector') if isinstance(feats, EmbeddingSet) else \
        np.asarray(feats, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[0] < 2:
        raise EvalError('Need at least 2 feature vectors, got shape %s'
                        % (matrix.shape,))
    cov = np.atleast_2d(np.cov(matrix, rowvar=False))
    return GaussianSummary(matrix.mean(axis=0), (cov + cov.T) / 2.0,
                           matrix.shape[0])


def matrixSqrtPSD(m: np.ndarray) -> np.ndarray:
    """
    Symmetric square root of a symmetric positive semi-definite matrix through
    its eigendecomposition. Eigenvalues down to -1e-8 (relative to the
    largest) are round-off and clipped to zero.

    @type m: numpy.ndarray
    @param m: D x D symmetric PSD matrix

    @rtype: numpy.ndarray
    @return: Symmetric S with S S = m

    @raise EvalError: VALIDATION_ERROR for asymmetric or clearly indefinite
        input
    """
    m = np.atleast_2d(np.asarray(m, dtype=np.float64))
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise EvalError('Square matrix expected, got shape %s' % (m.shape,))
    scale = max(1.0, float(np.abs(m).max(initial=0.0)))
    if not np.allclose(m, m.T, rtol=0, atol=SYMMETRY_TOLERANCE * scale):
        raise EvalError('Matrix is not symmetric',
                        data={'asymmetry': float(np.abs(m - m.T).max())})

    eigenvalues, eigenvectors = scipy.linalg.eigh((m + m.T) / 2.0)
    floor = EIGEN_FLOOR * max(1.0, float(np.abs(eigenvalues).max(initial=0.0)))
    if eigenvalues.min(initial=0.0) < floor:
        raise EvalError('Matrix is not positive semi-definite',
                        data={'min_eigenvalue': float(eigenvalues.min())})
    roots = np.sqrt(np.clip(eigenvalues, 0.0, None))
    root = (eigenvectors * roots) @ eigenvectors.T
    return (root + root.T) / 2.0


def _regularized(cov: np.ndarray) -> np.ndarray:
    if scipy.linalg.eigvalsh(cov).min() < REGULARIZE_BELOW:
        return cov + REGULARIZATION * np.eye(cov.shape[0])
    return cov


def frechetDistance(a: GaussianSummary, b: GaussianSummary) -> float:
    """
    |mu_a - mu_b|^2 + Tr(S_a + S_b - 2 sqrt(S_a^1/2 S_b S_a^1/2)), clamped at
    zero.
    """
    if a.mean.shape != b.mean.shape:
        raise EvalError('Feature dimensions differ: %d vs %d'
                        % (a.mean.shape[0], b.mean.shape[0]))
    cov_a = _regularized(a.cov)
    cov_b = _regularized(b.cov)
    diff = a.mean - b.mean

    root_a = matrixSqrtPSD(cov_a)
    inner = root_a @ cov_b @ root_a
    covmean = matrixSqrtPSD((inner + inner.T) / 2.0)

    value = float(diff.dot(diff) + np.trace(cov_a) + np.trace(cov_b) -
                  2.0 * np.trace(covmean))
    if value < 0.0:
        log.warn('FID round-off {value} clamped to zero', value=value)
        value = 0.0
    return value


def fid(feats_a: EmbeddingSet, feats_b: EmbeddingSet) -> float:
    """
    Frechet distance between Gaussian fits of two feature sets.

    @raise EvalError: VALIDATION_ERROR on dimension mismatch or fewer than 2
        vectors in a set
    """
    dim_a, dim_b = feats_a.dimension('vector'), feats_b.dimension('vector')
    if dim_a != dim_b:
        raise EvalError('Feature dimensions differ: %s vs %s' % (dim_a, dim_b))
    return frechetDistance(gaussianSummary(feats_a), gaussianSummary(feats_b))


def _pairMatrices(pairs: EmbeddingSet):
    text, motion = pairs.matrix('text_vec'), pairs.matrix('motion_vec')
    if text.shape[1] != motion.shape[1]:
        raise EvalError('Text and motion dimensions differ: %d vs %d'
                        % (text.shape[1], motion.shape[1]), source=pairs.source)
    return text, motion


def retrievalRanks(pairs: EmbeddingSet, pool_size: int = POOL_SIZE,
                   seed: int = 0) -> np.ndarray:
    """
    Rank of each record's own text among a pool of itself and pool_size - 1
    distinct mismatched texts, by Euclidean distance to the record's motion.
    Equal distances rank the lower id first.

    @rtype: numpy.ndarray
    @return: One zero based rank per record, in id order
    """
    if pool_size < 2:
        raise EvalError('Pool size must be at least 2, got %d' % pool_size)
    n = len(pairs)
    if n < pool_size:
        raise EvalError('R-Precision needs %d records, got %d'
                        % (pool_size, n), source=pairs.source)
    text, motion = _pairMatrices(pairs)
    rng = np.random.default_rng(seed)

    ranks = np.empty(n, dtype=np.int64)
    for i in range(n):
        others = rng.choice(n - 1, pool_size - 1, replace=False)
        others = others + (others >= i)
        candidates = np.concatenate(([i], others))
        distances = np.linalg.norm(text[candidates] - motion[i], axis=1)
        true = distances[0]
        closer = np.count_nonzero(distances[1:] < true)
        tied = np.count_nonzero((distances[1:] == true) & (others < i))
        ranks[i] = closer + tied
    return ranks


def rPrecision(pairs: EmbeddingSet, k: int = 1, pool_size: int = POOL_SIZE,
               seed: int = 0) -> float:
    """
    Fraction of records whose true text ranks within the top k of its pool.
    """
    if k < 1:
        raise EvalError('k must be positive, got %d' % k)
    ranks = retrievalRanks(pairs, pool_size, seed)
    return float(np.mean(ranks < k))


def mmDist(pairs: EmbeddingSet) -> float:
    """
    Mean Euclidean distance between each text vector and its motion vector.
    """
    text, motion = _pairMatrices(pairs)
    return float(np.linalg.norm(text - motion, axis=1).mean())


def diversity(feats: EmbeddingSet, n_pairs: int = DIVERSITY_PAIRS,
              seed: int = 0) -> float:
    """
    Mean distance over n_pairs disjoint random pairs of records. With fewer
    than 2 n_pairs records, n_pairs drops to half the record count.
    """
    matrix = feats.matrix('vector')
    n = matrix.shape[0]
    if n < 2:
        raise EvalError('Diversity needs 2 records, got %d' % n,
                        source=feats.source)
    if n < 2 * n_pairs:
        log.warn('Diversity: {n} records cannot give {pairs} disjoint pairs, '
                 'using {reduced}', n=n, pairs=n_pairs, reduced=n // 2)
        n_pairs = n // 2
    order = np.random.default_rng(seed).permutation(n)
    first, second = order[:n_pairs], order[n_pairs:2 * n_pairs]
    return float(np.linalg.norm(matrix[first] - matrix[second], axis=1).mean())


def multimodality(feats: EmbeddingSet,
                  pairs_per_group: int = MULTIMODALITY_PAIRS,
                  seed: int = 0) -> float:
    """
    Mean within group pair distance, averaged over groups. Groups with fewer
    pairs than pairs_per_group use all their pairs; singleton groups are
    skipped.
    """
    rng = np.random.default_rng(seed)
    means = []
    for key, matrix in feats.groups('vector').items():
        m = matrix.shape[0]
        if m < 2:
            log.warn('MultiModality: group {group} has one record, skipped',
                     group=key)
            continue
        first, second = np.triu_indices(m, 1)
        if len(first) > pairs_per_group:
            chosen = np.sort(rng.choice(len(first), pairs_per_group,
                                        replace=False))
            first, second = first[chosen], second[chosen]
        means.append(np.linalg.norm(matrix[first] - matrix[second],
                                    axis=1).mean())
    if not means:
        raise EvalError('MultiModality needs a group with 2 records',
                        source=feats.source)
    return float(np.mean(means))


def summarizeRuns(metric: str, values) -> MetricRun:
    """
    Mean and 1.96 s / sqrt(n) half width of repeated values. A single run has
    no spread; its half width is 0 by convention.
    """
    values = tuple(float(v) for v in values)
    if not values:
        raise EvalError('No runs to summarize for %s' % metric)
    mean = float(np.mean(values))
    if len(values) == 1:
        log.warn('{metric}: one repetition, ci95 reported as 0', metric=metric)
        return MetricRun(metric, values, mean, 0.0)
    ci95 = CI_Z * float(np.std(values, ddof=1)) / np.sqrt(len(values))
    return MetricRun(metric, values, mean, ci95)


def repeatedEval(metric: t.Callable[[int], float], reps: int = REPS,
                 seed: int = 0, name: t.Optional[str] = None) -> MetricRun:
    """
    Run a seeded metric reps times with seeds seed, seed + 1, ...

    @type metric: callable
    @param metric: Takes a seed, returns a number

    @rtype: MetricRun
    """
    if reps < 1:
        raise EvalError('reps must be at least 1, got %d' % reps)
    name = name or getattr(metric, '__name__', 'metric')
    return summarizeRuns(name, [metric(seed + i) for i in range(reps)])
