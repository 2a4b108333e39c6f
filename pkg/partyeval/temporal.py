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


==================
Temporal coherence
==================

Lag tolerant synchrony of body part rhythms. Per part we take the RMS joint
speed, cut it into overlapping windows, z-normalize each window, cross
correlate every part pair over a range of integer lags and fold each lag
profile into one score with a softmax over lags and a penalty on the expected
absolute lag. The sequence score is the mean over windows and pairs.
"""

import typing as t

from dataclasses import dataclass, asdict, replace

import numpy as np
from scipy.special import softmax
from twisted.logger import Logger

from partyeval import codec
from partyeval.codec import EvalError
from partyeval.motion import MotionSequence, PartitionMap, checkPartition, pairKey

log = Logger()

EPSILON = 1e-8


@dataclass(frozen=True)
class CoherenceParams:
    """
    Parameters of both coherence scores. Defaults are the HumanML3D optimum.
    """
    L: int = 20
    stride: t.Optional[int] = None
    tau_max: int = 15
    sigma: float = 0.1
    kappa: float = 5.0
    beta_d: float = 1.5
    beta_theta: float = 1.5
    epsilon: float = EPSILON

    def __post_init__(self):
        if self.stride is None:
            object.__setattr__(self, 'stride', max(1, self.L // 2))
        checks = [
            (isinstance(self.L, int) and self.L >= 2, 'L >= 2'),
            (isinstance(self.stride, int) and 1 <= self.stride <= self.L,
             '1 <= stride <= L'),
            (isinstance(self.tau_max, int) and 0 <= self.tau_max < self.L,
             '0 <= tau_max < L'),
            (self.sigma > 0, 'sigma > 0'),
            (self.kappa > 0, 'kappa > 0'),
            (self.beta_d > 0 and self.beta_theta > 0, 'beta_d, beta_theta > 0'),
            (self.epsilon > 0, 'epsilon > 0'),
        ]
        for ok, rule in checks:
            if not ok:
                raise EvalError('Invalid coherence params: need %s' % rule,
                                data=self.toJSON())

    @classmethod
    def preset(cls, name: str) -> 'CoherenceParams':
        """
        @raise EvalError: LOOKUP_ERROR for unknown presets
        """
        try:
            return cls(**PRESETS[name])
        except KeyError:
            raise EvalError('Unknown params preset %s' % name,
                            codec.LOOKUP_ERROR)

    @classmethod
    def fromJSON(cls, document, source=None) -> 'CoherenceParams':
        """
        Build params from a decoded params file; absent keys keep defaults.
        """
        if not isinstance(document, dict):
            raise EvalError('Params must be a JSON object', source=source)
        known = set(cls.__dataclass_fields__)
        unknown = sorted(set(document) - known)
        if unknown:
            raise EvalError('Unknown params %s' % ', '.join(unknown),
                            source=source)
        try:
            return cls(**document)
        except EvalError as e:
            e.source = source
            raise
        except TypeError as e:
            raise EvalError('Invalid params: %s' % e, source=source)

    def toJSON(self) -> dict:
        return asdict(self)

    def withOverrides(self, **kwargs) -> 'CoherenceParams':
        return replace(self, **kwargs)


PRESETS = {
    'humanml3d': dict(sigma=0.1, kappa=5.0, L=20, tau_max=15,
                      beta_d=1.5, beta_theta=1.5),
    'kitml': dict(sigma=0.05, kappa=5.0, L=20, tau_max=15,
                  beta_d=1.5, beta_theta=1.5),
}

SKELETON_PRESETS = {'humanml3d22': 'humanml3d', 'kitml21': 'kitml'}


@dataclass(frozen=True)
class TemporalReport:
    score: float
    per_window_pair: np.ndarray
    window_spans: t.Tuple[t.Tuple[int, int], ...]
    pairs: t.Tuple[str, ...]

    def toJSON(self, id_: str) -> dict:
        return {'id': id_,
                'tc': self.score,
                'windows': [list(span) for span in self.window_spans],
                'pairs': {key: self.per_window_pair[:, column].tolist()
                          for column, key in enumerate(self.pairs)}}


def rmsVelocity(seq: MotionSequence, partition: PartitionMap,
                part: str) -> np.ndarray:
    """
    Root mean square joint displacement of a part between consecutive frames,
    length T - 1.

    @raise EvalError: INSUFFICIENT_FRAMES below 2 frames, LOOKUP_ERROR for
        unknown parts
    """
    joints = list(partition.joints(part))
    if seq.frameCount < 2:
        raise EvalError('RMS velocity needs 2 frames', codec.INSUFFICIENT_FRAMES,
                        source=seq.name or None)
    displacement = np.diff(seq.positions[:, joints, :], axis=0)
    squared = np.sum(displacement * displacement, axis=2)
    return np.sqrt(squared.mean(axis=1))


def slidingWindows(series_len: int, L: int,
                   stride: t.Optional[int] = None) -> t.List[t.Tuple[int, int]]:
    """
    Half open [start, end) windows of length L, stride apart, starting at 0.

    A series shorter than L gets one window over all of it. If full windows
    leave an uncovered tail, the next window is kept as a partial window when
    it has at least max(2, ceil(L / 2)) samples, otherwise the tail is merged
    into the last window.

    @rtype: list
    @return: List of (start, end) tuples
    """
    if series_len < 2:
        raise EvalError('Need a series of at least 2 samples, got %d'
                        % series_len, codec.INSUFFICIENT_FRAMES)
    if stride is None:
        stride = max(1, L // 2)
    if series_len <= L:
        return [(0, series_len)]

    windows = []
    start = 0
    while start + L <= series_len:
        windows.append((start, start + L))
        start += stride

    last_start, last_end = windows[-1]
    if last_end < series_len:
        partial = (last_start + stride, series_len)
        if partial[1] - partial[0] >= max(2, (L + 1) // 2):
            windows.append(partial)
        else:
            windows[-1] = (last_start, series_len)
    return windows


def znormWindow(series: np.ndarray, window: t.Tuple[int, int],
                epsilon: float = EPSILON) -> np.ndarray:
    """
    (x - mean) / (std + epsilon) over the window, population std. A window
    whose spread is below epsilon is constant up to round-off and comes back
    as exact zeros.
    """
    start, end = window
    if not 0 <= start < end <= len(series):
        raise EvalError('Window %r outside series of length %d'
                        % (window, len(series)), codec.LOOKUP_ERROR)
    values = np.asarray(series[start:end], dtype=np.float64)
    mean = values.mean()
    std = values.std()
    if std < epsilon:
        return np.zeros_like(values)
    return (values - mean) / (std + epsilon)


def crossCorrelation(s_g: np.ndarray, s_h: np.ndarray,
                     tau_max: int) -> np.ndarray:
    """
    Normalized cross correlation r(tau) = sum_t s_g(t) s_h(t + tau) /
    (|s_g| |s_h|) for tau = -tau_max .. tau_max. Products reaching outside the
    window count as zero, the denominator uses the full window norms, so
    |r| <= 1. If either series has zero norm r is zero at every lag.

    @rtype: numpy.ndarray
    @return: 2 * tau_max + 1 values, index tau_max is lag 0
    """
    s_g = np.asarray(s_g, dtype=np.float64)
    s_h = np.asarray(s_h, dtype=np.float64)
    if s_g.shape != s_h.shape or s_g.ndim != 1 or len(s_g) < 2:
        raise EvalError('Cross correlation needs two equal length series of '
                        'at least 2 samples')
    profile = np.zeros(2 * tau_max + 1)
    norm = np.linalg.norm(s_g) * np.linalg.norm(s_h)
    if norm == 0.0:
        return profile

    n = len(s_g)
    for index, tau in enumerate(range(-tau_max, tau_max + 1)):
        if abs(tau) >= n:
            continue
        if tau >= 0:
            profile[index] = np.dot(s_g[:n - tau], s_h[tau:])
        else:
            profile[index] = np.dot(s_g[-tau:], s_h[:n + tau])
    return np.clip(profile / norm, -1.0, 1.0)


def lagGrid(profile_len: int) -> np.ndarray:
    if profile_len % 2 != 1:
        raise EvalError('A lag profile has odd length, got %d' % profile_len)
    tau_max = profile_len // 2
    return np.arange(-tau_max, tau_max + 1)


def refinedCorrelation(r: np.ndarray, sigma: float, kappa: float) -> float:
    """
    Fold a lag profile into one score in [0, 1]: softmax(r / sigma) weights
    give the expected correlation R and expected absolute lag, and the score
    is max(0, R) * exp(-<|tau|> / kappa).

    @type r: numpy.ndarray
    @param r: Profile over tau = -tau_max .. tau_max
    """
    r = np.asarray(r, dtype=np.float64)
    taus = lagGrid(len(r))
    weights = softmax(r / sigma)
    expected = float(np.dot(weights, r))
    mean_lag = float(np.dot(weights, np.abs(taus)))
    return max(0.0, expected) * float(np.exp(-mean_lag / kappa))


def temporalCoherence(seq: MotionSequence, partition: PartitionMap,
                      params: t.Optional[CoherenceParams] = None) -> TemporalReport:
    """
    Temporal coherence of one motion.

    @type seq: MotionSequence
    @param seq: Motion with at least 3 frames

    @type partition: PartitionMap
    @param partition: Parts whose rhythms are compared pairwise

    @type params: CoherenceParams
    @param params: Window, lag and softmax parameters

    @rtype: TemporalReport
    @return: Score in [0, 1] and the per window, per pair scores

    @raise EvalError: INSUFFICIENT_FRAMES below 3 frames
    """
    params = params or CoherenceParams()
    if seq.frameCount < 3:
        raise EvalError('Temporal coherence needs 3 frames, got %d'
                        % seq.frameCount, codec.INSUFFICIENT_FRAMES,
                        source=seq.name or None)
    checkPartition(seq, partition)

    velocity = {part: rmsVelocity(seq, partition, part)
                for part in partition.names}
    windows = slidingWindows(seq.frameCount - 1, params.L, params.stride)
    pairs = partition.pairs()
    if not pairs:
        raise EvalError('Temporal coherence needs at least two parts',
                        source=seq.name or None)

    scores = np.zeros((len(windows), len(pairs)))
    for w, window in enumerate(windows):
        normalized = {part: znormWindow(series, window, params.epsilon)
                      for part, series in velocity.items()}
        for p, (g, h) in enumerate(pairs):
            profile = crossCorrelation(normalized[g], normalized[h],
                                       params.tau_max)
            scores[w, p] = refinedCorrelation(profile, params.sigma,
                                              params.kappa)
        log.debug('{name} window {window}: {scores}', name=seq.name,
                  window=window, scores=scores[w].tolist())

    return TemporalReport(float(scores.mean()), scores, tuple(windows),
                          tuple(pairKey(g, h) for g, h in pairs))
