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


=====================
Kernel property suite
=====================

Seeded checks of the reference kernels against brute-force oracles and
closed forms, run by `party-eval kernels selftest`. Every property is a
`property_<name>` method of KernelSelfTest; it raises AssertionError on
failure.
"""

import typing as t

from dataclasses import dataclass
import math
import zlib

import numpy as np
from twisted.logger import Logger
from zope.interface import implementer

from partyeval import kernels
from partyeval.generation import CycleConfig, IGeneratorHook, generateCycle
from partyeval.weights import (AttentionParams, Codebook, DenseLayer,
                               DenseStack, HPFParams, seededDenseStack,
                               seededHPF)

log = Logger()

CASES = 100
ORACLE_TOLERANCE = 1e-10
SUM_TOLERANCE = 1e-9


@dataclass(frozen=True)
class PropertyResult:
    name: str
    passed: bool
    detail: str = ''

    def line(self) -> str:
        if self.passed:
            return 'PASS %s' % self.name
        return 'FAIL %s: %s' % (self.name, self.detail)


@implementer(IGeneratorHook)
class ScheduleHook(object):
    """
    Deterministic hook: token ids count up, the embedding of a holistic step
    echoes the guidance it was given.
    """

    def __init__(self, dim=4, vocabSize=512, offset=0):
        self.dim = dim
        self.vocabSize = vocabSize
        self.offset = offset
        self.guidances = []

    def nextToken(self, history, conditioning, guidance):
        token = (len(history) + self.offset) % self.vocabSize
        if guidance is not None:
            self.guidances.append(np.array(guidance))
            return token, np.array(guidance)
        return token, np.full(self.dim, float(len(history) + self.offset))


def _oracleSoftmax(values):
    top = max(values)
    exps = [math.exp(v - top) for v in values]
    total = sum(exps)
    return [e / total for e in exps]


def _oracleAttention(q, k, v):
    out = np.zeros((len(q), v.shape[1]))
    for i in range(len(q)):
        logits = [sum(q[i, c] * k[j, c] for c in range(q.shape[1])) /
                  math.sqrt(q.shape[1]) for j in range(len(k))]
        weights = _oracleSoftmax(logits)
        for j in range(len(k)):
            out[i] += weights[j] * v[j]
    return out


def _linearGate(w, b=0.0):
    w = np.asarray(w, dtype=np.float64).reshape(-1, 1)
    return DenseStack((DenseLayer(w, np.array([b]), 'none'),))


class KernelSelfTest(object):

    def __init__(self, seed: int = 0, cases: int = CASES):
        self.seed = seed
        self.cases = cases

    def _rng(self, name):
        return np.random.default_rng([self.seed & 0xFFFFFFFFFFFFFFFF,
                                      zlib.crc32(name.encode('utf-8'))])

    def names(self) -> t.List[str]:
        return sorted(name[len('property_'):] for name in dir(self)
                      if name.startswith('property_'))

    def run(self, names: t.Optional[t.Sequence[str]] = None) -> t.List[PropertyResult]:
        results = []
        for name in names or self.names():
            function = getattr(self, 'property_%s' % name, None)
            if not callable(function):
                results.append(PropertyResult(name, False, 'no such property'))
                continue
            try:
                function(self._rng(name))
            except AssertionError as e:
                results.append(PropertyResult(name, False, str(e)))
            except Exception as e:
                results.append(PropertyResult(name, False, '%s: %s'
                                              % (type(e).__name__, e)))
            else:
                results.append(PropertyResult(name, True))
            log.debug('{result}', result=results[-1].line())
        return results

    def property_softmax_weights(self, rng):
        for _ in range(self.cases):
            d = int(rng.integers(2, 6))
            frames = rng.normal(size=(int(rng.integers(3, 20)), d))
            scorer = seededDenseStack(int(rng.integers(2 ** 63)), [d, 5, 1])
            alpha = kernels.lteWeights(frames, scorer, int(rng.integers(1, 5)))
            _, gate = kernels.partGate(rng.normal(size=(4, d)),
                                       _linearGate(rng.normal(size=d)))
            attn = kernels.attentionWeights(rng.normal(size=(3, d)),
                                            rng.normal(size=(6, d)))
            for weights in (alpha, gate[None, :], attn):
                assert (weights >= 0).all(), 'negative weight'
                assert np.abs(weights.sum(axis=1) - 1.0).max() < SUM_TOLERANCE, \
                    'weights do not sum to 1'

    def property_lte_oracle(self, rng):
        for _ in range(self.cases):
            d, w = int(rng.integers(1, 5)), int(rng.integers(1, 6))
            frames = rng.normal(size=(int(rng.integers(1, 25)), d))
            scorer = seededDenseStack(int(rng.integers(2 ** 63)), [d, 4, 1])
            out = kernels.lteForward(frames, scorer, w)

            padded = list(frames)
            while len(padded) % w:
                padded.append(frames[-1])
            for g in range(len(padded) // w):
                group = padded[g * w:(g + 1) * w]
                alpha = _oracleSoftmax([float(scorer(f)[0]) for f in group])
                expected = sum(a * f for a, f in zip(alpha, group))
                assert np.abs(out[g] - expected).max() < ORACLE_TOLERANCE, \
                    'group %d differs from oracle' % g
                low, high = np.min(group, axis=0), np.max(group, axis=0)
                assert (out[g] >= low - 1e-12).all() and \
                    (out[g] <= high + 1e-12).all(), 'outside the group hull'

    def property_gte_oracle(self, rng):
        for _ in range(self.cases):
            n, d, e = (int(x) for x in rng.integers(1, 6, size=3))
            nodes = rng.normal(size=(n, d))
            w = rng.normal(size=(d, e))
            adjacency = kernels.normalizeAdjacency(n=n)
            out = kernels.gteForward(nodes, adjacency, w)
            for i in range(n):
                for j in range(e):
                    x = sum(adjacency[i, m] * sum(nodes[m, c] * w[c, j]
                                                  for c in range(d))
                            for m in range(n))
                    expected = x * 0.5 * (1.0 + math.erf(x / math.sqrt(2.0)))
                    assert abs(out[i, j] - expected) < ORACLE_TOLERANCE, \
                        'node %d feature %d differs from oracle' % (i, j)

    def property_vq_exhaustive(self, rng):
        for _ in range(self.cases):
            codebook = Codebook(rng.normal(size=(int(rng.integers(1, 40)), 6)))
            feat = rng.normal(size=6)
            index, entry = kernels.vqQuantize(feat, codebook)
            best, best_distance = 0, None
            for c, row in enumerate(codebook.entries):
                distance = sum((a - b) ** 2 for a, b in zip(row, feat))
                if best_distance is None or distance < best_distance:
                    best, best_distance = c, distance
            assert index == best, 'picked %d, scan picked %d' % (index, best)
            assert (entry == codebook.entries[best]).all()

    def property_diversity_identical(self, rng):
        for _ in range(self.cases):
            c = rng.normal(size=8)
            c /= np.linalg.norm(c)
            k = int(rng.integers(2, 9))
            tau = float(rng.uniform(0.05, 1.0))
            loss = kernels.diversityLoss(c, np.tile(c, (k, 1)), tau)
            assert abs(loss - math.log(k)) < 1e-12, \
                'loss %r for K=%d, expected log K' % (loss, k)

    def property_diversity_separated(self, rng):
        k = 4
        loss = kernels.diversityLossFromSimilarities(
            np.ones(k), -np.ones((k, k)), kernels.TAU)
        assert 0.0 <= loss < 1e-12, 'loss %r' % loss
        for _ in range(self.cases):
            c = rng.normal(size=8)
            loss = kernels.diversityLoss(c, rng.normal(size=(k, 8)))
            assert loss > 0.0, 'nonpositive loss %r' % loss

    def property_gate_oracle(self, rng):
        for _ in range(self.cases):
            d, k = int(rng.integers(1, 6)), int(rng.integers(1, 7))
            candidates = rng.normal(size=(k, d))
            if rng.integers(2):
                w, b = rng.normal(size=d), float(rng.normal())
                gate = _linearGate(w, b)
                scores = [sum(x * y for x, y in zip(w, c)) + b
                          for c in candidates]
            else:
                gate = seededDenseStack(int(rng.integers(2 ** 63)), [d, 4, 1])
                scores = [float(gate(c)[0]) for c in candidates]
            gated, weights = kernels.partGate(candidates, gate)

            expected = _oracleSoftmax(scores)
            assert np.abs(weights - expected).max() < ORACLE_TOLERANCE, \
                'gate weights differ from oracle'
            mixed = sum(w * c for w, c in zip(expected, candidates))
            assert np.abs(gated - mixed).max() < ORACLE_TOLERANCE, \
                'gated embedding differs from oracle'

    def property_attention_oracle(self, rng):
        for _ in range(self.cases):
            d = int(rng.integers(1, 5))
            q = rng.normal(size=(int(rng.integers(1, 5)), d))
            keys = rng.normal(size=(int(rng.integers(1, 6)), d))
            v = rng.normal(size=(len(keys), int(rng.integers(1, 4))))
            out = kernels.scaledDotAttention(q, keys, v)
            assert np.abs(out - _oracleAttention(q, keys, v)).max() < \
                ORACLE_TOLERANCE, 'attention differs from oracle'

    def property_hpf_oracle(self, rng):
        for _ in range(self.cases):
            d, n = 4, int(rng.integers(1, 5))
            params = seededHPF(int(rng.integers(2 ** 63)), dim=d, heads=2,
                               head_dim=2)
            streams = [rng.normal(size=(n, d)) for _ in range(3)]
            out = kernels.hpf(*streams, params)
            assert out.shape == (n, d), 'output shape %s' % (out.shape,)

            joint = np.concatenate([streams[0], params.split_tokens[:1],
                                    streams[1], params.split_tokens[1:],
                                    streams[2]])
            attended = self._oracleMultiHead(joint, joint, params.self_attn,
                                             params.self_attn.wk,
                                             params.self_attn.wv)
            hol = attended[:n]
            expected = np.zeros((n, d))
            for part, segment in (('arms', attended[n + 1:2 * n + 1]),
                                  ('legs', attended[2 * n + 2:])):
                expected += self._oracleMultiHead(
                    hol, segment, params.cross_attn,
                    params.cross_attn.part_keys[part],
                    params.cross_attn.part_values[part])
            assert np.abs(out - expected).max() < ORACLE_TOLERANCE, \
                'fusion differs from oracle'

    def _oracleMultiHead(self, x_q, x_kv, params: AttentionParams, wk, wv):
        q, k, v = x_q @ params.wq, x_kv @ wk, x_kv @ wv
        heads = []
        for h in range(params.heads):
            cols = slice(h * params.head_dim, (h + 1) * params.head_dim)
            heads.append(_oracleAttention(q[:, cols], k[:, cols], v[:, cols]))
        out = np.concatenate(heads, axis=1)
        return out @ params.wo if params.wo is not None else out

    def property_hpf_part_symmetry(self, rng):
        for _ in range(self.cases // 10 or 1):
            params = seededHPF(int(rng.integers(2 ** 63)), dim=4, heads=2,
                               head_dim=2)
            n = int(rng.integers(1, 5))
            hol, arms, legs = (rng.normal(size=(n, 4)) for _ in range(3))
            swapped = HPFParams(params.self_attn,
                                params.cross_attn.swappedParts('arms', 'legs'),
                                params.split_tokens[::-1])
            a = kernels.hpf(hol, arms, legs, params)
            b = kernels.hpf(hol, legs, arms, swapped)
            assert np.abs(a - b).max() < ORACLE_TOLERANCE, \
                'relabelled streams changed the output'

    def property_cycle_schedule(self, rng):
        for t_cycle in (1, 2, 3, 4):
            for max_len in range(1, 11):
                hooks = {'arms': ScheduleHook(), 'legs': ScheduleHook(offset=1)}
                holistic = ScheduleHook()
                result = generateCycle(hooks, holistic,
                                       CycleConfig(max_len, t_cycle),
                                       DenseStack.identity(4))
                cycles = -(-max_len // t_cycle)
                assert len(result.holistic) == max_len
                assert len(result.arms) == len(result.legs) == cycles * t_cycle
                for entry in result.guidance_log:
                    assert entry.cycle == -(-entry.step // t_cycle), \
                        'step %d used cycle %d' % (entry.step, entry.cycle)
                    assert entry.part_tokens >= entry.step, \
                        'step %d ran before its part tokens' % entry.step

    def property_cycle_end_token(self, rng):
        holistic = ScheduleHook()
        result = generateCycle({'arms': ScheduleHook(), 'legs': ScheduleHook()},
                               holistic, CycleConfig(50, 3, end_token=0),
                               DenseStack.identity(4))
        assert result.holistic == (0,), 'holistic %r' % (result.holistic,)
        assert len(result.arms) == 3, 'ran %d part steps' % len(result.arms)

    def property_cycle_determinism(self, rng):
        params = seededHPF(int(rng.integers(2 ** 63)), dim=4, heads=2,
                           head_dim=2)
        runs = [generateCycle({'arms': ScheduleHook(), 'legs': ScheduleHook(offset=2)},
                              ScheduleHook(), CycleConfig(7), DenseStack.identity(4),
                              params).toJSON() for _ in range(2)]
        assert runs[0] == runs[1], 'two runs differ'

    def property_nll_uniform(self, rng):
        assert abs(kernels.nllLoss(np.full(4, 0.25), 2) - math.log(4)) < 1e-12
        assert kernels.nllLoss(np.eye(4)[1], 1) == 0.0
        assert abs(kernels.nllLoss(np.eye(4)[1], 0) + math.log(1e-12)) < 1e-9


def runSelfTest(seed: int = 0, cases: int = CASES,
                names: t.Optional[t.Sequence[str]] = None) -> t.List[PropertyResult]:
    return KernelSelfTest(seed, cases).run(names)
