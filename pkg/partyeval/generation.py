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


================
Cycle generation
================

Scheduling of part-guided token generation. Next token functions are
supplied from outside as IGeneratorHook providers; this module only decides
who runs when and with what.

Cycle i runs T_cycle steps of each part generator, fuses the new part tokens
into the guidance G_i, then runs up to T_cycle holistic steps conditioned on
G_i and on the holistic history refined by holistic-part fusion. Generation
stops when the holistic generator emits the end token (kept in the output)
or reaches max_len tokens.
"""

import typing as t

from dataclasses import dataclass, field

import numpy as np
from twisted.logger import Logger
from zope.interface import Attribute, Interface

from partyeval import codec
from partyeval.codec import EvalError
from partyeval.kernels import fuseGuidance, hpf
from partyeval.weights import DenseStack, HPFParams

log = Logger()

T_CYCLE = 3
PARTS = ('arms', 'legs')


class IGeneratorHook(Interface):
    """
    A next token function standing in for a trained transformer.
    """

    vocabSize = Attribute('Number of token ids the hook may return')

    def nextToken(history, conditioning, guidance):
        """
        @type history: History
        @param history: Tokens generated so far by this stream and their
            embeddings (fusion refined for the holistic stream)

        @type conditioning: numpy.ndarray or None
        @param conditioning: Text embedding of this stream

        @type guidance: numpy.ndarray or None
        @param guidance: Part guidance of the current cycle, None for part
            streams

        @rtype: tuple
        @return: (token id, token embedding)
        """


@dataclass(frozen=True)
class History:
    tokens: t.Tuple[int, ...]
    embeddings: np.ndarray

    def __len__(self):
        return len(self.tokens)


@dataclass(frozen=True)
class CycleConfig:
    max_len: int
    T_cycle: int = T_CYCLE
    end_token: t.Optional[int] = None

    def __post_init__(self):
        if not isinstance(self.T_cycle, int) or self.T_cycle < 1:
            raise EvalError('T_cycle must be at least 1, got %r' % (self.T_cycle,))
        if not isinstance(self.max_len, int) or self.max_len < 1:
            raise EvalError('max_len must be at least 1, got %r' % (self.max_len,))


@dataclass(frozen=True)
class GuidanceEntry:
    """
    Which guidance conditioned holistic step `step` (1 based), and how many
    tokens each part stream had produced at that moment.
    """
    step: int
    cycle: int
    part_tokens: int
    guidance: np.ndarray


@dataclass(frozen=True)
class GenerationResult:
    holistic: t.Tuple[int, ...]
    arms: t.Tuple[int, ...]
    legs: t.Tuple[int, ...]
    guidance_log: t.Tuple[GuidanceEntry, ...]
    embeddings: t.Mapping[str, np.ndarray] = field(default_factory=dict)

    def toJSON(self) -> dict:
        return {'holistic': list(self.holistic),
                'arms': list(self.arms),
                'legs': list(self.legs),
                'guidance': [{'step': e.step, 'cycle': e.cycle,
                              'part_tokens': e.part_tokens}
                             for e in self.guidance_log]}


class _Stream(object):
    """
    Token ids and embeddings of one stream, checked as they come in.
    """

    def __init__(self, name, hook):
        if not IGeneratorHook.providedBy(hook):
            raise EvalError('%s generator does not provide IGeneratorHook'
                            % name, codec.CONTRACT_ERROR)
        self.name = name
        self.hook = hook
        self.tokens = []
        self.embeddings = []

    def history(self, embeddings=None) -> History:
        if embeddings is None:
            embeddings = self.matrix()
        return History(tuple(self.tokens), embeddings)

    def matrix(self, upto=None) -> np.ndarray:
        rows = self.embeddings if upto is None else self.embeddings[:upto]
        if not rows:
            return np.zeros((0, 0))
        return np.stack(rows)

    def step(self, conditioning, guidance, dim, history=None):
        result = self.hook.nextToken(
            self.history() if history is None else history, conditioning,
            guidance)
        try:
            token, embedding = result
        except (TypeError, ValueError):
            raise EvalError('%s generator returned %r, not (token, embedding)'
                            % (self.name, result), codec.CONTRACT_ERROR)
        if isinstance(token, (bool, np.bool_)) or \
                not isinstance(token, (int, np.integer)) or \
                not 0 <= token < self.hook.vocabSize:
            raise EvalError('%s generator returned token %r outside [0, %d)'
                            % (self.name, token, self.hook.vocabSize),
                            codec.CONTRACT_ERROR,
                            data={'token': repr(token), 'step': len(self.tokens) + 1})
        embedding = np.asarray(embedding, dtype=np.float64)
        if embedding.ndim != 1 or not np.isfinite(embedding).all():
            raise EvalError('%s generator returned a malformed embedding'
                            % self.name, codec.CONTRACT_ERROR)
        if dim is not None and embedding.shape[0] != dim:
            raise EvalError('%s generator embedding has dimension %d, expected %d'
                            % (self.name, embedding.shape[0], dim),
                            codec.CONTRACT_ERROR)
        self.tokens.append(int(token))
        self.embeddings.append(embedding)
        return int(token), embedding


def _conditioning(conditioning, name):
    if conditioning is None:
        return None
    if isinstance(conditioning, dict):
        return conditioning.get(name)
    return conditioning


def generateCycle(part_gens: t.Mapping[str, object], holistic_gen,
                  cfg: CycleConfig, fusion_mlp: DenseStack,
                  hpf_params: t.Optional[HPFParams] = None,
                  conditioning=None) -> GenerationResult:
    """
    Run part-guided generation to completion.

    @type part_gens: dict
    @param part_gens: IGeneratorHook for 'arms' and for 'legs'

    @type holistic_gen: IGeneratorHook
    @param holistic_gen: Holistic next token function

    @type cfg: CycleConfig
    @param cfg: Steps per cycle, length limit and end token

    @type fusion_mlp: DenseStack
    @param fusion_mlp: MLP applied to arm + leg embeddings per step

    @type hpf_params: HPFParams
    @param hpf_params: Fusion weights; without them the holistic history is
        passed unrefined

    @type conditioning: numpy.ndarray or dict
    @param conditioning: One text embedding for every stream, or a dict
        keyed by 'holistic', 'arms', 'legs'

    @rtype: GenerationResult

    @raise EvalError: CONTRACT_ERROR when a hook misbehaves
    """
    missing = [p for p in PARTS if p not in part_gens]
    if missing:
        raise EvalError('No generator for %s' % ', '.join(missing),
                        codec.CONTRACT_ERROR)
    parts = {p: _Stream(p, part_gens[p]) for p in PARTS}
    holistic = _Stream('holistic', holistic_gen)
    dim = None
    guidance_log = []
    cycle = 0
    finished = False

    while not finished and len(holistic.tokens) < cfg.max_len:
        cycle += 1
        for _ in range(cfg.T_cycle):
            for name in PARTS:
                _, embedding = parts[name].step(
                    _conditioning(conditioning, name), None, dim)
                dim = embedding.shape[0]
        start = (cycle - 1) * cfg.T_cycle
        guidance = fuseGuidance(parts['arms'].matrix()[start:],
                                parts['legs'].matrix()[start:], fusion_mlp)
        log.debug('cycle {cycle}: guidance from part steps {first}..{last}',
                  cycle=cycle, first=start + 1, last=start + cfg.T_cycle)

        for _ in range(cfg.T_cycle):
            step = len(holistic.tokens) + 1
            previous = step - 1
            refined = holistic.matrix()
            if hpf_params is not None and previous > 0:
                refined = hpf(refined, parts['arms'].matrix(previous),
                              parts['legs'].matrix(previous), hpf_params)
            guidance_log.append(GuidanceEntry(step, cycle,
                                              len(parts['arms'].tokens),
                                              guidance))
            token, embedding = holistic.step(
                _conditioning(conditioning, 'holistic'), guidance, dim,
                holistic.history(refined))
            if token == cfg.end_token:
                finished = True
                break
            if len(holistic.tokens) >= cfg.max_len:
                break

    log.info('Generated {hol} holistic and {part} part tokens in {cycles} '
             'cycles', hol=len(holistic.tokens), part=len(parts['arms'].tokens),
             cycles=cycle)
    return GenerationResult(
        tuple(holistic.tokens), tuple(parts['arms'].tokens),
        tuple(parts['legs'].tokens), tuple(guidance_log),
        {'holistic': holistic.matrix(), 'arms': parts['arms'].matrix(),
         'legs': parts['legs'].matrix()})
