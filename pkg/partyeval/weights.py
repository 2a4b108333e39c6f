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


==============
Kernel weights
==============

Parameter containers for the architecture kernels, their JSON files and a
seeded initializer every implementation can reproduce.

Weight JSON::

    {"kind": "dense_stack", "layers": [{"w": [[...]], "b": [...], "act": "relu"}]}
    {"kind": "codebook", "entries": [[...]]}
    {"kind": "attention", "heads": 6, "head_dim": 64, "wq": [[...]], "wk": ...,
     "wv": ..., "wo": ..., "part_keys": {"arms": ...}, "part_values": {...}}

Matrices multiply from the right: a dense layer computes act(x w + b) with w
of shape (in, out).

Seeded initializer: a splitmix64 stream. With state s starting at the seed,
the k-th draw (k = 1, 2, ...) is::

    s_k = seed + k * 0x9E3779B97F4A7C15                      (mod 2^64)
    z = (s_k ^ (s_k >> 30)) * 0xBF58476D1CE4E5B9             (mod 2^64)
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB                 (mod 2^64)
    z = z ^ (z >> 31)
    value = low + (high - low) * (z >> 11) / 2^53

Arrays are filled in row-major order, parameters in declaration order
(layer by layer, weight before bias).
"""

import typing as t

from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

from partyeval import codec
from partyeval.codec import EvalError

MASK = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
MIX_1 = 0xBF58476D1CE4E5B9
MIX_2 = 0x94D049BB133111EB

INIT_LOW = -0.1
INIT_HIGH = 0.1

CODEBOOK_SIZE = 256
PART_CODEBOOK_SIZE = 128
GTE_LAYERS = 3
GTE_HIDDEN = 128
PTG_TRANSFORMS = 4
CODE_DIM = 128
HEADS = 6
HEAD_DIM = 64

ACTIVATIONS = ('relu', 'gelu', 'none')


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def gelu(x: np.ndarray) -> np.ndarray:
    """
    Exact GELU, x * Phi(x) with the Gaussian CDF.
    """
    x = np.asarray(x, dtype=np.float64)
    return x * ndtr(x)


_APPLY = {'relu': relu, 'gelu': gelu, 'none': lambda x: x}


class SplitMix64(object):
    """
    Counter based splitmix64 stream; see the module docstring for the exact
    sequence.
    """

    def __init__(self, seed: int):
        self.seed = int(seed) & MASK
        self.drawn = 0

    def integers(self, count: int) -> np.ndarray:
        k = np.arange(self.drawn + 1, self.drawn + count + 1, dtype=np.uint64)
        self.drawn += count
        with np.errstate(over='ignore'):
            z = np.uint64(self.seed) + k * np.uint64(GOLDEN)
            z = (z ^ (z >> np.uint64(30))) * np.uint64(MIX_1)
            z = (z ^ (z >> np.uint64(27))) * np.uint64(MIX_2)
            z = z ^ (z >> np.uint64(31))
        return z

    def uniform(self, shape, low: float = INIT_LOW,
                high: float = INIT_HIGH) -> np.ndarray:
        shape = tuple(np.atleast_1d(shape).tolist())
        count = int(np.prod(shape)) if shape else 1
        unit = (self.integers(count) >> np.uint64(11)).astype(np.float64) * 2.0 ** -53
        return (low + (high - low) * unit).reshape(shape)


def seededUniform(seed: int, shape, low: float = INIT_LOW,
                  high: float = INIT_HIGH) -> np.ndarray:
    return SplitMix64(seed).uniform(shape, low, high)


def _matrix(value, name, source=None, ndim=2) -> np.ndarray:
    try:
        array = np.array(value, dtype=np.float64)
    except (TypeError, ValueError):
        raise EvalError('%s is not a rectangular array of numbers' % name,
                        source=source)
    if array.ndim != ndim:
        raise EvalError('%s must have %d dimensions, got shape %s'
                        % (name, ndim, array.shape), source=source)
    if not np.isfinite(array).all():
        raise EvalError('%s has non-finite entries' % name, source=source)
    return array


@dataclass(frozen=True)
class DenseLayer:
    weight: np.ndarray
    bias: np.ndarray
    activation: str = 'relu'

    def __post_init__(self):
        weight = _matrix(self.weight, 'weight')
        bias = _matrix(self.bias, 'bias', ndim=1)
        if bias.shape[0] != weight.shape[1]:
            raise EvalError('Bias of length %d for weight of shape %s'
                            % (bias.shape[0], weight.shape))
        if self.activation not in ACTIVATIONS:
            raise EvalError('Unknown activation %s' % self.activation)
        object.__setattr__(self, 'weight', weight)
        object.__setattr__(self, 'bias', bias)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return _APPLY[self.activation](x @ self.weight + self.bias)


@dataclass(frozen=True)
class DenseStack:
    """
    A multilayer perceptron: layers applied in order.
    """
    layers: t.Tuple[DenseLayer, ...]

    def __post_init__(self):
        layers = tuple(self.layers)
        if not layers:
            raise EvalError('A dense stack needs at least one layer')
        for index, (a, b) in enumerate(zip(layers, layers[1:])):
            if a.weight.shape[1] != b.weight.shape[0]:
                raise EvalError('Layer %d outputs %d features, layer %d takes %d'
                                % (index, a.weight.shape[1], index + 1,
                                   b.weight.shape[0]))
        object.__setattr__(self, 'layers', layers)

    @property
    def inputDim(self) -> int:
        return self.layers[0].weight.shape[0]

    @property
    def outputDim(self) -> int:
        return self.layers[-1].weight.shape[1]

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.inputDim:
            raise EvalError('Dense stack takes %d features, got %d'
                            % (self.inputDim, x.shape[-1]))
        for layer in self.layers:
            x = layer(x)
        return x

    @classmethod
    def identity(cls, dim: int) -> 'DenseStack':
        return cls((DenseLayer(np.eye(dim), np.zeros(dim), 'none'),))

    def toJSON(self) -> dict:
        return {'kind': 'dense_stack',
                'layers': [{'w': l.weight.tolist(), 'b': l.bias.tolist(),
                            'act': l.activation} for l in self.layers]}


@dataclass(frozen=True)
class Codebook:
    entries: np.ndarray

    def __post_init__(self):
        entries = _matrix(self.entries, 'codebook entries')
        if entries.shape[0] < 1:
            raise EvalError('A codebook needs at least one entry')
        object.__setattr__(self, 'entries', entries)

    @property
    def size(self) -> int:
        return self.entries.shape[0]

    @property
    def dim(self) -> int:
        return self.entries.shape[1]

    def toJSON(self) -> dict:
        return {'kind': 'codebook', 'entries': self.entries.tolist()}


@dataclass(frozen=True)
class AttentionParams:
    """
    Multi-head projections. wq, wk, wv map d_in to heads * head_dim; wo, when
    present, maps the concatenated heads back to d_out. part_keys and
    part_values hold the per part projections of cross attention.
    """
    wq: np.ndarray
    wk: t.Optional[np.ndarray] = None
    wv: t.Optional[np.ndarray] = None
    wo: t.Optional[np.ndarray] = None
    heads: int = HEADS
    head_dim: int = HEAD_DIM
    part_keys: t.Mapping[str, np.ndarray] = field(default_factory=dict)
    part_values: t.Mapping[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        width = self.heads * self.head_dim
        if self.heads < 1 or self.head_dim < 1:
            raise EvalError('heads and head_dim must be positive')

        def check(matrix, name):
            matrix = _matrix(matrix, name)
            if matrix.shape[1] != width:
                raise EvalError('%s projects to %d, heads * head_dim is %d'
                                % (name, matrix.shape[1], width))
            return matrix

        object.__setattr__(self, 'wq', check(self.wq, 'wq'))
        for name in ('wk', 'wv'):
            value = getattr(self, name)
            if value is not None:
                object.__setattr__(self, name, check(value, name))
        if self.wo is not None:
            wo = _matrix(self.wo, 'wo')
            if wo.shape[0] != width:
                raise EvalError('wo takes %d features, heads * head_dim is %d'
                                % (wo.shape[0], width))
            object.__setattr__(self, 'wo', wo)
        if set(self.part_keys) != set(self.part_values):
            raise EvalError('Part key and value projections name different parts')
        object.__setattr__(self, 'part_keys', {
            k: check(v, 'part_keys[%s]' % k) for k, v in self.part_keys.items()})
        object.__setattr__(self, 'part_values', {
            k: check(v, 'part_values[%s]' % k) for k, v in self.part_values.items()})

    @property
    def width(self) -> int:
        return self.heads * self.head_dim

    def keyValue(self, part: t.Optional[str] = None):
        """
        (wk, wv) of self attention, or of a part for cross attention.
        """
        if part is None:
            if self.wk is None or self.wv is None:
                raise EvalError('Self attention needs wk and wv')
            return self.wk, self.wv
        try:
            return self.part_keys[part], self.part_values[part]
        except KeyError:
            raise EvalError('No projections for part %s' % part,
                            codec.LOOKUP_ERROR)

    def swappedParts(self, a: str, b: str) -> 'AttentionParams':
        keys, values = dict(self.part_keys), dict(self.part_values)
        keys[a], keys[b] = keys[b], keys[a]
        values[a], values[b] = values[b], values[a]
        return AttentionParams(self.wq, self.wk, self.wv, self.wo, self.heads,
                               self.head_dim, keys, values)

    def toJSON(self) -> dict:
        document = {'kind': 'attention', 'heads': self.heads,
                    'head_dim': self.head_dim, 'wq': self.wq.tolist()}
        for name in ('wk', 'wv', 'wo'):
            value = getattr(self, name)
            if value is not None:
                document[name] = value.tolist()
        if self.part_keys:
            document['part_keys'] = {k: v.tolist() for k, v in self.part_keys.items()}
            document['part_values'] = {k: v.tolist() for k, v in self.part_values.items()}
        return document


@dataclass(frozen=True)
class HPFParams:
    """
    Holistic-part fusion: joint self attention, then cross attention from the
    holistic stream to each part stream. split_tokens are the two separator
    vectors placed between the streams.
    """
    self_attn: AttentionParams
    cross_attn: AttentionParams
    split_tokens: np.ndarray

    def __post_init__(self):
        split = _matrix(self.split_tokens, 'split_tokens')
        if split.shape[0] != 2:
            raise EvalError('HPF needs 2 split tokens, got %d' % split.shape[0])
        if split.shape[1] != self.self_attn.wq.shape[0]:
            raise EvalError('Split tokens have dimension %d, tokens have %d'
                            % (split.shape[1], self.self_attn.wq.shape[0]))
        object.__setattr__(self, 'split_tokens', split)


def loadWeights(raw, source: t.Optional[str] = None):
    """
    Read a weight file of any kind.

    @rtype: DenseStack, Codebook or AttentionParams
    """
    if hasattr(raw, 'read'):
        raw = raw.read()
    document = codec.requireKeys(codec.jloads(raw, source), ['kind'],
                                 'Weights', source)
    kind = document['kind']
    try:
        if kind == 'dense_stack':
            codec.requireKeys(document, ['layers'], 'Dense stack', source)
            return DenseStack(tuple(
                DenseLayer(layer['w'], layer['b'], layer.get('act', 'relu'))
                for layer in document['layers']))
        elif kind == 'codebook':
            codec.requireKeys(document, ['entries'], 'Codebook', source)
            return Codebook(document['entries'])
        elif kind == 'attention':
            codec.requireKeys(document, ['wq'], 'Attention', source)
            return AttentionParams(
                document['wq'], document.get('wk'), document.get('wv'),
                document.get('wo'), document.get('heads', HEADS),
                document.get('head_dim', HEAD_DIM),
                document.get('part_keys', {}), document.get('part_values', {}))
    except EvalError as e:
        e.source = source
        raise
    except (KeyError, TypeError) as e:
        raise EvalError('Malformed %s weights: %s' % (kind, e), source=source)
    raise EvalError('Unknown weight kind %s' % kind, codec.LOOKUP_ERROR,
                    source=source)


def dumpWeights(weights) -> str:
    return codec.jdumps(weights.toJSON(), indent=None)


def seededDenseStack(seed, dims: t.Sequence[int], activation: str = 'relu',
                     last_activation: str = 'none') -> DenseStack:
    """
    Dense stack with layer sizes dims[0] -> dims[1] -> ... drawn from one
    splitmix64 stream; every layer but the last uses activation.
    """
    stream = seed if isinstance(seed, SplitMix64) else SplitMix64(seed)
    layers = []
    for index, (d_in, d_out) in enumerate(zip(dims, dims[1:])):
        act = last_activation if index == len(dims) - 2 else activation
        weight = stream.uniform((d_in, d_out))
        bias = stream.uniform((d_out,))
        layers.append(DenseLayer(weight, bias, act))
    return DenseStack(tuple(layers))


def seededCodebook(seed, size: int = CODEBOOK_SIZE,
                   dim: int = CODE_DIM) -> Codebook:
    stream = seed if isinstance(seed, SplitMix64) else SplitMix64(seed)
    return Codebook(stream.uniform((size, dim)))


def seededPartCodebook(seed, dim: int = CODE_DIM) -> Codebook:
    return seededCodebook(seed, PART_CODEBOOK_SIZE, dim)


def seededGTE(seed, d_in: int, layers: int = GTE_LAYERS,
              hidden: int = GTE_HIDDEN) -> t.Tuple[np.ndarray, ...]:
    """
    Layer weights of a global temporal enhancement stack, d_in -> hidden,
    then hidden -> hidden for the remaining layers.
    """
    if layers < 1:
        raise EvalError('A GTE stack needs a layer, got %d' % layers)
    stream = seed if isinstance(seed, SplitMix64) else SplitMix64(seed)
    dims = [d_in] + [hidden] * layers
    return tuple(stream.uniform((a, b)) for a, b in zip(dims, dims[1:]))


def seededPTG(seed, dim: int = CODE_DIM,
              count: int = PTG_TRANSFORMS) -> t.List[DenseStack]:
    """
    count text transforms, each a 3 layer ReLU stack dim -> dim.
    """
    if count < 1:
        raise EvalError('Need at least one transform, got %d' % count)
    stream = seed if isinstance(seed, SplitMix64) else SplitMix64(seed)
    return [seededDenseStack(stream, [dim] * 4) for _ in range(count)]


def seededAttention(seed, d_in: int, heads: int = HEADS,
                    head_dim: int = HEAD_DIM, d_out: t.Optional[int] = None,
                    parts: t.Sequence[str] = ()) -> AttentionParams:
    """
    Attention projections in the order wq, wk, wv, wo, then for every part
    its key and value projection. Cross attention (parts given) has no
    wk/wv of its own.
    """
    stream = seed if isinstance(seed, SplitMix64) else SplitMix64(seed)
    width = heads * head_dim
    wq = stream.uniform((d_in, width))
    wk = wv = None
    if not parts:
        wk = stream.uniform((d_in, width))
        wv = stream.uniform((d_in, width))
    wo = stream.uniform((width, d_out)) if d_out is not None else None
    keys, values = {}, {}
    for part in parts:
        keys[part] = stream.uniform((d_in, width))
        values[part] = stream.uniform((d_in, width))
    return AttentionParams(wq, wk, wv, wo, heads, head_dim, keys, values)


def seededHPF(seed, dim: int = CODE_DIM, heads: int = HEADS,
              head_dim: int = HEAD_DIM) -> HPFParams:
    stream = seed if isinstance(seed, SplitMix64) else SplitMix64(seed)
    self_attn = seededAttention(stream, dim, heads, head_dim, d_out=dim)
    cross_attn = seededAttention(stream, dim, heads, head_dim, d_out=dim,
                                 parts=('arms', 'legs'))
    return HPFParams(self_attn, cross_attn, stream.uniform((2, dim)))


def _loadKind(raw, kind, source):
    weights = loadWeights(raw, source)
    if weights.toJSON()['kind'] != kind:
        raise EvalError('Expected %s weights, got %s'
                        % (kind, weights.toJSON()['kind']), source=source)
    return weights


def loadDenseStack(raw, source: t.Optional[str] = None) -> DenseStack:
    return _loadKind(raw, 'dense_stack', source)


def loadCodebook(raw, source: t.Optional[str] = None) -> Codebook:
    return _loadKind(raw, 'codebook', source)


def loadAttention(raw, source: t.Optional[str] = None) -> AttentionParams:
    return _loadKind(raw, 'attention', source)
