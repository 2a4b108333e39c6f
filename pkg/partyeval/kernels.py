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
Reference kernels
=================

Forward passes of the part-guided text-to-motion architecture with weights
passed in: temporal enhancement of frame features (local windowed pooling
and graph propagation), vector quantization and its losses, part-aware text
grounding, scaled dot-product and multi-head attention, holistic-part fusion
and the token losses.

Nothing here trains. Every function is pure given its parameters, works in
float64 and validates shapes up front, raising EvalError(VALIDATION_ERROR)
on mismatch.
"""

import typing as t

import numpy as np
from scipy.special import logsumexp, softmax

from partyeval.codec import EvalError
from partyeval.weights import (AttentionParams, Codebook, DenseStack,
                               HPFParams, gelu)

LTE_WINDOW = 8
LTE_PART_WINDOW = 12
TAU = 0.05
LAMBDA_APP = 1.0
LAMBDA_DIV = 0.1
LAMBDA_AUX = 0.1
PROBABILITY_FLOOR = 1e-12


def _array(value, name: str, ndim: int) -> np.ndarray:
    array = np.asarray(value, dtype=np.float64)
    if array.ndim != ndim:
        raise EvalError('%s must have %d dimensions, got shape %s'
                        % (name, ndim, array.shape))
    return array


def _scores(stack: DenseStack, rows: np.ndarray) -> np.ndarray:
    out = stack(rows)
    if out.shape[-1] != 1:
        raise EvalError('A scoring stack must output 1 value, got %d'
                        % out.shape[-1])
    return out[..., 0]


def padToWindow(frame_feats: np.ndarray, w: int) -> np.ndarray:
    """
    Repeat the last frame until the frame count is a multiple of w.
    """
    frames = _array(frame_feats, 'frame features', 2)
    if w < 1:
        raise EvalError('Window must be positive, got %d' % w)
    if len(frames) == 0:
        raise EvalError('No frame features')
    short = -len(frames) % w
    if short:
        frames = np.concatenate([frames, np.repeat(frames[-1:], short, axis=0)])
    return frames


def _window(w: t.Optional[int], part: bool) -> int:
    if w is not None:
        return w
    return LTE_PART_WINDOW if part else LTE_WINDOW


def lteWeights(frame_feats, mlps: t.Union[DenseStack, t.Sequence[DenseStack]],
               w: t.Optional[int] = None, part: bool = False) -> np.ndarray:
    """
    Pooling weights alpha of every group, shape (groups, w). Each row is a
    softmax over the scores of the group's frames.
    """
    w = _window(w, part)
    frames = padToWindow(frame_feats, w)
    groups = frames.reshape(-1, w, frames.shape[1])
    if isinstance(mlps, DenseStack):
        mlps = [mlps] * len(groups)
    if len(mlps) != len(groups):
        raise EvalError('%d scoring stacks for %d groups'
                        % (len(mlps), len(groups)))
    scores = np.stack([_scores(mlp, group) for mlp, group in zip(mlps, groups)])
    return softmax(scores, axis=1)


def lteForward(frame_feats, mlps: t.Union[DenseStack, t.Sequence[DenseStack]],
               w: t.Optional[int] = None, part: bool = False) -> np.ndarray:
    """
    Local temporal enhancement: bundle w consecutive frame features into a
    group and pool them with softmax weights scored by the group's MLP.

    @type frame_feats: numpy.ndarray
    @param frame_feats: t x d frame features; t not divisible by w is padded
        with the last frame

    @type mlps: DenseStack or list of DenseStack
    @param mlps: One scoring stack (d -> 1) shared by all groups, or one per
        group

    @type w: int
    @param w: Group length, LTE_WINDOW by default and LTE_PART_WINDOW for a
        part encoder (part=True)

    @rtype: numpy.ndarray
    @return: ceil(t / w) x d group features
    """
    w = _window(w, part)
    frames = padToWindow(frame_feats, w)
    groups = frames.reshape(-1, w, frames.shape[1])
    alpha = lteWeights(frames, mlps, w)
    return np.einsum('gw,gwd->gd', alpha, groups)


def chainAdjacency(n: int) -> np.ndarray:
    """
    Temporal chain: node i linked to i - 1 and i + 1.
    """
    if n < 1:
        raise EvalError('Graph needs a node, got %d' % n)
    index = np.arange(n)
    return (np.abs(index[:, None] - index[None, :]) == 1).astype(np.float64)


def normalizeAdjacency(a: t.Optional[np.ndarray] = None,
                       n: t.Optional[int] = None) -> np.ndarray:
    """
    D^-1/2 (A + I) D^-1/2 with D the degree matrix of A + I. Without A the
    temporal chain over n nodes is used.
    """
    if a is None:
        if n is None:
            raise EvalError('Need an adjacency matrix or a node count')
        a = chainAdjacency(n)
    a = _array(a, 'adjacency', 2)
    if a.shape[0] != a.shape[1]:
        raise EvalError('Adjacency must be square, got shape %s' % (a.shape,))
    if (a < 0).any() or not np.isfinite(a).all():
        raise EvalError('Adjacency entries must be finite and nonnegative')
    looped = a + np.eye(a.shape[0])
    inverse_root = 1.0 / np.sqrt(looped.sum(axis=1))
    return inverse_root[:, None] * looped * inverse_root[None, :]


def gteForward(nodes, adjacency, w) -> np.ndarray:
    """
    One global temporal enhancement layer, GELU(A_hat (N W)).

    @type adjacency: numpy.ndarray
    @param adjacency: Already normalized N x N matrix
    """
    nodes = _array(nodes, 'nodes', 2)
    adjacency = _array(adjacency, 'adjacency', 2)
    w = _array(w, 'weight', 2)
    if adjacency.shape != (len(nodes), len(nodes)):
        raise EvalError('Adjacency of shape %s for %d nodes'
                        % (adjacency.shape, len(nodes)))
    if w.shape[0] != nodes.shape[1]:
        raise EvalError('Weight takes %d features, nodes have %d'
                        % (w.shape[0], nodes.shape[1]))
    return gelu(adjacency @ (nodes @ w))


def gteStack(nodes, adjacency, weights: t.Sequence[np.ndarray]) -> np.ndarray:
    """
    gteForward applied once per layer weight, in order. weights.seededGTE
    draws the default 3 layer stack of hidden size 128.
    """
    for w in weights:
        nodes = gteForward(nodes, adjacency, w)
    return nodes


def vqQuantize(feat, codebook: Codebook) -> t.Tuple[int, np.ndarray]:
    """
    Nearest codebook entry by Euclidean distance. Equal distances go to the
    lowest index.

    @rtype: tuple
    @return: (index, entry)
    """
    feat = _array(feat, 'feature', 1)
    if feat.shape[0] != codebook.dim:
        raise EvalError('Feature of dimension %d for a codebook of dimension %d'
                        % (feat.shape[0], codebook.dim))
    delta = codebook.entries - feat
    index = int(np.argmin(np.einsum('cd,cd->c', delta, delta)))
    return index, codebook.entries[index].copy()


def vqQuantizeBatch(feats, codebook: Codebook) -> np.ndarray:
    feats = _array(feats, 'features', 2)
    return np.array([vqQuantize(f, codebook)[0] for f in feats], dtype=np.int64)


def vqLosses(decoded, target, quantized, encoded,
             lambda_app: float = LAMBDA_APP) -> t.Tuple[float, float, float]:
    """
    Reconstruction (mean absolute error), approximation (mean squared error
    between quantized and encoded features) and their weighted sum.
    """
    decoded, target = np.asarray(decoded, float), np.asarray(target, float)
    quantized, encoded = np.asarray(quantized, float), np.asarray(encoded, float)
    if decoded.shape != target.shape:
        raise EvalError('Decoded shape %s, target shape %s'
                        % (decoded.shape, target.shape))
    if quantized.shape != encoded.shape:
        raise EvalError('Quantized shape %s, encoded shape %s'
                        % (quantized.shape, encoded.shape))
    l_rec = float(np.abs(decoded - target).mean())
    l_app = float(np.square(quantized - encoded).mean())
    return l_rec, l_app, l_rec + lambda_app * l_app


def ptgTransform(c, mlps: t.Sequence[DenseStack]) -> np.ndarray:
    """
    K diversified copies of a text embedding, one per transform stack.

    @rtype: numpy.ndarray
    @return: K x d
    """
    c = _array(c, 'text embedding', 1)
    if not mlps:
        raise EvalError('Need at least one transform')
    out = np.stack([mlp(c) for mlp in mlps])
    if out.shape[1] != c.shape[0]:
        raise EvalError('Transforms map %d features to %d'
                        % (c.shape[0], out.shape[1]))
    return out


def cosineSimilarity(a, b) -> np.ndarray:
    """
    Cosine similarity between rows of a and rows of b.
    """
    a, b = np.atleast_2d(a).astype(float), np.atleast_2d(b).astype(float)
    norm_a = np.linalg.norm(a, axis=1)
    norm_b = np.linalg.norm(b, axis=1)
    if (norm_a == 0).any() or (norm_b == 0).any():
        raise EvalError('Cosine similarity of a zero vector')
    return np.clip((a / norm_a[:, None]) @ (b / norm_b[:, None]).T, -1.0, 1.0)


def diversityLossFromSimilarities(positive, negative,
                                  tau: float = TAU) -> float:
    """
    Contrastive loss given s(c'_n, c) in positive (K) and s(c'_n, c'_m) in
    negative (K x K, diagonal ignored). The n-th term is
    log(e^{p_n/tau} + sum_{m != n} e^{s_nm/tau}) - p_n/tau, evaluated as a
    log-sum-exp shifted by the positive logit.
    """
    positive = _array(positive, 'positive similarities', 1)
    negative = _array(negative, 'negative similarities', 2)
    k = len(positive)
    if negative.shape != (k, k):
        raise EvalError('Negative similarities of shape %s for %d transforms'
                        % (negative.shape, k))
    if tau <= 0:
        raise EvalError('Temperature must be positive, got %r' % tau)
    off = ~np.eye(k, dtype=bool)
    terms = np.empty(k)
    for n in range(k):
        logits = np.concatenate(([positive[n]], negative[n][off[n]]))
        terms[n] = logsumexp((logits - positive[n]) / tau)
    return float(terms.mean())


def diversityLoss(c, transformed, tau: float = TAU) -> float:
    """
    Text diversity loss: each transform is pulled to the original embedding
    and pushed away from the other transforms.
    """
    c = _array(c, 'text embedding', 1)
    transformed = _array(transformed, 'transformed embeddings', 2)
    if transformed.shape[1] != c.shape[0]:
        raise EvalError('Transforms of dimension %d for an embedding of %d'
                        % (transformed.shape[1], c.shape[0]))
    positive = cosineSimilarity(transformed, c)[:, 0]
    negative = cosineSimilarity(transformed, transformed)
    return diversityLossFromSimilarities(positive, negative, tau)


def partGate(embeddings, gate: DenseStack) -> t.Tuple[np.ndarray, np.ndarray]:
    """
    Adaptive selection among candidate embeddings: softmax over the gate's
    score of each candidate, then the weighted sum.

    @type gate: DenseStack
    @param gate: d -> 1 scoring stack, usually one linear layer

    @rtype: tuple
    @return: (gated d-vector, K selection weights)
    """
    embeddings = _array(embeddings, 'embeddings', 2)
    weights = softmax(_scores(gate, embeddings))
    return weights @ embeddings, weights


def auxLoss(gated, part_text_embedding) -> float:
    gated = _array(gated, 'gated embedding', 1)
    target = _array(part_text_embedding, 'part text embedding', 1)
    if gated.shape != target.shape:
        raise EvalError('Gated embedding of dimension %d, part text of %d'
                        % (gated.shape[0], target.shape[0]))
    return float(np.abs(gated - target).mean())


def attentionWeights(q, k) -> np.ndarray:
    q = _array(q, 'queries', 2)
    k = _array(k, 'keys', 2)
    if q.shape[1] != k.shape[1]:
        raise EvalError('Queries of dimension %d, keys of %d'
                        % (q.shape[1], k.shape[1]))
    if len(k) == 0:
        raise EvalError('Attention needs at least one key')
    return softmax(q @ k.T / np.sqrt(q.shape[1]), axis=1)


def scaledDotAttention(q, k, v) -> np.ndarray:
    """
    softmax(Q K^T / sqrt(d_k)) V
    """
    v = _array(v, 'values', 2)
    weights = attentionWeights(q, k)
    if weights.shape[1] != len(v):
        raise EvalError('%d keys but %d values' % (weights.shape[1], len(v)))
    return weights @ v


def _heads(x: np.ndarray, params: AttentionParams) -> np.ndarray:
    return x.reshape(len(x), params.heads, params.head_dim).transpose(1, 0, 2)


def multiHeadAttention(x_query, x_kv, params: AttentionParams,
                       part: t.Optional[str] = None,
                       return_weights: bool = False):
    """
    Project, attend per head, concatenate and apply the output projection if
    there is one. With part given, the key and value projections are that
    part's cross attention projections.

    @rtype: numpy.ndarray or tuple
    @return: Output rows, plus the heads x queries x keys weights when asked
    """
    x_query = _array(x_query, 'query tokens', 2)
    x_kv = _array(x_kv, 'key tokens', 2)
    wk, wv = params.keyValue(part)
    for x, w, name in ((x_query, params.wq, 'query'), (x_kv, wk, 'key')):
        if x.shape[1] != w.shape[0]:
            raise EvalError('%s tokens have %d features, projection takes %d'
                            % (name.capitalize(), x.shape[1], w.shape[0]))

    q = _heads(x_query @ params.wq, params)
    k = _heads(x_kv @ wk, params)
    v = _heads(x_kv @ wv, params)
    weights = np.stack([attentionWeights(q[h], k[h]) for h in range(params.heads)])
    out = np.einsum('hqk,hkd->qhd', weights, v).reshape(len(x_query), params.width)
    if params.wo is not None:
        out = out @ params.wo
    if return_weights:
        return out, weights
    return out


def _splitStreams(z_hol, z_arms, z_legs, split_tokens):
    n = len(z_hol)
    joint = np.concatenate([z_hol, split_tokens[:1], z_arms, split_tokens[1:],
                            z_legs])
    return joint, n


def _fusionInputs(z_hol, z_arms, z_legs, params: HPFParams):
    z_hol = _array(z_hol, 'holistic tokens', 2)
    z_arms = _array(z_arms, 'arm tokens', 2)
    z_legs = _array(z_legs, 'leg tokens', 2)
    if not len(z_hol) == len(z_arms) == len(z_legs):
        raise EvalError('Stream lengths differ: holistic %d, arms %d, legs %d'
                        % (len(z_hol), len(z_arms), len(z_legs)))
    if len(z_hol) == 0:
        raise EvalError('Fusion needs at least one token per stream')
    joint, n = _splitStreams(z_hol, z_arms, z_legs, params.split_tokens)
    attended = multiHeadAttention(joint, joint, params.self_attn)
    return {'holistic': attended[:n],
            'arms': attended[n + 1:2 * n + 1],
            'legs': attended[2 * n + 2:]}


def hpf(z_hol, z_arms, z_legs, params: HPFParams) -> np.ndarray:
    """
    Holistic-part fusion.

    The three streams, separated by the two split tokens, go through one
    self attention. The result is cut back at the known segment lengths, and
    the refined holistic stream queries each refined part stream through
    cross attention. The two cross outputs are summed.

    @type z_hol: numpy.ndarray
    @param z_hol: n x d holistic token embeddings

    @type z_arms: numpy.ndarray
    @param z_arms: n x d arm token embeddings

    @type z_legs: numpy.ndarray
    @param z_legs: n x d leg token embeddings

    @rtype: numpy.ndarray
    @return: Refined holistic stream, n rows

    @raise EvalError: VALIDATION_ERROR if the stream lengths differ
    """
    streams = _fusionInputs(z_hol, z_arms, z_legs, params)
    return sum(multiHeadAttention(streams['holistic'], streams[part],
                                  params.cross_attn, part=part)
               for part in ('arms', 'legs'))


def crossAttentionMap(z_hol, z_arms, z_legs,
                      params: HPFParams) -> t.Dict[str, np.ndarray]:
    """
    Head averaged cross attention weights of the fusion, per part, shape
    holistic tokens x part tokens.
    """
    streams = _fusionInputs(z_hol, z_arms, z_legs, params)
    maps = {}
    for part in ('arms', 'legs'):
        _, weights = multiHeadAttention(streams['holistic'], streams[part],
                                        params.cross_attn, part=part,
                                        return_weights=True)
        maps[part] = weights.mean(axis=0)
    return maps


def fuseGuidance(arm_tokens, leg_tokens, fusion_mlp: DenseStack) -> np.ndarray:
    """
    Part guidance of one cycle: sum over the cycle's steps of
    MLP(arm embedding + leg embedding).
    """
    arm_tokens = _array(arm_tokens, 'arm tokens', 2)
    leg_tokens = _array(leg_tokens, 'leg tokens', 2)
    if arm_tokens.shape != leg_tokens.shape:
        raise EvalError('Arm tokens of shape %s, leg tokens of shape %s'
                        % (arm_tokens.shape, leg_tokens.shape))
    return fusion_mlp(arm_tokens + leg_tokens).sum(axis=0)


def nllLoss(dist, token_id: int) -> float:
    """
    -log p(token), with p floored at 1e-12.
    """
    dist = _array(dist, 'distribution', 1)
    if not 0 <= token_id < len(dist):
        raise EvalError('Token %d outside a distribution over %d tokens'
                        % (token_id, len(dist)))
    if (dist < 0).any() or abs(dist.sum() - 1.0) > 1e-6:
        raise EvalError('Not a probability vector')
    return float(-np.log(max(dist[token_id], PROBABILITY_FLOOR)))


def sequenceNLL(dists, token_ids) -> float:
    """
    Mean token loss over a generated sequence.
    """
    dists = _array(dists, 'distributions', 2)
    if len(dists) != len(token_ids) or len(dists) == 0:
        raise EvalError('%d distributions for %d tokens'
                        % (len(dists), len(token_ids)))
    return float(np.mean([nllLoss(d, z) for d, z in zip(dists, token_ids)]))


def totalLoss(l_hol: float, l_part: float, l_div: float, l_aux: float,
              lambda_div: float = LAMBDA_DIV,
              lambda_aux: float = LAMBDA_AUX) -> float:
    return float(l_hol + l_part + lambda_div * l_div + lambda_aux * l_aux)
