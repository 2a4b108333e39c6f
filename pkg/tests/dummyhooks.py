import numpy as np
from zope.interface import implementer

from partyeval.generation import IGeneratorHook


@implementer(IGeneratorHook)
class EchoHook(object):
    """
    Counts tokens up and records every call. With a guidance vector the
    embedding echoes it, otherwise it is filled with the token id.
    """

    def __init__(self, dim=4, vocabSize=100, offset=0):
        self.dim = dim
        self.vocabSize = vocabSize
        self.offset = offset
        self.calls = []

    def nextToken(self, history, conditioning, guidance):
        self.calls.append((len(history), history, conditioning, guidance))
        token = (len(history) + self.offset) % self.vocabSize
        if guidance is not None:
            return token, np.array(guidance, dtype=float)
        return token, np.full(self.dim, float(token))


@implementer(IGeneratorHook)
class EndAtHook(EchoHook):
    """
    Emits end_token at step `at` (1 based).
    """

    def __init__(self, at, end_token=99, **kwargs):
        EchoHook.__init__(self, **kwargs)
        self.at = at
        self.end_token = end_token

    def nextToken(self, history, conditioning, guidance):
        token, embedding = EchoHook.nextToken(self, history, conditioning,
                                              guidance)
        if len(history) + 1 == self.at:
            return self.end_token, embedding
        return token, embedding


@implementer(IGeneratorHook)
class BadTokenHook(object):
    vocabSize = 10

    def nextToken(self, history, conditioning, guidance):
        return self.vocabSize, np.zeros(4)


@implementer(IGeneratorHook)
class WrongDimHook(EchoHook):

    def nextToken(self, history, conditioning, guidance):
        token, _ = EchoHook.nextToken(self, history, conditioning, guidance)
        return token, np.zeros(self.dim + 1)


class NotAHook(object):
    vocabSize = 10

    def nextToken(self, history, conditioning, guidance):
        return 0, np.zeros(4)
