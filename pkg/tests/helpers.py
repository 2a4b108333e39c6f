import re
import json

import numpy as np
from twisted.python.filepath import FilePath
from twisted.trial.unittest import TestCase

from partyeval.codec import EvalError


class Regex:

    def __init__(self, pattern):
        self._pattern = pattern

    @property
    def pattern(self):
        return self._pattern


class ExtendedTestCase(TestCase):

    def assert_json(self, value, expected):
        value = json.loads(value) if isinstance(value, (str, bytes)) else value
        expected = json.loads(expected) if isinstance(expected, (str, bytes)) else expected
        self.assertEqual(value, expected)

    def assert_json_values(self, value, **kwargs):
        value = json.loads(value) if isinstance(value, (str, bytes)) else value
        for key, expected in kwargs.items():
            if isinstance(expected, type):
                self.assertIsInstance(value[key], expected)
            elif isinstance(expected, Regex):
                value2 = str(value[key])
                self.assertTrue(re.match(expected.pattern, value2))
            else:
                self.assertEqual(value[key], expected)

    def assert_close(self, value, expected, atol=1e-12, rtol=0.0):
        value = np.asarray(value, dtype=np.float64)
        expected = np.asarray(expected, dtype=np.float64)
        self.assertEqual(value.shape, expected.shape)
        if not np.allclose(value, expected, rtol=rtol, atol=atol):
            self.fail('%r != %r (atol %g, rtol %g)' % (value, expected, atol, rtol))

    def assert_eval_error(self, errno, function, *args, **kwargs):
        """
        Call function and check it raises EvalError with the given code.
        """
        e = self.assertRaises(EvalError, function, *args, **kwargs)
        self.assertEqual(e.errno, errno, str(e))
        return e

    def workspace(self):
        """
        A fresh directory for the test's files.
        """
        path = FilePath(self.mktemp())
        path.makedirs()
        return path
