import numpy as np
from twisted.python.failure import Failure

from partyeval import codec
from partyeval.codec import EvalError

from .helpers import ExtendedTestCase, Regex


class TestJDumps(ExtendedTestCase):

    def test_sortedKeys(self):
        self.assertEqual(codec.jdumps({'b': 1, 'a': 2}, indent=None),
                         '{"a": 2, "b": 1}')

    def test_numpyValues(self):
        result = codec.jdumps({'x': np.float64(0.5), 'n': np.int64(3),
                               'v': np.arange(3), 'ok': np.bool_(True)})
        self.assert_json(result, {'x': 0.5, 'n': 3, 'v': [0, 1, 2], 'ok': True})

    def test_floatsRoundTrip(self):
        value = 0.1 + 0.2
        self.assertEqual(codec.jloads(codec.jdumps([value]))[0], value)

    def test_nanRefused(self):
        self.assertRaises(ValueError, codec.jdumps, {'x': float('nan')})

    def test_unknownType(self):
        self.assertRaises(TypeError, codec.jdumps, {'x': object()})

    def test_sameTextTwice(self):
        document = {'z': [1.5, 2], 'a': {'c': 1, 'b': None}}
        self.assertEqual(codec.jdumps(document), codec.jdumps(dict(document)))


class TestJLoads(ExtendedTestCase):

    def test_valid(self):
        self.assertEqual(codec.jloads('{"a": [1, 2]}'), {'a': [1, 2]})

    def test_bytes(self):
        self.assertEqual(codec.jloads(b'[1]'), [1])

    def test_parseErrorPosition(self):
        e = self.assert_eval_error(codec.PARSE_ERROR, codec.jloads,
                                   '{\n  "a": ,\n}', 'motion.json')
        self.assertEqual(e.data['line'], 2)
        self.assertEqual(e.source, 'motion.json')
        self.assertTrue(str(e).startswith('motion.json: '))

    def test_notUtf8(self):
        self.assert_eval_error(codec.PARSE_ERROR, codec.jloads, b'\xff\xfe')


class TestRequireKeys(ExtendedTestCase):

    def test_present(self):
        document = {'a': 1, 'b': 2}
        self.assertIs(codec.requireKeys(document, ['a'], 'Doc'), document)

    def test_missing(self):
        e = self.assert_eval_error(codec.VALIDATION_ERROR, codec.requireKeys,
                                   {'a': 1}, ['a', 'b', 'c'], 'Doc')
        self.assertEqual(e.data, {'missing': ['b', 'c']})

    def test_notObject(self):
        self.assert_eval_error(codec.VALIDATION_ERROR, codec.requireKeys,
                               [1, 2], ['a'], 'Doc')


class TestExitCodes(ExtendedTestCase):

    def test_validation(self):
        self.assertEqual(codec.exitCodeFor(EvalError('bad')), codec.EXIT_INVALID)

    def test_lookup(self):
        error = EvalError('bad', codec.LOOKUP_ERROR)
        self.assertEqual(codec.exitCodeFor(error), 1)

    def test_io(self):
        self.assertEqual(codec.exitCodeFor(EvalError('gone', codec.IO_ERROR)), 2)
        self.assertEqual(codec.exitCodeFor(IOError('gone')), 2)

    def test_failure(self):
        try:
            raise EvalError('gone', codec.IO_ERROR)
        except EvalError:
            failure = Failure()
        self.assertEqual(codec.exitCodeFor(failure), codec.EXIT_IO)

    def test_other(self):
        self.assertEqual(codec.exitCodeFor(ValueError()), codec.EXIT_INVALID)


class TestErrorRecord(ExtendedTestCase):

    def test_evalError(self):
        error = EvalError('Frame 3 is not a list', codec.VALIDATION_ERROR,
                          data={'frame': 3}, source='a')
        self.assertEqual(codec.errorRecord(error),
                         {'message': 'Frame 3 is not a list',
                          'code': codec.VALIDATION_ERROR,
                          'source': 'a', 'data': {'frame': 3}})

    def test_osError(self):
        record = codec.errorRecord(OSError(2, 'No such file', 'x.json'))
        self.assertEqual(record['code'], codec.IO_ERROR)
        self.assertEqual(record['source'], 'x.json')

    def test_plainException(self):
        record = codec.errorRecord(ValueError('nope'))
        self.assertEqual(record, {'message': 'nope',
                                  'code': codec.VALIDATION_ERROR})


class TestPrepareReport(ExtendedTestCase):

    def test_envelope(self):
        report = codec.prepareReport('coherence', {'sequences': []},
                                     {'seed': 1})
        self.assert_json_values(codec.jdumps(report), report='coherence',
                                version=codec.REPORT_VERSION,
                                config={'seed': 1}, sequences=list)

    def test_versionIsInteger(self):
        report = codec.prepareReport('x', {}, {})
        self.assert_json_values(report, version=Regex(r'^\d+$'))
