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


=============
Report codecs
=============

Provides functions for encoding and decoding the JSON documents the evaluator
reads and writes (motions, params, stats, weights, reports), the error codes
and the EvalError exception shared by every module.
"""

import typing as t

import json

import numpy as np
from twisted.python.failure import Failure

PARSE_ERROR = -32700
VALIDATION_ERROR = -32600
LOOKUP_ERROR = -32601
INSUFFICIENT_FRAMES = -32602
DEGENERATE_GEOMETRY = -32603
CONTRACT_ERROR = -32604
IO_ERROR = -32000

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_IO = 2

REPORT_VERSION = 1


def _default(obj):
    """
    Teach the json module about numpy scalars and arrays.
    """
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    raise TypeError('%r is not JSON serializable' % (obj,))


def jdumps(obj, indent: t.Optional[int] = 2) -> str:
    """
    Encode JSON the one way every report is encoded: sorted keys, no NaN,
    shortest round-tripping float repr. Two equal objects always give the same
    text.

    @type obj: mixed
    @param obj: Whatever we want to encode

    @rtype: str
    @return: JSON representation of obj

    @raise ValueError: If obj holds NaN or infinity
    """
    return json.dumps(obj, default=_default, sort_keys=True, indent=indent,
                      allow_nan=False)


def jloads(json_string: t.Union[str, bytes], source: t.Optional[str] = None):
    """
    Decode JSON, turning syntax errors into EvalError with the position of
    the problem.

    @type json_string: str
    @param json_string: JSON to be decoded

    @type source: str
    @param source: Where the text came from, for error messages

    @rtype: mixed
    @return: Whatever the JSON contained

    @raise EvalError: PARSE_ERROR with line/column in data
    """
    if isinstance(json_string, bytes):
        try:
            json_string = json_string.decode('utf-8')
        except UnicodeDecodeError as e:
            raise EvalError('Not UTF-8 text: %s' % e, PARSE_ERROR,
                            data={'offset': e.start}, source=source)
    try:
        return json.loads(json_string)
    except json.JSONDecodeError as e:
        raise EvalError('Failed to parse JSON: %s' % e.msg, PARSE_ERROR,
                        data={'line': e.lineno, 'column': e.colno,
                              'offset': e.pos},
                        source=source)


def requireKeys(document, keys, what: str, source: t.Optional[str] = None):
    """
    Verify a decoded JSON object carries all the keys we need.

    @type document: dict
    @param document: Decoded JSON

    @type keys: iterable of str
    @param keys: Required keys

    @type what: str
    @param what: Document kind, used in the error message

    @raise EvalError: VALIDATION_ERROR naming the missing keys
    """
    if not isinstance(document, dict):
        raise EvalError('%s must be a JSON object' % what, VALIDATION_ERROR,
                        source=source)
    missing = [key for key in keys if key not in document]
    if missing:
        raise EvalError('%s is missing %s' % (what, ', '.join(missing)),
                        VALIDATION_ERROR, data={'missing': missing},
                        source=source)
    return document


def exitCodeFor(error) -> int:
    """
    Map an error (or a Failure wrapping one) to the process exit code.

    @rtype: int
    @return: 2 for I/O problems, 1 for everything else we know about
    """
    if isinstance(error, Failure):
        error = error.value

    if isinstance(error, EvalError):
        if error.errno == IO_ERROR:
            return EXIT_IO
        return EXIT_INVALID
    if isinstance(error, (IOError, OSError)):
        return EXIT_IO
    return EXIT_INVALID


def errorRecord(error) -> dict:
    """
    Parses an exception into a dict that can be encoded to JSON and listed in
    a report.

    @type error: Exception or Failure
    @param error: Exception to be parsed

    @rtype: dict
    @return: dict that can be serialized to JSON
    """
    if isinstance(error, Failure):
        error = error.value

    record = {'message': str(getattr(error, 'strerror', None) or error)}

    if isinstance(error, EvalError):
        record['code'] = error.errno
    elif isinstance(error, (IOError, OSError)):
        record['code'] = IO_ERROR
    else:
        record['code'] = VALIDATION_ERROR

    source = getattr(error, 'source', None) or getattr(error, 'filename', None)
    if source is not None:
        record['source'] = str(source)

    data = getattr(error, 'data', None)
    if data is not None:
        record['data'] = data

    return record


def prepareReport(kind: str, body: dict, config: dict) -> dict:
    """
    Wrap a command result into the common report envelope. The resolved
    configuration always travels with the numbers.

    @type kind: str
    @param kind: Report kind, e.g. 'coherence'

    @type body: dict
    @param body: The command specific payload

    @type config: dict
    @param config: Fully resolved configuration (params, seeds, digests)

    @rtype: dict
    @return: Report ready for jdumps
    """
    report = {'report': kind, 'version': REPORT_VERSION, 'config': config}
    report.update(body)
    return report


class EvalError(Exception):
    """
    Evaluation specific error
    """
    def __init__(self, strerror, errno=VALIDATION_ERROR, data=None,
                 source=None):
        """
        @type strerror: str
        @param strerror: Description of the error

        @type errno: int
        @param errno: Error code

        @type data: mixed
        @param data: Whatever additional data we want to pass

        @type source: str
        @param source: File name or sequence id the error is about
        """
        self.strerror = strerror
        self.errno = errno
        self.data = data
        self.source = source

        Exception.__init__(self, strerror)

    def __str__(self):
        if self.source:
            return '%s: %s' % (self.source, self.strerror)
        return str(self.strerror)
