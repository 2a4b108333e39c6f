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


============
Command line
============

party-eval coherence --input DIR --stats FILE [--skeleton ID] [--partition FILE]
                     [--params FILE | --preset NAME] [--out FILE] [--seed N]
                     [--reps N] [--strict] [--jobs N] [--format json|csv]
party-eval build-stats --corpus DIR [--skeleton ID] [--partition FILE]
                       [--out FILE] [--strict] [--jobs N]
party-eval features METRIC --gen FILE [--ref FILE] [--reps N] [--seed N]
                    [--part holistic|arms|legs] [--out FILE] [--jobs N]
party-eval kernels selftest [--seed N]

Logging goes to stderr; PARTY_EVAL_LOG picks the level (error, warn, info,
debug; warn by default). Exit codes: 0 success, 1 invalid input, 2 I/O
failure.
"""

import os
import sys

from twisted.internet import task
from twisted.internet.defer import succeed
from twisted.logger import (FilteringLogObserver, LogLevel,
                            LogLevelFilterPredicate, Logger,
                            globalLogBeginner, textFileLogObserver)
from twisted.python import usage

from partyeval import codec
from partyeval.codec import EvalError
from partyeval.runner import METRICS, EvaluationRunner, RunConfig, knownSkeletons

log = Logger()

LOG_ENV = 'PARTY_EVAL_LOG'
LOG_LEVELS = {'error': LogLevel.error, 'warn': LogLevel.warn,
              'info': LogLevel.info, 'debug': LogLevel.debug}
DEFAULT_LOG_LEVEL = 'warn'


def logLevelFromEnv(environ=None):
    """
    @rtype: tuple
    @return: (LogLevel, name of an unknown value or None)
    """
    environ = os.environ if environ is None else environ
    value = environ.get(LOG_ENV, DEFAULT_LOG_LEVEL).strip().lower()
    if value in LOG_LEVELS:
        return LOG_LEVELS[value], None
    return LOG_LEVELS[DEFAULT_LOG_LEVEL], value


def setupLogging(stream=None, environ=None):
    level, unknown = logLevelFromEnv(environ)
    predicate = LogLevelFilterPredicate(defaultLogLevel=level)
    observer = FilteringLogObserver(textFileLogObserver(stream or sys.stderr),
                                    [predicate])
    globalLogBeginner.beginLoggingTo([observer], redirectStandardIO=False)
    if unknown is not None:
        log.warn('Unknown {env} value {value}, using warn', env=LOG_ENV,
                 value=unknown)


def _positive(value):
    number = int(value)
    if number < 1:
        raise ValueError('must be at least 1')
    return number


def _seed(value):
    number = int(value)
    if not 0 <= number < 2 ** 64:
        raise ValueError('must be a 64-bit value')
    return number


class _Common(usage.Options):

    def _require(self, *names):
        missing = ['--%s' % name for name in names if not self[name]]
        if missing:
            raise usage.UsageError('Missing %s' % ', '.join(missing))

    def _skeleton(self):
        if self['skeleton'] not in knownSkeletons() and not self['partition']:
            raise usage.UsageError('Unknown skeleton %s without --partition'
                                   % self['skeleton'])


class CoherenceOptions(_Common):
    synopsis = '--input DIR --stats FILE [options]'

    optFlags = [
        ['strict', None, 'Abort without a report if any motion is invalid'],
    ]
    optParameters = [
        ['input', 'i', None, 'Directory of motion files (.json, .csv)'],
        ['skeleton', 's', 'humanml3d22', 'Skeleton id of the motions'],
        ['partition', None, None, 'Partition override JSON'],
        ['params', None, None, 'Coherence params JSON'],
        ['preset', None, None, 'Params preset (humanml3d, kitml)'],
        ['stats', None, None, 'Reference statistics JSON'],
        ['out', 'o', None, 'Report file, stdout if omitted'],
        ['seed', None, 42, 'Seed of the bootstrap resampling', _seed],
        ['reps', None, None, 'Bootstrap repetitions for ci95', _positive],
        ['jobs', 'j', os.cpu_count() or 1, 'Parallel workers', _positive],
        ['format', None, 'json', 'Report format, json or csv'],
    ]

    def postOptions(self):
        self._require('input', 'stats')
        self._skeleton()
        if self['params'] and self['preset']:
            raise usage.UsageError('--params and --preset exclude each other')


class BuildStatsOptions(_Common):
    synopsis = '--corpus DIR [options]'

    optFlags = [
        ['strict', None, 'Abort if any motion is invalid'],
    ]
    optParameters = [
        ['corpus', 'c', None, 'Directory of reference motions'],
        ['skeleton', 's', 'humanml3d22', 'Skeleton id of the motions'],
        ['partition', None, None, 'Partition override JSON'],
        ['out', 'o', None, 'Stats file, stdout if omitted'],
        ['jobs', 'j', os.cpu_count() or 1, 'Parallel workers', _positive],
    ]

    def postOptions(self):
        self._require('corpus')
        self._skeleton()


class FeaturesOptions(_Common):
    synopsis = '{%s} --gen FILE [options]' % '|'.join(METRICS)

    optParameters = [
        ['gen', 'g', None, 'Embedding dump (JSON lines) of generated motions'],
        ['ref', 'r', None, 'Embedding dump of reference motions (fid)'],
        ['reps', None, None, 'Repetitions of the metric (20)', _positive],
        ['seed', None, 42, 'Seed of the first repetition', _seed],
        ['part', None, 'holistic', 'Encoder the dumps come from'],
        ['out', 'o', None, 'Report file, stdout if omitted'],
        ['jobs', 'j', os.cpu_count() or 1, 'Parallel workers', _positive],
        ['format', None, 'json', 'Report format, json or csv'],
    ]

    def parseOptions(self, options=None):
        # getopt stops at the first positional, and the metric comes first
        if options and not options[0].startswith('-'):
            options = list(options[1:]) + [options[0]]
        _Common.parseOptions(self, options)

    def parseArgs(self, metric):
        if metric not in METRICS:
            raise usage.UsageError('Unknown metric %s' % metric)
        self['metric'] = metric

    def postOptions(self):
        self._require('gen')


class SelftestOptions(usage.Options):
    optParameters = [
        ['seed', None, 0, 'Seed of the property cases', _seed],
    ]


class KernelsOptions(usage.Options):
    subCommands = [
        ['selftest', None, SelftestOptions, 'Run the kernel property suite'],
    ]

    def postOptions(self):
        if self.subCommand is None:
            raise usage.UsageError('Missing kernels subcommand')


class Options(usage.Options):
    synopsis = 'party-eval <command> [options]'

    subCommands = [
        ['coherence', None, CoherenceOptions,
         'Temporal and spatial coherence of a motion directory'],
        ['build-stats', None, BuildStatsOptions,
         'Reference statistics of a motion corpus'],
        ['features', None, FeaturesOptions,
         'Feature space metrics over embedding dumps'],
        ['kernels', None, KernelsOptions, 'Architecture kernel tools'],
    ]

    def postOptions(self):
        if self.subCommand is None:
            raise usage.UsageError('Missing command')


def configFromOptions(options: Options) -> RunConfig:
    """
    Turn parsed options into a RunConfig.
    """
    command, sub = options.subCommand, options.subOptions
    if command == 'kernels':
        return RunConfig('kernels-selftest', seed=sub.subOptions['seed'],
                         jobs=1)
    if command == 'coherence':
        return RunConfig(command, (sub['input'],), skeleton=sub['skeleton'],
                         partition=sub['partition'], params=sub['params'],
                         preset=sub['preset'], stats=sub['stats'],
                         seed=sub['seed'], reps=sub['reps'], out=sub['out'],
                         format=sub['format'], strict=bool(sub['strict']),
                         jobs=sub['jobs'])
    if command == 'build-stats':
        return RunConfig(command, (sub['corpus'],), skeleton=sub['skeleton'],
                         partition=sub['partition'], out=sub['out'],
                         strict=bool(sub['strict']), jobs=sub['jobs'])
    return RunConfig(command, (sub['gen'],), metric=sub['metric'],
                     ref=sub['ref'], part=sub['part'], seed=sub['seed'],
                     reps=sub['reps'], out=sub['out'], format=sub['format'],
                     jobs=sub['jobs'])


def main(reactor, argv, stdout=None, stderr=None):
    """
    Parse argv and run the command.

    @rtype: Deferred
    @return: Fires with the exit code
    """
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    options = Options()
    try:
        options.parseOptions(argv)
        config = configFromOptions(options)
    except usage.UsageError as e:
        stderr.write('%s\n%s: %s\n' % (options, os.path.basename(sys.argv[0]), e))
        return succeed(codec.EXIT_INVALID)
    except EvalError as e:
        stderr.write('%s\n' % e)
        return succeed(codec.exitCodeFor(e))
    return EvaluationRunner(reactor, stdout).run(config)


def _exit(code):
    if code:
        raise SystemExit(code)


def _react(reactor, argv):
    return main(reactor, argv).addCallback(_exit)


def run():
    setupLogging()
    task.react(_react, (sys.argv[1:],))
