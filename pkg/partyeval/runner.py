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
Batch evaluation
================

The engine behind every command line command. A command name is looked up
as a `cmd_<name>` method; per file and per repetition work runs on a
Twisted thread pool and is reduced in sorted id (or seed) order, so reports
do not depend on the number of jobs.
"""

import typing as t

import csv
import io
import os
import sys
from dataclasses import dataclass, field

import numpy as np
from twisted.internet.defer import DeferredList, maybeDeferred
from twisted.internet.threads import deferToThreadPool
from twisted.logger import Logger
from twisted.python.failure import Failure
from twisted.python.filepath import FilePath
from twisted.python.threadpool import ThreadPool

from partyeval import codec, metrics
from partyeval.codec import EvalError
from partyeval.motion import (defaultPartition, loadPartition, parseEmbeddings,
                              parseMotion, SKELETONS)
from partyeval.selftest import runSelfTest
from partyeval.spatial import RefStats, buildReferenceStats, spatialCoherence
from partyeval.temporal import SKELETON_PRESETS, CoherenceParams, temporalCoherence

log = Logger()

MOTION_FORMATS = {'.json': 'json', '.csv': 'csv'}
METRICS = ('fid', 'rprecision', 'mmdist', 'diversity', 'multimodality')
PARTS = ('holistic', 'arms', 'legs')
REPORT_FORMATS = ('json', 'csv')
TOP_K = (1, 2, 3)


@dataclass(frozen=True)
class RunConfig:
    """
    Everything a command needs, resolved from the command line.
    """
    command: str
    inputs: t.Tuple[str, ...] = ()
    skeleton: str = 'humanml3d22'
    partition: t.Optional[str] = None
    params: t.Optional[str] = None
    preset: t.Optional[str] = None
    stats: t.Optional[str] = None
    metric: t.Optional[str] = None
    ref: t.Optional[str] = None
    part: str = 'holistic'
    seed: int = 42
    reps: t.Optional[int] = None
    out: t.Optional[str] = None
    format: str = 'json'
    strict: bool = False
    jobs: int = field(default_factory=lambda: os.cpu_count() or 1)

    def __post_init__(self):
        if self.command in ('coherence', 'build-stats', 'features') and \
                not any(self.inputs):
            raise EvalError('%s needs input paths' % self.command)
        if self.command == 'coherence' and not self.stats:
            raise EvalError('coherence needs --stats')
        if self.command == 'features' and self.metric not in METRICS:
            raise EvalError('Unknown metric %r, choose from %s'
                            % (self.metric, ', '.join(METRICS)),
                            codec.LOOKUP_ERROR)
        if self.command == 'features' and self.metric == 'fid' and not self.ref:
            raise EvalError('fid needs --ref')
        if not 0 <= self.seed < 2 ** 64:
            raise EvalError('Seed must be a 64-bit value, got %r' % self.seed)
        if self.reps is not None and self.reps < 1:
            raise EvalError('reps must be at least 1, got %r' % self.reps)
        if self.jobs < 1:
            raise EvalError('jobs must be at least 1, got %r' % self.jobs)
        if self.part not in PARTS:
            raise EvalError('Unknown part %r, choose from %s'
                            % (self.part, ', '.join(PARTS)))
        if self.format not in REPORT_FORMATS:
            raise EvalError('Unknown report format %r' % self.format)


def _readFile(path: str) -> bytes:
    try:
        return FilePath(path).getContent()
    except (IOError, OSError) as e:
        raise EvalError('Cannot read %s: %s' % (path, e.strerror or e),
                        codec.IO_ERROR, source=path)


def _writeFile(path: t.Optional[str], text: str, stdout):
    if path is None:
        stdout.write(text)
        return
    try:
        FilePath(path).setContent(text.encode('utf-8'))
    except (IOError, OSError) as e:
        raise EvalError('Cannot write %s: %s' % (path, e.strerror or e),
                        codec.IO_ERROR, source=path)


def motionFiles(directory: str) -> t.List[FilePath]:
    """
    Motion files of a directory (.json and .csv), sorted by name.

    @raise EvalError: IO_ERROR when the directory cannot be listed
    """
    path = FilePath(directory)
    if not path.isdir():
        raise EvalError('%s is not a directory' % directory, codec.IO_ERROR,
                        source=directory)
    try:
        children = path.children()
    except (IOError, OSError) as e:
        raise EvalError('Cannot list %s: %s' % (directory, e), codec.IO_ERROR,
                        source=directory)
    files = [child for child in children
             if child.splitext()[1].lower() in MOTION_FORMATS and child.isfile()]
    return sorted(files, key=lambda p: p.basename())


def loadMotion(path: FilePath, skeleton_id: str):
    stem, ext = path.splitext()
    name = os.path.basename(stem)
    try:
        raw = path.getContent()
    except (IOError, OSError) as e:
        raise EvalError('Cannot read %s: %s' % (path.path, e), codec.IO_ERROR,
                        source=name)
    seq = parseMotion(raw, MOTION_FORMATS[ext.lower()], name=name,
                      skeleton_id=skeleton_id)
    if seq.skeleton_id != skeleton_id:
        raise EvalError('Motion is %s, expected %s'
                        % (seq.skeleton_id, skeleton_id), source=name)
    return seq


def summarizeSequences(values: t.Sequence[float], reps: t.Optional[int],
                       seed: int) -> dict:
    """
    Mean, std and 95% half width of per sequence scores. With reps, the half
    width comes from the means of reps bootstrap resamples drawn with the
    seed.
    """
    values = np.asarray(values, dtype=np.float64)
    n = len(values)
    summary = {'n': n, 'mean': float(values.mean())}
    summary['std'] = float(values.std(ddof=1)) if n > 1 else 0.0
    if reps is None:
        summary['ci95'] = metrics.CI_Z * summary['std'] / np.sqrt(n)
        return summary
    rng = np.random.default_rng(seed)
    resampled = [float(values[rng.integers(0, n, size=n)].mean())
                 for _ in range(reps)]
    run = metrics.summarizeRuns('resampled mean', resampled)
    summary['ci95'] = run.ci95
    summary['reps'] = reps
    return summary


class EvaluationRunner(object):
    """
    Runs one RunConfig. Subclass and add `cmd_<name>` methods to grow new
    commands; dashes in command names become underscores.
    """

    def __init__(self, reactor=None, stdout=None):
        if reactor is None:
            from twisted.internet import reactor
        self.reactor = reactor
        self.stdout = stdout or sys.stdout
        self.pool = None

    def run(self, config: RunConfig):
        """
        @rtype: Deferred
        @return: Fires with the exit code
        """
        function = getattr(self, 'cmd_%s' % config.command.replace('-', '_'),
                           None)
        if not callable(function):
            log.error('Unknown command {command}', command=config.command)
            return maybeDeferred(lambda: codec.EXIT_INVALID)

        if config.jobs > 1:
            self.pool = ThreadPool(minthreads=0, maxthreads=config.jobs,
                                   name='partyeval')
            self.pool.start()

        d = maybeDeferred(function, config)
        d.addErrback(self._ebCommand, config)
        d.addBoth(self._stopPool)
        return d

    def _ebCommand(self, failure: Failure, config: RunConfig) -> int:
        error = failure.value
        if isinstance(error, EvalError):
            log.error('{command} failed: {error}', command=config.command,
                      error=str(error))
        else:
            log.failure('{command} crashed', failure, command=config.command)
        return codec.exitCodeFor(failure)

    def _stopPool(self, result):
        if self.pool is not None:
            self.pool.stop()
            self.pool = None
        return result

    def _map(self, function, items):
        """
        Apply function to every item, on the pool when there is one.

        @rtype: Deferred
        @return: Fires with DeferredList results, (success, result) pairs in
            item order
        """
        dl = []
        for item in items:
            if self.pool is None:
                d = maybeDeferred(function, item)
            else:
                d = deferToThreadPool(self.reactor, self.pool, function, item)
            dl.append(d)
        return DeferredList(dl, consumeErrors=True)

    def _partition(self, config: RunConfig):
        if config.partition:
            return loadPartition(_readFile(config.partition), config.skeleton,
                                 source=config.partition)
        return defaultPartition(config.skeleton)

    def _params(self, config: RunConfig) -> CoherenceParams:
        if config.params:
            return CoherenceParams.fromJSON(
                codec.jloads(_readFile(config.params), config.params),
                config.params)
        preset = config.preset or SKELETON_PRESETS.get(config.skeleton,
                                                       'humanml3d')
        return CoherenceParams.preset(preset)

    def _collect(self, results, items, config: RunConfig):
        """
        Split DeferredList results into successes and error records. I/O
        errors abort the command.
        """
        values, errors = [], []
        for item, (success, result) in zip(items, results):
            if success:
                values.append(result)
                continue
            if codec.exitCodeFor(result) == codec.EXIT_IO:
                result.raiseException()
            record = codec.errorRecord(result)
            record.setdefault('source', os.path.basename(item.path))
            errors.append(record)
            log.warn('Skipping {source}: {message}', source=record['source'],
                     message=record['message'])
        errors.sort(key=lambda r: (r['source'], r['message']))
        return values, errors

    def cmd_coherence(self, config: RunConfig):
        partition = self._partition(config)
        params = self._params(config)
        stats = RefStats.fromJSON(
            codec.jloads(_readFile(config.stats), config.stats), config.stats)
        files = motionFiles(config.inputs[0])
        log.info('Scoring {n} motions from {directory}', n=len(files),
                 directory=config.inputs[0])

        def score(path):
            seq = loadMotion(path, config.skeleton)
            temporal = temporalCoherence(seq, partition, params)
            spatial = spatialCoherence(seq, partition, stats, params)
            log.info('{name}: tc={tc} sc={sc}', name=seq.name,
                     tc=temporal.score, sc=spatial.score)
            entry = {'id': seq.name, 'tc': temporal.score, 'sc': spatial.score,
                     'digest': seq.contentDigest()}
            entry['temporal'] = temporal.toJSON(seq.name)
            entry['spatial'] = spatial.toJSON(seq.name)
            for section in ('temporal', 'spatial'):
                del entry[section]['id']
            return entry

        config_doc = {'command': 'coherence', 'skeleton': config.skeleton,
                      'params': params.toJSON(),
                      'partition': partition.toJSON(),
                      'stats_digest': stats.corpus_digest,
                      'seed': config.seed, 'reps': config.reps,
                      'strict': config.strict}
        d = self._map(score, files)
        d.addCallback(self._cbFinishCoherence, files, config, config_doc)
        return d

    def _cbFinishCoherence(self, results, files, config, config_doc) -> int:
        entries, errors = self._collect(results, files, config)
        if errors and config.strict:
            log.error('{n} invalid motions, no report written', n=len(errors))
            for record in errors:
                log.error('{source}: {message}', **record)
            return codec.EXIT_INVALID
        if not entries:
            raise EvalError('No valid motions in %s' % config.inputs[0])

        entries.sort(key=lambda e: e['id'])
        aggregate = {
            'tc': summarizeSequences([e['tc'] for e in entries], config.reps,
                                     config.seed),
            'sc': summarizeSequences([e['sc'] for e in entries], config.reps,
                                     config.seed),
        }
        if config.format == 'csv':
            out = io.StringIO()
            writer = csv.writer(out, lineterminator='\n')
            writer.writerow(['id', 'tc', 'sc'])
            for e in entries:
                writer.writerow([e['id'], repr(e['tc']), repr(e['sc'])])
            text = out.getvalue()
        else:
            body = {'sequences': entries, 'aggregate': aggregate,
                    'errors': errors}
            text = codec.jdumps(codec.prepareReport('coherence', body,
                                                    config_doc)) + '\n'
        _writeFile(config.out, text, self.stdout)
        return codec.EXIT_INVALID if errors else codec.EXIT_OK

    def cmd_build_stats(self, config: RunConfig):
        partition = self._partition(config)
        files = motionFiles(config.inputs[0])
        log.info('Building reference statistics from {n} motions', n=len(files))
        d = self._map(lambda path: loadMotion(path, config.skeleton), files)
        d.addCallback(self._cbFinishStats, files, partition, config)
        return d

    def _cbFinishStats(self, results, files, partition, config) -> int:
        corpus, errors = self._collect(results, files, config)
        if errors and config.strict:
            return codec.EXIT_INVALID
        stats = buildReferenceStats(corpus, partition)
        _writeFile(config.out, codec.jdumps(stats.toJSON()) + '\n', self.stdout)
        return codec.EXIT_INVALID if errors else codec.EXIT_OK

    def _metricFunction(self, config: RunConfig, gen, ref):
        """
        A function from seed to the metric value(s) of one repetition.
        """
        metric = config.metric
        if metric == 'fid':
            return lambda seed: metrics.fid(gen, ref)
        elif metric == 'rprecision':
            def topK(seed):
                ranks = metrics.retrievalRanks(gen, metrics.POOL_SIZE, seed)
                return [float(np.mean(ranks < k)) for k in TOP_K]
            return topK
        elif metric == 'mmdist':
            return lambda seed: metrics.mmDist(gen)
        elif metric == 'diversity':
            return lambda seed: metrics.diversity(gen, seed=seed)
        return lambda seed: metrics.multimodality(gen, seed=seed)

    def cmd_features(self, config: RunConfig):
        gen_path = config.inputs[0]
        gen = parseEmbeddings(_readFile(gen_path), gen_path)
        ref = parseEmbeddings(_readFile(config.ref), config.ref) \
            if config.ref else None
        reps = config.reps or metrics.REPS
        seeds = [config.seed + i for i in range(reps)]
        config_doc = {'command': 'features', 'metric': config.metric,
                      'part': config.part, 'seed': config.seed, 'reps': reps,
                      'gen_digest': gen.digest()}
        if ref is not None:
            config_doc['ref_digest'] = ref.digest()
        log.info('{metric} over {n} records, {reps} repetitions',
                 metric=config.metric, n=len(gen), reps=reps)

        function = self._metricFunction(config, gen, ref)
        d = self._map(function, seeds)
        d.addCallback(self._cbFinishFeatures, config, config_doc)
        return d

    def _cbFinishFeatures(self, results, config, config_doc) -> int:
        values = []
        for success, result in results:
            if not success:
                result.raiseException()
            values.append(result)

        if config.metric == 'rprecision':
            runs = [metrics.summarizeRuns('rprecision_top%d' % k,
                                          [v[i] for v in values])
                    for i, k in enumerate(TOP_K)]
        else:
            runs = [metrics.summarizeRuns(config.metric, values)]

        if config.format == 'csv':
            out = io.StringIO()
            writer = csv.writer(out, lineterminator='\n')
            writer.writerow(['metric', 'mean', 'ci95', 'reps'])
            for run in runs:
                writer.writerow([run.metric, repr(run.mean), repr(run.ci95),
                                 len(run.values)])
            text = out.getvalue()
        else:
            documents = [run.toJSON(config_doc) for run in runs]
            text = codec.jdumps(documents if len(documents) > 1
                                else documents[0]) + '\n'
        _writeFile(config.out, text, self.stdout)
        return codec.EXIT_OK

    def cmd_kernels_selftest(self, config: RunConfig) -> int:
        results = runSelfTest(config.seed)
        for result in results:
            self.stdout.write(result.line() + '\n')
        failed = [r.name for r in results if not r.passed]
        self.stdout.write('%d passed, %d failed\n'
                          % (len(results) - len(failed), len(failed)))
        return codec.EXIT_INVALID if failed else codec.EXIT_OK


def knownSkeletons() -> t.List[str]:
    return sorted(SKELETONS)
