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


===========
Motion data
===========

Motion sequences, skeletons, body part partitions and embedding dumps, plus
the readers and writers for their file formats.

Motion JSON::

    {"skeleton": "humanml3d22", "fps": 20, "frames": [[[x, y, z], ...], ...]}

Motion CSV: header C{frame,j0x,j0y,j0z,...}, one row per frame.
"""

import typing as t

import csv
import hashlib
import io
import itertools
import re
from dataclasses import dataclass, field

import numpy as np
from twisted.logger import Logger

from partyeval import codec
from partyeval.codec import EvalError

log = Logger()

HUMANML3D = 'humanml3d22'
KITML = 'kitml21'

DEFAULT_FPS = 20.0
CSV_DIGITS = 17


@dataclass(frozen=True)
class SkeletonSpec:
    id: str
    joint_names: t.Tuple[str, ...]
    torso_origin: int
    torso_tip: int

    def __post_init__(self):
        names = tuple(self.joint_names)
        object.__setattr__(self, 'joint_names', names)
        if len(set(names)) != len(names):
            raise EvalError('Joint names of %s are not unique' % self.id)
        if self.torso_origin == self.torso_tip:
            raise EvalError('Torso origin and tip of %s coincide' % self.id)
        for index in (self.torso_origin, self.torso_tip):
            if not 0 <= index < len(names):
                raise EvalError('Torso joint %d out of range for %s'
                                % (index, self.id))

    @property
    def jointCount(self) -> int:
        return len(self.joint_names)

    def index(self, name: str) -> int:
        return self.joint_names.index(name)


SKELETONS = {
    HUMANML3D: SkeletonSpec(
        HUMANML3D,
        ('pelvis', 'left_hip', 'right_hip', 'spine1', 'left_knee',
         'right_knee', 'spine2', 'left_ankle', 'right_ankle', 'spine3',
         'left_foot', 'right_foot', 'neck', 'left_collar', 'right_collar',
         'head', 'left_shoulder', 'right_shoulder', 'left_elbow',
         'right_elbow', 'left_wrist', 'right_wrist'),
        torso_origin=0, torso_tip=12),
    KITML: SkeletonSpec(
        KITML,
        ('root', 'bp', 'bt', 'bln', 'bun', 'left_shoulder', 'left_elbow',
         'left_wrist', 'right_shoulder', 'right_elbow', 'right_wrist',
         'left_hip', 'left_knee', 'left_ankle', 'left_mrot', 'left_foot',
         'right_hip', 'right_knee', 'right_ankle', 'right_mrot',
         'right_foot'),
        torso_origin=0, torso_tip=3),
}

_FIVE_PARTS = {
    HUMANML3D: {
        'left_arm': ('left_collar', 'left_shoulder', 'left_elbow', 'left_wrist'),
        'right_arm': ('right_collar', 'right_shoulder', 'right_elbow', 'right_wrist'),
        'left_leg': ('left_hip', 'left_knee', 'left_ankle', 'left_foot'),
        'right_leg': ('right_hip', 'right_knee', 'right_ankle', 'right_foot'),
        'backbone': ('pelvis', 'spine1', 'spine2', 'spine3', 'neck', 'head'),
    },
    KITML: {
        'left_arm': ('left_shoulder', 'left_elbow', 'left_wrist'),
        'right_arm': ('right_shoulder', 'right_elbow', 'right_wrist'),
        'left_leg': ('left_hip', 'left_knee', 'left_ankle', 'left_mrot', 'left_foot'),
        'right_leg': ('right_hip', 'right_knee', 'right_ankle', 'right_mrot', 'right_foot'),
        'backbone': ('root', 'bp', 'bt', 'bln', 'bun'),
    },
}

_END_JOINTS = {
    HUMANML3D: {'left_arm': 'left_wrist', 'right_arm': 'right_wrist',
                'left_leg': 'left_foot', 'right_leg': 'right_foot',
                'backbone': 'head'},
    KITML: {'left_arm': 'left_wrist', 'right_arm': 'right_wrist',
            'left_leg': 'left_foot', 'right_leg': 'right_foot',
            'backbone': 'bun'},
}

LIMBS = ('left_arm', 'right_arm', 'left_leg', 'right_leg')


def skeletonSpec(skeleton_id: str) -> SkeletonSpec:
    """
    @raise EvalError: LOOKUP_ERROR for skeletons we do not ship
    """
    try:
        return SKELETONS[skeleton_id]
    except KeyError:
        raise EvalError('Unknown skeleton %s' % skeleton_id,
                        codec.LOOKUP_ERROR)


def pairKey(g: str, h: str) -> str:
    """
    Key of an unordered part pair: names in alphabetical order joined by '|'.
    """
    return '|'.join(sorted((g, h)))


@dataclass(frozen=True)
class PartitionMap:
    """
    Named body parts, each an ordered tuple of joint indices, the end joint of
    every part and the parts whose angle to the torso axis is scored.
    """
    parts: t.Mapping[str, t.Tuple[int, ...]]
    end_joint: t.Mapping[str, int]
    angle_parts: t.Tuple[str, ...]
    torso_origin: int
    torso_tip: int
    skeleton_id: t.Optional[str] = None

    def __post_init__(self):
        parts = {name: tuple(int(i) for i in joints)
                 for name, joints in self.parts.items()}
        object.__setattr__(self, 'parts', parts)
        object.__setattr__(self, 'end_joint',
                           {k: int(v) for k, v in self.end_joint.items()})
        object.__setattr__(self, 'angle_parts', tuple(self.angle_parts))

        seen = set()
        for name, joints in parts.items():
            if not joints:
                raise EvalError('Part %s has no joints' % name)
            overlap = seen.intersection(joints)
            if overlap:
                raise EvalError('Part %s shares joints %s with another part'
                                % (name, sorted(overlap)))
            seen.update(joints)
            if name not in self.end_joint:
                raise EvalError('Part %s has no end joint' % name)
            if self.end_joint[name] not in joints:
                raise EvalError('End joint of %s is not one of its joints'
                                % name)
        unknown = set(self.angle_parts) - set(parts)
        if unknown:
            raise EvalError('Angle parts %s are not parts' % sorted(unknown))
        if self.torso_origin == self.torso_tip:
            raise EvalError('Torso origin and tip coincide')
        if min(seen) < 0 or min(self.torso_origin, self.torso_tip) < 0:
            raise EvalError('Negative joint index in partition')

    @property
    def names(self) -> t.Tuple[str, ...]:
        return tuple(self.parts)

    @property
    def maxJoint(self) -> int:
        return max(max(max(j) for j in self.parts.values()),
                   self.torso_origin, self.torso_tip)

    def joints(self, part: str) -> t.Tuple[int, ...]:
        """
        @raise EvalError: LOOKUP_ERROR for unknown part names
        """
        try:
            return self.parts[part]
        except KeyError:
            raise EvalError('Unknown part %s' % part, codec.LOOKUP_ERROR)

    def pairs(self) -> t.List[t.Tuple[str, str]]:
        """
        All unordered part pairs, each alphabetically ordered, sorted by key.
        """
        pairs = [tuple(sorted(p)) for p in itertools.combinations(self.parts, 2)]
        return sorted(pairs, key=lambda p: pairKey(*p))

    def toJSON(self) -> dict:
        return {'parts': {k: list(v) for k, v in self.parts.items()},
                'end_joint': dict(self.end_joint),
                'angle_parts': list(self.angle_parts),
                'torso': {'origin': self.torso_origin, 'tip': self.torso_tip}}


def defaultPartition(skeleton_id: str) -> PartitionMap:
    """
    Return the shipped five part partition of a skeleton: both arms, both legs
    and the backbone, limbs ending at wrist / foot, angles scored for the four
    limbs only.

    @type skeleton_id: str
    @param skeleton_id: humanml3d22 or kitml21

    @rtype: PartitionMap

    @raise EvalError: LOOKUP_ERROR for unknown skeletons
    """
    spec = skeletonSpec(skeleton_id)
    parts = {name: tuple(spec.index(j) for j in joints)
             for name, joints in _FIVE_PARTS[skeleton_id].items()}
    ends = {name: spec.index(j)
            for name, j in _END_JOINTS[skeleton_id].items()}
    return PartitionMap(parts, ends, LIMBS, spec.torso_origin, spec.torso_tip,
                        skeleton_id=skeleton_id)


def coarseGroups(partition: PartitionMap) -> t.Dict[str, t.Tuple[int, ...]]:
    """
    The Arms/Legs grouping used for part-level evaluation and by the part
    generators: every part whose name ends in _arm goes to arms, _leg to
    legs.
    """
    groups = {'arms': [], 'legs': []}
    for name, joints in partition.parts.items():
        if name.endswith('_arm'):
            groups['arms'].extend(joints)
        elif name.endswith('_leg'):
            groups['legs'].extend(joints)
    return {name: tuple(sorted(joints)) for name, joints in groups.items()}


def loadPartition(raw, skeleton_id: t.Optional[str] = None,
                  source: t.Optional[str] = None) -> PartitionMap:
    """
    Read a partition override file::

        {"parts": {"<name>": [indices]}, "end_joint": {...},
         "angle_parts": [...], "torso": {"origin": i, "tip": j}}

    Missing end_joint entries default to the last listed joint of the part,
    missing angle_parts to every part but backbone, missing torso to the
    skeleton's torso.
    """
    document = codec.requireKeys(codec.jloads(_read(raw), source),
                                 ['parts'], 'Partition', source)
    parts = document['parts']
    if not isinstance(parts, dict) or not parts:
        raise EvalError('Partition parts must be a non-empty object',
                        source=source)
    for name, joints in parts.items():
        if not isinstance(joints, list) or not all(_isIndex(j) for j in joints):
            raise EvalError('Joints of part %s must be a list of indices'
                            % name, source=source)

    ends = {name: joints[-1] for name, joints in parts.items() if joints}
    ends.update(document.get('end_joint', {}))
    angle_parts = document.get('angle_parts',
                               [name for name in parts if name != 'backbone'])

    torso = document.get('torso')
    if torso is None:
        if skeleton_id is None:
            raise EvalError('Partition without torso needs a known skeleton',
                            source=source)
        spec = skeletonSpec(skeleton_id)
        torso = {'origin': spec.torso_origin, 'tip': spec.torso_tip}
    codec.requireKeys(torso, ['origin', 'tip'], 'Partition torso', source)

    try:
        partition = PartitionMap(parts, ends, angle_parts, torso['origin'],
                                 torso['tip'], skeleton_id=skeleton_id)
    except EvalError as e:
        e.source = source
        raise

    if skeleton_id in SKELETONS:
        count = SKELETONS[skeleton_id].jointCount
        if partition.maxJoint >= count:
            raise EvalError('Partition refers to joint %d but %s has %d joints'
                            % (partition.maxJoint, skeleton_id, count),
                            source=source)
    return partition


def _isIndex(value) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def _isNumber(value) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _read(raw) -> t.Union[str, bytes]:
    if hasattr(raw, 'read'):
        return raw.read()
    return raw


@dataclass(frozen=True)
class MotionSequence:
    """
    T frames of J joints in 3-D, 64-bit floats, read only after construction.
    """
    skeleton_id: str
    fps: float
    positions: np.ndarray
    name: str = ''

    def __post_init__(self):
        positions = np.array(self.positions, dtype=np.float64)
        if positions.ndim != 3 or positions.shape[2] != 3:
            raise EvalError('Positions must be a T x J x 3 array, got shape %s'
                            % (positions.shape,), source=self.name or None)
        if positions.shape[0] < 2:
            raise EvalError('A motion needs at least 2 frames, got %d'
                            % positions.shape[0],
                            codec.INSUFFICIENT_FRAMES, source=self.name or None)
        if positions.shape[1] < 1:
            raise EvalError('A motion needs at least one joint',
                            source=self.name or None)
        if not np.isfinite(positions).all():
            bad = np.argwhere(~np.isfinite(positions))[0].tolist()
            raise EvalError('Non-finite coordinate at frame %d joint %d axis %d'
                            % tuple(bad), data={'frame': bad[0],
                                                'joint': bad[1]},
                            source=self.name or None)
        if not (np.isfinite(self.fps) and self.fps > 0):
            raise EvalError('fps must be positive, got %r' % (self.fps,),
                            source=self.name or None)
        spec = SKELETONS.get(self.skeleton_id)
        if spec is not None and positions.shape[1] != spec.jointCount:
            raise EvalError('Skeleton %s has %d joints, motion has %d'
                            % (self.skeleton_id, spec.jointCount,
                               positions.shape[1]),
                            source=self.name or None)
        positions.setflags(write=False)
        object.__setattr__(self, 'positions', positions)
        object.__setattr__(self, 'fps', float(self.fps))

    @property
    def frameCount(self) -> int:
        return self.positions.shape[0]

    @property
    def jointCount(self) -> int:
        return self.positions.shape[1]

    def transformed(self, rotation: np.ndarray, translation=(0.0, 0.0, 0.0),
                    scale: float = 1.0) -> 'MotionSequence':
        """
        Copy of this motion with x -> scale * R x + b applied to every joint.
        """
        rotation = np.asarray(rotation, dtype=np.float64)
        positions = scale * self.positions @ rotation.T + np.asarray(translation)
        return MotionSequence(self.skeleton_id, self.fps, positions, self.name)

    def contentDigest(self) -> str:
        """
        sha256 over skeleton, fps, shape and little-endian coordinates.
        """
        digest = hashlib.sha256()
        digest.update(self.skeleton_id.encode('utf-8'))
        digest.update(repr(self.fps).encode('ascii'))
        digest.update(repr(self.positions.shape).encode('ascii'))
        digest.update(self.positions.astype('<f8').tobytes())
        return digest.hexdigest()


def checkPartition(seq: MotionSequence, partition: PartitionMap):
    """
    @raise EvalError: VALIDATION_ERROR if the partition addresses joints the
        motion does not have
    """
    if partition.maxJoint >= seq.jointCount:
        raise EvalError('Partition refers to joint %d, motion has %d joints'
                        % (partition.maxJoint, seq.jointCount),
                        source=seq.name or None)


def partCentroids(seq: MotionSequence, partition: PartitionMap,
                  part: str) -> np.ndarray:
    """
    Centroid of a part for every frame, T x 3.
    """
    joints = list(partition.joints(part))
    return seq.positions[:, joints, :].mean(axis=1)


def partCentroid(seq: MotionSequence, partition: PartitionMap, part: str,
                 t: int) -> np.ndarray:
    """
    Arithmetic mean of the part's joint positions at frame t.

    @raise EvalError: LOOKUP_ERROR for unknown parts
    """
    joints = list(partition.joints(part))
    if not 0 <= t < seq.frameCount:
        raise EvalError('Frame %d out of range 0..%d' % (t, seq.frameCount - 1),
                        codec.LOOKUP_ERROR, source=seq.name or None)
    return seq.positions[t, joints, :].mean(axis=0)


def _coordinates(frames, source):
    """
    Check the nesting of the frames list and that every leaf is a number.
    """
    if not isinstance(frames, list) or not frames:
        raise EvalError('frames must be a non-empty list', source=source)
    joint_count = None
    for ti, frame in enumerate(frames):
        if not isinstance(frame, list):
            raise EvalError('Frame %d is not a list' % ti, source=source)
        if joint_count is None:
            joint_count = len(frame)
        elif len(frame) != joint_count:
            raise EvalError('Frame %d has %d joints, frame 0 has %d'
                            % (ti, len(frame), joint_count), source=source)
        for ji, point in enumerate(frame):
            if (not isinstance(point, list) or len(point) != 3 or
                    not all(_isNumber(x) for x in point)):
                raise EvalError('Frame %d joint %d is not three numbers'
                                % (ti, ji), data={'frame': ti, 'joint': ji},
                                source=source)
    return np.array(frames, dtype=np.float64)


def _parseJSON(text, name, source):
    document = codec.requireKeys(codec.jloads(text, source),
                                 ['skeleton', 'fps', 'frames'], 'Motion',
                                 source)
    if not isinstance(document['skeleton'], str):
        raise EvalError('skeleton must be a string', source=source)
    if not _isNumber(document['fps']):
        raise EvalError('fps must be a number', source=source)
    positions = _coordinates(document['frames'], source)
    return MotionSequence(document['skeleton'], document['fps'], positions,
                          name)


_CSV_HEADER = re.compile(r'^j(\d+)([xyz])$')


def _parseCSV(text, name, source, skeleton_id, fps):
    if isinstance(text, bytes):
        try:
            text = text.decode('utf-8')
        except UnicodeDecodeError as e:
            raise EvalError('Not UTF-8 text', codec.PARSE_ERROR,
                            data={'offset': e.start}, source=source)
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise EvalError('Empty CSV', codec.PARSE_ERROR, data={'line': 1},
                        source=source)

    if not header or header[0].strip() != 'frame' or (len(header) - 1) % 3:
        raise EvalError('CSV header must be frame,j0x,j0y,j0z,...',
                        codec.PARSE_ERROR, data={'line': 1}, source=source)
    for column, label in enumerate(header[1:]):
        match = _CSV_HEADER.match(label.strip())
        expected = (str(column // 3), 'xyz'[column % 3])
        if match is None or match.groups() != expected:
            raise EvalError('Unexpected CSV column %r' % label,
                            codec.PARSE_ERROR,
                            data={'line': 1, 'column': column + 2},
                            source=source)

    joint_count = (len(header) - 1) // 3
    rows = []
    for row in reader:
        line = reader.line_num
        if not row or not ''.join(row).strip():
            continue
        if len(row) != len(header):
            raise EvalError('Row has %d fields, header has %d'
                            % (len(row), len(header)), codec.PARSE_ERROR,
                            data={'line': line}, source=source)
        try:
            frame = int(row[0])
            values = [float(v) for v in row[1:]]
        except ValueError as e:
            raise EvalError('Bad number: %s' % e, codec.PARSE_ERROR,
                            data={'line': line}, source=source)
        if frame != len(rows):
            raise EvalError('Expected frame %d, got %d' % (len(rows), frame),
                            codec.PARSE_ERROR, data={'line': line},
                            source=source)
        rows.append(values)

    if not rows:
        raise EvalError('CSV has no frames', codec.INSUFFICIENT_FRAMES,
                        source=source)
    positions = np.array(rows, dtype=np.float64).reshape(len(rows),
                                                         joint_count, 3)
    return MotionSequence(skeleton_id, fps, positions, name)


def parseMotion(raw, format: str = 'json', name: str = '',
                skeleton_id: str = HUMANML3D,
                fps: float = DEFAULT_FPS) -> MotionSequence:
    """
    Parse a motion file and validate it.

    @type raw: bytes, str or file-like
    @param raw: The file contents

    @type format: str
    @param format: 'json' or 'csv'

    @type skeleton_id: str
    @param skeleton_id: Skeleton of CSV input (CSV has no room for it)

    @type fps: float
    @param fps: Frame rate of CSV input

    @rtype: MotionSequence

    @raise EvalError: PARSE_ERROR on malformed syntax (with line/offset),
        VALIDATION_ERROR on NaN/Inf or joint-count mismatch
    """
    source = name or None
    text = _read(raw)
    if format == 'json':
        seq = _parseJSON(text, name, source)
    elif format == 'csv':
        seq = _parseCSV(text, name, source, skeleton_id, fps)
    else:
        raise EvalError('Unknown motion format %s' % format,
                        codec.LOOKUP_ERROR, source=source)
    log.debug('Parsed {name}: {frames} frames, {joints} joints',
              name=name, frames=seq.frameCount, joints=seq.jointCount)
    return seq


def serializeMotion(seq: MotionSequence, format: str = 'json') -> str:
    """
    Write a motion so that parseMotion gives back identical coordinates.
    """
    if format == 'json':
        document = {'skeleton': seq.skeleton_id, 'fps': seq.fps,
                    'frames': seq.positions.tolist()}
        return codec.jdumps(document, indent=None)
    elif format == 'csv':
        out = io.StringIO()
        writer = csv.writer(out, lineterminator='\n')
        header = ['frame']
        for j in range(seq.jointCount):
            header.extend('j%d%s' % (j, axis) for axis in 'xyz')
        writer.writerow(header)
        for ti, frame in enumerate(seq.positions):
            writer.writerow([ti] + ['%.*g' % (CSV_DIGITS, v)
                                    for v in frame.ravel()])
        return out.getvalue()
    raise EvalError('Unknown motion format %s' % format, codec.LOOKUP_ERROR)


@dataclass(frozen=True)
class EmbeddingRecord:
    id: str
    vector: t.Optional[np.ndarray] = None
    text_vec: t.Optional[np.ndarray] = None
    motion_vec: t.Optional[np.ndarray] = None
    group: t.Optional[str] = None


_VECTOR_FIELDS = ('vector', 'text_vec', 'motion_vec')


@dataclass(frozen=True)
class EmbeddingSet:
    """
    Embedding dump of one encoder. Records are kept sorted by id, so every
    consumer sees the same order whatever order the file had.
    """
    records: t.Tuple[EmbeddingRecord, ...]
    source: t.Optional[str] = None
    _dims: t.Dict[str, int] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        records = tuple(sorted(self.records, key=lambda r: r.id))
        ids = [r.id for r in records]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise EvalError('Duplicate embedding ids %s' % dupes[:5],
                            source=self.source)
        dims = {}
        for record in records:
            for name in _VECTOR_FIELDS:
                value = getattr(record, name)
                if value is None:
                    continue
                if value.ndim != 1 or not np.isfinite(value).all():
                    raise EvalError('Record %s: %s must be a finite vector'
                                    % (record.id, name), source=self.source)
                if dims.setdefault(name, value.shape[0]) != value.shape[0]:
                    raise EvalError('Record %s: %s has dimension %d, expected %d'
                                    % (record.id, name, value.shape[0],
                                       dims[name]), source=self.source)
        object.__setattr__(self, 'records', records)
        object.__setattr__(self, '_dims', dims)

    def __len__(self):
        return len(self.records)

    @classmethod
    def fromArrays(cls, vectors=None, text=None, motion=None, groups=None,
                   ids=None, source=None) -> 'EmbeddingSet':
        """
        Build a set from row-aligned arrays. Ids default to zero padded row
        numbers so sorting by id keeps row order.
        """
        arrays = [a for a in (vectors, text, motion) if a is not None]
        if not arrays:
            raise EvalError('No vectors given', source=source)
        n = len(arrays[0])
        if ids is None:
            width = len(str(max(n - 1, 0)))
            ids = ['%0*d' % (width, i) for i in range(n)]

        def row(array, i):
            return None if array is None else np.asarray(array[i], dtype=np.float64)

        records = [EmbeddingRecord(str(ids[i]), row(vectors, i), row(text, i),
                                   row(motion, i),
                                   None if groups is None else str(groups[i]))
                   for i in range(n)]
        return cls(tuple(records), source)

    def dimension(self, name: str = 'vector') -> t.Optional[int]:
        return self._dims.get(name)

    def matrix(self, name: str = 'vector') -> np.ndarray:
        """
        N x D matrix of one vector field in id order.

        @raise EvalError: VALIDATION_ERROR if any record lacks the field
        """
        rows = [getattr(r, name) for r in self.records]
        if not rows or any(v is None for v in rows):
            raise EvalError('Every record needs %s' % name, source=self.source)
        return np.vstack(rows)

    def ids(self) -> t.List[str]:
        return [r.id for r in self.records]

    def groups(self, name: str = 'vector') -> t.Dict[str, np.ndarray]:
        """
        Vectors grouped by group key, groups in sorted key order.
        """
        grouped = {}
        for record in self.records:
            if record.group is None:
                raise EvalError('Record %s has no group' % record.id,
                                source=self.source)
            vector = getattr(record, name)
            if vector is None:
                raise EvalError('Record %s has no %s' % (record.id, name),
                                source=self.source)
            grouped.setdefault(record.group, []).append(vector)
        return {key: np.vstack(grouped[key]) for key in sorted(grouped)}

    def digest(self) -> str:
        digest = hashlib.sha256()
        for record in self.records:
            digest.update(record.id.encode('utf-8'))
            for name in _VECTOR_FIELDS:
                value = getattr(record, name)
                if value is not None:
                    digest.update(name.encode('ascii'))
                    digest.update(value.astype('<f8').tobytes())
            if record.group is not None:
                digest.update(record.group.encode('utf-8'))
        return digest.hexdigest()


def parseEmbeddings(raw, source: t.Optional[str] = None) -> EmbeddingSet:
    """
    Read a JSON-lines embedding dump, one record per line::

        {"id": "000021", "vector": [...], "text_vec": [...],
         "motion_vec": [...], "group": "000021"}

    Blank lines are skipped. Bytes are decoded line by line.

    @raise EvalError: PARSE_ERROR with the line number for broken lines or
        bad UTF-8, VALIDATION_ERROR for missing ids, ragged or non-finite
        vectors
    """
    text = _read(raw)
    records = []
    for number, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            document = codec.jloads(line, source)
        except EvalError as e:
            e.data = dict(e.data or {}, line=number)
            raise
        if not isinstance(document, dict) or 'id' not in document:
            raise EvalError('Line %d: record needs an id' % number,
                            data={'line': number}, source=source)
        vectors = {}
        for name in _VECTOR_FIELDS:
            value = document.get(name)
            if value is None:
                continue
            if (not isinstance(value, list) or
                    not all(_isNumber(x) for x in value)):
                raise EvalError('Line %d: %s must be a list of numbers'
                                % (number, name),
                                data={'line': number}, source=source)
            vectors[name] = np.array(value, dtype=np.float64)
        group = document.get('group')
        records.append(EmbeddingRecord(str(document['id']),
                                       group=None if group is None else str(group),
                                       **vectors))
    return EmbeddingSet(tuple(records), source)
