# coding: utf-8
"""Serialization helpers: array containers, digests, number formatting.
"""
import hashlib
import json

import numpy as np

from .base import DataError

__all__ = ['CONTAINER_MAGIC', 'write_container', 'read_container',
           'file_digest', 'text_digest', 'canonical_json', 'fmt_real',
           'parse_value']

CONTAINER_MAGIC = b'SALIENT1\n'


def canonical_json(obj):
    """
    >>> canonical_json(dict(b=1, a=[1.5, None]))
    '{"a":[1.5,null],"b":1}'
    """
    return json.dumps(obj, sort_keys=True, separators=(',', ':'))


def text_digest(text):
    if not isinstance(text, bytes):
        text = text.encode('utf-8')
    return hashlib.sha256(text).hexdigest()


def file_digest(path, blocksize=1 << 16):
    digest = hashlib.sha256()
    with open(path, 'rb') as f:
        for block in iter(lambda: f.read(blocksize), b''):
            digest.update(block)
    return digest.hexdigest()


def fmt_real(value, digits=6):
    """Real number with ``digits`` significant digits.

    >>> fmt_real(0.123456789), fmt_real(12345678.9), fmt_real(float('inf'))
    ('0.123457', '1.23457e+07', 'inf')
    """
    return '%.*g' % (digits, value)


def parse_value(text):
    """Parse a command line value as JSON, falling back to a plain string.

    >>> parse_value('0.5'), parse_value('true'), parse_value('[20, 10]'), parse_value('pgd')
    (0.5, True, [20, 10], 'pgd')
    """
    try:
        return json.loads(text)
    except ValueError:
        return text


def write_container(path, header, values, labels=None):
    """Write a flat binary file: magic, JSON header line, float64 and int64 data.

    Arrays are stored little-endian and row-major; the header records their
    shapes.  Output bytes depend only on the arguments.
    """
    values = np.ascontiguousarray(values, dtype='<f8')
    header = dict(header, shape=list(values.shape))
    if labels is not None:
        labels = np.ascontiguousarray(labels, dtype='<i8')
        header['count'] = int(labels.shape[0])
    with open(path, 'wb') as f:
        f.write(CONTAINER_MAGIC)
        f.write(canonical_json(header).encode('utf-8') + b'\n')
        f.write(values.tobytes(order='C'))
        if labels is not None:
            f.write(labels.tobytes(order='C'))


def read_container(path, kind=None):
    """Inverse of write_container; returns ``(header, values, labels)``."""
    with open(path, 'rb') as f:
        if f.read(len(CONTAINER_MAGIC)) != CONTAINER_MAGIC:
            raise DataError(u'%s is not a salient data file' % path)
        try:
            header = json.loads(f.readline().decode('utf-8'))
        except ValueError as e:
            raise DataError(u'%s: bad header: %s' % (path, e))
        payload = f.read()
    if not isinstance(header, dict):
        raise DataError(u'%s: bad header: not an object' % path)
    if kind is not None and header.get('kind') != kind:
        raise DataError(u'%s holds %r, expected %r' % (path, header.get('kind'), kind))
    try:
        shape = tuple(int(n) for n in header['shape'])
    except (KeyError, TypeError, ValueError):
        raise DataError(u'%s: header has no valid shape' % path)
    size = int(np.prod(shape)) * 8
    if len(payload) < size:
        raise DataError(u'%s is truncated' % path)
    values = np.frombuffer(payload[:size], dtype='<f8').reshape(shape).astype(np.float64)
    labels = None
    if 'count' in header:
        count = header['count']
        if len(payload) != size + 8 * count:
            raise DataError(u'%s has %d trailing bytes, expected %d labels'
                            % (path, len(payload) - size, count))
        labels = np.frombuffer(payload[size:], dtype='<i8').astype(np.int64)
    elif len(payload) != size:
        raise DataError(u'%s has trailing bytes' % path)
    return header, values, labels


if __name__=="__main__":
    from doctest import testmod
    testmod()
