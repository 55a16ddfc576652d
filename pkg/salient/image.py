# coding: utf-8
"""Raster export of saliency maps with Pillow.

Maps are scaled symmetrically around zero: the configured percentile of the
absolute values becomes the extreme, zero stays at mid-gray (or white with
the diverging palette)::

    >>> im = MapRenderer().render(np.zeros((4, 4)))
    >>> im.mode, im.size, sorted(set(np.asarray(im).ravel().tolist()))
    ('L', (4, 4), [128])
"""
import logging
import os

import numpy as np
from PIL import Image

from .base import ConfigError, DataError, Options, fb_lookup
from .numerics import Grid

__all__ = ['MapRenderer', 'PALETTES', 'export_map_image', 'export_map_grid',
           'map_levels']

log = logging.getLogger(__name__)

PALETTES = ('gray', 'diverging')
FORMATS = {'.pgm': 'PPM', '.ppm': 'PPM', '.png': 'PNG'}
MID_GRAY = 128


def _values(map):
    if hasattr(map, 'target_class'):
        map = map.values
    values = map.values if isinstance(map, Grid) else np.asarray(map, dtype=np.float64)
    if values.ndim != 2:
        raise DataError(u'can only render 2D maps, got shape %r' % (values.shape,))
    if not np.all(np.isfinite(values)):
        raise DataError(u'cannot render a map with non-finite values')
    return values


def map_levels(values, percentile=99.9999):
    """Values divided by the percentile extreme and clipped to [-1, 1].

    >>> map_levels(np.array([[-2.0, 1.0], [0.0, 4.0]]), 100).tolist()
    [[-0.5, 0.25], [0.0, 1.0]]
    """
    extreme = float(np.percentile(np.abs(values), percentile))
    if extreme == 0:
        return np.zeros_like(values)
    return np.clip(values / extreme, -1.0, 1.0)


class MapRenderer(Options):
    """Renders one map; ``scale`` and ``margin`` are pixel counts.

    Margins may be given per side (``left_margin`` and so on) with
    ``margin`` as the fallback for all four.
    """
    default_options = dict(percentile=99.9999, palette='gray')

    def __init__(self, options=None, **kw):
        options = dict(options or {})
        options.update((k, kw.pop(k)) for k in list(kw) if k in self.default_options)
        super(MapRenderer, self).__init__(options)
        self.render_options = kw
        if self.palette not in PALETTES:
            raise ConfigError(u'No palette for name %s' % self.palette)

    @property
    def palette(self):
        return self.lookup_option('palette')

    @property
    def percentile(self):
        return self.lookup_option('percentile')

    @property
    def scale(self):
        return int(fb_lookup(self.render_options, ('scale',), 1))

    @property
    def margins(self):
        """``(left, top, right, bottom)``."""
        return tuple(int(fb_lookup(self.render_options, (side + '_margin', 'margin'), 0))
                     for side in ('left', 'top', 'right', 'bottom'))

    @property
    def background(self):
        return MID_GRAY if self.palette == 'gray' else (255, 255, 255)

    @property
    def mode(self):
        return 'L' if self.palette == 'gray' else 'RGB'

    def colorize(self, levels):
        if self.palette == 'gray':
            return np.rint(MID_GRAY + 127.0 * levels).astype(np.uint8)
        # blue for negative, white at zero, red for positive
        rgb = np.empty(levels.shape + (3,))
        rgb[..., 0] = np.where(levels >= 0, 1.0, 1.0 + levels)
        rgb[..., 1] = 1.0 - np.abs(levels)
        rgb[..., 2] = np.where(levels <= 0, 1.0, 1.0 - levels)
        return np.rint(255.0 * rgb).astype(np.uint8)

    def render_cell(self, map):
        """The scaled map without margins."""
        pixels = self.colorize(map_levels(_values(map), self.percentile))
        im = Image.fromarray(pixels)
        if self.scale != 1:
            im = im.resize((im.width * self.scale, im.height * self.scale), Image.NEAREST)
        return im

    def render(self, map):
        cell = self.render_cell(map)
        left, top, right, bottom = self.margins
        if not any((left, top, right, bottom)):
            return cell
        im = Image.new(self.mode, (cell.width + left + right, cell.height + top + bottom),
                       self.background)
        im.paste(cell, (left, top))
        return im

    def render_grid(self, rows):
        """Rows of maps laid out left to right, top to bottom.

        Cells are separated (and surrounded) by ``margin`` pixels; each map
        is scaled on its own.
        """
        rows = [list(row) for row in rows]
        if not rows or not any(rows):
            raise DataError(u'nothing to render')
        cells = [[self.render_cell(m) for m in row] for row in rows]
        cell_w = max(c.width for row in cells for c in row)
        cell_h = max(c.height for row in cells for c in row)
        gap = self.margins[0]
        columns = max(len(row) for row in cells)
        im = Image.new(self.mode, (columns * (cell_w + gap) + gap, len(cells) * (cell_h + gap) + gap),
                       self.background)
        for r, row in enumerate(cells):
            for c, cell in enumerate(row):
                im.paste(cell, (gap + c * (cell_w + gap), gap + r * (cell_h + gap)))
        return im


def _save(im, path):
    ext = os.path.splitext(str(path))[1].lower()
    if ext not in FORMATS:
        raise ConfigError(u'No image format for extension %r' % ext)
    if ext == '.pgm' and im.mode != 'L':
        raise ConfigError(u'PGM output needs the gray palette')
    im.save(path, FORMATS[ext])
    log.debug('wrote %s (%dx%d)', path, im.width, im.height)
    return im


def export_map_image(map, path, percentile=99.9999, palette='gray', **render_options):
    """Render one map to ``path``; the format follows the extension.

    ``render_options`` are passed to MapRenderer (``scale``, ``margin``...).
    """
    renderer = MapRenderer(dict(percentile=percentile, palette=palette), **render_options)
    return _save(renderer.render(map), path)


def export_map_grid(rows, path, percentile=99.9999, palette='gray', **render_options):
    """Render a figure grid: one row per method, one column per class.

    Callers put the ground truth row first.
    """
    renderer = MapRenderer(dict(percentile=percentile, palette=palette), **render_options)
    return _save(renderer.render_grid(rows), path)


if __name__=="__main__":
    from doctest import testmod
    testmod()
