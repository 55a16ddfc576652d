# coding: utf-8
"""Shared plumbing: plugin registry, option lookup, errors.
"""
from collections import namedtuple

__all__ = ['SalientError', 'ConfigError', 'DataError', 'DegenerateInputError',
           'UnsupportedMethodError', 'DivergenceError',
           'fb_lookup', 'Options', 'Plugin', 'LabeledExample']


class SalientError(Exception):
    """Base of every error raised by salient."""


class ConfigError(SalientError, ValueError):
    pass


class DataError(SalientError, ValueError):
    pass


class DegenerateInputError(DataError):
    """Zero-variance input where a variance is divided by."""


class UnsupportedMethodError(SalientError, ValueError):
    pass


class DivergenceError(SalientError, ArithmeticError):
    """Training produced a non-finite loss.

    ``state`` carries the diagnostic dump taken when training stopped.
    """
    def __init__(self, message, state=None):
        super(DivergenceError, self).__init__(message)
        self.state = state or {}


LabeledExample = namedtuple('LabeledExample', ['grid', 'label'])


def fb_lookup(dic, keys, default):
    """Do dict-lookup for multiple key, returning the first hit.

    >>> fb_lookup(dict(margin=2), ('left_margin', 'margin'), 0)
    2
    >>> fb_lookup({}, ('left_margin', 'margin'), 0)
    0
    """
    for key in keys:
        if key in dic:
            return dic[key]
    return default


class Options(object):
    """Option holder with class level fallbacks.

    Subclasses declare ``default_options``; derived classes extend them as::

        default_options = dict(superclass.default_options, **kwargs)

    >>> class Knobs(Options):
    ...     default_options = dict(alpha=1, beta=2)
    >>> Knobs(beta=3).lookup_option('beta'), Knobs().lookup_option('alpha')
    (3, 1)
    >>> Knobs(gamma=1)
    Traceback (most recent call last):
    ...
    salient.base.ConfigError: Unknown option for Knobs: gamma
    """
    default_options = {}

    def __init__(self, options=None, **kw):
        merged = dict(options or {}, **kw)
        unknown = sorted(set(merged) - set(self.default_options))
        if unknown:
            raise ConfigError(u'Unknown option for %s: %s'
                              % (type(self).__name__, ', '.join(unknown)))
        self.options = merged

    def lookup_option(self, key, default=None):
        fb_value = self.default_options.get(key, default)
        return self.options.get(key, fb_value)

    def as_dict(self):
        return dict(self.default_options, **self.options)


class Plugin(Options):
    """Base class of name-addressed plugins.

    Each direct subclass of a registry root declares ``name`` and optional
    ``aliases``; ``update_registry`` collects them.
    """
    name = ''
    aliases = ()
    registry = None
    kind = 'plugin'

    @classmethod
    def update_registry(cls):
        if cls.registry is None:
            cls.registry = {}
        for subclass in cls.__subclasses__():
            cls.registry.update({subclass.name.lower(): subclass})
            cls.registry.update(
                dict((alias.lower(), subclass) for alias in subclass.aliases))

    @classmethod
    def resolve(cls, name):
        if not cls.registry:
            cls.update_registry()
        found = cls.registry.get(str(name).lower())
        if found is None:
            raise UnsupportedMethodError(u'No %s for name %s' % (cls.kind, name))
        return found

    @classmethod
    def names(cls):
        return [subclass.name for subclass in cls.__subclasses__()]


if __name__=="__main__":
    from doctest import testmod
    testmod()
