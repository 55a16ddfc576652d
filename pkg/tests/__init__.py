# -*- coding: utf-8 -*-

from .doctests import build_tests
