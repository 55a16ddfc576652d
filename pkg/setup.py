# -*- coding: utf-8 -*-
import sys
from os.path import abspath, dirname, join as pathjoin
from setuptools import setup

try:
    from setuptools.command.test import test as TestCommand
except ImportError:
    TestCommand = None

here = dirname(abspath(__file__))
namespace = {}
exec(open(pathjoin(here, 'salient', '__version__.py')).read(), namespace)
version = '.'.join(map(str, namespace['VERSION']))
install_requires = ['setuptools', 'numpy>=1.17', 'scipy>=1.4', 'Pillow>=6.0']
tests_require = ['pytest']
extra_requires = {'test': tests_require}
long_description = '\n'.join([
    open(pathjoin(here, 'README')).read(),
    ])

cmdclass = {}
if TestCommand is not None:
    class PyTest(TestCommand):
        def finalize_options(self):
            TestCommand.finalize_options(self)
            self.test_args = ['--doctest-modules', 'salient', 'tests']
            self.test_suite = True
        def run_tests(self):
            import pytest
            errno = pytest.main(self.test_args)
            sys.exit(errno)
    cmdclass['test'] = PyTest

setup_params = dict(
    name="salient",
    version=version,
    packages=['salient'],
    zip_safe=False,
    install_requires = install_requires,
    tests_require = tests_require,
    extras_require=extra_requires,
    entry_points={
        'console_scripts': ['salient = salient.cli:main']},
    python_requires='>=3.6',
    classifiers=[
        'Development Status :: 3 - Alpha',
        'Environment :: Console',
        'Intended Audience :: Science/Research',
        'License :: OSI Approved :: BSD License',
        'Operating System :: OS Independent',
        'Programming Language :: Python :: 3',
        'Topic :: Scientific/Engineering :: Artificial Intelligence',
    ],
    description = "Saliency maps of adversarially trained classifiers, scored against synthetic ground truth.",
    long_description=long_description,
    license = "New BSD",
    keywords = "saliency interpretability adversarial training gradients",
    cmdclass = cmdclass,
)

setup(**setup_params)
