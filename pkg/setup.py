#!/usr/bin/env python

from setuptools import setup, find_packages

with open('requirements.txt') as f:
    requirements = f.read().splitlines()

setup(name='sfenet',
      version='0.1',
      description='Selective feature expression network for detecting tampered video frames',
      packages=find_packages(exclude=['tests']),
      install_requires=requirements,
      extras_require={'test': ['pytest', 'scikit-learn']},
      entry_points={'console_scripts': ['sfenet=sfenet.cli:main']})
