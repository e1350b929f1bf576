#  Copyright (c) 2026 getcarrier.io
#
#  Licensed under the Apache License, Version 2.0 (the "License");
#  you may not use this file except in compliance with the License.
#  You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
#  Unless required by applicable law or agreed to in writing, software
#  distributed under the License is distributed on an "AS IS" BASIS,
#  WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
#  See the License for the specific language governing permissions and
#  limitations under the License.

""" Package setup """

from setuptools import setup, find_packages

with open('requirements.txt', encoding='utf-8') as file:
    required = file.read().splitlines()

setup(
    name='centry_evasion',
    version='1.0.0',
    description='Centry targeted evasion framework',
    long_description='Targeted API-import evasion experiments: detector ensembles, proxy distillation, CVAE feature injection',
    url='https://getcarrier.io',
    license='Apache License 2.0',
    author='getcarrier.io team',
    packages=find_packages(exclude=['tests', 'tests.*']),
    python_requires='>=3.11',
    install_requires=required,
    extras_require={
        'test': ['pytest'],
    },
    entry_points={
        'console_scripts': [
            'centry-evasion=centry_evasion.harness.cli:main',
        ],
    },
)
