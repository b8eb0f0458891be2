"""
setuptools script for infostream

To install (editable, with the test extras):
    pip install -e .[test]

The ``infostream`` console script runs ``infostream.cli:main``.
"""
from pathlib import Path

from setuptools import find_packages, setup

from version import __version__

ROOT = Path(__file__).parent


def _requirements():
    """Runtime requirements from requirements.txt (comments and pytest dropped)."""
    lines = (ROOT / 'requirements.txt').read_text(encoding='utf-8').splitlines()
    reqs = [line.strip() for line in lines if line.strip() and not line.startswith('#')]
    return [r for r in reqs if not r.startswith('pytest')]


setup(
    name='infostream',
    version=__version__,
    description='Sublinear and streaming estimators for entropy and f-divergences',
    long_description=(ROOT / 'docs' / 'USAGE.md').read_text(encoding='utf-8'),
    long_description_content_type='text/markdown',
    python_requires='>=3.9',
    packages=find_packages(include=['infostream', 'infostream.*']),
    py_modules=['version', 'infostream_cli'],
    data_files=[('', ['config.json'])],
    install_requires=_requirements(),
    extras_require={'test': ['pytest>=7.0']},
    entry_points={
        'console_scripts': [
            'infostream=infostream.cli:main',
        ],
    },
)
