"""Setups the project."""
import itertools
import re

from setuptools import find_packages, setup

with open("potdiag/version.py") as file:
    full_version = file.read()
    assert (
        re.match(r'VERSION = "\d\.\d+\.\d+"\n', full_version).group(0) == full_version
    ), f"Unexpected version: {full_version}"
    VERSION = re.search(r"\d\.\d+\.\d+", full_version).group(0)

# Optional dependency groups.
extras = {
    "testing": ["pytest==7.0.1"],
}

extras["all"] = list(set(itertools.chain.from_iterable(extras.values())))

# Uses the readme as the description on PyPI
with open("README.md") as fh:
    long_description = ""
    header_count = 0
    for line in fh:
        if line.startswith("##"):
            header_count += 1
        if header_count < 2:
            long_description += line
        else:
            break

setup(
    author="potdiag contributors",
    classifiers=[
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.8",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Topic :: Scientific/Engineering :: Mathematics",
    ],
    description="potdiag: extremal index estimation and threshold diagnostics for "
    "peaks over threshold analysis",
    entry_points={"console_scripts": ["potdiag = potdiag.cli:main"]},
    extras_require=extras,
    install_requires=[
        "numpy >= 1.20.0",
        "scipy >= 1.7.0",
        "pandas >= 1.5.0",
        "cloudpickle >= 1.2.0",
    ],
    license="MIT",
    long_description=long_description,
    long_description_content_type="text/markdown",
    name="potdiag",
    packages=[package for package in find_packages() if package.startswith("potdiag")],
    package_data={"potdiag": ["py.typed"]},
    python_requires=">=3.8",
    tests_require=extras["testing"],
    version=VERSION,
    zip_safe=False,
)
