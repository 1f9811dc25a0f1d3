#!/usr/bin/env python3
# SPDX-License-Identifier: GPL-2.0-or-later

import os
import re

from setuptools import setup


def read(fname):
    with open(os.path.join(os.path.dirname(__file__), fname), encoding="utf-8") as f:
        return f.read()


def find_version(source):
    version_file = read(source)
    version_match = re.search(r"^__VERSION__ = ['\"]([^'\"]*)['\"]", version_file, re.M)

    if version_match:
        return version_match.group(1)

    raise RuntimeError("Unable to find version string.")


def find_requirements(source):
    return [line.strip() for line in read(source).splitlines()
            if line.strip() and not line.startswith("#")]


NAME = "chrono"

setup(
        version=find_version("src/chrono/__init__.py"),
        name=NAME,
        description="Target-date conditioned optical patch generation from optical and radar time series",
        long_description=read("README.md"),
        long_description_content_type="text/markdown",
        license="GPLv2+",
        python_requires=">=3.10",
        install_requires=find_requirements("requirements.txt"),
        extras_require={"plots": ["matplotlib>=3.7"], "test": ["pytest>=7"]},
        entry_points={"console_scripts": ["chrono=chrono.command:cmd"]},
        packages=["chrono"],
        package_dir={"": "src"},
        include_package_data=True,
)
