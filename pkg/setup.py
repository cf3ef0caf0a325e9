try:
    from setuptools import setup
except ImportError:
    from distutils.core import setup

with open("requirements.txt") as f:
    required = f.read().splitlines()

setup(
    name="amlest",
    version="0.1.0",
    description="Approximate maximum likelihood estimation by simulation",
    packages=["amlest"],
    install_requires=required,
    python_requires=">=3.10",
    entry_points={"console_scripts": ["amlest=amlest.cli:main"]},
)
