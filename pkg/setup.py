from setuptools import find_packages, setup

setup(
    name="psdOU",
    version="1.0.0",
    description="Positive semidefinite Ornstein-Uhlenbeck processes driven by matrix subordinators",
    packages=find_packages(exclude=("tests",)),
    python_requires=">=3.8",
    install_requires=[
        "numpy>=1.21",
        "scipy>=1.10",
        "matplotlib>=3.5",
        "tqdm>=4.64",
        "colorama>=0.4",
        "pandas>=1.5",
    ],
    extras_require={"test": ["pytest>=7.0", "hypothesis>=6.0"]},
    entry_points={"console_scripts": ["psdOU=psdOU.cli:main"]},
)
