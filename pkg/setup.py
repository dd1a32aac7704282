from setuptools import find_packages, setup

with open("requirements.txt") as handle:
    requirements = [line.strip() for line in handle if line.strip() and not line.startswith("pytest")]

setup(
    name="revzeta",
    version="1.0.0",
    description="Spectral zeta quantities of the Dirichlet Laplacian on surfaces of revolution",
    packages=find_packages(exclude=["tests"]),
    python_requires=">=3.9",
    install_requires=requirements,
    extras_require={"test": ["pytest==7.4.3"]},
    entry_points={"console_scripts": ["revzeta=revzeta.main:main_entry"]},
)
