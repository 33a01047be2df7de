from setuptools import setup


with open('README.rst') as f:
    long_description = f.read()

setup(
    name = "kftrack",
    packages = ["kftrack"],
    package_data = {"kftrack": ["pipeline.yaml"]},
    version = "0.1.0",
    description = "Kalman-filter multi-object trackers and a synthetic ball-tracking benchmark",
    keywords = ["tracking", "kalman", "mot", "benchmark"],
    classifiers = [
        "Programming Language :: Python",
        "Programming Language :: Python :: 3.8",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Development Status :: 3 - Alpha",
        "Environment :: Console",
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: BSD License",
        "Operating System :: OS Independent",
        "Topic :: Scientific/Engineering :: Image Recognition",
        "Topic :: Scientific/Engineering :: Information Analysis",
    ],
    long_description = long_description,
    install_requires = [
        "numpy",
        "scipy",
        "pandas>=1.5",
        "PyYAML",
        "openpyxl",
    ],
    entry_points = {
        "console_scripts": ["kftrack=kftrack.runner:main"],
    },
)
