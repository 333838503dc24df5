from setuptools import setup, find_packages

setup(
    name="clt-transport",
    version="0.1.0",
    packages=find_packages(exclude=["examples", "examples.*"]),
    include_package_data=True,
    package_data={"clt_transport": ["config/*.yaml", "config/laws/*.txt", "config/sweeps/*"]},
    install_requires=[
        'numpy',
        'scipy',
        'pandas',
        'pydantic',
        'pydantic-settings',
        'python-dotenv',
        'PyYAML',
        'rich',
    ],
    extras_require={
        'dev': ['pytest', 'hypothesis'],
    },
    entry_points={
        'console_scripts': ['clt-transport=clt_transport.cli:main'],
    },
    python_requires='>=3.10',
)
