from setuptools import setup, find_packages

setup(
    name="irrigation",
    version="0.1.0",
    packages=find_packages(exclude=["examples", "examples.*"]),
    install_requires=[
        "numpy>=1.19.0",
        "scipy>=1.9.0",
        "networkx>=2.6.0",
        "matplotlib>=3.4.0",
        "scikit-learn>=1.0.0",  # BallTree для масс шаров
        "POT>=0.9.0",           # точный транспорт W2
        "pyyaml>=5.4.0",        # файлы конфигурации
        "tqdm>=4.60.0",         # прогресс таблицы e(R, T)
        "redis>=4.3.0",         # для кэширования
    ],
    extras_require={
        "test": [
            "pytest>=7.0.0",
            "hypothesis>=6.0.0",
        ],
    },
    entry_points={
        "console_scripts": [
            "irrigation=irrigation.cli:main",
        ],
    },
    author="Irrigation Team",
    description="Energies, optimizer and verification toolkit for branched transport flows",
    python_requires=">=3.8",
)
