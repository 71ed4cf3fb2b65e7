import setuptools

with open("README.md", "r") as fh:
    long_description = fh.read()

setuptools.setup(
    name="reprolocate",
    version="0.1.0",
    author="Fastily",
    author_email="fastily@users.noreply.github.com",
    description="locate the source files responsible for unreproducible builds",
    long_description=long_description,
    long_description_content_type="text/markdown",
    include_package_data=True,
    packages=setuptools.find_packages(include=["reprolocate"]),
    install_requires=['numpy', 'rich', 'scipy>=1.13'],
    entry_points={
        'console_scripts': [
            'reprolocate = reprolocate.__main__:_main'
        ]
    },
    classifiers=[
        "Natural Language :: English",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.11",
        "License :: OSI Approved :: GNU General Public License v3 (GPLv3)",
        "Operating System :: OS Independent",
    ],
    python_requires='>=3.10',
)
