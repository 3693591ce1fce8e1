from setuptools import setup, find_packages

setup(
    name='flow-pose-tracker',
    version='0.1.0',
    description='6D object pose and velocity tracking from optical flow, delayed segmentation masks and delayed pose estimates',
    packages=find_packages(),
    package_data={'flow_pose_tracker': ['config/*.yaml']},
    install_requires=[
        'typing-extensions',
        'duckdb',
        'numpy',
        'scipy',
        'filterpy',
        'opencv-python-headless',
        'PyYAML',
    ],
    entry_points={
        'console_scripts': [
            'flow-pose-tracker=flow_pose_tracker.cli:main',
        ],
    },
    python_requires='>=3.8',
)
