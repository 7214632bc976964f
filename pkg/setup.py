from setuptools import setup

# scipy >= 1.6 for the 3-point jacobian under L-BFGS-B bounds
setup(
	name='culture_governance',
	version='0.1',
	description='Cultural level and diversity indicators and a spatial SUR panel model of governance',
	license='MIT',
	packages=['culture_governance'],
	python_requires='>=3.7',
	install_requires=[
		'numpy',
		'scipy>=1.6',
		'pandas>=1.5',
		'pyyaml'
		],
	extras_require={
		'test': ['pytest'],
	},
	entry_points = {
		'console_scripts': ['culture_governance=culture_governance.__main__:main'],
	},
	keywords='Hofstede migration governance spatial SUR maximum likelihood',
	include_package_data=True,
	zip_safe=False)
