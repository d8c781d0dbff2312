"""Evaluation harness for prompt-driven LLM drone control.

Submodules:

* :mod:`gsce.skillscript` command language parser and interpreter
* :mod:`gsce.dronesim` kinematic NED drone
* :mod:`gsce.prompt` prompt composition and example library
* :mod:`gsce.llmclient` completion agents and response cache
* :mod:`gsce.corpus` tasks, ground truth and the corpus generator
* :mod:`gsce.scoring` success rate, completeness and reports
* :mod:`gsce.runner` batch execution
"""

__version__ = "0.1.0"
