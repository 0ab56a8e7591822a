"""Structure-aware extractive summarization of episodic screenplays.

Scene-level summarizers built around two ideas: directed graph centrality
over scene similarity, and key narrative moments (turning points) treated
as latent variables that modulate scene salience.  Includes unsupervised
rankers, supervised classifiers trained with a small built-in autodiff
engine, an evaluation harness, and a command-line interface.
"""

__version__ = "0.1.0"
