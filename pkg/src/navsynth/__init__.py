"""navsynth: self-exploration synthesis of navigation instruction data.

Samples bounded trajectories in a navigation graph, captions what the agent
sees with a pluggable vision-language scorer, fills masked instruction
templates, mines hard-negative paths, and trains a small gradient-verified
prompt-ranking model on the result.
"""

__version__ = "0.1.0"
