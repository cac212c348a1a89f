"""scenergy: composable energy models over object boxes.

Learn spatial concepts as energy functions, compose them by summation, and use
Langevin dynamics to turn natural-language rearrangement instructions into goal
layouts that a simulated pick-and-place executor can carry out.
"""

__version__ = "0.1.0"
