"""Symbolic memory for text: learned n-gram stores queried by programs.

The package turns a stream of sentences into fixed-length symbolic
n-grams held in hash indexes, and answers questions by decoding small
programs over prefix/suffix lookups.  Both the sentence encoder and the
question programmer are trained from answers alone.
"""

__version__ = "0.1.0"
