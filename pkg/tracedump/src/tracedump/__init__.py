"""Local-model generation tracing.

Runs a causal language model twice per query (with and without the
context), recording at every decoding step the top-K candidate tokens
with softmax probabilities and one hidden-state vector, in the trace
file format the capture tooling consumes.
"""

from .dump import DumpError, DumpJob, dump

__all__ = ["DumpError", "DumpJob", "dump"]

__version__ = "0.1.0"
