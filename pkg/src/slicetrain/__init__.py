"""slicetrain: synchronous data-parallel neural-network training built from
coarse-grained functional dataset primitives, at desk scale.

The engine subpackage provides immutable partitioned datasets and a
write-once in-memory block store; nn holds a minimal flat-parameter
neural-network core; trainer implements the per-iteration forward-backward
and parameter-synchronization jobs; sim provides the deterministic
simulated cluster they run on.
"""

__version__ = "0.1.0"
