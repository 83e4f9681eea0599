"""splitfss: U-shaped split learning on two non-colluding servers with
function-secret-sharing comparison gates and Beaver triples.

The client trains the first and last layers of a CNN in plaintext fixed
point; the servers evaluate the middle layers on additive shares and
masked public inputs; a trusted offline dealer supplies keys, triples
and masks.  A harness reproduces accuracy-parity and communication
comparisons between the public and private variants at desk scale.
"""

from .ring import FixedConfig, FixedTensor, decode, encode, ring_add, ring_mul, ring_sub, trunc
from .sharing import Share, reconstruct, split

__all__ = [
    "FixedConfig",
    "FixedTensor",
    "Share",
    "decode",
    "encode",
    "reconstruct",
    "ring_add",
    "ring_mul",
    "ring_sub",
    "split",
    "trunc",
]

__version__ = "0.1.0"
