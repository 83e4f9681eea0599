"""Exception types shared across the package."""


class ConfigMismatch(ValueError):
    """Two values with different fixed-point configurations were combined."""


class PartyMismatch(ValueError):
    """A share operation received shares with the wrong party ids."""


class ShapeMismatch(ValueError):
    """Tensor operands have incompatible shapes."""


class TripleExhausted(RuntimeError):
    """A Beaver triple was used more than once."""


class KeyExhausted(RuntimeError):
    """A comparison key (or key bundle entry) was used more than once."""


class ChannelClosed(ConnectionError):
    """The peer closed the channel before or during a frame."""


class FrameCorrupt(ValueError):
    """A received frame failed magic/length validation."""


class Timeout(TimeoutError):
    """recv did not produce a full frame within the configured timeout."""


class SyncMismatch(RuntimeError):
    """Hyperparameter synchronization found disagreeing configurations."""


class ProtocolOrderError(RuntimeError):
    """A message arrived outside the expected (epoch, batch, phase) order."""


class BadMagic(ValueError):
    """An IDX file does not start with the expected magic number."""


class TruncatedFile(ValueError):
    """An IDX file ends before the payload announced in its header."""
