from .session import Mode, SessionConfig
from .runner import run_training, SessionResult
