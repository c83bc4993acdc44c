"""Signal handling for graceful shutdown of long experiments."""

import logging
import signal


class GracefulKiller:
    """Turn SIGINT/SIGTERM into a stop flag that experiment loops poll."""

    def __init__(self, logger: logging.Logger = None):
        self.kill_now = False
        self.logger = logger or logging.getLogger(__name__)
        self._previous = {}

    def __enter__(self) -> "GracefulKiller":
        for signum in (signal.SIGINT, signal.SIGTERM):
            self._previous[signum] = signal.signal(signum, self.exit_gracefully)
        return self

    def __exit__(self, *exc) -> None:
        for signum, handler in self._previous.items():
            signal.signal(signum, handler)
        self._previous.clear()

    def exit_gracefully(self, signum, frame):
        """Record the request; the running experiment stops at its next checkpoint."""
        self.logger.warning("🛑 Graceful shutdown initiated...")
        self.kill_now = True

    def should_stop(self) -> bool:
        return self.kill_now
