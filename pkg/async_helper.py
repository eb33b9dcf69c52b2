"""
Runs the ledger's aiosqlite coroutines from the synchronous CLI: one event loop
lives in a daemon thread and every call is submitted to it.
"""
from __future__ import annotations
import asyncio
import threading
from typing import Any, Coroutine, Optional

DEFAULT_TIMEOUT = 30.0


class LoopThread:
    """A private asyncio loop running forever in a background thread."""

    def __init__(self):
        self.loop: Optional[asyncio.AbstractEventLoop] = None
        self._thread: Optional[threading.Thread] = None
        self._ready = threading.Event()
        self._lock = threading.Lock()

    @property
    def running(self) -> bool:
        return self.loop is not None and self.loop.is_running()

    def start(self) -> None:
        with self._lock:
            if self._thread is not None:
                return
            self._ready.clear()
            self._thread = threading.Thread(target=self._run, name="ledger-loop", daemon=True)
            self._thread.start()
        self._ready.wait()

    def _run(self) -> None:
        self.loop = asyncio.new_event_loop()
        asyncio.set_event_loop(self.loop)
        self.loop.call_soon(self._ready.set)
        self.loop.run_forever()
        self.loop.close()

    def submit(self, coro: Coroutine, timeout: float = DEFAULT_TIMEOUT) -> Any:
        if not self.running:
            self.start()
        future = asyncio.run_coroutine_threadsafe(coro, self.loop)
        return future.result(timeout=timeout)

    def stop(self) -> None:
        with self._lock:
            if self.loop is not None and self._thread is not None:
                self.loop.call_soon_threadsafe(self.loop.stop)
                self._thread.join(timeout=5)
            self.loop = None
            self._thread = None


_loop = LoopThread()


def run_async(coro: Coroutine, timeout: float = DEFAULT_TIMEOUT) -> Any:
    """Run an async coroutine from sync code on the shared loop."""
    return _loop.submit(coro, timeout)


def stop_async_loop() -> None:
    _loop.stop()
