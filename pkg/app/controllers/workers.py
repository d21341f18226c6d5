import logging
import queue
import threading
from typing import Any, Callable, Dict, Iterable, List, Tuple

from tqdm import tqdm

logger = logging.getLogger(__name__)


class SweepWorker(threading.Thread):
    """Pulls (index, item) jobs until the queue is empty; results are keyed by index."""

    def __init__(
        self,
        fn: Callable[[Any], Any],
        jobs: "queue.Queue[Tuple[int, Any]]",
        results: Dict[int, Any],
        errors: Dict[int, BaseException],
        progress: tqdm,
        lock: threading.Lock,
    ):
        super().__init__(daemon=True)
        self.fn = fn
        self.jobs = jobs
        self.results = results
        self.errors = errors
        self.progress = progress
        self.lock = lock

    def run(self):
        while True:
            try:
                index, item = self.jobs.get_nowait()
            except queue.Empty:
                return
            try:
                value = self.fn(item)
                with self.lock:
                    self.results[index] = value
            except Exception as e:
                logger.error("sweep item %d failed: %s", index, e)
                with self.lock:
                    self.errors[index] = e
            finally:
                with self.lock:
                    self.progress.update(1)


def run_sweep(
    fn: Callable[[Any], Any],
    items: Iterable[Any],
    workers: int = 1,
    desc: str = "sweep",
    show_progress: bool = False,
) -> List[Any]:
    """map(fn, items) across worker threads; results come back in item order.

    The first failing item (by position) has its exception re-raised after
    all workers finish.
    """
    items = list(items)
    progress = tqdm(total=len(items), desc=desc, disable=not show_progress, leave=False)
    try:
        if workers <= 1 or len(items) <= 1:
            out = []
            for item in items:
                out.append(fn(item))
                progress.update(1)
            return out

        jobs: "queue.Queue[Tuple[int, Any]]" = queue.Queue()
        for index, item in enumerate(items):
            jobs.put((index, item))
        results: Dict[int, Any] = {}
        errors: Dict[int, BaseException] = {}
        lock = threading.Lock()
        threads = [
            SweepWorker(fn, jobs, results, errors, progress, lock) for _ in range(min(workers, len(items)))
        ]
        for thread in threads:
            thread.start()
        for thread in threads:
            thread.join()
        if errors:
            raise errors[min(errors)]
        return [results[i] for i in range(len(items))]
    finally:
        progress.close()


def sweep_mapper(workers: int, show_progress: bool, desc: str) -> Callable[[Callable, Iterable], List[Any]]:
    """A map-compatible callable for core functions that take `map_fn`."""

    def mapper(fn: Callable, items: Iterable) -> List[Any]:
        return run_sweep(fn, items, workers=workers, desc=desc, show_progress=show_progress)

    return mapper
