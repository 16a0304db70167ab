import logging
from concurrent.futures import ProcessPoolExecutor

from games.conf import nlg_setting

logger = logging.getLogger(__name__)


def worker_count(workers=None):
    if workers is None:
        workers = nlg_setting("THREADS")
    return max(1, int(workers))


def map_tasks(fn, tasks, workers=None):
    """
    Ordered map of a picklable top-level function over tasks.

    One worker runs inline; more fan out to a process pool. Output order
    always follows input order, so merges stay deterministic.
    """
    tasks = list(tasks)
    n = min(worker_count(workers), len(tasks)) if tasks else 1
    if n <= 1:
        return [fn(task) for task in tasks]
    logger.debug("dispatching %d tasks to %d processes", len(tasks), n)
    with ProcessPoolExecutor(max_workers=n) as executor:
        return list(executor.map(fn, tasks))
