import os
from concurrent.futures import ThreadPoolExecutor, as_completed
from typing import Callable, List, Sequence, Tuple, TypeVar

from loguru import logger

T = TypeVar("T")
R = TypeVar("R")


def get_wav_files(directory: str) -> List[str]:
    """
    Recursively fetches all WAV files from the given directory and its subdirectories.

    Args:
        directory (str): The directory to search for WAV files.

    Returns:
        List[str]: Sorted paths of the WAV files found (sorted so runs are reproducible).
    """
    wav_files = []
    try:
        for root, _, files in os.walk(directory):
            for file in files:
                if file.lower().endswith('.wav'):
                    wav_files.append(os.path.join(root, file))
                else:
                    logger.debug(f"Non-WAV file skipped: {file}")
        logger.info(f"Found {len(wav_files)} WAV file(s) in '{directory}'.")
    except Exception as e:
        logger.error(f"Error occurred while scanning directory '{directory}': {str(e)}")
    return sorted(wav_files)


def run_concurrently(
    func: Callable[[T], R],
    items: Sequence[T],
    max_workers: int = 4,
) -> List[Tuple[T, R]]:
    """
    Applies ``func`` to every item on a bounded thread pool.

    Results come back in input order whatever the completion order, so callers stay
    deterministic. The first exception raised by ``func`` is re-raised after it has
    been logged.

    Args:
        func (Callable): Work function applied to each item.
        items (Sequence): Work items.
        max_workers (int): The maximum number of threads to use.

    Returns:
        List[Tuple[T, R]]: (item, result) pairs in the order of ``items``.
    """
    results: List[R] = [None] * len(items)  # type: ignore[list-item]
    with ThreadPoolExecutor(max_workers=max_workers) as executor:
        futures = {executor.submit(func, item): index for index, item in enumerate(items)}
        for future in as_completed(futures):
            index = futures[future]
            try:
                results[index] = future.result()
            except Exception as e:
                logger.error(f"Error processing {items[index]}: {str(e)}")
                raise
    logger.debug(f"Completed {len(items)} concurrent task(s).")
    return list(zip(items, results))
