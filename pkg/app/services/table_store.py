"""
Table store service.
Persists arithmetic tables in the cache directory and rebuilds entries
whose files fail validation.
"""

import time
from pathlib import Path

from loguru import logger

from app.config import settings
from app.exceptions import TableFormatError
from app.services.arith_tables import (
    ArithTable,
    Variant,
    build_table,
    load_table,
    read_header,
    save_table,
)

CACHE_SUFFIX = ".mtl"


class TableStore:
    """Manages cached arithmetic tables on disk."""

    def __init__(self, cache_dir: str | Path | None = None):
        if cache_dir:
            self._cache_dir = Path(cache_dir)
            self._cache_dir.mkdir(parents=True, exist_ok=True)
        else:
            self._cache_dir = settings.cache_path

    @property
    def cache_dir(self) -> Path:
        return self._cache_dir

    def path_for(self, variant: Variant, n_max: int) -> Path:
        return self._cache_dir / f"{variant.slug}-n{n_max}{CACHE_SUFFIX}"

    def _load(self, path: Path) -> ArithTable | None:
        """Load a cached table, or None when absent or invalid."""
        if not path.exists():
            return None
        try:
            table = load_table(path)
            logger.info(f"Cache hit: {path.name}")
            return table
        except TableFormatError as e:
            logger.warning(f"Cached table unusable, rebuilding: {e}")
            return None

    def get_or_build(
        self, variant: Variant, n_max: int, workers: int | None = None
    ) -> tuple[ArithTable, bool]:
        """
        Return the requested table and whether it came from the cache.

        Args:
            variant: Which arithmetic function to tabulate.
            n_max: Table size.
            workers: Sieve worker count.

        Returns:
            (table, cache_hit)
        """
        path = self.path_for(variant, n_max)
        table = self._load(path)
        if table is not None:
            if table.variant == variant and table.n_max == n_max:
                return table, True
            logger.warning(f"Cache file {path.name} holds a different table, rebuilding")

        start_time = time.time()
        table = build_table(variant, n_max, workers=workers)
        save_table(table, path)
        logger.info(
            f"Built {variant.slug} n_max={n_max} in {time.time() - start_time:.2f}s "
            f"-> {path.name}"
        )
        return table, False

    def list_entries(self) -> list[dict]:
        """Describe every readable cache file."""
        entries = []
        for path in sorted(self._cache_dir.glob(f"*{CACHE_SUFFIX}")):
            try:
                variant, n_max = read_header(path)
            except (TableFormatError, OSError) as e:
                logger.warning(f"Skipping unreadable cache file: {e}")
                continue
            entries.append(
                {
                    "file": path.name,
                    "variant": variant.kind.value,
                    "k": variant.k,
                    "n_max": n_max,
                    "bytes": path.stat().st_size,
                }
            )
        return entries

    def delete_entry(self, variant: Variant, n_max: int) -> bool:
        path = self.path_for(variant, n_max)
        if not path.exists():
            return False
        path.unlink()
        logger.info(f"Deleted cache entry {path.name}")
        return True

    def reset(self) -> int:
        """Delete every cache file; returns how many were removed."""
        removed = 0
        for path in self._cache_dir.glob(f"*{CACHE_SUFFIX}"):
            path.unlink()
            removed += 1
        logger.info(f"Table cache reset ({removed} file(s) removed)")
        return removed

    def stats(self) -> dict:
        entries = self.list_entries()
        return {
            "cache_dir": str(self._cache_dir),
            "entries": len(entries),
            "total_bytes": sum(e["bytes"] for e in entries),
        }
