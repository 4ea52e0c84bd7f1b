from __future__ import annotations

from scripts.arena_cli import main


if __name__ == "__main__":
    raise SystemExit(main())
