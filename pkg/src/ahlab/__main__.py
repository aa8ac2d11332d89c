"""Allow ``python -m ahlab <subcommand> ...``."""

from .cli import main

main()
