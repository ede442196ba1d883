"""Allow ``python -m rectmorley`` as an alias for the ``morley`` command."""

from .cli import console_main

console_main()
