"""Tools for checking DNS zone resolvability in an IPv6-only world."""

__version__ = "0.1.0"
