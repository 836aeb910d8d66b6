"""Shared record of acceptance outcomes, printed at the end of the run."""

RESULTS: dict[int, tuple[bool, str]] = {}
