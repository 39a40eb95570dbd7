"""Timetabling and freight allocation for a single-track rail corridor."""

__version__ = "0.1.0"
