"""Output helpers: binary field dumps, CSV tables and run summaries."""

from shom.utils.field_io import read_fields, write_csv, write_fields, write_summary

__all__ = ["read_fields", "write_csv", "write_fields", "write_summary"]
