"""Tests for fcds_packing."""
