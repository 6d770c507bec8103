"""Unit tests for the flying hand simulator."""
