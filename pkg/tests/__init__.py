"""Tests for wbansim."""
