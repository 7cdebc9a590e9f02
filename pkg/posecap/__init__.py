"""Markerless multi-view 3D human pose toolkit."""
