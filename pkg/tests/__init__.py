"""Test suite for SAM3 Drawing Zone Segmenter."""
