"""vecsparse test suite."""
