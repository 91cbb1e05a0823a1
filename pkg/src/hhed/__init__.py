"""Exact diagonalization of the half-filled Holstein-Hubbard model."""
