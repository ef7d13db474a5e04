"""Riemann-Liouville operators and Lie symmetries of fractional PDEs."""
