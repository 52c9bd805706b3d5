"""Beliefs, equilibria and design metrics for all-pay contests with entry restriction."""
