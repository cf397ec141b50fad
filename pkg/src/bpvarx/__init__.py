"""Pooled and Bayesian panel VARX toolkit."""
