"""Adapted Wasserstein / total-variation bounds on finite path measures."""
