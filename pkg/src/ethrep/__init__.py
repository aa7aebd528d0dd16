"""Reputability classification of Ethereum accounts from transaction histories."""

__version__ = "0.1.0"
