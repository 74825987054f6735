"""Desk-scale two-stage differentially private code synthesis.

Stage 1 trains a compact byte-level autoregressive model with DP-SGD plus a
structural KL regularizer; stage 2 generates snippets, filters them through
execution and round-trip validation, fine-tunes a larger model on the survivors
without DP, and audits utility and canary leakage.
"""

__version__ = "0.1.0"
