"""Simulador de consenso proof-of-stake com rounds autoajustáveis (relógio, rede, partes, adversário e análise)."""

__all__ = [
    "clock",
    "network",
    "crypto",
    "chain",
    "rules",
    "party",
    "adversary",
    "analysis",
    "bounds",
    "config",
    "harness",
    "figures",
    "output_formats",
]
