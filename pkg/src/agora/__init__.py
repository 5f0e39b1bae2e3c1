"""Multi-agent LLM debate engine: agents, paradigms, decision protocols, evaluation."""

__version__ = "0.1.0"
