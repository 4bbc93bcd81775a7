"""Rule-driven detection of third-party API usage violations in disassembly."""

__version__ = "0.1.0"
