"""Second-order tail asymptotics for subordinated heavy-tailed distributions."""

__version__ = "0.1.0"
