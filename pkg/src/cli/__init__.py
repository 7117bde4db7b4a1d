from src.cli.commands import app

__all__ = ["app"]
