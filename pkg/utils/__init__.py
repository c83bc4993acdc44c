"""Command-line support: configuration, logging, result files and signal handling."""
