# tests.cli package
