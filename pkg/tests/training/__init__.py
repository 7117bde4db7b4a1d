# tests.training package
