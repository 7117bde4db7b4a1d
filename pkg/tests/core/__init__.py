# tests.core package
