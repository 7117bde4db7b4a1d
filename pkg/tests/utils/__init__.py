# tests.utils package
