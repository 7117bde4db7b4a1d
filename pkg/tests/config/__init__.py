# tests.config package
