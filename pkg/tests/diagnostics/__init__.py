# tests.diagnostics package
