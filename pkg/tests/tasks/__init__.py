# tests.tasks package
