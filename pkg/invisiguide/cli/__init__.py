"""
Command-line package: configuration, orchestration and file exports.
"""
