"""
Services shared by the command line and the HTTP API: trace generation,
compile/run helpers, exact oracles and the bundled corpus runner.
"""
