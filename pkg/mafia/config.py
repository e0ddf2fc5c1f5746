"""
Configuration module for the MAFIA toolchain
"""
import os

_DATA_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), 'data')


class Config:
    """Toolchain configuration from environment variables"""

    # Inputs
    TARGET_MODEL = os.environ.get('MAFIA_TARGET_MODEL') or os.path.join(_DATA_DIR, 'tofino_envelope.json')
    SCHEMA = os.environ.get('MAFIA_SCHEMA') or os.path.join(_DATA_DIR, 'default_schema.json')

    # Simulation
    RESET_CHUNK = int(os.environ.get('MAFIA_RESET_CHUNK', 64))  # cells per packet
    SINK_DIR = os.environ.get('MAFIA_SINK_DIR', 'sinks')

    # Compilation
    BUILD_DIR = os.environ.get('MAFIA_BUILD_DIR', 'build')

    # Logging
    LOG_LEVEL = os.environ.get('MAFIA_LOG_LEVEL', 'INFO').upper()

    # Corpus
    CORPUS_PACKETS = int(os.environ.get('MAFIA_CORPUS_PACKETS', 10000))
    CORPUS_SEEDS = [int(s) for s in os.environ.get('MAFIA_CORPUS_SEEDS', '1,2,3').split(',') if s.strip()]

    # HTTP API
    MAX_TRACE_RECORDS = int(os.environ.get('MAFIA_MAX_TRACE_RECORDS', 100000))
    CORS_ORIGINS = os.environ.get('MAFIA_CORS_ORIGINS', '*')
    JSON_SORT_KEYS = True
